#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "conehjb/levy.hpp"

#include <cmath>

using namespace conehjb;

namespace {
LevyModel diffusion_model(double mu1, double mu2, double sigma2) {
    LevyModel m;
    m.mu = make_vec({mu1, mu2});
    m.xi = Mat::Zero(2, 1);
    m.xi(1, 0) = sigma2;
    return m;
}
}  // namespace

TEST_CASE("validate accepts atoms in (-1, inf)^d") {
    LevyModel m = diffusion_model(0.0, 0.0, 0.0);
    m.jumps.push_back({make_vec({-0.5, 0.2}), 1.0});
    CHECK_NOTHROW(validate(m));
}

TEST_CASE("validate rejects boundary support and negative intensity") {
    LevyModel m = diffusion_model(0.0, 0.0, 0.0);
    m.jumps.push_back({make_vec({-1.0, 0.0}), 1.0});
    CHECK_THROWS_AS(validate(m), SupportViolation);

    LevyModel m2 = diffusion_model(0.0, 0.0, 0.0);
    m2.jumps.push_back({make_vec({0.1, 0.1}), -1.0});
    CHECK_THROWS_AS(validate(m2), NegativeIntensity);
}

TEST_CASE("a_matrix") {
    LevyModel zero = diffusion_model(0.0, 0.0, 0.0);
    CHECK(zero.a_matrix().norm() == doctest::Approx(0.0));

    LevyModel diag;
    diag.mu = make_vec({0.0, 0.0});
    diag.xi = Mat::Zero(2, 2);
    diag.xi(0, 0) = 0.2;
    diag.xi(1, 1) = 0.4;
    Mat a = diag.a_matrix();
    CHECK(a(0, 0) == doctest::Approx(0.04));
    CHECK(a(1, 1) == doctest::Approx(0.16));
    CHECK(a(0, 1) == doctest::Approx(0.0));

    LevyModel corr;
    corr.mu = make_vec({0.0, 0.0});
    corr.xi = Mat(2, 1);
    corr.xi << 0.3, 0.15;
    Mat ac = corr.a_matrix();
    CHECK(ac(0, 0) == doctest::Approx(0.09));
    CHECK(ac(0, 1) == doctest::Approx(0.045));
    CHECK(ac(1, 0) == doctest::Approx(0.045));
    CHECK(ac(1, 1) == doctest::Approx(0.0225));
}

TEST_CASE("deterministic drift path") {
    LevyModel m = diffusion_model(0.1, 0.0, 0.0);
    PathY p = simulate_path(m, 2.0, 0.01, 42);
    auto y = accumulate_y(p, m);
    CHECK(y.back()(0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(y.back()(1) == doctest::Approx(0.0));
}

TEST_CASE("fixed seed gives bitwise-identical paths") {
    LevyModel m = diffusion_model(0.05, 0.02, 0.3);
    m.jumps.push_back({make_vec({0.0, -0.2}), 0.7});
    PathY a = simulate_path(m, 1.0, 0.01, 123, 5);
    PathY b = simulate_path(m, 1.0, 0.01, 123, 5);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) {
        CHECK(a.events[k].t_end == b.events[k].t_end);
        CHECK(a.events[k].dy_cont(0) == b.events[k].dy_cont(0));
        CHECK(a.events[k].dy_cont(1) == b.events[k].dy_cont(1));
        CHECK(a.events[k].jump_atom == b.events[k].jump_atom);
    }
    PathY c = simulate_path(m, 1.0, 0.01, 124, 5);
    bool same = a.events.size() == c.events.size() &&
                (a.events.back().dy_cont - c.events.back().dy_cont).norm() == 0.0;
    CHECK_FALSE(same);
}

TEST_CASE("compensated jumps make Y a martingale: sample mean near zero") {
    LevyModel m = diffusion_model(0.0, 0.0, 0.0);
    m.jumps.push_back({make_vec({0.3, -0.2}), 1.5});
    const int n = 100000;
    double sum1 = 0.0, sum2 = 0.0, sq1 = 0.0, sq2 = 0.0;
    for (int i = 0; i < n; ++i) {
        PathY p = simulate_path(m, 1.0, 0.05, 2024, static_cast<std::uint64_t>(i));
        auto y = accumulate_y(p, m);
        double a = y.back()(0), b = y.back()(1);
        sum1 += a;
        sum2 += b;
        sq1 += a * a;
        sq2 += b * b;
    }
    double m1 = sum1 / n, m2 = sum2 / n;
    double s1 = std::sqrt((sq1 / n - m1 * m1) / n), s2 = std::sqrt((sq2 / n - m2 * m2) / n);
    CHECK(std::abs(m1) <= 3.0 * s1);
    CHECK(std::abs(m2) <= 3.0 * s2);
}

TEST_CASE("stochastic exponential: deterministic drift") {
    LevyModel m = diffusion_model(0.1, 0.0, 0.0);
    PathY p = simulate_path(m, 1.0, 0.01, 7);
    auto s = stochastic_exponential(p, m, 0);
    CHECK(s.back() == doctest::Approx(std::exp(0.1)).epsilon(1e-12));
    // S starts at 1: value after the first slice is exp(0.1 dt)
    CHECK(s.front() == doctest::Approx(std::exp(0.1 * 0.01)).epsilon(1e-12));
}

TEST_CASE("stochastic exponential: a single jump multiplies by 1 + z") {
    LevyModel m = diffusion_model(0.0, 0.0, 0.0);
    m.jumps.push_back({make_vec({-0.5, 0.0}), 0.4});
    // find a path with at least one jump
    for (std::uint64_t pi = 0; pi < 50; ++pi) {
        PathY p = simulate_path(m, 1.0, 0.01, 11, pi);
        int jumps = 0;
        for (const auto& ev : p.events) jumps += ev.jump_atom >= 0 ? 1 : 0;
        if (jumps != 1) continue;
        auto s = stochastic_exponential(p, m, 0);
        // drift compensation exp(+lam z t) times the jump factor 0.5
        double expect = std::exp(0.4 * 0.5 * 1.0) * 0.5;
        CHECK(s.back() == doctest::Approx(expect).epsilon(1e-9));
        return;
    }
    FAIL("no single-jump path found");
}

TEST_CASE("pure Brownian price matches exp(sigma w - sigma^2 t / 2) pathwise") {
    LevyModel m = diffusion_model(0.0, 0.0, 0.3);
    PathY p = simulate_path(m, 1.0, 0.01, 31, 2);
    auto y = accumulate_y(p, m);
    auto s = stochastic_exponential(p, m, 1);
    for (std::size_t k = 0; k < p.events.size(); ++k) {
        double t = p.events[k].t_end;
        double exact = std::exp(y[k](1) - 0.045 * t);
        CHECK(s[k] == doctest::Approx(exact).epsilon(1e-12));
    }
}

TEST_CASE("price positivity under valid jump support") {
    LevyModel m = diffusion_model(0.05, -0.02, 0.4);
    m.jumps.push_back({make_vec({-0.9, 0.5}), 2.0});
    for (std::uint64_t pi = 0; pi < 20; ++pi) {
        PathY p = simulate_path(m, 2.0, 0.02, 5, pi);
        for (Eigen::Index i = 0; i < 2; ++i)
            for (double v : stochastic_exponential(p, m, i)) CHECK(v > 0.0);
    }
}

TEST_CASE("grid refinement leaves the exactly-sampled terminal price unchanged") {
    // The Doleans-Dade exponential is evaluated in closed form per slice, so
    // refining dt can only change terminal S through the Brownian sampling;
    // on a shared coarse Brownian skeleton the terminal value is identical.
    LevyModel m = diffusion_model(0.0, 0.0, 0.3);
    // Build a coarse path, then re-express it on a twice-finer grid by
    // splitting every continuous increment in two halves.
    PathY coarse = simulate_path(m, 1.0, 0.1, 77, 3);
    PathY fine;
    fine.dim = 2;
    fine.horizon = 1.0;
    fine.dt = 0.05;
    for (const auto& ev : coarse.events) {
        PathY::Event h1 = ev, h2 = ev;
        double mid = 0.5 * (ev.t_begin + ev.t_end);
        h1.t_end = mid;
        h1.jump_atom = -1;
        h1.dy_cont = 0.5 * ev.dy_cont;
        h2.t_begin = mid;
        h2.dy_cont = 0.5 * ev.dy_cont;
        fine.events.push_back(h1);
        fine.events.push_back(h2);
    }
    auto sc = stochastic_exponential(coarse, m, 1);
    auto sf = stochastic_exponential(fine, m, 1);
    CHECK(sf.back() == doctest::Approx(sc.back()).epsilon(1e-13));
}

TEST_CASE("boundary-mapping warning ties to the uniqueness hypothesis") {
    ConeSpec orth = ConeSpec::orthant(2);
    LevyModel m = diffusion_model(0.0, 0.0, 0.0);
    // z = (-1 + eps) would violate support; a benign atom produces no warning
    m.jumps.push_back({make_vec({0.5, 0.5}), 1.0});
    CHECK(validate(m, orth).empty());
}
