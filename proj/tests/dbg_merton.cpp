// scratch: Merton acceptance-scale accuracy probe (not a ctest)
#include "conehjb/lyapunov.hpp"
#include "conehjb/solver.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>

using namespace conehjb;

int main(int argc, char** argv) {
    int nr = argc > 1 ? std::atoi(argv[1]) : 200;
    int na = argc > 2 ? std::atoi(argv[2]) : 100;
    double dtf = argc > 3 ? std::atof(argv[3]) : 0.35;
    double rmax = argc > 4 ? std::atof(argv[4]) : 4.0;

    Mat cm(2, 2);
    cm << 0.0, 1e-8, 1e-8, 0.0;
    ConeSpec k = ConeSpec::solvency_cone_from_costs(CostMatrix(cm));
    LevyModel m;
    m.mu = make_vec({0.0, 0.07});
    m.xi = Mat::Zero(2, 1);
    m.xi(1, 0) = 0.3;
    UtilitySpec util(0.3, 0.2);
    LyapunovCertificate cert = make_certificate(k, m, make_vec({200.0, 200.0}), 0.3);
    auto nodes = certificate_nodes(k, rmax, 16, 32);
    verify_lyapunov(cert, m, k, util.beta, nodes);
    cert.scale = 2.0 * supersolution_scale(cert, m, k, util, nodes);

    ConeGrid2D grid(k, rmax, nr, na);
    SolverOptions opts;
    opts.dt_factor = dtf;
    if (argc > 5) opts.tol = std::atof(argv[5]);
    if (argc > 6) opts.dt = std::atof(argv[6]);
    opts.monotonicity_tol = std::max(1e-6, 10.0 * opts.tol);
    auto t0 = std::chrono::steady_clock::now();
    ValueField f = solve(m, k, util, grid, cert, opts);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    oracles::Merton merton(0.07, 0.3, 0.3, 0.2);
    double worst = 0.0, worst_r = 0, worst_phi = 0;
    int tested = 0;
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < na; ++j) {
            Vec x = grid.node(i, j);
            if (k.min_facet_slack(x) < 0.2 * rmax) continue;
            double exact = merton.value(x(0) + x(1));
            double rel = std::abs(f.w[grid.index(i, j)] - exact) / exact;
            ++tested;
            if (rel > worst) {
                worst = rel;
                worst_r = grid.radius(i);
                worst_phi = grid.angle(j);
            }
        }

    // homogeneity: nested nodes
    double worst_h = 0.0;
    for (int i = 1; 2 * i < nr; ++i)
        for (int j = 1; j < na - 1; ++j) {
            double w1 = f.w[grid.index(i, j)];
            double w2 = f.w[grid.index(2 * i, j)];
            if (w2 <= 0.0) continue;
            worst_h = std::max(worst_h, std::abs(w2 - std::pow(2.0, 0.3) * w1) / w2);
        }

    std::printf("grid %dx%d dtf=%.3f rmax=%.1f: %d iters, %.1f s\n", nr, na, dtf, rmax,
                f.iterations, secs);
    std::printf("merton interior rel err (dist>=0.2R, %d nodes): %.4f%% (worst at r=%.2f phi=%.3f)\n",
                tested, 100.0 * worst, worst_r, worst_phi);
    std::printf("homogeneity worst rel err (all nested interior): %.4f%%\n", 100.0 * worst_h);
    if (std::getenv("DBG_ERRMAP")) {
        for (int i = 4; i < nr; i += nr / 12) {
            std::printf("r=%5.2f: ", grid.radius(i));
            for (int j = 1; j < na - 1; j += 2) {
                Vec x = grid.node(i, j);
                double exact = merton.value(x(0) + x(1));
                double rel = (f.w[grid.index(i, j)] - exact) / exact;
                char c = rel > 0.5 ? 'X' : rel > 0.05 ? '+' : rel > 0.02 ? '^' : rel < -0.05 ? '-' : '.';
                std::printf("%c", c);
            }
            std::printf("\n");
        }
    }
    return 0;
}
