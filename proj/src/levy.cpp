#include "conehjb/levy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace conehjb {

Mat LevyModel::a_matrix() const { return xi * xi.transpose(); }

double LevyModel::total_intensity() const {
    double s = 0.0;
    for (const auto& j : jumps) s += j.lam;
    return s;
}

Vec LevyModel::jump_compensator() const {
    Vec s = Vec::Zero(dim());
    for (const auto& j : jumps) s += j.lam * j.z;
    return s;
}

Vec LevyModel::effective_drift() const { return mu - jump_compensator(); }

double LevyModel::jump_integrability() const {
    double s = 0.0;
    for (const auto& j : jumps) {
        double n = j.z.norm();
        s += j.lam * std::min(n * n, n);
    }
    return s;
}

void validate(const LevyModel& model) {
    Eigen::Index d = model.dim();
    if (model.xi.rows() != d)
        throw ConfigError("xi row count must match drift dimension");
    for (const auto& atom : model.jumps) {
        if (atom.z.size() != d) throw ConfigError("jump atom dimension mismatch");
        if (atom.lam < 0.0) throw NegativeIntensity("jump intensity must be nonnegative");
        for (Eigen::Index i = 0; i < d; ++i)
            if (atom.z(i) <= -1.0)
                throw SupportViolation("jump atom outside (-1, inf)^d");
    }
    if (!std::isfinite(model.jump_integrability()))
        throw ConfigError("jump measure integrability failed");
}

std::vector<std::string> validate(const LevyModel& model, const ConeSpec& cone,
                                  double boundary_tol) {
    validate(model);
    std::vector<std::string> warnings;
    if (cone.dim() != model.dim()) throw ConfigError("cone/model dimension mismatch");

    // Canonical test points: interior direction and the generator midpoints,
    // each slightly inside.
    std::vector<Vec> probes;
    probes.push_back(cone.interior_direction());
    Vec c = cone.interior_direction();
    for (const Vec& g : cone.generators()) probes.push_back((g + c).normalized());

    for (std::size_t a = 0; a < model.jumps.size(); ++a) {
        const auto& atom = model.jumps[a];
        if (atom.lam == 0.0) continue;
        for (const Vec& x : probes) {
            Vec y = x;
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) *= 1.0 + atom.z(i);
            if (std::abs(cone.min_facet_slack(y)) <= boundary_tol) {
                warnings.push_back("atom " + std::to_string(a) +
                                   " maps a canonical test point onto the cone boundary "
                                   "(uniqueness hypothesis at risk)");
                break;
            }
        }
    }
    return warnings;
}

std::vector<Vec> accumulate_y(const PathY& path, const LevyModel& model) {
    std::vector<Vec> out;
    out.reserve(path.events.size());
    Vec y = Vec::Zero(path.dim);
    for (const auto& ev : path.events) {
        y += ev.dy_cont;
        if (ev.jump_atom >= 0) y += model.jumps[static_cast<std::size_t>(ev.jump_atom)].z;
        out.push_back(y);
    }
    return out;
}

PathY simulate_path(const LevyModel& model, double horizon, double dt,
                    std::uint64_t seed, std::uint64_t path_index) {
    if (dt <= 0.0 || horizon <= 0.0) throw ConfigError("simulate_path requires dt > 0, T > 0");
    validate(model);

    CounterRng rng(seed);
    Eigen::Index d = model.dim();
    Eigen::Index m = model.xi.cols();
    Vec drift = model.effective_drift();

    // Sample per-atom jump times over [0, horizon].
    struct JumpEvent { double t; int atom; };
    std::vector<JumpEvent> jump_times;
    for (std::size_t a = 0; a < model.jumps.size(); ++a) {
        double lam = model.jumps[a].lam;
        if (lam <= 0.0) continue;
        std::uint64_t stream = stream_id(path_index, kStreamJumpBase + a);
        double t = 0.0;
        std::uint64_t k = 0;
        while (true) {
            t += rng.exponential(stream, k++) / lam;
            if (t > horizon) break;
            jump_times.push_back({t, static_cast<int>(a)});
        }
    }
    std::sort(jump_times.begin(), jump_times.end(),
              [](const JumpEvent& a, const JumpEvent& b) { return a.t < b.t; });

    PathY path;
    path.dim = d;
    path.horizon = horizon;
    path.dt = dt;

    std::uint64_t diff_stream = stream_id(path_index, kStreamDiffusion);
    std::uint64_t draw = 0;
    std::size_t next_jump = 0;

    auto n_steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-12));
    double t = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        double t_next = std::min(horizon, (static_cast<double>(k) + 1.0) * dt);
        double step = t_next - t;

        // One Gaussian vector per grid step; jumps inside the step split the
        // continuous increment proportionally in time.
        Vec gauss = Vec::Zero(d);
        for (Eigen::Index l = 0; l < m; ++l) {
            double xi_l = rng.normal(diff_stream, draw++);
            gauss += model.xi.col(l) * xi_l;
        }
        Vec dy_full = drift * step + std::sqrt(step) * gauss;

        double t_slice = t;
        while (next_jump < jump_times.size() && jump_times[next_jump].t <= t_next) {
            double tj = jump_times[next_jump].t;
            PathY::Event ev;
            ev.t_begin = t_slice;
            ev.t_end = tj;
            ev.dy_cont = dy_full * ((tj - t_slice) / step);
            ev.jump_atom = jump_times[next_jump].atom;
            path.events.push_back(std::move(ev));
            t_slice = tj;
            ++next_jump;
        }
        PathY::Event tail;
        tail.t_begin = t_slice;
        tail.t_end = t_next;
        tail.dy_cont = dy_full * ((t_next - t_slice) / step);
        tail.jump_atom = -1;
        path.events.push_back(std::move(tail));
        t = t_next;
    }
    return path;
}

std::vector<double> stochastic_exponential(const PathY& path, const LevyModel& model,
                                           Eigen::Index asset) {
    if (asset < 0 || asset >= path.dim) throw ConfigError("asset index out of range");
    Mat A = model.a_matrix();
    double a_ii = A(asset, asset);

    std::vector<double> s;
    s.reserve(path.events.size());
    double log_cont = 0.0;  // accumulated continuous log: Y^{ic} - 0.5 A^{ii} t
    double jump_factor = 1.0;
    for (const auto& ev : path.events) {
        log_cont += ev.dy_cont(asset) - 0.5 * a_ii * (ev.t_end - ev.t_begin);
        if (ev.jump_atom >= 0) {
            double f = 1.0 + model.jumps[static_cast<std::size_t>(ev.jump_atom)].z(asset);
            if (f <= 0.0) throw NonpositivePrice("jump factor 1 + dY <= 0");
            jump_factor *= f;
        }
        s.push_back(std::exp(log_cont) * jump_factor);
    }
    return s;
}

void export_path_csv(std::ostream& os, const PathY& path, const LevyModel& model) {
    Eigen::Index d = path.dim;
    os << "t";
    for (Eigen::Index i = 0; i < d; ++i) os << ",Y" << (i + 1);
    for (Eigen::Index i = 0; i < d; ++i) os << ",S" << (i + 1);
    os << "\n";

    std::vector<std::vector<double>> s(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i)
        s[static_cast<std::size_t>(i)] = stochastic_exponential(path, model, i);

    char buf[64];
    Vec y = Vec::Zero(d);
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
    };
    for (std::size_t k = 0; k < path.events.size(); ++k) {
        const auto& ev = path.events[k];
        y += ev.dy_cont;
        if (ev.jump_atom >= 0) y += model.jumps[static_cast<std::size_t>(ev.jump_atom)].z;
        std::snprintf(buf, sizeof buf, "%.17g", ev.t_end);
        os << buf;
        for (Eigen::Index i = 0; i < d; ++i) put(y(i));
        for (Eigen::Index i = 0; i < d; ++i) put(s[static_cast<std::size_t>(i)][k]);
        os << "\n";
    }
}

}  // namespace conehjb
