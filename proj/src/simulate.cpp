#include "conehjb/simulate.hpp"

#include "conehjb/rng.hpp"

#include <algorithm>
#include <cmath>

namespace conehjb {

Vec portfolio_step(const Vec& v, const Vec& dy_cont, const std::vector<Vec>& jump_marks,
                   const Vec& trade_impulse, double consumption_rate, double dt) {
    Vec out = v;
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) += v(i) * dy_cont(i);
    for (const Vec& z : jump_marks)
        for (Eigen::Index i = 0; i < v.size(); ++i) out(i) *= 1.0 + z(i);
    if (trade_impulse.size() == v.size()) out += trade_impulse;
    out(0) -= consumption_rate * dt;
    return out;
}

double detect_ruin(const std::vector<std::pair<double, Vec>>& trajectory,
                   const ConeSpec& cone, double tol) {
    for (const auto& [t, v] : trajectory)
        if (cone.min_facet_slack(v) <= tol) return t;
    return kInf;
}

namespace {

// Single-path simulator. All state lives in flat arrays; random numbers come
// from counter streams keyed by (seed, path, purpose, counter).
class PathSim {
public:
    PathSim(const LevyModel& model, const ConeSpec& cone, const UtilitySpec& utility,
            const Policy& policy, const Vec& x0, const SimOptions& opts,
            std::uint64_t path_index)
        : model_(model), cone_(cone), utility_(utility), policy_(policy), opts_(opts),
          rng_(opts.seed), d_(model.dim()) {
        if (d_ > 8) throw Unsupported("simulation supports d <= 8");
        v_ = x0;
        mu_eff_ = model.effective_drift();
        m_ = 0;
        for (Eigen::Index l = 0; l < model.xi.cols(); ++l)
            if (model.xi.col(l).norm() > 0.0) xi_cols_.push_back(model.xi.col(l)), ++m_;
        diff_stream_ = stream_id(path_index, kStreamDiffusion);

        // per-atom exponential jump clocks over the horizon
        for (std::size_t a = 0; a < model.jumps.size(); ++a) {
            double lam = model.jumps[a].lam;
            if (lam <= 0.0) continue;
            std::uint64_t stream = stream_id(path_index, kStreamJumpBase + a);
            double t = 0.0;
            std::uint64_t k = 0;
            while (true) {
                t += rng_.exponential(stream, k++) / lam;
                if (t > opts.horizon) break;
                jumps_.push_back({t, static_cast<int>(a)});
            }
        }
        std::sort(jumps_.begin(), jumps_.end(),
                  [](const JumpEvent& a, const JumpEvent& b) { return a.t < b.t; });

        disc_step_ = std::exp(-utility.beta * opts.dt);
        if (cone.min_facet_slack(v_) <= opts.ruin_tol) mark_ruin(0.0, false);

        // time-zero portfolio revision
        if (!ruined_) apply_policy(0.0);
    }

    // advances one grid step; returns false at the horizon or after ruin
    // (J and V are frozen from the ruin time on)
    bool advance() {
        if (ruined_ || t_ >= opts_.horizon - 1e-15) return false;
        double t_next = std::min(opts_.horizon, t_ + opts_.dt);
        double step = t_next - t_;

        // continuous increment
        double sq = std::sqrt(step);
        for (Eigen::Index i = 0; i < d_; ++i) dy_[i] = mu_eff_(i) * step;
        for (std::size_t l = 0; l < xi_cols_.size(); ++l) {
            double g = normal(step_idx_ * m_ + static_cast<std::uint64_t>(l));
            for (Eigen::Index i = 0; i < d_; ++i) dy_[i] += xi_cols_[l](i) * sq * g;
        }
        for (Eigen::Index i = 0; i < d_; ++i) v_(i) += v_(i) * dy_[i];
        if (cone_.min_facet_slack(v_) <= opts_.ruin_tol) {
            mark_ruin(t_next, false);
            t_ = t_next;
            ++step_idx_;
            return false;
        }

        // jumps at their exact times within the step
        while (next_jump_ < jumps_.size() && jumps_[next_jump_].t <= t_next) {
            const auto& ev = jumps_[next_jump_++];
            const Vec& z = model_.jumps[static_cast<std::size_t>(ev.atom)].z;
            for (Eigen::Index i = 0; i < d_; ++i) v_(i) *= 1.0 + z(i);
            if (cone_.min_facet_slack(v_) <= opts_.ruin_tol) {
                mark_ruin(ev.t, true);
                break;
            }
        }
        if (!ruined_) {
            apply_policy(t_next);
            // utility accrues on [t, t+dt) at the chosen rate
            j_ += disc_ * utility_.value(last_consumption_) * step;
            v_(0) -= last_consumption_ * step;
            if (cone_.min_facet_slack(v_) <= opts_.ruin_tol) mark_ruin(t_next, false);
        }
        disc_ *= step == opts_.dt ? disc_step_ : std::exp(-utility_.beta * step);
        t_ = t_next;
        ++step_idx_;
        return !ruined_ && t_ < opts_.horizon - 1e-15;
    }

    double t() const { return t_; }
    const Vec& v() const { return v_; }
    double j() const { return j_; }
    double theta() const { return theta_; }
    bool ruined() const { return ruined_; }
    bool ruined_by_jump() const { return ruined_by_jump_; }
    double discount() const { return disc_; }

private:
    struct JumpEvent { double t; int atom; };

    void mark_ruin(double t, bool by_jump) {
        ruined_ = true;
        theta_ = t;
        ruined_by_jump_ = by_jump;
    }

    void apply_policy(double t) {
        policy_.act(t, v_, action_);
        if (action_.has_trade) {
            if (opts_.validate_policy) {
                if (!cone_.contains(Vec(-action_.trade), 1e-9 * (1.0 + action_.trade.norm())))
                    throw PolicyViolation("trade impulse not in -K");
            }
            Vec next = v_ + action_.trade;
            if (cone_.min_facet_slack(next) <= opts_.ruin_tol)
                throw PolicyViolation("trade impulse leaves the interior of the cone");
            v_ = next;
        }
        if (action_.consumption < 0.0) throw PolicyViolation("negative consumption rate");
        last_consumption_ = action_.consumption;
    }

    // Box-Muller pairs; the sine half is cached for the next counter.
    double normal(std::uint64_t counter) {
        if (have_cached_ && counter == cached_counter_) {
            have_cached_ = false;
            return cached_value_;
        }
        std::uint64_t pair = counter / 2;
        double u1 = rng_.uniform(diff_stream_, 2 * pair);
        double u2 = rng_.uniform(diff_stream_, 2 * pair + 1);
        double rad = std::sqrt(-2.0 * std::log(u1));
        double c = std::cos(6.283185307179586 * u2);
        double s = std::sin(6.283185307179586 * u2);
        if ((counter & 1u) == 0u) {
            cached_value_ = rad * s;
            cached_counter_ = counter + 1;
            have_cached_ = true;
            return rad * c;
        }
        return rad * s;
    }

    const LevyModel& model_;
    const ConeSpec& cone_;
    const UtilitySpec& utility_;
    const Policy& policy_;
    SimOptions opts_;
    CounterRng rng_;
    Eigen::Index d_;

    Vec v_;
    Vec mu_eff_;
    std::vector<Vec> xi_cols_;
    std::uint64_t m_ = 0;
    std::uint64_t diff_stream_ = 0;
    std::vector<JumpEvent> jumps_;
    std::size_t next_jump_ = 0;

    double t_ = 0.0;
    std::uint64_t step_idx_ = 0;
    double j_ = 0.0;
    double disc_ = 1.0;
    double disc_step_ = 1.0;
    double theta_ = kInf;
    bool ruined_ = false;
    bool ruined_by_jump_ = false;
    double last_consumption_ = 0.0;
    Policy::Action action_;
    double dy_[8] = {0};

    bool have_cached_ = false;
    std::uint64_t cached_counter_ = 0;
    double cached_value_ = 0.0;
};

}  // namespace

EvalResult evaluate_policy(const LevyModel& model, const ConeSpec& cone,
                           const UtilitySpec& utility, const Policy& policy, const Vec& x0,
                           const SimOptions& opts, const LyapunovCertificate* certificate) {
    validate(model);
    if (model.dim() > 8) throw Unsupported("simulation supports d <= 8");
    if (!cone.contains_interior(x0, opts.ruin_tol))
        throw ConfigError("evaluate_policy requires x0 in int K");

    std::vector<double> js(opts.n_paths, 0.0);
    std::vector<double> tails(opts.n_paths, 0.0);
    std::vector<PathOutcome> outs(opts.keep_paths ? opts.n_paths : 0);
    std::vector<char> ruined(opts.n_paths, 0);

    ScalarField fp = certificate ? lyapunov_field(certificate->p, certificate->rho)
                                 : ScalarField::numeric([](const Vec&) { return 0.0; }, true);
    double scale = certificate ? certificate->scale : 0.0;

    parallel_for(opts.n_paths, [&](std::size_t pi) {
        PathSim sim(model, cone, utility, policy, x0, opts, pi);
        while (sim.advance()) {
        }
        js[pi] = sim.j();
        ruined[pi] = sim.ruined() ? 1 : 0;
        if (certificate && !sim.ruined())
            tails[pi] = sim.discount() * scale * fp.value(sim.v());
        if (opts.keep_paths) {
            PathOutcome& o = outs[pi];
            o.theta = sim.theta();
            o.j = sim.j();
            o.ruined = sim.ruined();
            o.ruined_by_jump = sim.ruined_by_jump();
            o.v1 = sim.v()(0);
            o.v2 = sim.v()(1);
        }
    }, opts.threads);

    EvalResult r;
    MeanStd ms = mean_std(js);
    r.mean = ms.mean;
    r.ci99 = ms.n > 1 ? 2.5758293035489004 * ms.stddev / std::sqrt(static_cast<double>(ms.n))
                      : 0.0;
    r.n = opts.n_paths;
    std::size_t nr = 0;
    for (char c : ruined) nr += c != 0;
    r.ruin_fraction = opts.n_paths ? static_cast<double>(nr) / opts.n_paths : 0.0;
    if (certificate) r.tail_bound = mean_std(tails).mean;
    r.paths = std::move(outs);
    return r;
}

DppResult dpp_residual(const ValueField& field, const LevyModel& model,
                       const ConeSpec& cone, const UtilitySpec& utility,
                       const Policy& policy, const Vec& x0, const TauRule& tau,
                       const SimOptions& opts) {
    if (!cone.contains_interior(x0, opts.ruin_tol))
        throw ConfigError("dpp_residual requires x0 in int K");
    if (!std::isfinite(tau.t_max) && !std::isfinite(tau.ball_radius))
        throw ConfigError("dpp_residual needs a bounded stopping rule");

    double w_x = field.value(x0);
    double t_stop = std::min(tau.t_max, opts.horizon);
    std::vector<double> vals(opts.n_paths, 0.0);

    parallel_for(opts.n_paths, [&](std::size_t pi) {
        SimOptions o = opts;
        o.horizon = t_stop;
        PathSim sim(model, cone, utility, policy, x0, o, pi);
        // tau = 0: no stepping at all
        double val;
        if (t_stop <= 0.0) {
            val = w_x;
        } else {
            bool exited = false;
            double j_at_tau = 0.0, disc_at_tau = 1.0;
            Vec v_at_tau = x0;
            while (true) {
                bool more = sim.advance();
                if (sim.ruined()) break;
                if (std::isfinite(tau.ball_radius) &&
                    (sim.v() - x0).norm() >= tau.ball_radius) {
                    exited = true;
                    j_at_tau = sim.j();
                    disc_at_tau = sim.discount();
                    v_at_tau = sim.v();
                    break;
                }
                if (!more) {
                    exited = true;  // deterministic time reached
                    j_at_tau = sim.j();
                    disc_at_tau = sim.discount();
                    v_at_tau = sim.v();
                    break;
                }
            }
            if (exited) {
                val = j_at_tau + disc_at_tau * field.value(v_at_tau);
            } else {
                val = sim.j();  // ruined before tau: no continuation value
            }
        }
        vals[pi] = val;
    }, opts.threads);

    DppResult r;
    MeanStd ms = mean_std(vals);
    r.residual = ms.mean - w_x;
    r.ci99 = ms.n > 1 ? 2.5758293035489004 * ms.stddev / std::sqrt(static_cast<double>(ms.n))
                      : 0.0;
    r.w_x = w_x;
    return r;
}

SupermartingaleSeries sample_certificate_process(const LyapunovCertificate& certificate,
                                                 const LevyModel& model,
                                                 const ConeSpec& cone,
                                                 const UtilitySpec& utility,
                                                 const Policy& policy, const Vec& x0,
                                                 const std::vector<double>& sample_times,
                                                 const SimOptions& opts) {
    if (sample_times.empty()) throw ConfigError("no sample times given");
    ScalarField fp = lyapunov_field(certificate.p, certificate.rho);
    double a = certificate.scale;

    std::size_t m = sample_times.size();
    std::vector<std::vector<double>> xs(m, std::vector<double>(opts.n_paths, 0.0));

    parallel_for(opts.n_paths, [&](std::size_t pi) {
        SimOptions o = opts;
        o.horizon = sample_times.back();
        PathSim sim(model, cone, utility, policy, x0, o, pi);
        std::size_t next = 0;
        auto record = [&]() {
            while (next < m && sim.t() >= sample_times[next] - 1e-12) {
                double x = sim.j();
                if (!sim.ruined()) x += sim.discount() * a * fp.value(sim.v());
                xs[next][pi] = x;
                ++next;
            }
        };
        record();
        while (sim.advance()) record();
        record();
        // fill any remaining samples with the terminal state
        while (next < m) {
            double x = sim.j();
            if (!sim.ruined()) x += sim.discount() * a * fp.value(sim.v());
            xs[next][pi] = x;
            ++next;
        }
    }, opts.threads);

    SupermartingaleSeries s;
    s.times = sample_times;
    for (std::size_t k = 0; k < m; ++k) s.mean_x.push_back(mean_std(xs[k]).mean);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        std::vector<double> diffs(opts.n_paths);
        for (std::size_t pi = 0; pi < opts.n_paths; ++pi)
            diffs[pi] = xs[k + 1][pi] - xs[k][pi];
        MeanStd ms = mean_std(diffs);
        s.diff_mean.push_back(ms.mean);
        s.diff_ci99.push_back(2.5758293035489004 * ms.stddev /
                              std::sqrt(static_cast<double>(std::max<std::size_t>(ms.n, 2))));
    }
    return s;
}

}  // namespace conehjb
