// Controlled-portfolio Monte Carlo: Euler stepping of V under a feedback
// policy, ruin detection, goal-functional estimates (lower bounds on W),
// DPP residuals and supermartingale certificate sampling.
#pragma once

#include "conehjb/cone.hpp"
#include "conehjb/common.hpp"
#include "conehjb/levy.hpp"
#include "conehjb/lyapunov.hpp"
#include "conehjb/policy.hpp"
#include "conehjb/solver.hpp"
#include "conehjb/utility.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace conehjb {

/// One Euler step of the controlled dynamics: continuous part
/// V += D_V dY_cont, then each jump multiplicatively V^i *= (1 + z^i), then
/// the trade impulse, then consumption c dt from the cash asset. Exit from
/// the cone is a state, not an error.
Vec portfolio_step(const Vec& v, const Vec& dy_cont, const std::vector<Vec>& jump_marks,
                   const Vec& trade_impulse, double consumption_rate, double dt);

/// First time along the sampled trajectory with boundary distance <= tol;
/// +inf when the trajectory stays strictly solvent.
double detect_ruin(const std::vector<std::pair<double, Vec>>& trajectory,
                   const ConeSpec& cone, double tol = 1e-9);

struct SimOptions {
    double horizon = 10.0;
    double dt = 1e-3;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    double ruin_tol = 1e-9;
    unsigned threads = 1;
    bool validate_policy = true;   // cone checks on policy outputs
    bool keep_paths = false;       // retain per-path outcomes
};

struct PathOutcome {
    double theta = kInf;       // ruin time (+inf sentinel)
    double j = 0.0;            // discounted utility up to horizon ^ ruin
    bool ruined = false;
    bool ruined_by_jump = false;
    double v1 = 0.0, v2 = 0.0; // terminal position (stopped at ruin)
};

struct EvalResult {
    double mean = 0.0;
    double ci99 = 0.0;          // 99% half width, 2.576 s / sqrt(n)
    std::size_t n = 0;
    double ruin_fraction = 0.0;
    double tail_bound = 0.0;    // MC mean of e^{-beta T} a f_p(V_T) 1_{T<theta}
    std::vector<PathOutcome> paths;  // filled when keep_paths
};

/// Unbiased estimate of E J^pi_{T ^ theta}; with U >= 0 a lower-bound
/// estimate of E J^pi_inf up to the reported truncation tail. The optional
/// certificate prices the tail e^{-beta T} a f_p(V_T).
EvalResult evaluate_policy(const LevyModel& model, const ConeSpec& cone,
                           const UtilitySpec& utility, const Policy& policy, const Vec& x0,
                           const SimOptions& opts,
                           const LyapunovCertificate* certificate = nullptr);

/// Stopping rule for DPP residuals: tau = t_max ^ (first exit from the ball
/// |V - x0| >= ball_radius), both optional.
struct TauRule {
    double t_max = kInf;
    double ball_radius = kInf;
};

struct DppResult {
    double residual = 0.0;   // E(J_tau + e^{-beta tau} W(V_tau) 1_{tau<theta}) - W(x)
    double ci99 = 0.0;
    double w_x = 0.0;
};

DppResult dpp_residual(const ValueField& field, const LevyModel& model,
                       const ConeSpec& cone, const UtilitySpec& utility,
                       const Policy& policy, const Vec& x0, const TauRule& tau,
                       const SimOptions& opts);

/// Sample means of X^f_t = e^{-beta t} a f_p(V_t) 1_{t<theta} + J_t on a
/// fixed time grid, with CIs of the consecutive differences (the
/// supermartingale property makes those nonpositive in expectation).
struct SupermartingaleSeries {
    std::vector<double> times;
    std::vector<double> mean_x;
    std::vector<double> diff_mean;  // mean(X_{k+1} - X_k)
    std::vector<double> diff_ci99;
};

SupermartingaleSeries sample_certificate_process(const LyapunovCertificate& certificate,
                                                 const LevyModel& model,
                                                 const ConeSpec& cone,
                                                 const UtilitySpec& utility,
                                                 const Policy& policy, const Vec& x0,
                                                 const std::vector<double>& sample_times,
                                                 const SimOptions& opts);

}  // namespace conehjb
