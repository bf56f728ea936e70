// Lyapunov functions f_p(x) = u(p.x) with u(z) = z^rho / rho, the constants
// (Rbar, kappa_p, eta_p, eta_tilde_p), the discount threshold that makes f_p
// a Lyapunov function, and scaled classical strict supersolutions a f_p that
// certify the upper bound W <= a f_p.
#pragma once

#include "conehjb/cone.hpp"
#include "conehjb/common.hpp"
#include "conehjb/field.hpp"
#include "conehjb/levy.hpp"
#include "conehjb/utility.hpp"

#include <vector>

namespace conehjb {

struct LyapunovCertificate {
    Vec p;          // point of int K* defining f_p
    double rho;     // scalar utility exponent, u(z) = z^rho / rho

    double r_bar = 0.0;
    double kappa_p = 0.0;
    double eta_p = 0.0;
    double eta_tilde_p = 0.0;
    double beta_threshold = 0.0;        // eta_tilde Rbar + eta + max|mu| kappa
    double beta_threshold_tight = 0.0;  // pointwise-sup diagnostic (sharper)

    double scale = 1.0;   // a for supersolution use (a >= a0)
    bool verified = false;

    struct Report {
        double max_l0 = -kInf;     // max L0 f_p over the verification nodes
        double max_supersol = -kInf;  // max [a L0 f_p + U*(a f_p')] at scale
        Vec worst_node;
        bool sigma_ok = false;     // Sigma_G(f_p') < 0 at every node
        std::size_t nodes = 0;
        bool pass = false;
    };
    Report report;

    /// Fraction by which p clears the dual cone: min_g p.g over unit
    /// generators. The certificate requires at least kDualMargin.
    static constexpr double kDualMargin = 1e-6;
};

/// Rbar = sup_z -u'^2/(u'' u); for power u this is rho/(1-rho).
double r_bar(double rho);

/// kappa_p = sup_{x in int K} (u'(px)/u(px)) |p| |x|
///         = rho |p| / min_{x in K, |x|=1} p.x  for power u.
/// The minimum is found by dense angular scan (d = 2), exact evaluation
/// (d = 1) or multistart projected gradient descent (d >= 3), refined to
/// 1e-8. Throws DualMembership when p is not strictly in int K*.
double kappa_p(const ConeSpec& cone, const Vec& p, double rho);

/// eta_p = kappa * sum_{|z_j| > 1/kappa} lam_j |z_j|; zero when there are no
/// atoms or kappa == 0.
double eta_p(const LevyModel& model, double kappa);

/// eta_tilde_p = 0.5 sup_{x in int K} <mu(x),p>^2 / <A(x)p,p> over the set
/// where the denominator is nonzero (0 when it vanishes identically).
double eta_tilde_p(const LevyModel& model, const ConeSpec& cone, const Vec& p);

/// beta_threshold = eta_tilde Rbar + eta + max_i |mu_i| kappa.
double beta_threshold(double r_bar_val, double kappa, double eta, double eta_tilde,
                      const LevyModel& model);

/// Sharper diagnostic threshold: pointwise supremum over the spherical cap of
///   0.5 <mu(x),p>^2 / <A(x)p,p> Rbar          where <A(x)p,p> > 0,
///   rho <mu(x),p> / (p.x)                     where <A(x)p,p> = 0,
/// plus eta_p.
double beta_threshold_tight(const LevyModel& model, const ConeSpec& cone, const Vec& p,
                            double rho, double eta);

/// f_p = u(p.x) as an analytic ScalarField (sublinear growth since rho < 1).
ScalarField lyapunov_field(const Vec& p, double rho);

/// Computes all constants; scale/verification are filled in later.
LyapunovCertificate make_certificate(const ConeSpec& cone, const LevyModel& model,
                                     const Vec& p, double rho);

/// Evaluates L0 f_p (analytic derivatives) at every node; the report passes
/// iff max L0 <= 1e-8 and Sigma_G(f_p') < 0 at every node. Updates
/// cert.report; cert.verified is set to the pass flag.
LyapunovCertificate::Report verify_lyapunov(LyapunovCertificate& cert,
                                            const LevyModel& model, const ConeSpec& cone,
                                            double beta, const std::vector<Vec>& nodes,
                                            unsigned threads = 1);

/// Smallest a (1e-3 relative, factor-2 bracketing) such that
///   max over nodes of [a L0 f_p(x) + U*(a f_p'(x))] < -1e-10
/// and the trade branch stays strictly negative. Requires utility.gamma ==
/// cert.rho. Throws NoScaleFound when L0 f_p >= 0 somewhere on the grid.
double supersolution_scale(const LyapunovCertificate& cert, const LevyModel& model,
                           const ConeSpec& cone, const UtilitySpec& utility,
                           const std::vector<Vec>& nodes);

/// Verification nodes when no solver grid is at hand: a fan of rays and radii
/// spanning the truncated cone interior (d = 1 or 2; random interior samples
/// for d >= 3).
std::vector<Vec> certificate_nodes(const ConeSpec& cone, double r_max, int n_radial,
                                   int n_angular);

}  // namespace conehjb
