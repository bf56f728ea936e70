// The nonlocal HJB operator on the solvency cone:
//   F  = max{ F0 + U*(p), Sigma_G(p) },
//   F0 = 0.5 tr A(x) X + mu(x).p + I(f, x) - beta W,
// with the jump integral I(f, x) evaluated as an exact sum over the atoms of
// the jump measure.
#pragma once

#include "conehjb/cone.hpp"
#include "conehjb/common.hpp"
#include "conehjb/field.hpp"
#include "conehjb/levy.hpp"
#include "conehjb/utility.hpp"

#include <iosfwd>

namespace conehjb {

/// Nonlocal integral
///   I(f, x) = sum_j lam_j [ (f(x + D_x z_j) 1_{int K}(x + D_x z_j) - f(x))
///                           - (D_x z_j) . f'(x) ].
/// Requires the sublinear-growth flag on f (GrowthViolation otherwise) and
/// x in int K. interior_tol is the slack below which a jump destination
/// counts as outside the open cone.
double nonlocal_I(const ScalarField& f, const Vec& x, const LevyModel& model,
                  const ConeSpec& cone, double interior_tol = 1e-12);

/// F0 evaluated on raw arguments: X symmetric (Hessian candidate), p gradient
/// candidate, i_val the precomputed nonlocal integral, w_val the field value.
double F0(const Mat& X, const Vec& p, double i_val, double w_val, const Vec& x,
          const LevyModel& model, double beta);

enum class Branch { Hold, Trade };

struct OperatorEval {
    double value;        // max of the two branches
    Branch active;       // which branch attains the max
    double hold_value;   // F0 + U*(p) (may be +inf when p1 <= 0)
    double sigma_g;      // Sigma_G(p)
    double i_val;        // nonlocal integral used
    Vec gradient;        // p used
};

/// Full operator L f(x) = max{F0(f''(x), f'(x), I(f,x), f(x), x) + U*(f'(x)),
/// Sigma_G(f'(x))}. Derivatives come from the field (analytic or FD).
OperatorEval L(const ScalarField& f, const Vec& x, const LevyModel& model,
               const ConeSpec& cone, const UtilitySpec& utility);

/// Truncated operator L0 (no U* term); the Lyapunov-function inequality
/// L0 f <= 0 is checked against this.
double L0(const ScalarField& f, const Vec& x, const LevyModel& model,
          const ConeSpec& cone, double beta);

/// CSV trace: x, active branch, F0+U*, Sigma_G for each point.
void dump_operator_trace(std::ostream& os, const ScalarField& f,
                         const std::vector<Vec>& points, const LevyModel& model,
                         const ConeSpec& cone, const UtilitySpec& utility);

}  // namespace conehjb
