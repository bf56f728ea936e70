#include "conehjb/hjb.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace conehjb {

double nonlocal_I(const ScalarField& f, const Vec& x, const LevyModel& model,
                  const ConeSpec& cone, double interior_tol) {
    if (!f.sublinear_growth())
        throw GrowthViolation("nonlocal_I requires a field of sublinear growth");
    if (model.jumps.empty()) return 0.0;

    double fx = f.value(x);
    Vec grad = f.gradient(x, &cone);
    double acc = 0.0;
    Vec y(x.size());
    for (const auto& atom : model.jumps) {
        if (atom.lam == 0.0) continue;
        for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = x(i) * (1.0 + atom.z(i));
        double fy = cone.contains_interior(y, interior_tol) ? f.value(y) : 0.0;
        double linear = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) linear += x(i) * atom.z(i) * grad(i);
        acc += atom.lam * ((fy - fx) - linear);
    }
    return acc;
}

double F0(const Mat& X, const Vec& p, double i_val, double w_val, const Vec& x,
          const LevyModel& model, double beta) {
    Mat a = model.a_matrix();
    Eigen::Index d = x.size();
    double diff = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            diff += a(i, j) * x(i) * x(j) * X(i, j);
    double drift = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) drift += model.mu(i) * x(i) * p(i);
    return 0.5 * diff + drift + i_val - beta * w_val;
}

OperatorEval L(const ScalarField& f, const Vec& x, const LevyModel& model,
               const ConeSpec& cone, const UtilitySpec& utility) {
    OperatorEval ev;
    ev.gradient = f.gradient(x, &cone);
    ev.i_val = nonlocal_I(f, x, model, cone);
    double f0 = F0(f.hessian(x, &cone), ev.gradient, ev.i_val, f.value(x), x, model,
                   utility.beta);
    FenchelDual dual = fenchel_dual(utility, ev.gradient);
    ev.hold_value = dual.finite ? f0 + dual.value : kInf;
    ev.sigma_g = cone.sigma_G(ev.gradient);
    if (ev.hold_value >= ev.sigma_g) {
        ev.value = ev.hold_value;
        ev.active = Branch::Hold;
    } else {
        ev.value = ev.sigma_g;
        ev.active = Branch::Trade;
    }
    return ev;
}

double L0(const ScalarField& f, const Vec& x, const LevyModel& model,
          const ConeSpec& cone, double beta) {
    Vec p = f.gradient(x, &cone);
    double i_val = nonlocal_I(f, x, model, cone);
    return F0(f.hessian(x, &cone), p, i_val, f.value(x), x, model, beta);
}

void dump_operator_trace(std::ostream& os, const ScalarField& f,
                         const std::vector<Vec>& points, const LevyModel& model,
                         const ConeSpec& cone, const UtilitySpec& utility) {
    Eigen::Index d = cone.dim();
    for (Eigen::Index i = 0; i < d; ++i) os << "x" << (i + 1) << ",";
    os << "branch,hold_value,sigma_g\n";
    char buf[64];
    for (const Vec& x : points) {
        OperatorEval ev = L(f, x, model, cone, utility);
        for (Eigen::Index i = 0; i < d; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,", x(i));
            os << buf;
        }
        os << (ev.active == Branch::Hold ? "hold" : "trade") << ",";
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", ev.hold_value, ev.sigma_g);
        os << buf;
    }
}

}  // namespace conehjb
