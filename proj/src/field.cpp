#include "conehjb/field.hpp"

namespace conehjb {

ScalarField ScalarField::analytic(ValueFn f, GradFn grad, HessFn hess, bool sublinear_growth) {
    ScalarField s;
    s.value_ = std::move(f);
    s.grad_ = std::move(grad);
    s.hess_ = std::move(hess);
    s.sublinear_ = sublinear_growth;
    return s;
}

ScalarField ScalarField::numeric(ValueFn f, bool sublinear_growth, double fd_step) {
    ScalarField s;
    s.value_ = std::move(f);
    s.sublinear_ = sublinear_growth;
    s.fd_step_ = fd_step;
    return s;
}

Vec ScalarField::gradient(const Vec& x, const ConeSpec* cone) const {
    if (grad_) return grad_(x);
    return fd_gradient(value_, x, fd_step_, cone);
}

Mat ScalarField::hessian(const Vec& x, const ConeSpec* cone) const {
    if (hess_) return hess_(x);
    return fd_hessian(value_, x, fd_step_, cone);
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h,
                const ConeSpec* cone) {
    Eigen::Index d = x.size();
    Vec g(d);
    Vec xp = x, xm = x;
    for (Eigen::Index i = 0; i < d; ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        bool up_ok = !cone || cone->contains(xp);
        bool dn_ok = !cone || cone->contains(xm);
        if (up_ok && dn_ok) {
            g(i) = (f(xp) - f(xm)) / (2.0 * h);
        } else if (up_ok) {
            g(i) = (f(xp) - f(x)) / h;
        } else if (dn_ok) {
            g(i) = (f(x) - f(xm)) / h;
        } else {
            g(i) = 0.0;
        }
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h,
               const ConeSpec* cone) {
    Eigen::Index d = x.size();
    Mat H(d, d);
    double f0 = f(x);
    Vec y = x;
    auto inside = [&](const Vec& v) { return !cone || cone->contains(v); };

    for (Eigen::Index i = 0; i < d; ++i) {
        y(i) = x(i) + h;
        double fp = f(y);
        y(i) = x(i) - h;
        double fm = f(y);
        y(i) = x(i);
        Vec up = x, dn = x;
        up(i) += h;
        dn(i) -= h;
        if (inside(up) && inside(dn)) {
            H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
        } else if (inside(up)) {
            Vec up2 = x;
            up2(i) += 2.0 * h;
            H(i, i) = (f(up2) - 2.0 * fp + f0) / (h * h);
        } else {
            Vec dn2 = x;
            dn2(i) -= 2.0 * h;
            H(i, i) = (f0 - 2.0 * fm + f(dn2)) / (h * h);
        }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            Vec pp = x, pm = x, mp = x, mm = x;
            pp(i) += h; pp(j) += h;
            pm(i) += h; pm(j) -= h;
            mp(i) -= h; mp(j) += h;
            mm(i) -= h; mm(j) -= h;
            double v;
            if (inside(pp) && inside(pm) && inside(mp) && inside(mm)) {
                v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
            } else {
                // forward corner stencil (kept inside by shrinking h)
                double hh = h / 4.0;
                Vec a = x, b = x, c = x;
                a(i) += hh; a(j) += hh;
                b(i) += hh;
                c(j) += hh;
                v = (f(a) - f(b) - f(c) + f0) / (hh * hh);
            }
            H(i, j) = v;
            H(j, i) = v;
        }
    }
    return H;
}

}  // namespace conehjb
