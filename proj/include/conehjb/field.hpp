// Real-valued fields on the cone: callables with optional analytic
// derivatives, the sublinear-growth flag required by the nonlocal operator,
// and finite-difference fallbacks (central, one-sided near the boundary).
#pragma once

#include "conehjb/common.hpp"
#include "conehjb/cone.hpp"

#include <functional>
#include <optional>

namespace conehjb {

class ScalarField {
public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<Vec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;

    /// Field with analytic derivatives.
    static ScalarField analytic(ValueFn f, GradFn grad, HessFn hess, bool sublinear_growth);

    /// Field from a bare callable; derivatives via finite differences with
    /// the given step.
    static ScalarField numeric(ValueFn f, bool sublinear_growth, double fd_step = 1e-5);

    double value(const Vec& x) const { return value_(x); }

    /// Gradient: analytic when available, otherwise central differences
    /// (one-sided toward the interior when a cone is given and x +- h e_i
    /// would leave it).
    Vec gradient(const Vec& x, const ConeSpec* cone = nullptr) const;

    /// Hessian: analytic when available, otherwise second differences.
    Mat hessian(const Vec& x, const ConeSpec* cone = nullptr) const;

    bool sublinear_growth() const { return sublinear_; }
    double fd_step() const { return fd_step_; }
    void set_fd_step(double h) { fd_step_ = h; }

private:
    ValueFn value_;
    GradFn grad_;
    HessFn hess_;
    bool sublinear_ = false;
    double fd_step_ = 1e-5;
};

/// Central-difference gradient of an arbitrary callable, one-sided toward the
/// interior when the symmetric stencil would leave the cone.
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h,
                const ConeSpec* cone = nullptr);

/// Second-difference Hessian (symmetrized).
Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h,
               const ConeSpec* cone = nullptr);

}  // namespace conehjb
