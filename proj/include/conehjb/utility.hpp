// Power utility on the consumption cone C = R_+ e1 and its Fenchel dual.
#pragma once

#include "conehjb/common.hpp"

namespace conehjb {

/// U(c) = (c.e1)^gamma / gamma with gamma in (0,1), discounted at beta > 0.
struct UtilitySpec {
    double gamma;
    double beta;

    UtilitySpec(double g, double b) : gamma(g), beta(b) {
        if (!(g > 0.0 && g < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
        if (!(b > 0.0)) throw ConfigError("beta must be positive");
    }

    double value(double c1) const {
        if (c1 < 0.0) throw PolicyViolation("consumption must be nonnegative");
        return std::pow(c1, gamma) / gamma;
    }
};

/// Fenchel dual value U*(p) = sup_{c in C} (U(c) - p.c) together with the
/// maximizer. For p1 <= 0 the supremum is infinite; value carries the +inf
/// sentinel and the maximizer is unset.
struct FenchelDual {
    double value;
    double c_star;  // optimal consumption rate along e1 (0 if value infinite)
    bool finite;
};

FenchelDual fenchel_dual(const UtilitySpec& u, const Vec& p);
FenchelDual fenchel_dual(const UtilitySpec& u, double p1);

}  // namespace conehjb
