#include "conehjb/utility.hpp"

#include <cmath>

namespace conehjb {

FenchelDual fenchel_dual(const UtilitySpec& u, double p1) {
    if (p1 <= 0.0) return {kInf, 0.0, false};
    // sup_c (c^g/g - p c): c* = p^{1/(g-1)}, value ((1-g)/g) p^{g/(g-1)}.
    double c_star = std::pow(p1, 1.0 / (u.gamma - 1.0));
    double value = (1.0 - u.gamma) / u.gamma * std::pow(p1, u.gamma / (u.gamma - 1.0));
    return {value, c_star, true};
}

FenchelDual fenchel_dual(const UtilitySpec& u, const Vec& p) {
    return fenchel_dual(u, p(0));
}

}  // namespace conehjb
