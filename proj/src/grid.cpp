#include "conehjb/grid.hpp"

#include <cmath>

namespace conehjb {

namespace {
double wrap_pi(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}
}  // namespace

ConeGrid2D::ConeGrid2D(ConeSpec cone, double r_max, int n_radial, int n_angular)
    : cone_(std::move(cone)), r_max_(r_max), nr_(n_radial), na_(n_angular) {
    if (cone_.dim() != 2) throw UnsupportedDimension("grid supports d = 2 cones only");
    if (!(r_max_ > 0.0)) throw ConfigError("grid r_max must be positive");
    if (nr_ < 2 || na_ < 2) throw ConfigError("grid needs at least 2x2 nodes");

    Vec c = cone_.interior_direction();
    center_angle_ = std::atan2(c(1), c(0));
    phi_lo_ = kInf;
    phi_hi_ = -kInf;
    for (const Vec& g : cone_.generators()) {
        double a = wrap_pi(std::atan2(g(1), g(0)) - center_angle_);
        phi_lo_ = std::min(phi_lo_, a);
        phi_hi_ = std::max(phi_hi_, a);
    }
    dr_ = r_max_ / (nr_ - 1);
    dphi_ = (phi_hi_ - phi_lo_) / (na_ - 1);
}

Vec ConeGrid2D::node(int i, int j) const {
    double a = center_angle_ + angle(j);
    Vec x(2);
    x << radius(i) * std::cos(a), radius(i) * std::sin(a);
    return x;
}

ConeGrid2D::Chart ConeGrid2D::chart(const Vec& x) const {
    Chart c;
    c.r = std::hypot(x(0), x(1));
    if (c.r == 0.0) {
        c.phi = phi_lo_;
        c.in_cone = true;
        return c;
    }
    c.phi = wrap_pi(std::atan2(x(1), x(0)) - center_angle_);
    c.in_cone = c.phi >= phi_lo_ - 1e-12 && c.phi <= phi_hi_ + 1e-12;
    return c;
}

void ConeGrid2D::cache_interp_gamma(double gamma) {
    cached_gamma_ = gamma;
    pow_table_.resize(static_cast<std::size_t>(nr_));
    for (int i = 0; i < nr_; ++i)
        pow_table_[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i), gamma);
}

ConeGrid2D::Stencil ConeGrid2D::stencil(double r, double phi, double gamma) const {
    double ri = r / dr_;
    double pj = (phi - phi_lo_) / dphi_;
    int i0 = std::clamp(static_cast<int>(std::floor(ri)), 0, nr_ - 2);
    int j0 = std::clamp(static_cast<int>(std::floor(pj)), 0, na_ - 2);
    double fr = std::clamp(ri - i0, 0.0, 1.0);
    double fp = std::clamp(pj - j0, 0.0, 1.0);
    if (gamma != 1.0) {
        // radial weight linear in r^gamma
        double lo, hi;
        if (gamma == cached_gamma_ && !pow_table_.empty()) {
            lo = pow_table_[static_cast<std::size_t>(i0)];
            hi = pow_table_[static_cast<std::size_t>(i0) + 1];
        } else {
            lo = std::pow(static_cast<double>(i0), gamma);
            hi = std::pow(static_cast<double>(i0) + 1.0, gamma);
        }
        fr = std::clamp((std::pow(ri, gamma) - lo) / (hi - lo), 0.0, 1.0);
        // angular edge cells: power weight toward the zero-valued ray
        if (j0 == 0) fp = std::pow(fp, gamma);
        else if (j0 == na_ - 2) fp = 1.0 - std::pow(1.0 - fp, gamma);
    }
    Stencil s;
    s.idx = {index(i0, j0), index(i0 + 1, j0), index(i0, j0 + 1), index(i0 + 1, j0 + 1)};
    s.w = {(1.0 - fr) * (1.0 - fp), fr * (1.0 - fp), (1.0 - fr) * fp, fr * fp};
    return s;
}

std::vector<Vec> ConeGrid2D::interior_nodes() const {
    std::vector<Vec> out;
    out.reserve(size());
    for (int i = 1; i < nr_; ++i)
        for (int j = 1; j < na_ - 1; ++j) out.push_back(node(i, j));
    return out;
}

ConeGrid2D build_grid(const ConeSpec& cone, double r_max, int n_radial, int n_angular) {
    return ConeGrid2D(cone, r_max, n_radial, n_angular);
}

}  // namespace conehjb
