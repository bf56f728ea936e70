// Structured 2-d mesh adapted to the cone: radial levels times angular rays.
// Node (i, j) sits at r_i * (cos, sin)(phi_j); i = 0 is the apex, the extreme
// angular columns lie on the boundary rays, the last radial level is the
// far field.
#pragma once

#include "conehjb/cone.hpp"
#include "conehjb/common.hpp"

#include <array>

namespace conehjb {

class ConeGrid2D {
public:
    /// n_radial / n_angular are node counts (>= 2 each); the grid covers
    /// {x in K : |x| <= r_max}, which contains the l1-truncated cone of the
    /// same radius. Throws UnsupportedDimension unless the cone is 2-d.
    ConeGrid2D(ConeSpec cone, double r_max, int n_radial, int n_angular);

    const ConeSpec& cone() const { return cone_; }
    double r_max() const { return r_max_; }
    int n_radial() const { return nr_; }
    int n_angular() const { return na_; }
    std::size_t size() const { return static_cast<std::size_t>(nr_) * na_; }

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * na_ + j; }
    Vec node(int i, int j) const;
    double radius(int i) const { return dr_ * i; }
    double angle(int j) const { return phi_lo_ + dphi_ * j; }

    bool is_boundary(int i, int j) const { return i == 0 || j == 0 || j == na_ - 1; }
    bool is_far(int i, int j) const { return i == nr_ - 1 && !is_boundary(i, j); }

    double dr() const { return dr_; }
    double dphi() const { return dphi_; }
    double angular_span() const { return phi_hi_ - phi_lo_; }

    /// Polar chart relative to the cone center direction.
    struct Chart {
        double r = 0.0;
        double phi = 0.0;     // relative angle, clamped into no range
        bool in_cone = false; // angle within [phi_lo, phi_hi]
    };
    Chart chart(const Vec& x) const;

    /// Interpolation stencil in (r, phi); valid only when the point is
    /// angularly inside the cone and r <= r_max. With gamma < 1 the radial
    /// weight is linear in r^gamma (exact on gamma-homogeneous fields, apex
    /// cell included) and the two angular edge cells interpolate in
    /// (angular distance)^gamma toward the boundary rays, matching the
    /// power-type vanishing of the value there. Weights stay in [0, 1], so
    /// the interpolation remains monotone.
    struct Stencil {
        std::array<std::size_t, 4> idx;
        std::array<double, 4> w;
    };
    Stencil stencil(double r, double phi, double gamma = 1.0) const;

    /// Precomputes the radial power table for repeated stencil calls with
    /// this gamma (pure read path afterwards; safe for concurrent queries).
    void cache_interp_gamma(double gamma);

    /// Nodes strictly inside the cone (excludes apex and boundary rays).
    std::vector<Vec> interior_nodes() const;

private:
    ConeSpec cone_;
    double r_max_;
    int nr_, na_;
    double dr_, dphi_;
    double phi_lo_, phi_hi_;   // relative to center angle
    double center_angle_;
    double cached_gamma_ = 1.0;
    std::vector<double> pow_table_;  // i^cached_gamma for radial indices
};

/// Operation-style free function; parameter order follows the module spec.
ConeGrid2D build_grid(const ConeSpec& cone, double r_max, int n_radial, int n_angular);

}  // namespace conehjb
