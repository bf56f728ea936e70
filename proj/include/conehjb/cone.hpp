// Polyhedral proper cones: the solvency cone K, its dual K*, the support
// function surrogate, cone ordering and boundary distances.
#pragma once

#include "conehjb/common.hpp"

#include <optional>
#include <vector>

namespace conehjb {

/// d x d matrix of proportional transaction cost coefficients lambda^{ij}.
/// Entries are >= 0 with zero diagonal.
struct CostMatrix {
    Mat lambda;

    explicit CostMatrix(Mat l);
    Eigen::Index dim() const { return lambda.rows(); }
};

/// A proper closed polyhedral cone given by unit generators (conic hull) and
/// unit facet normals (K = {x : n.x >= 0 for all n}).
///
/// Invariants checked at construction:
///  - properness: K contains no line (facet normals have full rank)
///  - nonempty interior: generators span the space and the generator sum has
///    strictly positive slack on every facet
///  - consistency: every generator satisfies every facet inequality
class ConeSpec {
public:
    static constexpr double kMembershipTol = 1e-10;
    static constexpr double kOrderingTol = 1e-8;

    /// Builds from explicit generators and facet normals (both normalized
    /// internally). Works in any dimension d >= 1.
    ConeSpec(Eigen::Index dim, std::vector<Vec> generators, std::vector<Vec> facet_normals);

    /// Builds from generators alone; facets are enumerated (d <= 3 only).
    static ConeSpec from_generators(Eigen::Index dim, std::vector<Vec> generators);

    /// The standard market solvency cone
    ///   K = cone{ (1+lambda^{ij}) e_i - e_j, e_i }.
    /// Throws PropernessViolation when friction is inefficient (e.g. all
    /// lambda zero, which leaves a whole line inside K).
    static ConeSpec solvency_cone_from_costs(const CostMatrix& costs);

    /// The nonnegative orthant of dimension d.
    static ConeSpec orthant(Eigen::Index d);

    Eigen::Index dim() const { return dim_; }
    const std::vector<Vec>& generators() const { return generators_; }
    const std::vector<Vec>& facet_normals() const { return facet_normals_; }

    /// Membership x in K at tolerance: min over facet normals of n.x >= -tol.
    bool contains(const Vec& x, double tol = kMembershipTol) const;

    /// Strict interior membership: every facet slack exceeds tol.
    bool contains_interior(const Vec& x, double tol = kMembershipTol) const;

    /// Dual cone membership: p.g >= -tol for every generator g.
    bool dual_contains(const Vec& p, double tol = kMembershipTol) const;

    /// Smallest dot product of p with the unit generators (the dual slack;
    /// negative iff p is outside K*).
    double dual_slack(const Vec& p) const;

    /// Support-function surrogate for G = (-K) on the unit sphere:
    /// max_k (-g_k . p) over the unit generators. Sign-equivalent to the true
    /// Sigma_G: <= 0 iff p in K*, < 0 iff p in int K*.
    double sigma_G(const Vec& p) const;

    /// Partial ordering x >=_K y, i.e. x - y in K.
    bool ordering_geq(const Vec& x, const Vec& y, double tol = kOrderingTol) const;

    /// Minimum facet slack min_n n.x for unit normals; zero exactly on the
    /// boundary and positive inside. Throws OutsideCone when x is not in K.
    double dist_to_boundary(const Vec& x, double tol = kMembershipTol) const;

    /// Signed version of dist_to_boundary (no membership requirement).
    double min_facet_slack(const Vec& x) const;

    /// A strictly interior unit direction (normalized generator sum).
    Vec interior_direction() const;

private:
    void validate() const;

    Eigen::Index dim_;
    std::vector<Vec> generators_;
    std::vector<Vec> facet_normals_;
};

/// Free-function forms matching the operation names used elsewhere.
ConeSpec solvency_cone_from_costs(const CostMatrix& costs);

}  // namespace conehjb
