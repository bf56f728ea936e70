#include "conehjb/cone.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace conehjb {

namespace {

constexpr double kGeomTol = 1e-12;

Vec rot90(const Vec& v) {
    Vec r(2);
    r << -v(1), v(0);
    return r;
}

bool same_direction(const Vec& a, const Vec& b, double tol = 1e-9) {
    return (a - b).norm() < tol;
}

// Enumerates facet normals of cone(G) for d in {1, 2, 3}.
std::vector<Vec> enumerate_facets(Eigen::Index dim, const std::vector<Vec>& gens) {
    std::vector<Vec> normals;
    auto keep = [&](const Vec& n, bool require_touch) {
        bool all_nonneg = true;
        bool touches = false;
        for (const Vec& g : gens) {
            double d = n.dot(g);
            if (d < -kGeomTol) { all_nonneg = false; break; }
            if (std::abs(d) <= 1e-9) touches = true;
        }
        if (!all_nonneg || (require_touch && !touches)) return;
        for (const Vec& m : normals)
            if (same_direction(m, n)) return;
        normals.push_back(n);
    };

    if (dim == 1) {
        // The only facet of a proper 1-d cone is the origin.
        for (const Vec& g : gens) keep(g.normalized(), false);
        return normals;
    }
    if (dim == 2) {
        // Candidate facets are the lines through single generators.
        for (const Vec& g : gens) {
            Vec n = rot90(g).normalized();
            keep(n, true);
            keep(Vec(-n), true);
        }
        return normals;
    }
    if (dim == 3) {
        for (std::size_t i = 0; i < gens.size(); ++i) {
            for (std::size_t j = i + 1; j < gens.size(); ++j) {
                Eigen::Vector3d a = gens[i].head<3>(), b = gens[j].head<3>();
                Eigen::Vector3d c = a.cross(b);
                if (c.norm() < kGeomTol) continue;
                Vec n = Vec(c.normalized());
                keep(n, true);
                keep(Vec(-n), true);
            }
        }
        return normals;
    }
    throw UnsupportedDimension("facet enumeration supported for d <= 3 only");
}

double matrix_rank_tol(const Mat& m, double tol) {
    Eigen::JacobiSVD<Mat> svd(m);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tol * std::max(1.0, smax)) ++r;
    return static_cast<double>(r);
}

}  // namespace

CostMatrix::CostMatrix(Mat l) : lambda(std::move(l)) {
    if (lambda.rows() != lambda.cols() || lambda.rows() < 2)
        throw ConfigError("cost matrix must be square with d >= 2");
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
        if (std::abs(lambda(i, i)) > 0.0)
            throw ConfigError("cost matrix diagonal must be zero");
        for (Eigen::Index j = 0; j < lambda.cols(); ++j)
            if (lambda(i, j) < 0.0)
                throw ConfigError("cost matrix entries must be nonnegative");
    }
}

ConeSpec::ConeSpec(Eigen::Index dim, std::vector<Vec> generators,
                   std::vector<Vec> facet_normals)
    : dim_(dim), generators_(std::move(generators)), facet_normals_(std::move(facet_normals)) {
    if (dim_ < 1) throw UnsupportedDimension("cone dimension must be >= 1");
    for (auto& g : generators_) {
        if (g.size() != dim_) throw ConfigError("generator dimension mismatch");
        double n = g.norm();
        if (n < kGeomTol) throw ConfigError("zero generator");
        g /= n;
    }
    for (auto& f : facet_normals_) {
        if (f.size() != dim_) throw ConfigError("facet normal dimension mismatch");
        double n = f.norm();
        if (n < kGeomTol) throw ConfigError("zero facet normal");
        f /= n;
    }
    validate();
}

void ConeSpec::validate() const {
    if (facet_normals_.empty()) throw PropernessViolation("cone has no facet normals");
    if (generators_.empty()) throw ConfigError("cone has no generators");

    // K cap (-K) = {v : n.v = 0 for all facet normals}; properness is exactly
    // full rank of the normal matrix.
    Mat N(static_cast<Eigen::Index>(facet_normals_.size()), dim_);
    for (std::size_t k = 0; k < facet_normals_.size(); ++k)
        N.row(static_cast<Eigen::Index>(k)) = facet_normals_[k].transpose();
    if (matrix_rank_tol(N, 1e-10) < static_cast<double>(dim_))
        throw PropernessViolation("cone contains a line (facet normals do not span)");

    Mat G(static_cast<Eigen::Index>(generators_.size()), dim_);
    for (std::size_t k = 0; k < generators_.size(); ++k)
        G.row(static_cast<Eigen::Index>(k)) = generators_[k].transpose();
    if (matrix_rank_tol(G, 1e-10) < static_cast<double>(dim_))
        throw PropernessViolation("cone has empty interior (generators do not span)");

    for (const Vec& g : generators_)
        for (const Vec& n : facet_normals_)
            if (n.dot(g) < -1e-12)
                throw ConfigError("generator violates a facet inequality");

    // Full-dimensional proper cone: the generator sum is strictly interior.
    Vec s = Vec::Zero(dim_);
    for (const Vec& g : generators_) s += g;
    for (const Vec& n : facet_normals_)
        if (n.dot(s) <= kGeomTol)
            throw PropernessViolation("cone interior is empty at tolerance");
}

ConeSpec ConeSpec::from_generators(Eigen::Index dim, std::vector<Vec> generators) {
    for (auto& g : generators) {
        double n = g.norm();
        if (n < kGeomTol) throw ConfigError("zero generator");
        g /= n;
    }
    auto normals = enumerate_facets(dim, generators);
    if (normals.empty())
        throw PropernessViolation("facet enumeration found no supporting facets");
    return ConeSpec(dim, std::move(generators), std::move(normals));
}

ConeSpec ConeSpec::solvency_cone_from_costs(const CostMatrix& costs) {
    Eigen::Index d = costs.dim();
    std::vector<Vec> gens;
    for (Eigen::Index i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e(i) = 1.0;
        gens.push_back(e);
        for (Eigen::Index j = 0; j < d; ++j) {
            if (i == j) continue;
            Vec g = Vec::Zero(d);
            g(i) = 1.0 + costs.lambda(i, j);
            g(j) = -1.0;
            gens.push_back(g);
        }
    }
    return from_generators(d, std::move(gens));
}

ConeSpec ConeSpec::orthant(Eigen::Index d) {
    std::vector<Vec> gens, normals;
    for (Eigen::Index i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e(i) = 1.0;
        gens.push_back(e);
        normals.push_back(e);
    }
    return ConeSpec(d, std::move(gens), std::move(normals));
}

bool ConeSpec::contains(const Vec& x, double tol) const {
    return min_facet_slack(x) >= -tol;
}

bool ConeSpec::contains_interior(const Vec& x, double tol) const {
    return min_facet_slack(x) > tol;
}

double ConeSpec::min_facet_slack(const Vec& x) const {
    double m = kInf;
    for (const Vec& n : facet_normals_) m = std::min(m, n.dot(x));
    return m;
}

bool ConeSpec::dual_contains(const Vec& p, double tol) const {
    return dual_slack(p) >= -tol;
}

double ConeSpec::dual_slack(const Vec& p) const {
    double m = kInf;
    for (const Vec& g : generators_) m = std::min(m, p.dot(g));
    return m;
}

double ConeSpec::sigma_G(const Vec& p) const {
    double m = -kInf;
    for (const Vec& g : generators_) m = std::max(m, -g.dot(p));
    return m;
}

bool ConeSpec::ordering_geq(const Vec& x, const Vec& y, double tol) const {
    return contains(x - y, tol);
}

double ConeSpec::dist_to_boundary(const Vec& x, double tol) const {
    double m = min_facet_slack(x);
    if (m < -tol) throw OutsideCone("dist_to_boundary: point is outside the cone");
    return std::max(m, 0.0);
}

Vec ConeSpec::interior_direction() const {
    Vec s = Vec::Zero(dim_);
    for (const Vec& g : generators_) s += g;
    return s / s.norm();
}

ConeSpec solvency_cone_from_costs(const CostMatrix& costs) {
    return ConeSpec::solvency_cone_from_costs(costs);
}

}  // namespace conehjb
