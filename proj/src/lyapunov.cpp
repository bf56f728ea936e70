#include "conehjb/lyapunov.hpp"

#include "conehjb/hjb.hpp"
#include "conehjb/rng.hpp"

#include <algorithm>
#include <cmath>

namespace conehjb {

namespace {

struct AngularRange {
    Vec center;       // interior unit direction
    double lo, hi;    // generator angles relative to center
};

AngularRange angular_range(const ConeSpec& cone) {
    AngularRange r;
    r.center = cone.interior_direction();
    r.lo = kInf;
    r.hi = -kInf;
    for (const Vec& g : cone.generators()) {
        double cross = r.center(0) * g(1) - r.center(1) * g(0);
        double dot = r.center.dot(g);
        double a = std::atan2(cross, dot);
        r.lo = std::min(r.lo, a);
        r.hi = std::max(r.hi, a);
    }
    return r;
}

Vec rotate2(const Vec& c, double a) {
    Vec v(2);
    double ca = std::cos(a), sa = std::sin(a);
    v << ca * c(0) - sa * c(1), sa * c(0) + ca * c(1);
    return v;
}

// Dykstra alternating projection onto the polyhedral cone (H-representation).
Vec project_cone(const ConeSpec& cone, Vec x) {
    const auto& normals = cone.facet_normals();
    std::vector<Vec> corrections(normals.size(), Vec::Zero(x.size()));
    for (int sweep = 0; sweep < 50; ++sweep) {
        double worst = 0.0;
        for (std::size_t k = 0; k < normals.size(); ++k) {
            Vec y = x - corrections[k];
            double d = normals[k].dot(y);
            Vec proj = d >= 0.0 ? y : Vec(y - d * normals[k]);
            corrections[k] = proj - y;
            x = proj;
            worst = std::min(worst, cone.min_facet_slack(x));
        }
        if (worst >= -1e-14) break;
    }
    return x;
}

// Optimizes a 0-homogeneous objective over the spherical cap K cap S^{d-1}.
// Returns the best value (max when maximize, else min). Evaluation points
// include the unit generators.
double cap_optimize(const ConeSpec& cone, const std::function<double(const Vec&)>& obj,
                    bool maximize, int n_scan = 10000) {
    double sign = maximize ? 1.0 : -1.0;
    double best = -kInf;
    Vec best_x;

    auto consider = [&](const Vec& x) {
        double v = sign * obj(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    };

    for (const Vec& g : cone.generators()) consider(g);

    if (cone.dim() == 1) {
        return sign * best;
    }
    if (cone.dim() == 2) {
        AngularRange r = angular_range(cone);
        double step = (r.hi - r.lo) / n_scan;
        double best_a = r.lo;
        for (int k = 0; k <= n_scan; ++k) {
            double a = r.lo + k * step;
            Vec x = rotate2(r.center, a);
            double v = sign * obj(x);
            if (v > best) {
                best = v;
                best_x = x;
                best_a = a;
            }
        }
        // golden-section refinement around the best scan angle
        double lo = std::max(r.lo, best_a - step);
        double hi = std::min(r.hi, best_a + step);
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a1 = hi - gr * (hi - lo), a2 = lo + gr * (hi - lo);
        double f1 = sign * obj(rotate2(r.center, a1));
        double f2 = sign * obj(rotate2(r.center, a2));
        while (hi - lo > 1e-10) {
            if (f1 < f2) {
                lo = a1; a1 = a2; f1 = f2;
                a2 = lo + gr * (hi - lo);
                f2 = sign * obj(rotate2(r.center, a2));
            } else {
                hi = a2; a2 = a1; f2 = f1;
                a1 = hi - gr * (hi - lo);
                f1 = sign * obj(rotate2(r.center, a1));
            }
        }
        consider(rotate2(r.center, 0.5 * (lo + hi)));
        return sign * best;
    }

    // d >= 3: multistart projected gradient with numeric gradients.
    CounterRng rng(20240601u);
    Eigen::Index d = cone.dim();
    const auto& gens = cone.generators();
    for (int start = 0; start < 20; ++start) {
        Vec x;
        if (!gens.empty()) {
            x = Vec::Zero(d);
            for (std::size_t k = 0; k < gens.size(); ++k)
                x += rng.uniform(7000 + start, k) * gens[k];
        } else {
            x = cone.interior_direction();
            for (Eigen::Index i = 0; i < d; ++i)
                x(i) += 0.2 * (rng.uniform(8000 + start, static_cast<std::uint64_t>(i)) - 0.5);
            x = project_cone(cone, x);
        }
        if (x.norm() < 1e-14) continue;
        x.normalize();
        double alpha = 0.1;
        double fx = sign * obj(x);
        for (int it = 0; it < 400; ++it) {
            // forward-difference gradient on the sphere
            Vec grad(d);
            double h = 1e-7;
            for (Eigen::Index i = 0; i < d; ++i) {
                Vec y = x;
                y(i) += h;
                y = project_cone(cone, y);
                if (y.norm() < 1e-14) { grad(i) = 0.0; continue; }
                y.normalize();
                grad(i) = (sign * obj(y) - fx) / h;
            }
            Vec y = project_cone(cone, x + alpha * grad);
            if (y.norm() < 1e-14) { alpha *= 0.5; continue; }
            y.normalize();
            double fy = sign * obj(y);
            if (fy > fx + 1e-16) {
                x = y;
                fx = fy;
            } else {
                alpha *= 0.5;
                if (alpha < 1e-10) break;
            }
        }
        consider(x);
    }
    return sign * best;
}

double power_u(double z, double rho) { return std::pow(z, rho) / rho; }
double power_du(double z, double rho) { return std::pow(z, rho - 1.0); }
double power_ddu(double z, double rho) { return (rho - 1.0) * std::pow(z, rho - 2.0); }

double quad_form_a(const Mat& a, const Vec& x, const Vec& p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        for (Eigen::Index j = 0; j < x.size(); ++j)
            s += a(i, j) * x(i) * x(j) * p(i) * p(j);
    return s;
}

double drift_form(const Vec& mu, const Vec& x, const Vec& p) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += mu(i) * x(i) * p(i);
    return s;
}

}  // namespace

double r_bar(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    return rho / (1.0 - rho);
}

double kappa_p(const ConeSpec& cone, const Vec& p, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    double min_px = cap_optimize(cone, [&](const Vec& x) { return p.dot(x); }, false);
    if (min_px <= 1e-12 * std::max(1.0, p.norm()))
        throw DualMembership("kappa_p requires p strictly inside int K*");
    return rho * p.norm() / min_px;
}

double eta_p(const LevyModel& model, double kappa) {
    if (kappa < 0.0) throw ConfigError("kappa must be nonnegative");
    if (kappa == 0.0 || model.jumps.empty()) return 0.0;
    double thr = 1.0 / kappa;
    double s = 0.0;
    for (const auto& atom : model.jumps) {
        double n = atom.z.norm();
        if (n > thr) s += atom.lam * n;
    }
    return kappa * s;
}

double eta_tilde_p(const LevyModel& model, const ConeSpec& cone, const Vec& p) {
    if (p.norm() == 0.0) throw ConfigError("eta_tilde_p requires p != 0");
    Mat a = model.a_matrix();
    if (a.norm() == 0.0) return 0.0;
    double scale = a.norm() * p.squaredNorm();
    auto ratio = [&](const Vec& x) {
        double den = quad_form_a(a, x, p);
        if (den <= 1e-14 * scale) return -kInf;  // indicator off
        double num = drift_form(model.mu, x, p);
        return 0.5 * num * num / den;
    };
    double v = cap_optimize(cone, ratio, true);
    return std::max(v, 0.0);
}

double beta_threshold(double r_bar_val, double kappa, double eta, double eta_tilde,
                      const LevyModel& model) {
    double mu_max = 0.0;
    for (Eigen::Index i = 0; i < model.mu.size(); ++i)
        mu_max = std::max(mu_max, std::abs(model.mu(i)));
    return eta_tilde * r_bar_val + eta + mu_max * kappa;
}

double beta_threshold_tight(const LevyModel& model, const ConeSpec& cone, const Vec& p,
                            double rho, double eta) {
    Mat a = model.a_matrix();
    double rb = r_bar(rho);
    double scale = std::max(a.norm(), 1e-300) * p.squaredNorm();
    auto term = [&](const Vec& x) {
        double den = quad_form_a(a, x, p);
        double num = drift_form(model.mu, x, p);
        if (den > 1e-14 * scale) return 0.5 * num * num / den * rb;
        double px = p.dot(x);
        if (px <= 1e-12 * p.norm()) return -kInf;
        return rho * num / px;
    };
    double v = cap_optimize(cone, term, true);
    return std::max(v, 0.0) + eta;
}

ScalarField lyapunov_field(const Vec& p, double rho) {
    Vec pc = p;
    return ScalarField::analytic(
        [pc, rho](const Vec& x) {
            double z = pc.dot(x);
            return z > 0.0 ? power_u(z, rho) : 0.0;
        },
        [pc, rho](const Vec& x) -> Vec {
            double z = pc.dot(x);
            return power_du(z, rho) * pc;
        },
        [pc, rho](const Vec& x) -> Mat {
            double z = pc.dot(x);
            return power_ddu(z, rho) * (pc * pc.transpose());
        },
        /*sublinear=*/true);
}

LyapunovCertificate make_certificate(const ConeSpec& cone, const LevyModel& model,
                                     const Vec& p, double rho) {
    if (p.size() != cone.dim()) throw ConfigError("certificate p dimension mismatch");
    LyapunovCertificate cert;
    cert.p = p;
    cert.rho = rho;
    if (cone.dual_slack(p) < LyapunovCertificate::kDualMargin)
        throw DualMembership("certificate requires dual slack >= 1e-6; scale p up or move it inward");
    cert.r_bar = r_bar(rho);
    cert.kappa_p = kappa_p(cone, p, rho);
    cert.eta_p = eta_p(model, cert.kappa_p);
    cert.eta_tilde_p = eta_tilde_p(model, cone, p);
    cert.beta_threshold =
        beta_threshold(cert.r_bar, cert.kappa_p, cert.eta_p, cert.eta_tilde_p, model);
    cert.beta_threshold_tight = beta_threshold_tight(model, cone, p, rho, cert.eta_p);
    return cert;
}

LyapunovCertificate::Report verify_lyapunov(LyapunovCertificate& cert,
                                            const LevyModel& model, const ConeSpec& cone,
                                            double beta, const std::vector<Vec>& nodes,
                                            unsigned threads) {
    ScalarField f = lyapunov_field(cert.p, cert.rho);
    LyapunovCertificate::Report rep;
    rep.nodes = nodes.size();
    rep.sigma_ok = true;
    std::vector<double> l0(nodes.size());
    std::vector<char> sig(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t k) {
        l0[k] = L0(f, nodes[k], model, cone, beta);
        sig[k] = cone.sigma_G(f.gradient(nodes[k])) < 0.0 ? 1 : 0;
    }, threads);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (l0[k] > rep.max_l0) {
            rep.max_l0 = l0[k];
            rep.worst_node = nodes[k];
        }
        if (!sig[k]) rep.sigma_ok = false;
    }
    rep.pass = rep.nodes > 0 && rep.max_l0 <= 1e-8 && rep.sigma_ok;
    cert.report = rep;
    cert.verified = rep.pass;
    return rep;
}

double supersolution_scale(const LyapunovCertificate& cert, const LevyModel& model,
                           const ConeSpec& cone, const UtilitySpec& utility,
                           const std::vector<Vec>& nodes) {
    if (std::abs(utility.gamma - cert.rho) > 1e-12)
        throw Unsupported("supersolution search requires gamma == rho");
    if (nodes.empty()) throw ConfigError("supersolution_scale needs verification nodes");
    if (cone.sigma_G(cert.p) >= 0.0)
        throw DualMembership("supersolution requires p in int K*");

    ScalarField f = lyapunov_field(cert.p, cert.rho);
    std::vector<double> l0(nodes.size()), up1(nodes.size());
    double max_l0 = -kInf;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        l0[k] = L0(f, nodes[k], model, cone, utility.beta);
        double z = cert.p.dot(nodes[k]);
        up1[k] = power_du(z, cert.rho) * cert.p(0);
        max_l0 = std::max(max_l0, l0[k]);
    }
    if (max_l0 >= 0.0)
        throw NoScaleFound("L0 f_p >= 0 on the grid (beta below the Lyapunov threshold)");

    auto ok = [&](double a) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            double ustar = fenchel_dual(utility, a * up1[k]).value;
            if (a * l0[k] + ustar >= -1e-10) return false;
        }
        return true;
    };

    double hi = 1.0;
    int guard = 0;
    while (!ok(hi)) {
        hi *= 2.0;
        if (++guard > 200) throw NoScaleFound("no supersolution scale below 2^200");
    }
    double lo = hi / 2.0;
    if (guard == 0) {
        // 1 already works; bracket downward
        while (lo > 1e-12 && ok(lo)) {
            hi = lo;
            lo /= 2.0;
        }
    }
    while ((hi - lo) / hi > 1e-3) {
        double mid = 0.5 * (lo + hi);
        if (ok(mid)) hi = mid; else lo = mid;
    }
    return hi;
}

std::vector<Vec> certificate_nodes(const ConeSpec& cone, double r_max, int n_radial,
                                   int n_angular) {
    if (r_max <= 0.0 || n_radial < 1) throw ConfigError("bad certificate node parameters");
    std::vector<Vec> nodes;
    if (cone.dim() == 1) {
        Vec g = cone.generators()[0];
        for (int i = 1; i <= n_radial; ++i)
            nodes.push_back(g * (r_max * i / n_radial));
        return nodes;
    }
    if (cone.dim() == 2) {
        AngularRange r = angular_range(cone);
        for (int j = 0; j <= n_angular; ++j) {
            double a = r.lo + (j + 0.5) * (r.hi - r.lo) / (n_angular + 1);
            Vec c = rotate2(r.center, a);
            for (int i = 1; i <= n_radial; ++i)
                nodes.push_back(c * (r_max * i / n_radial));
        }
        return nodes;
    }
    // d >= 3: random interior samples from conic combinations.
    CounterRng rng(987654321u);
    const auto& gens = cone.generators();
    if (gens.empty()) throw Unsupported("certificate nodes need generators for d >= 3");
    std::size_t want = static_cast<std::size_t>(n_radial) * static_cast<std::size_t>(std::max(n_angular, 1));
    for (std::size_t s = 0; nodes.size() < want; ++s) {
        Vec x = Vec::Zero(cone.dim());
        for (std::size_t k = 0; k < gens.size(); ++k)
            x += (0.05 + rng.uniform(42, s * gens.size() + k)) * gens[k];
        x *= r_max * (0.05 + 0.95 * rng.uniform(43, s)) / x.norm();
        if (cone.contains_interior(x, 1e-12)) nodes.push_back(x);
        if (s > 100 * want) break;
    }
    return nodes;
}

}  // namespace conehjb
