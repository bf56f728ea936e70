#include "conehjb/policy.hpp"

#include <cmath>

namespace conehjb {

namespace {
// Impulse that moves the risky holding v2 by +q (buy) or -q (sell) at
// proportional cost lambda; both lie in -K by construction.
Vec buy_impulse(double q, double lambda) {
    Vec b(2);
    b << -q * (1.0 + lambda), q;
    return b;
}
Vec sell_impulse(double q, double lambda) {
    Vec b(2);
    b << q / (1.0 + lambda), -q;
    return b;
}
}  // namespace

MertonPolicy::MertonPolicy(const ConeSpec& cone, double theta, double nu,
                           double lambda_buy, double lambda_sell)
    : theta_(theta), nu_(nu), lambda_buy_(lambda_buy), lambda_sell_(lambda_sell) {
    if (cone.dim() != 2) throw Unsupported("Merton policy is 2-d");
    if (nu < 0.0) throw PolicyViolation("consumption fraction must be nonnegative");
}

MertonPolicy MertonPolicy::classical(const ConeSpec& cone, double mu, double sigma,
                                     double gamma, double beta, double lambda_buy,
                                     double lambda_sell) {
    double theta = mu / ((1.0 - gamma) * sigma * sigma);
    double eta = mu * mu / (2.0 * (1.0 - gamma) * sigma * sigma);
    double nu = (beta - gamma * eta) / (1.0 - gamma);
    if (nu <= 0.0) throw ConfigError("Merton problem ill-posed: beta <= gamma eta");
    return MertonPolicy(cone, theta, nu, lambda_buy, lambda_sell);
}

void MertonPolicy::act(double, const Vec& v, Action& out) const {
    double wealth = v(0) + v(1);
    out.consumption = std::max(nu_ * wealth, 0.0);
    double target = theta_ * wealth;
    double gap = target - v(1);
    if (std::abs(gap) > 1e-14 * std::max(1.0, std::abs(wealth))) {
        out.trade = gap > 0.0 ? buy_impulse(gap, lambda_buy_)
                              : sell_impulse(-gap, lambda_sell_);
        out.has_trade = true;
    } else {
        out.has_trade = false;
    }
}

NoTradeConePolicy::NoTradeConePolicy(const ConeSpec& cone, double phi_lo, double phi_hi,
                                     double nu, double lambda_buy, double lambda_sell)
    : phi_lo_(phi_lo), phi_hi_(phi_hi), nu_(nu), lambda_buy_(lambda_buy),
      lambda_sell_(lambda_sell) {
    if (cone.dim() != 2) throw Unsupported("no-trade-cone policy is 2-d");
    if (phi_hi <= phi_lo) throw ConfigError("no-trade band is empty");
}

void NoTradeConePolicy::act(double, const Vec& v, Action& out) const {
    double wealth = v(0) + v(1);
    out.consumption = std::max(nu_ * wealth, 0.0);
    out.has_trade = false;
    double phi = std::atan2(v(1), v(0));
    if (phi < phi_lo_) {
        // under-invested: buy up to the band edge. Solve v2 + q = tan(phi_lo)
        // (v1 - q(1+lambda)).
        double tl = std::tan(phi_lo_);
        double q = (tl * v(0) - v(1)) / (1.0 + tl * (1.0 + lambda_buy_));
        if (q > 0.0) {
            out.trade = buy_impulse(q, lambda_buy_);
            out.has_trade = true;
        }
    } else if (phi > phi_hi_) {
        double th = std::tan(phi_hi_);
        // sell q of risky: v2 - q = th (v1 + q/(1+lambda))
        double q = (v(1) - th * v(0)) / (1.0 + th / (1.0 + lambda_sell_));
        if (q > 0.0) {
            out.trade = sell_impulse(q, lambda_sell_);
            out.has_trade = true;
        }
    }
}

GridPolicy::GridPolicy(const ValueField& field)
    : grid_(field.grid), branch_(field.branch), trade_gen_(field.trade_gen),
      trade_quantum_frac_(0.5) {
    c_rate_.assign(field.c_star.size(), 0.0);
    for (int i = 0; i < grid_.n_radial(); ++i) {
        double r = grid_.radius(i);
        for (int j = 0; j < grid_.n_angular(); ++j) {
            std::size_t k = grid_.index(i, j);
            c_rate_[k] = r > 0.0 ? field.c_star[k] / r : 0.0;
        }
    }
}

std::size_t GridPolicy::nearest(const Vec& v, double r) const {
    auto c = grid_.chart(v);
    int i = std::clamp(static_cast<int>(std::lround(r / grid_.dr())), 1,
                       grid_.n_radial() - 1);
    int j = std::clamp(static_cast<int>(std::lround((c.phi - grid_.angle(0)) / grid_.dphi())),
                       0, grid_.n_angular() - 1);
    return grid_.index(i, j);
}

void GridPolicy::act(double, const Vec& v, Action& out) const {
    out.has_trade = false;
    out.consumption = 0.0;
    Vec cur = v;
    double r = std::hypot(cur(0), cur(1));
    if (r <= 0.0) return;

    // walk the trade region in mesh-scaled steps until the hold region
    const auto& gens = grid_.cone().generators();
    Vec total = Vec::Zero(2);
    bool traded = false;
    int cap = 8 * grid_.n_angular();
    for (int it = 0; it < cap; ++it) {
        std::size_t k = nearest(cur, r);
        if (branch_[k] != ValueField::kTrade) break;
        int g = trade_gen_[k];
        if (g < 0) break;
        double quantum = trade_quantum_frac_ * std::max(r * grid_.dphi(), 1e-3 * grid_.dr());
        Vec step = -quantum * gens[static_cast<std::size_t>(g)];
        Vec next = cur + step;
        if (!grid_.cone().contains_interior(next, 1e-12)) break;
        cur = next;
        total += step;
        traded = true;
        r = std::hypot(cur(0), cur(1));
    }
    if (traded) {
        out.trade = total;
        out.has_trade = true;
    }
    std::size_t k = nearest(cur, r);
    if (branch_[k] == ValueField::kHold) out.consumption = c_rate_[k] * r;
}

std::unique_ptr<Policy> extract_policy(const ValueField& field) {
    return std::make_unique<GridPolicy>(field);
}

}  // namespace conehjb
