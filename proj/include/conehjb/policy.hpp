// Feedback policies (t, V) -> (consumption rate in C, trade impulse in -K):
// zero, constant consumption, Merton proportional rebalancing, a no-trade
// cone threshold policy, and the policy extracted from a solved value field.
#pragma once

#include "conehjb/cone.hpp"
#include "conehjb/common.hpp"
#include "conehjb/solver.hpp"

#include <memory>
#include <string>

namespace conehjb {

class Policy {
public:
    struct Action {
        double consumption = 0.0;  // rate along e1
        Vec trade;                 // impulse in -K (empty when none)
        bool has_trade = false;
    };

    virtual ~Policy() = default;
    virtual void act(double t, const Vec& v, Action& out) const = 0;
    virtual std::string name() const = 0;
};

class ZeroPolicy final : public Policy {
public:
    void act(double, const Vec&, Action& out) const override {
        out.consumption = 0.0;
        out.has_trade = false;
    }
    std::string name() const override { return "zero"; }
};

/// Consumes the cash asset at a fixed rate; never trades.
class ConstantConsumptionPolicy final : public Policy {
public:
    explicit ConstantConsumptionPolicy(double rate) : rate_(rate) {
        if (rate < 0.0) throw PolicyViolation("consumption rate must be nonnegative");
    }
    void act(double, const Vec&, Action& out) const override {
        out.consumption = rate_;
        out.has_trade = false;
    }
    std::string name() const override { return "constant"; }

private:
    double rate_;
};

/// Frictionless-style proportional policy: rebalances the risky holding to
/// fraction theta of aggregate wealth through the cone generators and
/// consumes at rate nu * wealth. The classical optimum has
///   theta = mu / ((1 - gamma) sigma^2),
///   nu = (beta - gamma eta) / (1 - gamma), eta = mu^2 / (2 (1-gamma) sigma^2).
class MertonPolicy final : public Policy {
public:
    MertonPolicy(const ConeSpec& cone, double theta, double nu, double lambda_buy,
                 double lambda_sell);

    /// Builds the policy with the closed-form Merton fractions for a 2-asset
    /// market (cash with zero rate, risky drift mu and volatility sigma).
    static MertonPolicy classical(const ConeSpec& cone, double mu, double sigma,
                                  double gamma, double beta, double lambda_buy,
                                  double lambda_sell);

    void act(double t, const Vec& v, Action& out) const override;
    std::string name() const override { return "merton"; }

    double theta() const { return theta_; }
    double nu() const { return nu_; }

private:
    double theta_, nu_;
    double lambda_buy_, lambda_sell_;
};

/// Keeps the portfolio direction inside an angular band [phi_lo, phi_hi]
/// (relative angles against the band edges) and consumes nu * (1.v).
class NoTradeConePolicy final : public Policy {
public:
    NoTradeConePolicy(const ConeSpec& cone, double phi_lo, double phi_hi, double nu,
                      double lambda_buy, double lambda_sell);
    void act(double t, const Vec& v, Action& out) const override;
    std::string name() const override { return "no-trade-cone"; }

private:
    double phi_lo_, phi_hi_;
    double nu_;
    double lambda_buy_, lambda_sell_;
};

/// Feedback rule read off a solved field: consume c*(x) where the hold branch
/// is active, push along the active generator while in a trade region.
class GridPolicy final : public Policy {
public:
    explicit GridPolicy(const ValueField& field);
    void act(double t, const Vec& v, Action& out) const override;
    std::string name() const override { return "grid"; }

private:
    std::size_t nearest(const Vec& v, double r) const;

    ConeGrid2D grid_;
    std::vector<std::int8_t> branch_;
    std::vector<double> c_rate_;  // c* / r at the node (degree-1 homogeneous)
    std::vector<int> trade_gen_;
    double trade_quantum_frac_;
};

/// Extracts the feedback policy of a solved field.
std::unique_ptr<Policy> extract_policy(const ValueField& field);

}  // namespace conehjb
