// scratch: DPP residual diagnostics for the extracted Merton policy
#include "conehjb/policy.hpp"
#include "conehjb/simulate.hpp"
#include "conehjb/hjb.hpp"
#include "conehjb/solver.hpp"
#include "oracles.hpp"

#include <cstdio>

using namespace conehjb;

int main(int argc, char** argv) {
    int nr = argc > 1 ? std::atoi(argv[1]) : 50;
    int na = argc > 2 ? std::atoi(argv[2]) : 36;
    Mat cm(2, 2);
    cm << 0.0, 1e-8, 1e-8, 0.0;
    ConeSpec k = ConeSpec::solvency_cone_from_costs(CostMatrix(cm));
    LevyModel m;
    m.mu = make_vec({0.0, 0.07});
    m.xi = Mat::Zero(2, 1);
    m.xi(1, 0) = 0.3;
    UtilitySpec util(0.3, 0.2);
    LyapunovCertificate cert = make_certificate(k, m, make_vec({200.0, 200.0}), 0.3);
    auto nodes = certificate_nodes(k, 4.0, 12, 24);
    verify_lyapunov(cert, m, k, util.beta, nodes);
    cert.scale = 2.0 * supersolution_scale(cert, m, k, util, nodes);

    ConeGrid2D grid(k, 4.0, nr, na);
    ValueField field = solve(m, k, util, grid, cert);
    oracles::Merton merton(0.07, 0.3, 0.3, 0.2);

    Vec x0 = make_vec({1.0, 1.0});
    std::printf("W_grid(x0)=%.5f  W_merton=%.5f\n", field.value(x0), merton.value(2.0));

    int nh = 0, nt = 0, nb = 0;
    for (auto b : field.branch) (b == ValueField::kHold ? nh : b == ValueField::kTrade ? nt : nb)++;
    std::printf("branches: hold=%d trade=%d boundary=%d\n", nh, nt, nb);
    auto ch = field.grid.chart(make_vec({0.9943, 1.0057}));
    int ii = (int)std::lround(ch.r / field.grid.dr());
    int jj = (int)std::lround((ch.phi - field.grid.angle(0)) / field.grid.dphi());
    for (int dj = -2; dj <= 2; ++dj) {
        std::size_t kk = field.grid.index(ii, jj + dj);
        std::printf("node (%d,%d): branch=%d gen=%d c*=%.6f w=%.5f\n", ii, jj + dj,
                    int(field.branch[kk]), field.trade_gen[kk], field.c_star[kk], field.w[kk]);
    }
    {
        // hold-branch residual profile along the cross-section at r = 2
        ScalarField wf = ScalarField::numeric([&](const Vec& y) { return field.value(y); },
                                              true, 0.5 * field.grid.dr());
        std::printf("angle  theta  F0+U*  sigmaG\n");
        for (int j = 2; j < na - 2; j += 2) {
            Vec x = field.grid.node(nr / 2, j);
            auto ev = L(wf, x, m, k, util);
            std::printf("%6.3f %6.3f %9.5f %9.5f\n", field.grid.angle(j),
                        x(1) / (x(0) + x(1)), ev.hold_value, ev.sigma_g);
        }
    }
    auto policy = extract_policy(field);
    Policy::Action act;
    policy->act(0.0, x0, act);
    std::printf("policy at x0: c=%.5f (merton c = %.5f), trade=%d", act.consumption,
                merton.nu * 2.0, int(act.has_trade));
    if (act.has_trade)
        std::printf(" dB=(%.4f, %.4f)", act.trade(0), act.trade(1));
    std::printf("\n");
    Vec x1 = act.has_trade ? Vec(x0 + act.trade) : x0;
    std::printf("post-trade x=(%.4f,%.4f) risky frac %.4f (merton theta=%.4f)\n", x1(0),
                x1(1), x1(1) / (x1(0) + x1(1)), merton.theta);

    SimOptions opts;
    opts.dt = 1e-3;
    opts.n_paths = 4000;
    opts.seed = 5;
    opts.horizon = 10.0;
    TauRule tau{0.5, kInf};
    auto rp = dpp_residual(field, m, k, util, *policy, x0, tau, opts);
    std::printf("dpp: residual=%.5f  ci=%.5f  w=%.5f  (2%%W=%.5f)\n", rp.residual, rp.ci99,
                rp.w_x, 0.02 * rp.w_x);
    SimOptions mo;
    mo.dt = 1e-3;
    mo.n_paths = 5000;
    mo.seed = 17;
    mo.horizon = std::log(100.0 * cert.scale * lyapunov_field(cert.p, cert.rho).value(x0) /
                          field.value(x0)) / util.beta;
    auto ev = evaluate_policy(m, k, util, *policy, x0, mo, &cert);
    std::printf("mc: T=%.1f mean=%.5f ci=%.5f tail=%.5f  W=%.5f ratio=%.4f\n", mo.horizon,
                ev.mean, ev.ci99, ev.tail_bound, field.value(x0), ev.mean / field.value(x0));
    return 0;
}
