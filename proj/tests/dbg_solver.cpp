// scratch diagnostics for solver convergence (not registered with ctest)
#include "conehjb/lyapunov.hpp"
#include "conehjb/solver.hpp"

#include <cstdio>

using namespace conehjb;

int main(int argc, char** argv) {
    double l = argc > 1 ? std::atof(argv[1]) : 0.1;
    double beta = argc > 2 ? std::atof(argv[2]) : 2.5;
    int with_jumps = argc > 3 ? std::atoi(argv[3]) : 1;
    int nr = argc > 4 ? std::atoi(argv[4]) : 30;
    int na = argc > 5 ? std::atoi(argv[5]) : 24;

    Mat cm(2, 2);
    cm << 0.0, l, l, 0.0;
    ConeSpec k = ConeSpec::solvency_cone_from_costs(CostMatrix(cm));
    LevyModel m;
    m.mu = make_vec({0.0, 0.07});
    m.xi = Mat::Zero(2, 1);
    m.xi(1, 0) = 0.3;
    if (with_jumps) {
        m.jumps.push_back({make_vec({0.0, -0.3}), 0.5});
        m.jumps.push_back({make_vec({0.0, 0.3}), 0.5});
    }
    UtilitySpec util(0.3, beta);
    Vec p = l < 1e-3 ? make_vec({200.0, 200.0}) : make_vec({1.0, 1.0});
    LyapunovCertificate cert = make_certificate(k, m, p, 0.3);
    auto nodes = certificate_nodes(k, 3.0, 12, 24);
    verify_lyapunov(cert, m, k, util.beta, nodes);
    std::printf("verified=%d max_l0=%g thr=%g tight=%g\n", int(cert.verified),
                cert.report.max_l0, cert.beta_threshold, cert.beta_threshold_tight);
    if (!cert.verified) return 1;
    cert.scale = 2.0 * supersolution_scale(cert, m, k, util, nodes);
    std::printf("scale=%g\n", cert.scale);

    ConeGrid2D grid(k, 3.0, nr, na);
    SolverOptions opts;
    opts.max_outer = 8000;
    opts.tol = 1e-8;
    try {
        ValueField f = solve(m, k, util, grid, cert, opts);
        std::printf("converged in %d iters\n", f.iterations);
    } catch (const NotConverged& e) {
        std::printf("NOT CONVERGED: %s\n", e.what());
    }
    return 0;
}
