// conehjb command line: solve | simulate | verify | refine | bench.
// Configuration comes from a JSON file; outputs are CSV/JSON artifacts that
// are byte-stable for a fixed seed.

#include "conehjb/config.hpp"
#include "conehjb/hjb.hpp"
#include "conehjb/lyapunov.hpp"
#include "conehjb/policy.hpp"
#include "conehjb/simulate.hpp"
#include "conehjb/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;
using namespace conehjb;

namespace {

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[conehjb] " << msg << "\n";
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string join_out(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json cert_json(const LyapunovCertificate& cert) {
    json c;
    c["p"] = vec_json(cert.p);
    c["rho"] = cert.rho;
    c["r_bar"] = cert.r_bar;
    c["kappa_p"] = cert.kappa_p;
    c["eta_p"] = cert.eta_p;
    c["eta_tilde_p"] = cert.eta_tilde_p;
    c["beta_threshold"] = cert.beta_threshold;
    c["beta_threshold_tight"] = cert.beta_threshold_tight;
    c["scale"] = cert.scale;
    c["verified"] = cert.verified;
    json rep;
    rep["max_l0"] = cert.report.max_l0;
    rep["max_supersolution_value"] = cert.report.max_supersol;
    if (cert.report.worst_node.size() > 0) rep["worst_node"] = vec_json(cert.report.worst_node);
    rep["sigma_ok"] = cert.report.sigma_ok;
    rep["nodes"] = cert.report.nodes;
    rep["pass"] = cert.report.pass;
    c["report"] = rep;
    return c;
}

// Builds, verifies and scales the certificate from the config.
LyapunovCertificate build_certificate(const ExperimentConfig& cfg) {
    const ConeSpec& cone = *cfg.cone;
    UtilitySpec util = cfg.utility();
    Vec p = cfg.certificate_p();
    double rho = cfg.certificate_rho();

    LyapunovCertificate cert = make_certificate(cone, cfg.model, p, rho);
    auto nodes = certificate_nodes(cone, cfg.grid.r_max, cfg.certificate.verify_n_radial,
                                   cfg.certificate.verify_n_angular);
    verify_lyapunov(cert, cfg.model, cone, util.beta, nodes, cfg.solver.threads);
    if (!cert.verified) {
        std::ostringstream ss;
        ss << "certificate verification failed: max L0 f_p = " << cert.report.max_l0
           << " (needs <= 1e-8; raise beta above the threshold "
           << cert.beta_threshold_tight << ")";
        throw NoScaleFound(ss.str());
    }
    double a0 = supersolution_scale(cert, cfg.model, cone, util, nodes);
    cert.scale = a0 * cfg.certificate.scale_multiplier;
    // re-verify strictness at the working scale
    ScalarField fp = lyapunov_field(cert.p, cert.rho);
    double worst = -kInf;
    for (const Vec& x : nodes) {
        double l0 = L0(fp, x, cfg.model, cone, util.beta);
        double up1 = fp.gradient(x)(0);
        double v = cert.scale * l0 + fenchel_dual(util, cert.scale * up1).value;
        worst = std::max(worst, v);
    }
    cert.report.max_supersol = worst;
    if (worst >= 0.0)
        throw NoScaleFound("scaled supersolution is not strict at the working scale");
    return cert;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

int cmd_solve(const ExperimentConfig& cfg, const std::string& out_dir, bool refine_flag) {
    double t0 = now_seconds();
    UtilitySpec util = cfg.utility();
    LyapunovCertificate cert = build_certificate(cfg);
    log_info("certificate verified; scale a = " + std::to_string(cert.scale));

    ConeGrid2D grid(*cfg.cone, cfg.grid.r_max, cfg.grid.n_radial, cfg.grid.n_angular);
    ValueField field = solve(cfg.model, *cfg.cone, util, grid, cert, cfg.solver);
    double t1 = now_seconds();
    log_info("solve converged in " + std::to_string(field.iterations) + " iterations, " +
             std::to_string(t1 - t0) + " s");

    {
        std::ostringstream os;
        field.write_csv(os);
        write_text(join_out(out_dir, cfg.output.field), os.str());
    }

    json diag;
    diag["config"] = config_to_json(cfg);
    json s;
    s["iterations"] = field.iterations;
    s["converged"] = field.converged;
    s["residual_history"] = field.residual_history;
    s["warnings"] = field.warnings;
    s["runtime_seconds"] = t1 - t0;
    s["certificate"] = cert_json(cert);
    diag["solve"] = s;
    write_text(join_out(out_dir, cfg.output.diagnostics), diag.dump(2) + "\n");

    if (refine_flag) {
        RefineReport rep =
            refine_study(cfg.model, *cfg.cone, util, cert, cfg.grid.r_max,
                         (cfg.grid.n_radial - 1) / 4 + 1, (cfg.grid.n_angular - 1) / 4 + 1,
                         3, cfg.solver);
        json r;
        r["n_radial"] = rep.n_radial;
        r["n_angular"] = rep.n_angular;
        r["sup_diffs"] = rep.sup_diffs;
        r["ratios"] = rep.ratios;
        r["empirical_order"] = rep.empirical_order;
        r["pass"] = rep.pass;
        r["trivial"] = rep.trivial;
        write_text(join_out(out_dir, cfg.output.refine), r.dump(2) + "\n");
    }
    return 0;
}

ValueField load_field_csv(const ExperimentConfig& cfg, const std::string& path) {
    ConeGrid2D grid(*cfg.cone, cfg.grid.r_max, cfg.grid.n_radial, cfg.grid.n_angular);
    ValueField field(grid);
    field.gamma = cfg.gamma;
    field.far_map_radius = grid.r_max() - grid.dr();
    field.w.assign(grid.size(), 0.0);
    field.branch.assign(grid.size(), ValueField::kBoundary);
    field.c_star.assign(grid.size(), 0.0);
    field.trade_gen.assign(grid.size(), -1);

    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field file " + path);
    std::string line;
    std::getline(in, line);  // header
    std::size_t k = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (k >= grid.size()) throw ConfigError("field file has too many rows for the grid");
        std::istringstream ss(line);
        std::string tok;
        double vals[3];
        for (int c = 0; c < 3; ++c) {
            if (!std::getline(ss, tok, ',')) throw ConfigError("field file: short row");
            vals[c] = std::stod(tok);
        }
        std::string branch;
        std::getline(ss, branch, ',');
        std::getline(ss, tok, ',');
        double cstar = std::stod(tok);
        std::getline(ss, tok, ',');
        int gen = std::stoi(tok);
        field.w[k] = vals[2];
        field.branch[k] = branch == "hold" ? ValueField::kHold
                        : branch == "trade" ? ValueField::kTrade : ValueField::kBoundary;
        field.c_star[k] = cstar;
        field.trade_gen[k] = gen;
        ++k;
    }
    if (k != grid.size()) throw ConfigError("field file row count does not match the grid");
    return field;
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& policy_arg) {
    UtilitySpec util = cfg.utility();
    const ConeSpec& cone = *cfg.cone;
    std::string spec = policy_arg.empty() ? cfg.simulation.policy : policy_arg;

    std::unique_ptr<Policy> policy;
    std::optional<ValueField> field;
    if (spec == "zero") {
        policy = std::make_unique<ZeroPolicy>();
    } else if (spec == "merton") {
        double sigma = 0.0;
        Mat a = cfg.model.a_matrix();
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            sigma = std::max(sigma, std::sqrt(a(i, i)));
        double mu = cfg.model.mu.maxCoeff();
        policy = std::make_unique<MertonPolicy>(
            MertonPolicy::classical(cone, mu, sigma, cfg.gamma, cfg.beta, 0.0, 0.0));
    } else if (spec.rfind("grid:", 0) == 0) {
        field = load_field_csv(cfg, spec.substr(5));
        policy = extract_policy(*field);
    } else if (spec == "grid") {
        field = load_field_csv(cfg, join_out(out_dir, cfg.output.field));
        policy = extract_policy(*field);
    } else {
        throw ConfigError("simulation.policy: unknown policy '" + spec + "'");
    }

    Vec x0 = cfg.simulation.x0;
    if (x0.size() == 0) {
        x0 = cone.interior_direction() * (0.5 * cfg.grid.r_max);
    }
    SimOptions opts;
    opts.horizon = cfg.simulation.horizon;
    opts.dt = cfg.simulation.dt;
    opts.n_paths = cfg.simulation.paths;
    opts.seed = cfg.seed;
    opts.keep_paths = true;
    opts.threads = cfg.solver.threads;

    EvalResult res = evaluate_policy(cfg.model, cone, util, *policy, x0, opts);
    std::ostringstream os;
    os << "path_id,theta,J\n";
    char buf[96];
    for (std::size_t i = 0; i < res.paths.size(); ++i) {
        const auto& p = res.paths[i];
        if (std::isfinite(p.theta))
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, p.theta, p.j);
        else
            std::snprintf(buf, sizeof buf, "%zu,inf,%.17g\n", i, p.j);
        os << buf;
    }
    write_text(join_out(out_dir, cfg.output.results), os.str());
    log_info("mean J = " + std::to_string(res.mean) + " +- " + std::to_string(res.ci99) +
             " (99% CI), ruin fraction " + std::to_string(res.ruin_fraction));
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& out_dir) {
    LyapunovCertificate cert = build_certificate(cfg);
    json out = cert_json(cert);
    write_text(join_out(out_dir, cfg.output.certificate), out.dump(2) + "\n");
    log_info("certificate written; beta threshold (tight) = " +
             std::to_string(cert.beta_threshold_tight));
    return 0;
}

int cmd_refine(const ExperimentConfig& cfg, const std::string& out_dir) {
    UtilitySpec util = cfg.utility();
    LyapunovCertificate cert = build_certificate(cfg);
    RefineReport rep = refine_study(cfg.model, *cfg.cone, util, cert, cfg.grid.r_max,
                                    cfg.grid.n_radial, cfg.grid.n_angular, 3, cfg.solver);
    json r;
    r["n_radial"] = rep.n_radial;
    r["n_angular"] = rep.n_angular;
    r["sup_diffs"] = rep.sup_diffs;
    r["ratios"] = rep.ratios;
    r["empirical_order"] = rep.empirical_order;
    r["pass"] = rep.pass;
    r["trivial"] = rep.trivial;
    write_text(join_out(out_dir, cfg.output.refine), r.dump(2) + "\n");
    log_info(std::string("refinement ") + (rep.pass ? "contracts" : "does not contract"));
    return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& out_dir) {
    UtilitySpec util = cfg.utility();
    const ConeSpec& cone = *cfg.cone;
    std::ostringstream os;
    os << "stage,seconds\n";
    char buf[96];
    auto record = [&](const char* stage, double secs) {
        std::snprintf(buf, sizeof buf, "%s,%.6f\n", stage, secs);
        os << buf;
        log_info(std::string(stage) + ": " + std::to_string(secs) + " s");
    };

    double t0 = now_seconds();
    LyapunovCertificate cert = build_certificate(cfg);
    record("certificate", now_seconds() - t0);

    t0 = now_seconds();
    int nr = std::max(2, (cfg.grid.n_radial - 1) / 2 + 1);
    int na = std::max(2, (cfg.grid.n_angular - 1) / 2 + 1);
    ConeGrid2D grid(cone, cfg.grid.r_max, nr, na);
    ValueField field = solve(cfg.model, cone, util, grid, cert, cfg.solver);
    record("solve_half_grid", now_seconds() - t0);

    t0 = now_seconds();
    auto policy = extract_policy(field);
    SimOptions opts;
    opts.horizon = std::min(cfg.simulation.horizon, 2.0);
    opts.dt = cfg.simulation.dt;
    opts.n_paths = std::min<std::size_t>(cfg.simulation.paths, 5000);
    opts.seed = cfg.seed;
    opts.threads = cfg.solver.threads;
    Vec x0 = cone.interior_direction() * (0.5 * cfg.grid.r_max);
    evaluate_policy(cfg.model, cone, util, *policy, x0, opts);
    record("simulate_short", now_seconds() - t0);

    t0 = now_seconds();
    ScalarField fp = lyapunov_field(cert.p, cert.rho);
    double acc = 0.0;
    for (int k = 0; k < 20000; ++k) {
        Vec x = cone.interior_direction() * (0.1 + 0.0001 * k);
        acc += nonlocal_I(fp, x, cfg.model, cone);
    }
    (void)acc;
    record("nonlocal_20k_evals", now_seconds() - t0);

    write_text(join_out(out_dir, cfg.output.timings), os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"consumption-investment HJB solver and verifier on solvency cones"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", log_level = "info", policy_arg, p_arg;
    std::uint64_t seed_override = 0;
    unsigned threads = 0;
    double rho_arg = 0.0;
    bool refine_flag = false;
    std::string verify_out, sim_out;
    std::size_t paths_override = 0;

    app.add_option("--config", config_path, "experiment config JSON")->required();
    app.add_option("--out-dir", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed_override, "seed override");
    app.add_option("--threads", threads, "worker threads (env CONEHJB_THREADS fallback)");
    app.add_option("--log-level", log_level, "quiet | info | debug");

    auto* solve_cmd = app.add_subcommand("solve", "solve the HJB variational inequality");
    solve_cmd->add_flag("--refine", refine_flag, "also run the refinement study");
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo policy evaluation");
    sim_cmd->add_option("--policy", policy_arg, "merton | zero | grid | grid:FILE");
    sim_cmd->add_option("--paths", paths_override, "number of paths");
    sim_cmd->add_option("--out", sim_out, "results CSV file");
    auto* verify_cmd = app.add_subcommand("verify", "build and verify a Lyapunov certificate");
    verify_cmd->add_option("--p", p_arg, "certificate direction, comma separated");
    verify_cmd->add_option("--rho", rho_arg, "certificate exponent");
    verify_cmd->add_option("--out", verify_out, "certificate output file");
    app.add_subcommand("refine", "grid refinement study");
    app.add_subcommand("bench", "timing benchmarks");

    CLI11_PARSE(app, argc, argv);

    if (log_level == "quiet") g_log_level = 0;
    else if (log_level == "debug") g_log_level = 2;

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed_override;
        if (paths_override > 0) cfg.simulation.paths = paths_override;
        if (!sim_out.empty()) cfg.output.results = sim_out;
        if (threads == 0) {
            if (const char* env = std::getenv("CONEHJB_THREADS"))
                threads = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
        }
        if (threads > 0) cfg.solver.threads = threads;
        if (!p_arg.empty()) {
            std::vector<double> vals;
            std::istringstream ss(p_arg);
            std::string tok;
            while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
            Vec p(static_cast<Eigen::Index>(vals.size()));
            for (std::size_t i = 0; i < vals.size(); ++i)
                p(static_cast<Eigen::Index>(i)) = vals[i];
            cfg.certificate.p = p;
        }
        if (rho_arg > 0.0) cfg.certificate.rho = rho_arg;
        if (!verify_out.empty()) cfg.output.certificate = verify_out;
        std::filesystem::create_directories(out_dir);

        if (solve_cmd->parsed()) return cmd_solve(cfg, out_dir, refine_flag);
        if (sim_cmd->parsed()) return cmd_simulate(cfg, out_dir, policy_arg);
        if (verify_cmd->parsed()) return cmd_verify(cfg, out_dir);
        if (app.get_subcommand("refine")->parsed()) return cmd_refine(cfg, out_dir);
        if (app.get_subcommand("bench")->parsed()) return cmd_bench(cfg, out_dir);
        return 1;
    } catch (const Error& e) {
        json err;
        err["error"] = {{"type", "conehjb"}, {"message", e.what()}};
        std::cout << err.dump() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        json err;
        err["error"] = {{"type", "internal"}, {"message", e.what()}};
        std::cout << err.dump() << std::endl;
        return 1;
    }
}
