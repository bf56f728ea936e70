#include "conehjb/config.hpp"

#include <fstream>

namespace conehjb {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
}

const json& need(const json& j, const char* key, const std::string& scope) {
    auto it = j.find(key);
    if (it == j.end()) fail(scope + key, "missing");
    return *it;
}

double need_number(const json& j, const char* key, const std::string& scope) {
    const json& v = need(j, key, scope);
    if (!v.is_number()) fail(scope + key, "must be a number");
    return v.get<double>();
}

Vec to_vec(const json& v, const std::string& field) {
    if (!v.is_array()) fail(field, "must be an array");
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (const auto& e : v) {
        if (!e.is_number()) fail(field, "must contain numbers");
        out(i++) = e.get<double>();
    }
    return out;
}

Mat to_mat(const json& v, const std::string& field) {
    if (!v.is_array() || v.empty()) fail(field, "must be a nonempty array of rows");
    std::size_t cols = 0;
    std::vector<Vec> rows;
    for (const auto& r : v) {
        Vec row = to_vec(r, field);
        if (rows.empty()) cols = static_cast<std::size_t>(row.size());
        else if (static_cast<std::size_t>(row.size()) != cols) fail(field, "ragged rows");
        rows.push_back(std::move(row));
    }
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
    return m;
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_to_json(m.row(i)));
    return a;
}

}  // namespace

Vec ExperimentConfig::certificate_p() const {
    if (certificate.p.size() > 0) return certificate.p;
    if (!cone) throw ConfigError("cone: missing");
    Vec p = Vec::Zero(cone->dim());
    for (const Vec& n : cone->facet_normals()) p += n;
    double slack = cone->dual_slack(p);
    if (slack <= 0.0) throw ConfigError("certificate.p: auto direction failed, supply p");
    double margin = 2.0 * LyapunovCertificate::kDualMargin;
    if (slack < margin) p *= margin / slack;
    return p;
}

ExperimentConfig parse_config(const json& root) {
    const json& j = root.contains("config") ? root.at("config") : root;
    ExperimentConfig cfg;

    if (!j.contains("schema_version")) fail("schema_version", "missing");
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != 1) fail("schema_version", "unsupported (expected 1)");

    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();

    // model
    {
        const json& m = need(j, "model", "");
        cfg.model.mu = to_vec(need(m, "mu", "model."), "model.mu");
        cfg.model.xi = to_mat(need(m, "xi", "model."), "model.xi");
        if (m.contains("jumps")) {
            for (const auto& a : m.at("jumps")) {
                JumpAtom atom;
                atom.z = to_vec(need(a, "z", "model.jumps."), "model.jumps.z");
                atom.lam = need_number(a, "lam", "model.jumps.");
                cfg.model.jumps.push_back(std::move(atom));
            }
        }
        try {
            validate(cfg.model);
        } catch (const Error& e) {
            fail("model", e.what());
        }
    }

    // cone
    {
        const json& c = need(j, "cone", "");
        try {
            if (c.contains("costs")) {
                cfg.cone = ConeSpec::solvency_cone_from_costs(
                    CostMatrix(to_mat(c.at("costs"), "cone.costs")));
            } else if (c.contains("generators")) {
                Mat g = to_mat(c.at("generators"), "cone.generators");
                std::vector<Vec> gens;
                for (Eigen::Index i = 0; i < g.rows(); ++i) gens.push_back(g.row(i));
                if (c.contains("facet_normals")) {
                    Mat n = to_mat(c.at("facet_normals"), "cone.facet_normals");
                    std::vector<Vec> normals;
                    for (Eigen::Index i = 0; i < n.rows(); ++i) normals.push_back(n.row(i));
                    cfg.cone = ConeSpec(g.cols(), std::move(gens), std::move(normals));
                } else {
                    cfg.cone = ConeSpec::from_generators(g.cols(), std::move(gens));
                }
            } else {
                fail("cone", "needs either costs or generators");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            fail("cone", e.what());
        }
        if (cfg.cone->dim() != cfg.model.dim()) fail("cone", "dimension mismatch with model");
    }

    // utility
    {
        const json& u = need(j, "utility", "");
        cfg.gamma = need_number(u, "gamma", "utility.");
        cfg.beta = need_number(u, "beta", "utility.");
        if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) fail("utility.gamma", "must lie in (0,1)");
        if (!(cfg.beta > 0.0)) fail("utility.beta", "must be positive");
    }

    if (j.contains("grid")) {
        const json& g = j.at("grid");
        cfg.grid.r_max = need_number(g, "r_max", "grid.");
        cfg.grid.n_radial = static_cast<int>(need_number(g, "n_radial", "grid."));
        cfg.grid.n_angular = static_cast<int>(need_number(g, "n_angular", "grid."));
        if (cfg.grid.r_max <= 0.0) fail("grid.r_max", "must be positive");
        if (cfg.grid.n_radial < 2 || cfg.grid.n_angular < 2)
            fail("grid.n_radial/n_angular", "must be >= 2");
    }

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        if (s.contains("dt")) cfg.solver.dt = s.at("dt").get<double>();
        if (s.contains("dt_factor")) cfg.solver.dt_factor = s.at("dt_factor").get<double>();
        if (s.contains("tol")) cfg.solver.tol = s.at("tol").get<double>();
        if (s.contains("max_outer")) cfg.solver.max_outer = s.at("max_outer").get<int>();
        if (s.contains("trade_step")) cfg.solver.trade_step = s.at("trade_step").get<double>();
        if (s.contains("check_monotonicity"))
            cfg.solver.check_monotonicity = s.at("check_monotonicity").get<bool>();
        if (cfg.solver.tol <= 0.0) fail("solver.tol", "must be positive");
    }

    if (j.contains("certificate")) {
        const json& c = j.at("certificate");
        if (c.contains("p")) cfg.certificate.p = to_vec(c.at("p"), "certificate.p");
        if (c.contains("rho")) cfg.certificate.rho = c.at("rho").get<double>();
        if (c.contains("scale_multiplier"))
            cfg.certificate.scale_multiplier = c.at("scale_multiplier").get<double>();
        if (cfg.certificate.scale_multiplier < 1.0)
            fail("certificate.scale_multiplier", "must be >= 1");
        if (c.contains("verify_n_radial"))
            cfg.certificate.verify_n_radial = c.at("verify_n_radial").get<int>();
        if (c.contains("verify_n_angular"))
            cfg.certificate.verify_n_angular = c.at("verify_n_angular").get<int>();
    }

    if (j.contains("simulation")) {
        const json& s = j.at("simulation");
        if (s.contains("policy")) cfg.simulation.policy = s.at("policy").get<std::string>();
        if (s.contains("paths")) cfg.simulation.paths = s.at("paths").get<std::size_t>();
        if (s.contains("dt")) cfg.simulation.dt = s.at("dt").get<double>();
        if (s.contains("horizon")) cfg.simulation.horizon = s.at("horizon").get<double>();
        if (s.contains("x0")) cfg.simulation.x0 = to_vec(s.at("x0"), "simulation.x0");
        if (cfg.simulation.dt <= 0.0) fail("simulation.dt", "must be positive");
        if (cfg.simulation.horizon <= 0.0) fail("simulation.horizon", "must be positive");
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        auto get = [&](const char* key, std::string& dst) {
            if (o.contains(key)) dst = o.at(key).get<std::string>();
        };
        get("field", cfg.output.field);
        get("diagnostics", cfg.output.diagnostics);
        get("results", cfg.output.results);
        get("certificate", cfg.output.certificate);
        get("refine", cfg.output.refine);
        get("timings", cfg.output.timings);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;
    json m;
    m["mu"] = vec_to_json(cfg.model.mu);
    m["xi"] = mat_to_json(cfg.model.xi);
    json jumps = json::array();
    for (const auto& a : cfg.model.jumps)
        jumps.push_back(json{{"z", vec_to_json(a.z)}, {"lam", a.lam}});
    m["jumps"] = jumps;
    j["model"] = m;

    json c;
    Mat g(static_cast<Eigen::Index>(cfg.cone->generators().size()), cfg.cone->dim());
    for (std::size_t i = 0; i < cfg.cone->generators().size(); ++i)
        g.row(static_cast<Eigen::Index>(i)) = cfg.cone->generators()[i];
    Mat n(static_cast<Eigen::Index>(cfg.cone->facet_normals().size()), cfg.cone->dim());
    for (std::size_t i = 0; i < cfg.cone->facet_normals().size(); ++i)
        n.row(static_cast<Eigen::Index>(i)) = cfg.cone->facet_normals()[i];
    c["generators"] = mat_to_json(g);
    c["facet_normals"] = mat_to_json(n);
    j["cone"] = c;

    j["utility"] = json{{"gamma", cfg.gamma}, {"beta", cfg.beta}};
    j["grid"] = json{{"r_max", cfg.grid.r_max},
                     {"n_radial", cfg.grid.n_radial},
                     {"n_angular", cfg.grid.n_angular}};
    j["solver"] = json{{"dt", cfg.solver.dt},
                       {"dt_factor", cfg.solver.dt_factor},
                       {"tol", cfg.solver.tol},
                       {"max_outer", cfg.solver.max_outer},
                       {"trade_step", cfg.solver.trade_step},
                       {"check_monotonicity", cfg.solver.check_monotonicity}};
    json cert;
    cert["p"] = vec_to_json(cfg.certificate_p());
    cert["rho"] = cfg.certificate_rho();
    cert["scale_multiplier"] = cfg.certificate.scale_multiplier;
    cert["verify_n_radial"] = cfg.certificate.verify_n_radial;
    cert["verify_n_angular"] = cfg.certificate.verify_n_angular;
    j["certificate"] = cert;
    json sim;
    sim["policy"] = cfg.simulation.policy;
    sim["paths"] = cfg.simulation.paths;
    sim["dt"] = cfg.simulation.dt;
    sim["horizon"] = cfg.simulation.horizon;
    if (cfg.simulation.x0.size() > 0) sim["x0"] = vec_to_json(cfg.simulation.x0);
    j["simulation"] = sim;
    j["output"] = json{{"field", cfg.output.field},
                       {"diagnostics", cfg.output.diagnostics},
                       {"results", cfg.output.results},
                       {"certificate", cfg.output.certificate},
                       {"refine", cfg.output.refine},
                       {"timings", cfg.output.timings}};
    return j;
}

}  // namespace conehjb
