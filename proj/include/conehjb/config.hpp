// Experiment configuration: JSON ingestion, cross-field validation and
// construction of the domain objects.
#pragma once

#include "conehjb/cone.hpp"
#include "conehjb/common.hpp"
#include "conehjb/levy.hpp"
#include "conehjb/solver.hpp"
#include "conehjb/utility.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace conehjb {

struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t seed = 1;

    LevyModel model;
    std::optional<ConeSpec> cone;
    double gamma = 0.0;
    double beta = 0.0;

    struct GridBlock {
        double r_max = 4.0;
        int n_radial = 100;
        int n_angular = 60;
    } grid;

    SolverOptions solver;

    struct CertificateBlock {
        Vec p;                      // empty = auto (scaled dual-interior direction)
        double rho = 0.0;           // 0 = use gamma
        double scale_multiplier = 2.0;
        int verify_n_radial = 24;
        int verify_n_angular = 48;
    } certificate;

    struct SimulationBlock {
        std::string policy = "grid";
        std::size_t paths = 10000;
        double dt = 1e-3;
        double horizon = 10.0;
        Vec x0;
    } simulation;

    struct OutputBlock {
        std::string field = "field.csv";
        std::string diagnostics = "diagnostics.json";
        std::string results = "results.csv";
        std::string certificate = "cert.json";
        std::string refine = "refine.json";
        std::string timings = "timings.csv";
    } output;

    UtilitySpec utility() const { return UtilitySpec(gamma, beta); }

    /// Certificate direction: configured p, or the facet-normal sum scaled to
    /// clear the dual-slack margin.
    Vec certificate_p() const;
    double certificate_rho() const { return certificate.rho > 0.0 ? certificate.rho : gamma; }
};

/// Parses and validates; throws ConfigError naming the offending field.
/// Accepts either a plain config object or a diagnostics file carrying the
/// resolved config under the "config" key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Serializes the resolved configuration (round-trips through parse_config).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace conehjb
