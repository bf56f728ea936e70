// The driving Levy process Y (drift + diffusion + compensated compound
// Poisson jumps) and the price processes S^i = DoleansDade(Y^i).
#pragma once

#include "conehjb/common.hpp"
#include "conehjb/cone.hpp"
#include "conehjb/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace conehjb {

struct JumpAtom {
    Vec z;       // mark in (-1, inf)^d
    double lam;  // intensity per unit time
};

/// Y_t = mu t + Xi w_t + compensated jumps with a finitely supported jump
/// measure Pi = sum_j lam_j delta_{z_j}.
struct LevyModel {
    Vec mu;                      // drift per unit time
    Mat xi;                      // d x m diffusion factor, A = xi xi^T
    std::vector<JumpAtom> jumps; // atoms of Pi

    Eigen::Index dim() const { return mu.size(); }

    /// A = Xi Xi^T (symmetric positive semidefinite).
    Mat a_matrix() const;

    /// Total jump intensity sum_j lam_j.
    double total_intensity() const;

    /// Compensator drift sum_j lam_j z_j.
    Vec jump_compensator() const;

    /// Effective continuous drift mu - sum_j lam_j z_j.
    Vec effective_drift() const;

    /// sum_j lam_j (|z_j|^2 ^ |z_j|), the paper's integrability functional.
    double jump_integrability() const;
};

/// Checks atom support (> -1 componentwise) and intensities (>= 0).
/// Throws SupportViolation / NegativeIntensity.
void validate(const LevyModel& model);

/// validate() plus a warning scan: reports atoms that map a canonical test
/// point exactly onto the cone boundary, which would break the uniqueness
/// hypothesis Pi(z : x + D_x z in dK) = 0.
std::vector<std::string> validate(const LevyModel& model, const ConeSpec& cone,
                                  double boundary_tol = 1e-12);

/// One simulated path of Y on a uniform time grid with jump events placed at
/// their exact sampled times.
struct PathY {
    struct Event {
        double t_begin = 0.0;   // start of the slice
        double t_end = 0.0;     // end of the slice (jump time or grid time)
        Vec dy_cont;            // continuous increment over the slice
        int jump_atom = -1;     // atom index if a jump fires at t_end
    };
    Eigen::Index dim = 0;
    double horizon = 0.0;
    double dt = 0.0;
    std::vector<Event> events;
};

/// Y at the end of every event slice, jump marks included.
std::vector<Vec> accumulate_y(const PathY& path, const LevyModel& model);

/// Euler-grid simulation of Y: continuous increments
///   (mu - sum lam_j z_j) dt + Xi sqrt(dt) xi
/// with per-atom exponential jump clocks. Deterministic given
/// (seed, path_index): the generator is counter-based.
PathY simulate_path(const LevyModel& model, double horizon, double dt,
                    std::uint64_t seed, std::uint64_t path_index = 0);

/// Doleans-Dade exponential of component i along the path:
///   S^i_t = exp(Y^{ic}_t - 0.5 A^{ii} t) * prod_{jumps} (1 + z^i).
/// S^i_0 = 1 and S^i > 0. Returns the value after every event slice.
/// Throws NonpositivePrice if a jump factor 1 + z^i <= 0 slips through.
std::vector<double> stochastic_exponential(const PathY& path, const LevyModel& model,
                                           Eigen::Index asset);

/// CSV export: t, Y^1..Y^d, S^1..S^d.
void export_path_csv(std::ostream& os, const PathY& path, const LevyModel& model);

}  // namespace conehjb
