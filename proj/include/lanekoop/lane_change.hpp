#pragma once
// Stochastic lane-change trajectories: constant-acceleration longitudinal
// motion with a sinusoidal lateral transition from the right-lane centre line
// (y_L = w_L/2) to the left-lane centre line (y_L = 3 w_L/2).

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "lanekoop/common.hpp"

namespace lanekoop {

/// Sampling and kinematic parameters. Units: metres, seconds, radians.
struct LaneConfig {
    double lane_width = 3.5;
    double vehicle_width = 1.5;
    double sigma_a = 0.2 / 3.0;
    double sigma_y = 1.0 / 3.0;
    double sample_time = 0.1;
    double psi0_max = 15.0 * std::numbers::pi / 180.0;
    double s0 = 0.0;
    double v0 = 10.0;
    double a0 = 0.0;
    std::size_t n_traj = 100;

    /// Every violated invariant, one message each. Empty when valid.
    std::vector<std::string> violations() const;
    void validate() const;
};

struct LongState {
    double s = 0.0;
    double v = 0.0;
    double a = 0.0;
};

struct LaneGeometry {
    double y_L0 = 0.0;
    double psi0 = 0.0;
    double d_L = 0.0;
    double x_L = 0.0;
};

struct TrajectorySample {
    double s = 0.0;
    double y = 0.0;

    bool operator==(const TrajectorySample&) const = default;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    LaneGeometry geometry;
    std::uint64_t seed_id = 0;
    /// Geometry draws discarded before this one (too short to give two samples).
    std::size_t resamples = 0;
};

/// Rejection attempts before sampling gives up.
inline constexpr std::size_t kMaxRejections = 10'000;
/// Hard cap on samples per trajectory; guards against a stalled vehicle.
inline constexpr std::size_t kMaxSamplesPerTrajectory = 20'000'000;

/// y_L0 ~ N(w_L/2, sigma_y^2) restricted to (w_L/2, 3 w_L/2].
double sample_initial_lateral(const LaneConfig& cfg, Rng& rng);

/// psi0 ~ U(0, psi0_max].
double sample_initial_yaw(const LaneConfig& cfg, Rng& rng);

/// Sinusoid length d_L and the offset x_L of the start point along it.
LaneGeometry lane_change_geometry(double y_L0, double psi0, double lane_width);

/// One constant-acceleration step with acceleration noise w ~ N(0, sigma_a^2)
/// entering through g = [T^2/2, T, 1]. The resulting covariance
/// sigma_a^2 g g^T is rank one, so one scalar draw is exact.
LongState step_longitudinal(const LongState& state, double sample_time, double sigma_a, Rng& rng);

/// Lateral position at arc length `arc` (= s_k + x_L) along the sinusoid.
double lateral_position(double arc, double d_L, double lane_width);

/// Rolls the kinematics forward from (s0, v0, a0) for a fixed geometry and
/// keeps samples while s_k + x_L <= d_L.
std::vector<TrajectorySample> trajectory_from_geometry(const LaneConfig& cfg,
                                                       const LaneGeometry& geometry, Rng& rng);

/// Samples geometry and rolls out one trajectory; redraws geometry whenever
/// fewer than two samples would result.
Trajectory generate_trajectory(const LaneConfig& cfg, Rng& rng);

/// cfg.n_traj trajectories; trajectory i uses its own child stream of master_seed.
std::vector<Trajectory> generate_dataset(const LaneConfig& cfg, std::uint64_t master_seed);

/// Trajectory i of the dataset for master_seed, built on its own.
Trajectory generate_dataset_entry(const LaneConfig& cfg, std::uint64_t master_seed, std::uint64_t index);

}  // namespace lanekoop
