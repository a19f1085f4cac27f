#include "lanekoop/lane_change.hpp"

#include <cmath>
#include <sstream>

namespace lanekoop {

std::vector<std::string> LaneConfig::violations() const {
    std::vector<std::string> out;
    auto finite = [](double x) { return std::isfinite(x); };
    if (!(finite(lane_width) && lane_width > 0.0)) out.push_back("w_L must be > 0");
    if (!finite(vehicle_width)) out.push_back("w_V must be finite");
    if (!(finite(sample_time) && sample_time > 0.0)) out.push_back("T must be > 0");
    if (!(finite(psi0_max) && psi0_max > 0.0 && psi0_max < std::numbers::pi / 2.0)) {
        out.push_back("psi_0_max must lie in (0, 90) degrees");
    }
    if (!(finite(sigma_a) && sigma_a >= 0.0)) out.push_back("sigma_a_s must be >= 0");
    if (!(finite(sigma_y) && sigma_y >= 0.0)) out.push_back("sigma_y_L must be >= 0");
    if (!finite(s0)) out.push_back("s_0 must be finite");
    if (!(finite(v0) && v0 > 0.0)) out.push_back("v_0 must be > 0 (the vehicle has to make progress)");
    if (!finite(a0)) out.push_back("a_0 must be finite");
    if (n_traj < 1) out.push_back("N_T must be >= 1");
    return out;
}

void LaneConfig::validate() const {
    const auto bad = violations();
    if (bad.empty()) return;
    std::ostringstream msg;
    msg << "invalid lane configuration:";
    for (const auto& b : bad) msg << "\n  - " << b;
    throw ConfigError(msg.str());
}

double sample_initial_lateral(const LaneConfig& cfg, Rng& rng) {
    const double lower = 0.5 * cfg.lane_width;
    const double upper = 1.5 * cfg.lane_width;
    for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
        const double y = lower + cfg.sigma_y * standard_normal(rng);
        if (y > lower && y <= upper) return y;
    }
    throw SamplingError("sample_initial_lateral: no draw landed in (w_L/2, 3 w_L/2] after " +
                        std::to_string(kMaxRejections) + " attempts (sigma_y_L too small?)");
}

double sample_initial_yaw(const LaneConfig& cfg, Rng& rng) {
    // 1 - u with u in [0, 1) maps onto (0, 1].
    return cfg.psi0_max * (1.0 - uniform01(rng));
}

LaneGeometry lane_change_geometry(double y_L0, double psi0, double lane_width) {
    if (!(lane_width > 0.0)) throw DomainError("lane_change_geometry: lane width must be > 0");
    if (!(psi0 > 0.0 && psi0 < std::numbers::pi / 2.0)) {
        throw DomainError("lane_change_geometry: psi0 must lie in (0, pi/2)");
    }
    const double z = 2.0 * y_L0 / lane_width - 2.0;
    if (!(z >= -1.0 && z <= 1.0)) {
        throw DomainError("lane_change_geometry: 2 y_L0 / w_L - 2 outside [-1, 1]");
    }
    // cos(asin z) == sqrt(1 - z^2), written so the endpoints give exact zeros.
    const double cos_phase = std::sqrt((1.0 - z) * (1.0 + z));
    LaneGeometry g;
    g.y_L0 = y_L0;
    g.psi0 = psi0;
    g.d_L = lane_width * std::numbers::pi / (2.0 * std::tan(psi0)) * cos_phase;
    g.x_L = (0.5 + std::asin(z) / std::numbers::pi) * g.d_L;
    return g;
}

LongState step_longitudinal(const LongState& state, double sample_time, double sigma_a, Rng& rng) {
    const double t = sample_time;
    const double half_t2 = 0.5 * t * t;
    const double w = sigma_a * standard_normal(rng);
    return LongState{
        state.s + t * state.v + half_t2 * state.a + half_t2 * w,
        state.v + t * state.a + t * w,
        state.a + w,
    };
}

double lateral_position(double arc, double d_L, double lane_width) {
    if (!(d_L > 0.0) || !std::isfinite(d_L)) {
        throw DomainError("lateral_position: d_L must be positive and finite");
    }
    if (!(arc >= 0.0 && arc <= d_L)) {
        throw DomainError("lateral_position: arc outside [0, d_L]");
    }
    return 0.5 * lane_width * std::sin(std::numbers::pi * arc / d_L - std::numbers::pi / 2.0) +
           lane_width;
}

std::vector<TrajectorySample> trajectory_from_geometry(const LaneConfig& cfg,
                                                       const LaneGeometry& geometry, Rng& rng) {
    std::vector<TrajectorySample> samples;
    if (!(geometry.d_L > 0.0)) return samples;
    LongState state{cfg.s0, cfg.v0, cfg.a0};
    while (true) {
        const double arc = state.s + geometry.x_L;
        if (!(arc >= 0.0 && arc <= geometry.d_L)) break;
        samples.push_back({state.s, lateral_position(arc, geometry.d_L, cfg.lane_width)});
        if (samples.size() >= kMaxSamplesPerTrajectory) {
            throw SamplingError("trajectory exceeded " + std::to_string(kMaxSamplesPerTrajectory) +
                                " samples");
        }
        state = step_longitudinal(state, cfg.sample_time, cfg.sigma_a, rng);
    }
    return samples;
}

Trajectory generate_trajectory(const LaneConfig& cfg, Rng& rng) {
    Trajectory traj;
    for (std::size_t attempt = 0; attempt < kMaxRejections; ++attempt) {
        const double y0 = sample_initial_lateral(cfg, rng);
        const double psi0 = sample_initial_yaw(cfg, rng);
        traj.geometry = lane_change_geometry(y0, psi0, cfg.lane_width);
        traj.samples = trajectory_from_geometry(cfg, traj.geometry, rng);
        if (traj.samples.size() >= 2) {
            traj.resamples = attempt;
            return traj;
        }
    }
    throw SamplingError("generate_trajectory: every sampled geometry gave fewer than 2 samples");
}

Trajectory generate_dataset_entry(const LaneConfig& cfg, std::uint64_t master_seed, std::uint64_t index) {
    Rng rng = derive_stream(master_seed, StreamDomain::Trajectory, index);
    try {
        Trajectory traj = generate_trajectory(cfg, rng);
        traj.seed_id = index;
        return traj;
    } catch (const SamplingError& e) {
        throw SamplingError("trajectory " + std::to_string(index) + ": " + e.what());
    }
}

std::vector<Trajectory> generate_dataset(const LaneConfig& cfg, std::uint64_t master_seed) {
    cfg.validate();
    std::vector<Trajectory> out;
    out.reserve(cfg.n_traj);
    for (std::size_t i = 0; i < cfg.n_traj; ++i) {
        out.push_back(generate_dataset_entry(cfg, master_seed, i));
    }
    return out;
}

}  // namespace lanekoop
