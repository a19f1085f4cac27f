#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lanekoop {

// Snapshot data is stored one observable per row so each row is a contiguous
// stream over the m columns.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

// Error taxonomy. The CLI maps these onto exit codes.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : NumericalError {
    DivergenceError(const std::string& what, std::size_t step_)
        : NumericalError(what), step(step_) {}
    std::size_t step;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Stream domains keep independent consumers of one master seed apart.
enum class StreamDomain : std::uint32_t {
    Trajectory = 1,
    RadialCenters = 2,
};

/// Child stream for (master seed, domain, index). Depends only on its inputs,
/// so trajectory i is the same no matter which order trajectories are built.
Rng derive_stream(std::uint64_t master_seed, StreamDomain domain, std::uint64_t index);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Standard normal draw.
double standard_normal(Rng& rng);

/// FNV-1a over a byte string; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view bytes);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace lanekoop
