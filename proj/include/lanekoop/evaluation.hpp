#pragma once
// Truncation fidelity and solve-time comparison between full and truncated
// system matrices.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lanekoop/edmd.hpp"

namespace lanekoop {

double frobenius_norm(const Eigen::MatrixXd& b);
double frobenius_norm(const RowMatrix& b);

/// 100 * |A - A~|_F / |A|_F. Throws DomainError when |A|_F = 0.
double reconstruction_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_tilde);

enum class Route { Full, Truncated };

/// Which work the timed region covers.
enum class TimeScope {
    Solve,        // pseudo-inverse application and the X' product, shared SVD
    SvdAndSolve,  // the thin SVD of X as well
};

std::string time_scope_name(TimeScope scope);
TimeScope parse_time_scope(const std::string& name);

struct TimingSample {
    Route route = Route::Full;
    std::vector<std::int64_t> durations_ns;
    std::size_t repeats = 0;
    std::size_t warmups = 0;
    /// Sum of the result entries for every timed repeat; doubles as the sink
    /// that keeps the solve from being optimised away.
    std::vector<double> checksums;

    std::int64_t min_ns() const;
    double median_ns() const;
    double stddev_ns() const;
};

/// Times `repeats` solves of the system matrix at `rank` (nullopt: full rank)
/// after `warmups` untimed runs. Runs on the calling thread only.
TimingSample benchmark_solve(const SnapshotPair& pair, const SvdFactors& f, std::optional<std::size_t> rank,
                             std::size_t repeats, std::size_t warmups, TimeScope scope = TimeScope::Solve);

/// 100 * min(truncated) / min(full). Not clamped: values above 100 happen.
double relative_time(const TimingSample& truncated, const TimingSample& full);
double relative_time_median(const TimingSample& truncated, const TimingSample& full);

/// Root-mean-square distance between retrieved one-step predictions and the
/// retrieved successor states, over all snapshot columns.
double one_step_rmse(const IdentifiedModel& model, const SnapshotPair& pair);

/// |X' - A X|_F.
double lifted_residual(const Eigen::MatrixXd& a, const SnapshotPair& pair);

struct RunExtras {
    Eigen::VectorXd sigma;
    Eigen::VectorXd energy;
    double condition_number = 0.0;
    double one_step_rmse = 0.0;
    double lifted_residual = 0.0;
};

/// One identified model with what the table needs beside it.
struct ModelRun {
    IdentifiedModel model;
    std::optional<TimingSample> timing;
    std::size_t columns = 0;  // m of the snapshot matrix
    RunExtras extras;
};

struct EvalRow {
    std::string basis_label;
    std::string rule_label;
    std::size_t rank = 0;
    std::size_t r_max = 0;
    double re_percent = 0.0;
    double t_rel_min_percent = 0.0;
    double t_rel_median_percent = 0.0;
    std::uint64_t flops_full = 0;
    std::uint64_t flops_trunc = 0;
    RunExtras extras;
};

/// One row per run, ordered monomial before radial and E-rules (ascending),
/// HT, fixed ranks, full within a basis. `references` must hold one full-rank
/// run per basis that appears in `runs`.
std::vector<EvalRow> build_table(std::span<const ModelRun> runs, std::span<const ModelRun> references);

}  // namespace lanekoop
