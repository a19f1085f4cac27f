#pragma once
// Snapshot assembly, thin SVD, rank selection and (truncated) Koopman system
// matrices for X' ~ A X.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lanekoop/common.hpp"
#include "lanekoop/observables.hpp"

namespace lanekoop {

/// Lifted snapshots X (d x m) and their one-step successors X' (d x m).
/// Columns never pair states from different trajectories.
struct SnapshotPair {
    RowMatrix x;
    RowMatrix x_shift;
    /// Number of columns contributed by each trajectory, in order.
    std::vector<std::size_t> block_columns;

    std::size_t dim() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t columns() const { return static_cast<std::size_t>(x.cols()); }
};

SnapshotPair build_snapshots(std::span<const LiftedTrajectory> lifted);

/// Thin SVD X = U diag(sigma) V^T restricted to the numerical rank.
struct SvdFactors {
    Eigen::MatrixXd u;      // d x r_max, orthonormal columns
    Eigen::VectorXd sigma;  // r_max values, descending, positive
    Eigen::MatrixXd v;      // m x r_max, orthonormal columns
    std::size_t source_rows = 0;
    std::size_t source_cols = 0;

    std::size_t rank() const { return static_cast<std::size_t>(sigma.size()); }
};

/// Singular values below this fraction of sigma_1 are treated as zero.
inline constexpr double kRankTolerance = 1e-12;

/// Deterministic: the largest-magnitude entry of each U column is positive.
SvdFactors svd_thin(const RowMatrix& x);

/// X^T (X X^T)^{-1}. Throws NumericalError when X X^T is too ill-conditioned
/// for the normal equations (condition estimate above kNormalConditionLimit).
inline constexpr double kNormalConditionLimit = 1e12;
Eigen::MatrixXd pseudo_inverse_normal(const RowMatrix& x);

/// V diag(1/sigma) U^T.
Eigen::MatrixXd pseudo_inverse_svd(const SvdFactors& f);

// Rank-selection rules.
struct EnergyRule {
    double percent = 90.0;
    /// Percentage points subtracted from the target before comparing.
    double slack = 0.0;
    /// Accumulate sigma^2 instead of sigma.
    bool squared = false;
};

enum class HtSemantics {
    /// omega(beta) * sigma_med read as a rank bound: full rank when it reaches
    /// r_max, otherwise floor of it (at least 1).
    RankBound,
    /// Number of singular values strictly above tau = omega(beta) * sigma_med.
    Count,
};

struct HardThresholdRule {
    HtSemantics semantics = HtSemantics::RankBound;
};

struct FixedRule {
    std::size_t rank = 1;
};

struct FullRule {};

using RankRule = std::variant<EnergyRule, HardThresholdRule, FixedRule, FullRule>;

/// Short label used in file names and tables: E90, E99, HT, r3, full.
std::string rule_label(const RankRule& rule);

/// E_r = 100 * sum_{i<=r} sigma_i / sum_i sigma_i (sigma^2 when squared).
Eigen::VectorXd energy_profile(const Eigen::VectorXd& sigma, bool squared = false);

/// Cubic approximation of the optimal hard-threshold coefficient for an
/// unknown noise level; beta = min(n, m) / max(n, m).
double omega_beta(double beta);

double median(const Eigen::VectorXd& values);

/// Hard-threshold value omega(beta) * median(sigma) for an n x m source.
double hard_threshold_value(const SvdFactors& f);

std::size_t select_rank(const SvdFactors& f, const RankRule& rule);

/// Leading r singular triplets.
SvdFactors truncate(const SvdFactors& f, std::size_t r);

struct IdentifiedModel {
    Eigen::MatrixXd a;
    std::size_t rank_used = 0;
    std::size_t r_max = 0;
    RankRule rule = FullRule{};
    BasisSpec basis;
    /// Wall time of the solve stage that produced `a`.
    std::int64_t timing_ns = 0;

    std::size_t dim() const { return static_cast<std::size_t>(a.rows()); }
};

/// Floating-point operations actually executed by solve_system.
struct SolveStats {
    std::uint64_t flops = 0;
};

/// X' V_r diag(1/sigma_r) U_r^T, evaluated as (X' V_r) scaled then times U_r^T
/// so the length-m work is proportional to r.
Eigen::MatrixXd solve_system(const SnapshotPair& pair, const SvdFactors& f, std::size_t r,
                             SolveStats* stats = nullptr);

/// Analytic flop count of solve_system: 2 d m r + d r + 2 d^2 r.
std::uint64_t solve_flops(std::size_t d, std::size_t m, std::size_t r);

IdentifiedModel full_system_matrix(const SnapshotPair& pair, const BasisSpec& basis = {});
IdentifiedModel full_system_matrix(const SnapshotPair& pair, const SvdFactors& f,
                                   const BasisSpec& basis = {});
IdentifiedModel truncated_system_matrix(const SnapshotPair& pair, const SvdFactors& f, std::size_t r,
                                        const RankRule& rule = FixedRule{}, const BasisSpec& basis = {});

Eigen::VectorXd predict_next(const IdentifiedModel& model, const Eigen::VectorXd& lifted);
LiftedState predict_next(const IdentifiedModel& model, const LiftedState& lifted);

/// Entries beyond this magnitude abort a rollout.
inline constexpr double kDivergenceLimit = 1e12;

/// Propagates the lifted state `steps` times (never re-lifting) and records the
/// retrieved (s, y_L) at every step, starting with the initial state.
std::vector<StatePoint> rollout(const IdentifiedModel& model, const LiftedState& start, std::size_t steps);

/// Frobenius norm of left * right^T computed through thin QR factors, so an
/// m x m product never has to be formed.
double low_rank_product_norm(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right);

/// Relative residuals of the four Penrose conditions for (X, X^+).
struct PenroseResiduals {
    double x_pinv_x = 0.0;         // |X X+ X - X| / |X|
    double pinv_x_pinv = 0.0;      // |X+ X X+ - X+| / |X+|
    double x_pinv_symmetric = 0.0; // |(X X+)^T - X X+| / |X X+|
    double pinv_x_symmetric = 0.0; // |(X+ X)^T - X+ X| / |X+ X|

    double worst() const;
};

PenroseResiduals penrose_residuals(const RowMatrix& x, const Eigen::MatrixXd& pinv);

}  // namespace lanekoop
