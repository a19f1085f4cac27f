#include "lanekoop/edmd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/SVD>

#include "lanekoop/simd.hpp"

namespace lanekoop {

SnapshotPair build_snapshots(std::span<const LiftedTrajectory> lifted) {
    if (lifted.empty()) throw std::invalid_argument("build_snapshots: no trajectories");
    const Eigen::Index d = lifted.front().values.rows();
    Eigen::Index m = 0;
    for (std::size_t i = 0; i < lifted.size(); ++i) {
        if (lifted[i].values.rows() != d) {
            throw std::invalid_argument("build_snapshots: trajectories lifted with different dimensions");
        }
        if (lifted[i].values.cols() < 2) {
            throw std::invalid_argument("build_snapshots: trajectory " + std::to_string(i) +
                                        " has fewer than 2 states");
        }
        m += lifted[i].values.cols() - 1;
    }

    SnapshotPair pair{RowMatrix(d, m), RowMatrix(d, m), {}};
    pair.block_columns.reserve(lifted.size());
    Eigen::Index col = 0;
    for (const auto& traj : lifted) {
        const Eigen::Index len = traj.values.cols() - 1;
        pair.x.middleCols(col, len) = traj.values.leftCols(len);
        pair.x_shift.middleCols(col, len) = traj.values.rightCols(len);
        pair.block_columns.push_back(static_cast<std::size_t>(len));
        col += len;
    }
    return pair;
}

SvdFactors svd_thin(const RowMatrix& x) {
    if (x.size() == 0) throw NumericalError("svd_thin: empty matrix");
    if (!x.allFinite()) throw NumericalError("svd_thin: non-finite entries");

    // Factor X^T (tall, m x d) so the QR preconditioner works on the long side.
    Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
        x.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) throw NumericalError("svd_thin: matrix is identically zero");

    Eigen::Index r = 0;
    while (r < s.size() && s(r) >= kRankTolerance * s(0)) ++r;

    SvdFactors f;
    f.sigma = s.head(r);
    f.u = svd.matrixV().leftCols(r);
    f.v = svd.matrixU().leftCols(r);
    f.source_rows = static_cast<std::size_t>(x.rows());
    f.source_cols = static_cast<std::size_t>(x.cols());

    for (Eigen::Index j = 0; j < r; ++j) {
        Eigen::Index pivot = 0;
        f.u.col(j).cwiseAbs().maxCoeff(&pivot);
        if (f.u(pivot, j) < 0.0) {
            f.u.col(j) *= -1.0;
            f.v.col(j) *= -1.0;
        }
    }
    return f;
}

Eigen::MatrixXd pseudo_inverse_normal(const RowMatrix& x) {
    const Eigen::Index d = x.rows();
    const auto m = static_cast<std::size_t>(x.cols());
    Eigen::MatrixXd gram(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            gram(i, j) = simd::dot({x.row(i).data(), m}, {x.row(j).data(), m});
            gram(j, i) = gram(i, j);
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > kNormalConditionLimit) {
        throw NumericalError(
            "pseudo_inverse_normal: X X^T is singular to working precision "
            "(condition estimate above 1e12); use the SVD route");
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    // X^+ = X^T G^{-1} = (G^{-1} X)^T
    const Eigen::MatrixXd solved = ldlt.solve(Eigen::MatrixXd(x));
    return solved.transpose();
}

Eigen::MatrixXd pseudo_inverse_svd(const SvdFactors& f) {
    return f.v * f.sigma.cwiseInverse().asDiagonal() * f.u.transpose();
}

std::string rule_label(const RankRule& rule) {
    struct Visitor {
        std::string operator()(const EnergyRule& e) const { return "E" + format_double(e.percent); }
        std::string operator()(const HardThresholdRule&) const { return "HT"; }
        std::string operator()(const FixedRule& f) const { return "r" + std::to_string(f.rank); }
        std::string operator()(const FullRule&) const { return "full"; }
    };
    return std::visit(Visitor{}, rule);
}

Eigen::VectorXd energy_profile(const Eigen::VectorXd& sigma, bool squared) {
    const Eigen::Index n = sigma.size();
    Eigen::VectorXd cumulative(n);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        acc += squared ? sigma(i) * sigma(i) : sigma(i);
        cumulative(i) = acc;
    }
    if (n == 0) return cumulative;
    return 100.0 * cumulative / acc;
}

double omega_beta(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw DomainError("omega_beta: beta must lie in (0, 1]");
    }
    return ((0.56 * beta - 0.95) * beta + 1.82) * beta + 1.43;
}

double median(const Eigen::VectorXd& values) {
    if (values.size() == 0) throw std::invalid_argument("median of empty vector");
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double hard_threshold_value(const SvdFactors& f) {
    const double lo = static_cast<double>(std::min(f.source_rows, f.source_cols));
    const double hi = static_cast<double>(std::max(f.source_rows, f.source_cols));
    return omega_beta(lo / hi) * median(f.sigma);
}

std::size_t select_rank(const SvdFactors& f, const RankRule& rule) {
    const std::size_t r_max = f.rank();
    if (r_max == 0) throw std::invalid_argument("select_rank: empty factors");

    if (const auto* e = std::get_if<EnergyRule>(&rule)) {
        if (!(e->percent > 0.0 && e->percent <= 100.0)) {
            throw std::invalid_argument("select_rank: energy threshold must lie in (0, 100]");
        }
        const Eigen::VectorXd profile = energy_profile(f.sigma, e->squared);
        const double target = e->percent - e->slack;
        for (std::size_t r = 0; r < r_max; ++r) {
            if (profile(static_cast<Eigen::Index>(r)) >= target) return r + 1;
        }
        return r_max;
    }
    if (const auto* ht = std::get_if<HardThresholdRule>(&rule)) {
        const double tau = hard_threshold_value(f);
        if (ht->semantics == HtSemantics::RankBound) {
            if (tau >= static_cast<double>(r_max)) return r_max;
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tau)));
        }
        std::size_t count = 0;
        for (Eigen::Index i = 0; i < f.sigma.size(); ++i) {
            if (f.sigma(i) > tau) ++count;
        }
        return std::clamp<std::size_t>(count, 1, r_max);
    }
    if (const auto* fixed = std::get_if<FixedRule>(&rule)) {
        if (fixed->rank < 1) throw std::invalid_argument("select_rank: fixed rank must be >= 1");
        return std::min(fixed->rank, r_max);
    }
    return r_max;
}

SvdFactors truncate(const SvdFactors& f, std::size_t r) {
    if (r < 1 || r > f.rank()) {
        throw std::out_of_range("truncate: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(f.rank()) + "]");
    }
    const auto n = static_cast<Eigen::Index>(r);
    SvdFactors t;
    t.u = f.u.leftCols(n);
    t.sigma = f.sigma.head(n);
    t.v = f.v.leftCols(n);
    t.source_rows = f.source_rows;
    t.source_cols = f.source_cols;
    return t;
}

std::uint64_t solve_flops(std::size_t d, std::size_t m, std::size_t r) {
    return 2ull * d * m * r + 1ull * d * r + 2ull * d * d * r;
}

Eigen::MatrixXd solve_system(const SnapshotPair& pair, const SvdFactors& f, std::size_t r, SolveStats* stats) {
    if (r < 1 || r > f.rank()) {
        throw std::out_of_range("solve_system: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(f.rank()) + "]");
    }
    const Eigen::Index d = pair.x_shift.rows();
    const auto m = static_cast<std::size_t>(pair.x_shift.cols());
    if (static_cast<std::size_t>(f.v.rows()) != m || f.u.rows() != d) {
        throw std::invalid_argument("solve_system: factors do not match the snapshot shape");
    }
    const auto rank = static_cast<Eigen::Index>(r);
    const simd::KernelTable& k = simd::kernels_for(simd::active_isa());
    std::uint64_t flops = 0;

    // W = X' V_r diag(1/sigma_r), one length-m dot product per entry.
    Eigen::MatrixXd w(d, rank);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double* row = pair.x_shift.row(i).data();
        for (Eigen::Index j = 0; j < rank; ++j) {
            w(i, j) = k.dot(row, f.v.col(j).data(), m) / f.sigma(j);
            flops += 2 * m + 1;
        }
    }
    // A = W U_r^T
    Eigen::MatrixXd a(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index c = 0; c < d; ++c) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < rank; ++j) acc += w(i, j) * f.u(c, j);
            a(i, c) = acc;
            flops += 2 * static_cast<std::uint64_t>(rank);
        }
    }
    if (stats) stats->flops = flops;
    return a;
}

namespace {

IdentifiedModel timed_solve(const SnapshotPair& pair, const SvdFactors& f, std::size_t r,
                            const RankRule& rule, const BasisSpec& basis) {
    IdentifiedModel model;
    const auto start = std::chrono::steady_clock::now();
    model.a = solve_system(pair, f, r);
    const auto stop = std::chrono::steady_clock::now();
    model.timing_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();
    model.rank_used = r;
    model.r_max = f.rank();
    model.rule = rule;
    model.basis = basis;
    if (!model.a.allFinite()) throw NumericalError("system matrix has non-finite entries");
    return model;
}

}  // namespace

IdentifiedModel full_system_matrix(const SnapshotPair& pair, const SvdFactors& f, const BasisSpec& basis) {
    return timed_solve(pair, f, f.rank(), FullRule{}, basis);
}

IdentifiedModel full_system_matrix(const SnapshotPair& pair, const BasisSpec& basis) {
    return full_system_matrix(pair, svd_thin(pair.x), basis);
}

IdentifiedModel truncated_system_matrix(const SnapshotPair& pair, const SvdFactors& f, std::size_t r,
                                        const RankRule& rule, const BasisSpec& basis) {
    if (r < 1 || r > f.rank()) {
        throw std::out_of_range("truncated_system_matrix: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(f.rank()) + "]");
    }
    return timed_solve(pair, f, r, rule, basis);
}

Eigen::VectorXd predict_next(const IdentifiedModel& model, const Eigen::VectorXd& lifted) {
    if (lifted.size() != model.a.cols()) {
        throw std::invalid_argument("predict_next: lifted state has dimension " +
                                    std::to_string(lifted.size()) + ", model expects " +
                                    std::to_string(model.a.cols()));
    }
    return model.a * lifted;
}

LiftedState predict_next(const IdentifiedModel& model, const LiftedState& lifted) {
    return LiftedState{predict_next(model, lifted.values), lifted.basis};
}

std::vector<StatePoint> rollout(const IdentifiedModel& model, const LiftedState& start, std::size_t steps) {
    std::vector<StatePoint> out;
    out.reserve(steps + 1);
    Eigen::VectorXd state = start.values;
    out.push_back(retrieve_state(state));
    for (std::size_t k = 1; k <= steps; ++k) {
        state = predict_next(model, state);
        if (!state.allFinite() || state.cwiseAbs().maxCoeff() > kDivergenceLimit) {
            throw DivergenceError("rollout diverged at step " + std::to_string(k), k);
        }
        out.push_back(retrieve_state(state));
    }
    return out;
}

double low_rank_product_norm(const Eigen::MatrixXd& left, const Eigen::MatrixXd& right) {
    if (left.rows() != right.rows()) throw std::invalid_argument("low_rank_product_norm: row mismatch");
    if (left.rows() <= left.cols() || left.rows() <= right.cols()) {
        return (left * right.transpose()).norm();
    }
    // |L R^T|_F = |R_L R_R^T|_F for thin QR factors L = Q_L R_L, R = Q_R R_R.
    auto r_factor = [](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        return qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    };
    return (r_factor(left) * r_factor(right).transpose()).norm();
}

double PenroseResiduals::worst() const {
    return std::max({x_pinv_x, pinv_x_pinv, x_pinv_symmetric, pinv_x_symmetric});
}

PenroseResiduals penrose_residuals(const RowMatrix& x, const Eigen::MatrixXd& pinv) {
    if (pinv.rows() != x.cols() || pinv.cols() != x.rows()) {
        throw std::invalid_argument("penrose_residuals: shape mismatch");
    }
    const Eigen::MatrixXd xm = x;
    const Eigen::MatrixXd x_pinv = xm * pinv;  // d x d
    PenroseResiduals r;
    r.x_pinv_x = (x_pinv * xm - xm).norm() / xm.norm();
    r.pinv_x_pinv = (pinv * x_pinv - pinv).norm() / pinv.norm();
    r.x_pinv_symmetric = (x_pinv.transpose() - x_pinv).norm() / x_pinv.norm();

    // X+ X is m x m. Its norm and asymmetry are products of m x 2d factors:
    //   X+ X         = P Q^T with P = X+,        Q = X^T
    //   X+ X - X^T X+^T = [X+, X^T] [X^T, -X+]^T
    const Eigen::MatrixXd xt = xm.transpose();
    Eigen::MatrixXd left(pinv.rows(), 2 * pinv.cols());
    left << pinv, xt;
    Eigen::MatrixXd right(pinv.rows(), 2 * pinv.cols());
    right << xt, -pinv;
    const double proj_norm = low_rank_product_norm(pinv, xt);
    r.pinv_x_symmetric = low_rank_product_norm(left, right) / proj_norm;
    return r;
}

}  // namespace lanekoop
