#include "lanekoop/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lanekoop/simd.hpp"

namespace lanekoop {
namespace {

template <class T>
inline void keep_alive(const T& value) {
    asm volatile("" : : "g"(&value) : "memory");
}

int rule_order(const RankRule& rule) {
    return static_cast<int>(rule.index());
}

double rule_key(const RankRule& rule) {
    if (const auto* e = std::get_if<EnergyRule>(&rule)) return e->percent;
    if (const auto* f = std::get_if<FixedRule>(&rule)) return static_cast<double>(f->rank);
    return 0.0;
}

}  // namespace

double frobenius_norm(const Eigen::MatrixXd& b) {
    return std::sqrt(simd::sum_squares({b.data(), static_cast<std::size_t>(b.size())}));
}

double frobenius_norm(const RowMatrix& b) {
    return std::sqrt(simd::sum_squares({b.data(), static_cast<std::size_t>(b.size())}));
}

double reconstruction_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& a_tilde) {
    if (a.rows() != a_tilde.rows() || a.cols() != a_tilde.cols()) {
        throw std::invalid_argument("reconstruction_error: shape mismatch");
    }
    const double norm = frobenius_norm(a);
    if (norm == 0.0) throw DomainError("reconstruction_error: reference matrix has zero norm");
    const Eigen::MatrixXd diff = a - a_tilde;
    return 100.0 * frobenius_norm(diff) / norm;
}

std::string time_scope_name(TimeScope scope) {
    return scope == TimeScope::Solve ? "solve" : "svd+solve";
}

TimeScope parse_time_scope(const std::string& name) {
    if (name == "solve") return TimeScope::Solve;
    if (name == "svd+solve") return TimeScope::SvdAndSolve;
    throw std::invalid_argument("unknown time scope '" + name + "' (expected solve or svd+solve)");
}

std::int64_t TimingSample::min_ns() const {
    if (durations_ns.empty()) throw std::logic_error("TimingSample: no durations");
    return *std::min_element(durations_ns.begin(), durations_ns.end());
}

double TimingSample::median_ns() const {
    if (durations_ns.empty()) throw std::logic_error("TimingSample: no durations");
    std::vector<std::int64_t> v = durations_ns;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? static_cast<double>(v[n / 2])
                      : 0.5 * static_cast<double>(v[n / 2 - 1] + v[n / 2]);
}

double TimingSample::stddev_ns() const {
    if (durations_ns.size() < 2) return 0.0;
    const double mean = std::accumulate(durations_ns.begin(), durations_ns.end(), 0.0) /
                        static_cast<double>(durations_ns.size());
    double acc = 0.0;
    for (auto d : durations_ns) acc += (static_cast<double>(d) - mean) * (static_cast<double>(d) - mean);
    return std::sqrt(acc / static_cast<double>(durations_ns.size() - 1));
}

TimingSample benchmark_solve(const SnapshotPair& pair, const SvdFactors& f, std::optional<std::size_t> rank,
                             std::size_t repeats, std::size_t warmups, TimeScope scope) {
    if (repeats < 1) throw std::invalid_argument("benchmark_solve: repeats must be >= 1");
    TimingSample sample;
    sample.route = rank && *rank < f.rank() ? Route::Truncated : Route::Full;
    sample.repeats = repeats;
    sample.warmups = warmups;
    sample.durations_ns.reserve(repeats);
    sample.checksums.reserve(repeats);

    auto run_once = [&]() -> Eigen::MatrixXd {
        if (scope == TimeScope::SvdAndSolve) {
            const SvdFactors fresh = svd_thin(pair.x);
            const std::size_t r = rank ? std::min(*rank, fresh.rank()) : fresh.rank();
            return solve_system(pair, fresh, r);
        }
        return solve_system(pair, f, rank ? *rank : f.rank());
    };

    for (std::size_t i = 0; i < warmups; ++i) {
        const Eigen::MatrixXd a = run_once();
        keep_alive(a(0, 0));
    }
    for (std::size_t i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const Eigen::MatrixXd a = run_once();
        keep_alive(a(0, 0));
        const auto stop = std::chrono::steady_clock::now();
        // A zero reading would break the ratio; the clock is at least 1 ns.
        sample.durations_ns.push_back(
            std::max<std::int64_t>(1, std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count()));
        sample.checksums.push_back(a.sum());
    }
    return sample;
}

double relative_time(const TimingSample& truncated, const TimingSample& full) {
    return 100.0 * static_cast<double>(truncated.min_ns()) / static_cast<double>(full.min_ns());
}

double relative_time_median(const TimingSample& truncated, const TimingSample& full) {
    return 100.0 * truncated.median_ns() / full.median_ns();
}

double one_step_rmse(const IdentifiedModel& model, const SnapshotPair& pair) {
    if (static_cast<std::size_t>(model.a.cols()) != pair.dim()) {
        throw std::invalid_argument("one_step_rmse: model and snapshot dimensions differ");
    }
    const std::size_t m = pair.columns();
    if (m == 0) return 0.0;
    // Only the first two rows of A x_j are retrieved.
    const Eigen::MatrixXd top = model.a.topRows(2);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const Eigen::Vector2d predicted = top * pair.x.col(col);
        const double ds = predicted(0) - pair.x_shift(0, col);
        const double dy = predicted(1) - pair.x_shift(1, col);
        acc += ds * ds + dy * dy;
    }
    return std::sqrt(acc / static_cast<double>(m));
}

double lifted_residual(const Eigen::MatrixXd& a, const SnapshotPair& pair) {
    const RowMatrix residual = pair.x_shift - a * pair.x;
    return frobenius_norm(residual);
}

std::vector<EvalRow> build_table(std::span<const ModelRun> runs, std::span<const ModelRun> references) {
    std::vector<const ModelRun*> ordered;
    ordered.reserve(runs.size());
    for (const auto& r : runs) ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(), [](const ModelRun* a, const ModelRun* b) {
        const auto ka = static_cast<int>(a->model.basis.kind);
        const auto kb = static_cast<int>(b->model.basis.kind);
        if (ka != kb) return ka < kb;
        if (rule_order(a->model.rule) != rule_order(b->model.rule)) {
            return rule_order(a->model.rule) < rule_order(b->model.rule);
        }
        return rule_key(a->model.rule) < rule_key(b->model.rule);
    });

    std::vector<EvalRow> rows;
    rows.reserve(ordered.size());
    for (const ModelRun* run : ordered) {
        const ModelRun* ref = nullptr;
        for (const auto& candidate : references) {
            if (candidate.model.basis == run->model.basis) ref = &candidate;
        }
        if (!ref) {
            throw std::invalid_argument("build_table: no full-rank reference for basis " +
                                        run->model.basis.label());
        }
        const IdentifiedModel& m = run->model;
        EvalRow row;
        row.basis_label = m.basis.label();
        row.rule_label = rule_label(m.rule);
        row.rank = m.rank_used;
        row.r_max = ref->model.rank_used;
        row.re_percent = reconstruction_error(ref->model.a, m.a);
        row.flops_full = solve_flops(ref->model.dim(), ref->columns, ref->model.rank_used);
        row.flops_trunc = solve_flops(m.dim(), run->columns, m.rank_used);
        if (m.rank_used == ref->model.rank_used) {
            // Same computation as the reference.
            row.t_rel_min_percent = 100.0;
            row.t_rel_median_percent = 100.0;
        } else if (run->timing && ref->timing) {
            row.t_rel_min_percent = relative_time(*run->timing, *ref->timing);
            row.t_rel_median_percent = relative_time_median(*run->timing, *ref->timing);
        } else {
            row.t_rel_min_percent = std::nan("");
            row.t_rel_median_percent = std::nan("");
        }
        row.extras = run->extras;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace lanekoop
