#pragma once
// Shared numeric fixtures for the unit and acceptance suites.

#include <random>

#include "lanekoop/edmd.hpp"

namespace lanekoop::testing {

inline RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
}

/// A random d x d map scaled to spectral norm 0.9, so iterates stay bounded.
inline Eigen::MatrixXd planted_map(Eigen::Index d, std::mt19937_64& rng) {
    Eigen::MatrixXd l = random_matrix(d, d, rng);
    const double top = Eigen::JacobiSVD<Eigen::MatrixXd>(l).singularValues()(0);
    return 0.9 * l / top;
}

/// Snapshot pair whose successors are exactly L times the states.
inline SnapshotPair planted_pair(const Eigen::MatrixXd& l, Eigen::Index m, std::mt19937_64& rng) {
    SnapshotPair p;
    p.x = random_matrix(l.rows(), m, rng);
    p.x_shift = l * p.x;
    p.block_columns = {static_cast<std::size_t>(m)};
    return p;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace lanekoop::testing
