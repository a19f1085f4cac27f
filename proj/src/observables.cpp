#include "lanekoop/observables.hpp"

#include <cmath>

#include "lanekoop/simd.hpp"

namespace lanekoop {

BasisSpec BasisSpec::monomial(int order) {
    BasisSpec b;
    b.kind = BasisKind::Monomial;
    b.order = order;
    b.validate();
    return b;
}

BasisSpec BasisSpec::thin_plate(double center_s, double center_y) {
    BasisSpec b;
    b.kind = BasisKind::ThinPlateRadial;
    b.center_s = center_s;
    b.center_y = center_y;
    b.validate();
    return b;
}

std::size_t BasisSpec::dimension() const {
    return kind == BasisKind::Monomial ? 2 * static_cast<std::size_t>(order) : 4;
}

std::string BasisSpec::label() const {
    return kind == BasisKind::Monomial ? "monomial" : "radial";
}

void BasisSpec::validate() const {
    if (kind == BasisKind::Monomial && order < 1) {
        throw std::invalid_argument("monomial basis needs N_m >= 1");
    }
    if (kind == BasisKind::ThinPlateRadial && !(std::isfinite(center_s) && std::isfinite(center_y))) {
        throw std::invalid_argument("radial basis centres must be finite");
    }
}

LiftedState LiftedTrajectory::state(std::size_t k) const {
    return LiftedState{values.col(static_cast<Eigen::Index>(k)), basis};
}

double thin_plate(double u, double center) {
    const double r = std::abs(u - center);
    if (r == 0.0) return 0.0;
    return r * r * std::log(r);
}

LiftedState lift(StatePoint point, const BasisSpec& basis) {
    const double s[1] = {point.s};
    const double y[1] = {point.y};
    LiftedTrajectory one = lift_points(s, y, basis);
    return one.state(0);
}

LiftedTrajectory lift_points(std::span<const double> s, std::span<const double> y, const BasisSpec& basis) {
    if (s.size() != y.size()) throw std::invalid_argument("lift_points: s and y lengths differ");
    basis.validate();
    const auto n = static_cast<Eigen::Index>(s.size());
    LiftedTrajectory out{RowMatrix(static_cast<Eigen::Index>(basis.dimension()), n), basis};
    RowMatrix& v = out.values;
    std::copy(s.begin(), s.end(), v.row(0).data());
    std::copy(y.begin(), y.end(), v.row(1).data());

    if (basis.kind == BasisKind::Monomial) {
        // Rows interleave as s, y, s^2, y^2, ..., s^N, y^N.
        for (int p = 2; p <= basis.order; ++p) {
            const auto row = static_cast<Eigen::Index>(2 * (p - 1));
            simd::hadamard({v.row(row - 2).data(), s.size()}, s, {v.row(row).data(), s.size()});
            simd::hadamard({v.row(row - 1).data(), y.size()}, y, {v.row(row + 1).data(), y.size()});
        }
    } else {
        for (Eigen::Index k = 0; k < n; ++k) {
            v(2, k) = thin_plate(s[static_cast<std::size_t>(k)], basis.center_s);
            v(3, k) = thin_plate(y[static_cast<std::size_t>(k)], basis.center_y);
        }
    }
    return out;
}

LiftedTrajectory lift_trajectory(const Trajectory& traj, const BasisSpec& basis) {
    std::vector<double> s(traj.samples.size());
    std::vector<double> y(traj.samples.size());
    for (std::size_t k = 0; k < traj.samples.size(); ++k) {
        s[k] = traj.samples[k].s;
        y[k] = traj.samples[k].y;
    }
    return lift_points(s, y, basis);
}

StatePoint retrieve_state(const Eigen::Ref<const Eigen::VectorXd>& values) {
    if (values.size() < 2) throw std::invalid_argument("retrieve_state: lifted vector shorter than 2");
    return StatePoint{values(0), values(1)};
}

StatePoint retrieve_state(const LiftedState& lifted) { return retrieve_state(lifted.values); }

std::pair<double, double> sample_radial_centers(double lane_width, Rng& rng) {
    const double half = 0.5 * lane_width;
    const double c_s = -half + lane_width * uniform01(rng);
    const double c_y = -half + lane_width * uniform01(rng);
    return {c_s, c_y};
}

}  // namespace lanekoop
