#pragma once
// EDMD observable dictionaries over the lane-frame state (s, y_L).
//
// Both dictionaries put the identity observables first, so a lifted vector is
// mapped back to (s, y_L) by reading its two leading entries.

#include <span>
#include <string>
#include <vector>

#include "lanekoop/common.hpp"
#include "lanekoop/lane_change.hpp"

namespace lanekoop {

enum class BasisKind { Monomial, ThinPlateRadial };

struct BasisSpec {
    BasisKind kind = BasisKind::Monomial;
    int order = 2;          // Monomial only
    double center_s = 0.0;  // ThinPlateRadial only
    double center_y = 0.0;  // ThinPlateRadial only

    static BasisSpec monomial(int order);
    static BasisSpec thin_plate(double center_s, double center_y);

    std::size_t dimension() const;
    /// "monomial" or "radial".
    std::string label() const;
    void validate() const;

    bool operator==(const BasisSpec&) const = default;
};

struct StatePoint {
    double s = 0.0;
    double y = 0.0;
    bool operator==(const StatePoint&) const = default;
};

struct LiftedState {
    Eigen::VectorXd values;
    BasisSpec basis;
};

/// A lifted trajectory kept as one contiguous row per observable
/// (dimension x length); column k is the lifted state at step k.
struct LiftedTrajectory {
    RowMatrix values;
    BasisSpec basis;

    std::size_t size() const { return static_cast<std::size_t>(values.cols()); }
    LiftedState state(std::size_t k) const;
};

/// Thin-plate radial function |u - c|^2 ln|u - c|, 0 at u = c.
double thin_plate(double u, double center);

LiftedState lift(StatePoint point, const BasisSpec& basis);

LiftedTrajectory lift_trajectory(const Trajectory& traj, const BasisSpec& basis);

/// Batch form over separate s and y columns.
LiftedTrajectory lift_points(std::span<const double> s, std::span<const double> y, const BasisSpec& basis);

/// Leading two coordinates. No consistency check against the higher
/// observables is made, so a model-predicted state maps to its leading
/// coordinates whatever the rest of the vector says.
StatePoint retrieve_state(const LiftedState& lifted);
StatePoint retrieve_state(const Eigen::Ref<const Eigen::VectorXd>& values);

/// c_s, c_y ~ U[-w_L/2, +w_L/2], drawn once per experiment.
std::pair<double, double> sample_radial_centers(double lane_width, Rng& rng);

}  // namespace lanekoop
