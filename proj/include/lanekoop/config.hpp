#pragma once
// Experiment configuration: a flat YAML mapping whose keys are the model
// parameter names (w_L, sigma_a_s, T, N_m, ...). Missing keys take the
// default experiment values; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lanekoop/edmd.hpp"
#include "lanekoop/evaluation.hpp"
#include "lanekoop/lane_change.hpp"
#include "lanekoop/observables.hpp"

namespace lanekoop {

struct ExperimentConfig {
    LaneConfig lane;
    int monomial_order = 2;
    /// Radial centres; sampled from the master seed when absent.
    std::optional<double> center_s;
    std::optional<double> center_y;
    std::vector<BasisKind> bases{BasisKind::Monomial, BasisKind::ThinPlateRadial};
    std::vector<RankRule> rules{EnergyRule{90.0}, EnergyRule{99.0}, HardThresholdRule{}};
    std::uint64_t master_seed = 42;
    std::size_t repeats = 100;
    std::size_t warmups = 10;
    std::filesystem::path output_dir = "lanekoop_out";
    double energy_slack = 1.5;
    bool energy_squared = false;
    HtSemantics ht_semantics = HtSemantics::RankBound;
    TimeScope time_scope = TimeScope::Solve;

    std::vector<std::string> violations() const;
    void validate() const;

    /// Rules with the experiment-wide slack, squared flag and HT semantics applied.
    std::vector<RankRule> resolved_rules() const;
};

/// Parses a config document. `source` names it in diagnostics.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");

/// Reads a config file. A manifest.json written by a previous run is accepted
/// too; its embedded config is used.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Rule spelling used in config files: E<percent>, HT, full, r<rank>.
RankRule parse_rule(const std::string& text);
std::string basis_kind_name(BasisKind kind);
BasisKind parse_basis_kind(const std::string& text);
std::string ht_semantics_name(HtSemantics s);
HtSemantics parse_ht_semantics(const std::string& text);

}  // namespace lanekoop
