#pragma once
// Staged experiment driver: generate -> identify -> evaluate, each stage
// reading and writing files in the configured output directory.
//
// Files written under output_dir:
//   trajectories.csv        traj_id,k,s,y_L
//   trajectories_meta.csv   traj_id,y_L0,psi0,d_L,x_L,seed,resamples
//   spectrum.csv            basis,r,sigma,energy_percent
//   models/<basis>_<rule>.json, models/<basis>_reference.json
//   table1.csv              basis,rule,rank,re_percent,t_rel_min_percent,
//                           t_rel_median_percent,flops_full,flops_trunc
//   manifest.json

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanekoop/config.hpp"
#include "lanekoop/evaluation.hpp"

namespace lanekoop {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

struct Dataset {
    std::vector<Trajectory> trajectories;
};

struct DatasetFingerprint {
    std::uint64_t seed = 0;
    std::size_t n_traj = 0;
    /// Hex FNV-1a of the lane parameters, seed and trajectory count.
    std::string config_hash;
    std::size_t total_samples = 0;
    std::size_t total_resamples = 0;

    bool operator==(const DatasetFingerprint&) const = default;
};

std::string config_hash(const ExperimentConfig& cfg);
DatasetFingerprint fingerprint(const ExperimentConfig& cfg, const Dataset& dataset);

/// Radial centres for this experiment: configured values, else drawn from
/// the master seed's centre stream.
std::pair<double, double> resolve_centers(const ExperimentConfig& cfg);
BasisSpec resolve_basis(const ExperimentConfig& cfg, BasisKind kind);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ExperimentManifest {
    nlohmann::json config;
    std::optional<double> center_s;
    std::optional<double> center_y;
    DatasetFingerprint dataset;
    std::map<std::string, double> stage_seconds;
    std::vector<std::string> outputs;
    std::map<std::string, std::string> environment;
    nlohmann::json diagnostics = nlohmann::json::object();
    std::string created_utc;

    nlohmann::json to_json() const;
    static ExperimentManifest from_json(const nlohmann::json& j);
};

ExperimentManifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const ExperimentManifest& manifest);

void write_trajectories(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_trajectories(const std::filesystem::path& dir);

nlohmann::json model_to_json(const IdentifiedModel& model, const DatasetFingerprint& fp, bool reference);
IdentifiedModel model_from_json(const nlohmann::json& j);
std::string model_file_name(const IdentifiedModel& model, bool reference);

Dataset run_generate(const ExperimentConfig& cfg);

struct IdentifyResult {
    std::vector<ModelRun> references;
    std::vector<ModelRun> runs;
};

/// Identifies every basis x rule on `dataset` and writes models and spectrum.
IdentifyResult run_identify(const ExperimentConfig& cfg, const Dataset& dataset);
/// Same, reading the dataset previously written by run_generate.
IdentifyResult run_identify(const ExperimentConfig& cfg);

/// Benchmarks and tabulates the stored models; writes table1.csv and prints a
/// summary. Throws InvariantError when a full-rank row is not exact.
std::vector<EvalRow> run_evaluate(const ExperimentConfig& cfg, std::ostream& report);

std::vector<EvalRow> run_all(const ExperimentConfig& cfg, std::ostream& report);

}  // namespace lanekoop
