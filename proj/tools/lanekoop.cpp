// Command-line front end: generate, identify, evaluate, run-all.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lanekoop/pipeline.hpp"
#include "lanekoop/simd.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3 };

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> energy_slack;
    std::optional<std::string> time_scope;
    std::optional<std::string> ht_semantics;
    std::optional<std::size_t> repeats;
    std::optional<std::size_t> warmups;
    std::optional<std::size_t> n_traj;
    std::optional<std::string> isa;
    bool energy_squared = false;
};

lanekoop::ExperimentConfig resolve(const Overrides& o) {
    using namespace lanekoop;
    ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.out) cfg.output_dir = *o.out;
    if (o.energy_slack) cfg.energy_slack = *o.energy_slack;
    if (o.energy_squared) cfg.energy_squared = true;
    if (o.repeats) cfg.repeats = *o.repeats;
    if (o.warmups) cfg.warmups = *o.warmups;
    if (o.n_traj) cfg.lane.n_traj = *o.n_traj;
    try {
        if (o.time_scope) cfg.time_scope = parse_time_scope(*o.time_scope);
        if (o.ht_semantics) cfg.ht_semantics = parse_ht_semantics(*o.ht_semantics);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (o.isa) {
        const std::string& name = *o.isa;
        simd::Isa isa = simd::Isa::Scalar;
        if (name == "avx2") isa = simd::Isa::Avx2;
        else if (name == "neon") isa = simd::Isa::Neon;
        else if (name != "scalar") throw ConfigError("unknown --isa '" + name + "'");
        try {
            simd::set_isa(isa);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "YAML config, or a manifest.json from an earlier run");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("-o,--out", o.out, "output directory");
    cmd->add_option("--n-traj", o.n_traj, "number of trajectories");
    cmd->add_option("--isa", o.isa, "kernel set: scalar, avx2, neon");
}

void add_identify(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--energy-slack", o.energy_slack, "tolerance in percentage points for E-rules");
    cmd->add_flag("--energy-squared", o.energy_squared, "energy from squared singular values");
    cmd->add_option("--ht-semantics", o.ht_semantics, "rank | count");
}

void add_evaluate(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--time-scope", o.time_scope, "solve | svd+solve");
    cmd->add_option("--repeats", o.repeats, "timed repeats per route");
    cmd->add_option("--warmups", o.warmups, "untimed warm-up runs per route");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lane-change trajectory generation and truncated EDMD identification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", lanekoop::kToolVersion);

    Overrides o;
    auto* generate = app.add_subcommand("generate", "sample trajectories");
    auto* identify = app.add_subcommand("identify", "fit full and truncated system matrices");
    auto* evaluate = app.add_subcommand("evaluate", "time and tabulate stored models");
    auto* all = app.add_subcommand("run-all", "generate, identify and evaluate");
    for (auto* cmd : {generate, identify, evaluate, all}) add_common(cmd, o);
    for (auto* cmd : {identify, all}) add_identify(cmd, o);
    for (auto* cmd : {evaluate, all}) add_evaluate(cmd, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        const lanekoop::ExperimentConfig cfg = resolve(o);
        if (generate->parsed()) {
            const auto ds = lanekoop::run_generate(cfg);
            std::cout << "wrote " << ds.trajectories.size() << " trajectories to " << cfg.output_dir.string() << '\n';
        } else if (identify->parsed()) {
            const auto result = lanekoop::run_identify(cfg);
            std::cout << "wrote " << result.references.size() + result.runs.size() << " models to "
                      << (cfg.output_dir / "models").string() << '\n';
        } else if (evaluate->parsed()) {
            lanekoop::run_evaluate(cfg, std::cout);
        } else {
            lanekoop::run_all(cfg, std::cout);
        }
    } catch (const lanekoop::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const lanekoop::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    } catch (const lanekoop::InvariantError& e) {
        std::cerr << "invariant violated: " << e.what() << '\n';
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
