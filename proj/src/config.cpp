#include "lanekoop/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace lanekoop {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "w_L", "w_V", "sigma_a_s", "sigma_y_L", "T", "psi_0_max_deg", "s_0", "v_0", "a_0", "N_T",
        "N_m", "c_s", "c_y", "bases", "rules", "seed", "repeats", "warmups", "output_dir",
        "energy_slack", "energy_squared", "ht_semantics", "time_scope",
    };
    return keys;
}

std::string where(const YAML::Node& node, const std::string& source) {
    const YAML::Mark mark = node.Mark();
    if (mark.is_null()) return source;
    return source + ":" + std::to_string(mark.line + 1);
}

template <class T>
T read_scalar(const YAML::Node& node, const std::string& key, const std::string& source) {
    if (!node.IsScalar()) {
        throw ConfigError(where(node, source) + ": field '" + key + "' must be a scalar");
    }
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where(node, source) + ": field '" + key + "' has invalid value '" +
                          node.Scalar() + "'");
    }
}

std::vector<std::string> read_list(const YAML::Node& node, const std::string& key, const std::string& source) {
    if (!node.IsSequence()) {
        throw ConfigError(where(node, source) + ": field '" + key + "' must be a list");
    }
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(read_scalar<std::string>(item, key, source));
    return out;
}

ExperimentConfig from_yaml(const YAML::Node& root, const std::string& source) {
    ExperimentConfig cfg;
    if (!root || root.IsNull()) return cfg;
    if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping of key: value");

    std::vector<std::string> unknown;
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (!known_keys().contains(key)) unknown.push_back(where(kv.first, source) + ": unknown key '" + key + "'");
    }
    if (!unknown.empty()) {
        std::ostringstream msg;
        for (std::size_t i = 0; i < unknown.size(); ++i) msg << (i ? "\n" : "") << unknown[i];
        throw ConfigError(msg.str());
    }

    auto num = [&](const char* key, double& dst) {
        if (root[key]) dst = read_scalar<double>(root[key], key, source);
    };
    num("w_L", cfg.lane.lane_width);
    num("w_V", cfg.lane.vehicle_width);
    num("sigma_a_s", cfg.lane.sigma_a);
    num("T", cfg.lane.sample_time);
    num("s_0", cfg.lane.s0);
    num("v_0", cfg.lane.v0);
    num("a_0", cfg.lane.a0);
    if (root["sigma_y_L"]) {
        cfg.lane.sigma_y = read_scalar<double>(root["sigma_y_L"], "sigma_y_L", source);
    } else {
        // A third of the lateral clearance between vehicle and lane edge.
        cfg.lane.sigma_y = 0.5 * (cfg.lane.lane_width - cfg.lane.vehicle_width) / 3.0;
    }
    if (root["psi_0_max_deg"]) {
        cfg.lane.psi0_max = read_scalar<double>(root["psi_0_max_deg"], "psi_0_max_deg", source) * kDegToRad;
    }
    if (root["N_T"]) {
        const auto n = read_scalar<long long>(root["N_T"], "N_T", source);
        if (n < 1) throw ConfigError(where(root["N_T"], source) + ": N_T must be >= 1");
        cfg.lane.n_traj = static_cast<std::size_t>(n);
    }
    if (root["N_m"]) cfg.monomial_order = read_scalar<int>(root["N_m"], "N_m", source);
    if (root["c_s"]) cfg.center_s = read_scalar<double>(root["c_s"], "c_s", source);
    if (root["c_y"]) cfg.center_y = read_scalar<double>(root["c_y"], "c_y", source);
    if (root["seed"]) cfg.master_seed = read_scalar<std::uint64_t>(root["seed"], "seed", source);
    if (root["repeats"]) {
        const auto n = read_scalar<long long>(root["repeats"], "repeats", source);
        if (n < 1) throw ConfigError(where(root["repeats"], source) + ": repeats must be >= 1");
        cfg.repeats = static_cast<std::size_t>(n);
    }
    if (root["warmups"]) {
        const auto n = read_scalar<long long>(root["warmups"], "warmups", source);
        if (n < 0) throw ConfigError(where(root["warmups"], source) + ": warmups must be >= 0");
        cfg.warmups = static_cast<std::size_t>(n);
    }
    if (root["output_dir"]) cfg.output_dir = read_scalar<std::string>(root["output_dir"], "output_dir", source);
    num("energy_slack", cfg.energy_slack);
    if (root["energy_squared"]) cfg.energy_squared = read_scalar<bool>(root["energy_squared"], "energy_squared", source);

    try {
        if (root["bases"]) {
            cfg.bases.clear();
            for (const auto& b : read_list(root["bases"], "bases", source)) cfg.bases.push_back(parse_basis_kind(b));
        }
        if (root["rules"]) {
            cfg.rules.clear();
            for (const auto& r : read_list(root["rules"], "rules", source)) cfg.rules.push_back(parse_rule(r));
        }
        if (root["ht_semantics"]) {
            cfg.ht_semantics = parse_ht_semantics(read_scalar<std::string>(root["ht_semantics"], "ht_semantics", source));
        }
        if (root["time_scope"]) {
            cfg.time_scope = parse_time_scope(read_scalar<std::string>(root["time_scope"], "time_scope", source));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

}  // namespace

std::vector<std::string> ExperimentConfig::violations() const {
    std::vector<std::string> out = lane.violations();
    if (monomial_order < 1) out.push_back("N_m must be >= 1");
    if (center_s && !std::isfinite(*center_s)) out.push_back("c_s must be finite");
    if (center_y && !std::isfinite(*center_y)) out.push_back("c_y must be finite");
    if (bases.empty()) out.push_back("at least one basis is required");
    if (std::set<BasisKind>(bases.begin(), bases.end()).size() != bases.size()) out.push_back("duplicate basis");
    if (rules.empty()) out.push_back("at least one rank rule is required");
    std::set<std::string> labels;
    for (const auto& rule : rules) {
        if (!labels.insert(rule_label(rule)).second) out.push_back("duplicate rank rule " + rule_label(rule));
        if (const auto* e = std::get_if<EnergyRule>(&rule); e && !(e->percent > 0.0 && e->percent <= 100.0)) {
            out.push_back("energy threshold " + format_double(e->percent) + " outside (0, 100]");
        }
        if (const auto* f = std::get_if<FixedRule>(&rule); f && f->rank < 1) {
            out.push_back("fixed rank must be >= 1");
        }
    }
    if (repeats < 1) out.push_back("repeats must be >= 1");
    if (!(std::isfinite(energy_slack) && energy_slack >= 0.0)) out.push_back("energy_slack must be >= 0");
    if (output_dir.empty()) out.push_back("output_dir must not be empty");
    return out;
}

void ExperimentConfig::validate() const {
    const auto bad = violations();
    if (bad.empty()) return;
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const auto& b : bad) msg << "\n  - " << b;
    throw ConfigError(msg.str());
}

std::vector<RankRule> ExperimentConfig::resolved_rules() const {
    std::vector<RankRule> out;
    for (RankRule rule : rules) {
        if (auto* e = std::get_if<EnergyRule>(&rule)) {
            e->slack = energy_slack;
            e->squared = energy_squared;
        } else if (auto* ht = std::get_if<HardThresholdRule>(&rule)) {
            ht->semantics = ht_semantics;
        }
        out.push_back(rule);
    }
    return out;
}

RankRule parse_rule(const std::string& text) {
    if (text == "HT") return HardThresholdRule{};
    if (text == "full") return FullRule{};
    auto number = [&](std::size_t offset) {
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(text.substr(offset), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || offset + used != text.size()) {
            throw std::invalid_argument("unknown rank rule '" + text + "' (expected E<percent>, HT, full or r<rank>)");
        }
        return value;
    };
    if (text.size() > 1 && text[0] == 'E') return EnergyRule{number(1)};
    if (text.size() > 1 && text[0] == 'r') {
        const double r = number(1);
        if (r < 1 || r != std::floor(r)) throw std::invalid_argument("fixed rank must be a positive integer: " + text);
        return FixedRule{static_cast<std::size_t>(r)};
    }
    throw std::invalid_argument("unknown rank rule '" + text + "' (expected E<percent>, HT, full or r<rank>)");
}

std::string basis_kind_name(BasisKind kind) {
    return kind == BasisKind::Monomial ? "monomial" : "radial";
}

BasisKind parse_basis_kind(const std::string& text) {
    if (text == "monomial") return BasisKind::Monomial;
    if (text == "radial") return BasisKind::ThinPlateRadial;
    throw std::invalid_argument("unknown basis '" + text + "' (expected monomial or radial)");
}

std::string ht_semantics_name(HtSemantics s) {
    return s == HtSemantics::RankBound ? "rank" : "count";
}

HtSemantics parse_ht_semantics(const std::string& text) {
    if (text == "rank") return HtSemantics::RankBound;
    if (text == "count") return HtSemantics::Count;
    throw std::invalid_argument("unknown ht_semantics '" + text + "' (expected rank or count)");
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": parse error: " + e.msg);
    }
    // A run manifest carries its resolved config under "config".
    if (root.IsMap() && root["manifest_version"]) {
        if (!root["config"]) throw ConfigError(source + ": manifest has no config section");
        root = root["config"];
    }
    ExperimentConfig cfg = from_yaml(root, source);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

}  // namespace lanekoop
