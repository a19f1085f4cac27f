#include "lanekoop/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "lanekoop/simd.hpp"

namespace lanekoop {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kTrajectoriesCsv = "trajectories.csv";
constexpr const char* kTrajectoriesMetaCsv = "trajectories_meta.csv";
constexpr const char* kSpectrumCsv = "spectrum.csv";
constexpr const char* kTableCsv = "table1.csv";
constexpr const char* kManifestJson = "manifest.json";
constexpr const char* kModelsDir = "models";

// Full-rank rows must reproduce the reference to this many percent.
constexpr double kFullRankTolerancePercent = 1e-8;

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Degrees for psi0_max such that converting back gives the same radians.
double radians_to_config_degrees(double rad) {
    const double scale = std::numbers::pi / 180.0;
    double deg = rad / scale;
    for (int i = 0; i < 8 && deg * scale != rad; ++i) {
        deg = std::nextafter(deg, deg * scale < rad ? INFINITY : -INFINITY);
    }
    return deg;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::map<std::string, std::string> environment_info() {
    return {
        {"tool_version", kToolVersion},
        {"isa", std::string(simd::isa_name(simd::active_isa()))},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__},
    };
}

// Splits a CSV body into rows of fields; the header line is checked and dropped.
std::vector<std::vector<std::string_view>> parse_csv(std::string_view text, std::string_view header,
                                                     const std::string& name) {
    std::vector<std::vector<std::string_view>> rows;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (first) {
            if (line != header) throw IoError(name + ": unexpected header '" + std::string(line) + "'");
            first = false;
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::size_t f = 0;
        while (true) {
            const std::size_t comma = line.find(',', f);
            fields.push_back(line.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f));
            if (comma == std::string_view::npos) break;
            f = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    if (first) throw IoError(name + ": empty file");
    return rows;
}

template <class T>
T parse_field(std::string_view field, const std::string& name, std::size_t row) {
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw IoError(name + ": row " + std::to_string(row + 2) + ": bad field '" + std::string(field) + "'");
    }
    return value;
}

json basis_to_json(const BasisSpec& b) {
    if (b.kind == BasisKind::Monomial) return {{"kind", "monomial"}, {"N_m", b.order}};
    return {{"kind", "radial"}, {"c_s", b.center_s}, {"c_y", b.center_y}};
}

BasisSpec basis_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "monomial") return BasisSpec::monomial(j.at("N_m").get<int>());
    if (kind == "radial") return BasisSpec::thin_plate(j.at("c_s").get<double>(), j.at("c_y").get<double>());
    throw IoError("unknown basis kind '" + kind + "' in model file");
}

json rule_to_json(const RankRule& rule) {
    json j{{"label", rule_label(rule)}};
    if (const auto* e = std::get_if<EnergyRule>(&rule)) {
        j["kind"] = "energy";
        j["percent"] = e->percent;
        j["slack"] = e->slack;
        j["squared"] = e->squared;
    } else if (const auto* ht = std::get_if<HardThresholdRule>(&rule)) {
        j["kind"] = "hard_threshold";
        j["semantics"] = ht_semantics_name(ht->semantics);
    } else if (const auto* f = std::get_if<FixedRule>(&rule)) {
        j["kind"] = "fixed";
        j["rank"] = f->rank;
    } else {
        j["kind"] = "full";
    }
    return j;
}

RankRule rule_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "energy") {
        return EnergyRule{j.at("percent").get<double>(), j.at("slack").get<double>(), j.at("squared").get<bool>()};
    }
    if (kind == "hard_threshold") return HardThresholdRule{parse_ht_semantics(j.at("semantics"))};
    if (kind == "fixed") return FixedRule{j.at("rank").get<std::size_t>()};
    if (kind == "full") return FullRule{};
    throw IoError("unknown rule kind '" + kind + "' in model file");
}

json fingerprint_to_json(const DatasetFingerprint& fp) {
    return {{"seed", fp.seed},
            {"n_traj", fp.n_traj},
            {"config_hash", fp.config_hash},
            {"total_samples", fp.total_samples},
            {"total_resamples", fp.total_resamples}};
}

DatasetFingerprint fingerprint_from_json(const json& j) {
    DatasetFingerprint fp;
    fp.seed = j.at("seed").get<std::uint64_t>();
    fp.n_traj = j.at("n_traj").get<std::size_t>();
    fp.config_hash = j.at("config_hash").get<std::string>();
    fp.total_samples = j.at("total_samples").get<std::size_t>();
    fp.total_resamples = j.at("total_resamples").get<std::size_t>();
    return fp;
}

struct BasisData {
    BasisSpec basis;
    SnapshotPair pair;
    SvdFactors factors;
};

BasisData prepare_basis(const Dataset& dataset, const BasisSpec& basis) {
    std::vector<LiftedTrajectory> lifted;
    lifted.reserve(dataset.trajectories.size());
    for (const auto& t : dataset.trajectories) lifted.push_back(lift_trajectory(t, basis));
    BasisData data{basis, build_snapshots(lifted), {}};
    lifted.clear();
    data.factors = svd_thin(data.pair.x);
    return data;
}

RunExtras extras_for(const IdentifiedModel& model, const BasisData& data, bool energy_squared) {
    RunExtras x;
    x.sigma = data.factors.sigma;
    x.energy = energy_profile(data.factors.sigma, energy_squared);
    x.condition_number = data.factors.sigma(0) / data.factors.sigma(data.factors.sigma.size() - 1);
    x.one_step_rmse = one_step_rmse(model, data.pair);
    x.lifted_residual = lifted_residual(model.a, data.pair);
    return x;
}

ExperimentManifest manifest_for(const ExperimentConfig& cfg, const DatasetFingerprint& fp) {
    ExperimentManifest manifest;
    manifest.config = config_to_json(cfg);
    if (std::find(cfg.bases.begin(), cfg.bases.end(), BasisKind::ThinPlateRadial) != cfg.bases.end()) {
        const auto [cs, cy] = resolve_centers(cfg);
        manifest.center_s = cs;
        manifest.center_y = cy;
    }
    manifest.dataset = fp;
    manifest.environment = environment_info();
    manifest.created_utc = utc_now();
    return manifest;
}

void add_output(ExperimentManifest& manifest, const std::string& name) {
    if (std::find(manifest.outputs.begin(), manifest.outputs.end(), name) == manifest.outputs.end()) {
        manifest.outputs.push_back(name);
    }
}

// The manifest of a previous stage when it describes this dataset, else a new one.
ExperimentManifest continue_manifest(const ExperimentConfig& cfg, const DatasetFingerprint& fp) {
    if (fs::exists(cfg.output_dir / kManifestJson)) {
        ExperimentManifest existing = read_manifest(cfg.output_dir);
        if (existing.dataset == fp) {
            existing.config = config_to_json(cfg);
            existing.environment = environment_info();
            return existing;
        }
    }
    return manifest_for(cfg, fp);
}

template <class F>
auto in_stage(const char* name, F&& body) {
    const std::string prefix = std::string("stage ") + name + ": ";
    try {
        return body();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError(prefix + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(prefix + e.what());
    }
}

std::string fixed2(double v) {
    if (std::isnan(v)) return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
    const LaneConfig& l = cfg.lane;
    std::ostringstream canon;
    canon << "w_L=" << format_double(l.lane_width) << ";w_V=" << format_double(l.vehicle_width)
          << ";sigma_a_s=" << format_double(l.sigma_a) << ";sigma_y_L=" << format_double(l.sigma_y)
          << ";T=" << format_double(l.sample_time) << ";psi_0_max=" << format_double(l.psi0_max)
          << ";s_0=" << format_double(l.s0) << ";v_0=" << format_double(l.v0) << ";a_0=" << format_double(l.a0)
          << ";N_T=" << l.n_traj << ";seed=" << cfg.master_seed;
    return hex64(fnv1a64(canon.str()));
}

DatasetFingerprint fingerprint(const ExperimentConfig& cfg, const Dataset& dataset) {
    DatasetFingerprint fp;
    fp.seed = cfg.master_seed;
    fp.n_traj = dataset.trajectories.size();
    fp.config_hash = config_hash(cfg);
    for (const auto& t : dataset.trajectories) {
        fp.total_samples += t.samples.size();
        fp.total_resamples += t.resamples;
    }
    return fp;
}

std::pair<double, double> resolve_centers(const ExperimentConfig& cfg) {
    Rng rng = derive_stream(cfg.master_seed, StreamDomain::RadialCenters, 0);
    auto [cs, cy] = sample_radial_centers(cfg.lane.lane_width, rng);
    if (cfg.center_s) cs = *cfg.center_s;
    if (cfg.center_y) cy = *cfg.center_y;
    return {cs, cy};
}

BasisSpec resolve_basis(const ExperimentConfig& cfg, BasisKind kind) {
    if (kind == BasisKind::Monomial) return BasisSpec::monomial(cfg.monomial_order);
    const auto [cs, cy] = resolve_centers(cfg);
    return BasisSpec::thin_plate(cs, cy);
}

json config_to_json(const ExperimentConfig& cfg) {
    const LaneConfig& l = cfg.lane;
    json j{
        {"w_L", l.lane_width},
        {"w_V", l.vehicle_width},
        {"sigma_a_s", l.sigma_a},
        {"sigma_y_L", l.sigma_y},
        {"T", l.sample_time},
        {"psi_0_max_deg", radians_to_config_degrees(l.psi0_max)},
        {"s_0", l.s0},
        {"v_0", l.v0},
        {"a_0", l.a0},
        {"N_T", l.n_traj},
        {"N_m", cfg.monomial_order},
        {"seed", cfg.master_seed},
        {"repeats", cfg.repeats},
        {"warmups", cfg.warmups},
        {"output_dir", cfg.output_dir.string()},
        {"energy_slack", cfg.energy_slack},
        {"energy_squared", cfg.energy_squared},
        {"ht_semantics", ht_semantics_name(cfg.ht_semantics)},
        {"time_scope", time_scope_name(cfg.time_scope)},
    };
    if (cfg.center_s) j["c_s"] = *cfg.center_s;
    if (cfg.center_y) j["c_y"] = *cfg.center_y;
    json bases = json::array();
    for (auto b : cfg.bases) bases.push_back(basis_kind_name(b));
    j["bases"] = bases;
    json rules = json::array();
    for (const auto& r : cfg.rules) rules.push_back(rule_label(r));
    j["rules"] = rules;
    return j;
}

json ExperimentManifest::to_json() const {
    json j{
        {"manifest_version", kManifestVersion},
        {"created_utc", created_utc},
        {"config", config},
        {"dataset", fingerprint_to_json(dataset)},
        {"stage_seconds", stage_seconds},
        {"outputs", outputs},
        {"environment", environment},
        {"diagnostics", diagnostics},
    };
    json resolved = json::object();
    if (center_s) resolved["c_s"] = *center_s;
    if (center_y) resolved["c_y"] = *center_y;
    j["resolved"] = resolved;
    return j;
}

ExperimentManifest ExperimentManifest::from_json(const json& j) {
    if (j.at("manifest_version").get<int>() != kManifestVersion) {
        throw IoError("unsupported manifest version");
    }
    ExperimentManifest m;
    m.created_utc = j.at("created_utc").get<std::string>();
    m.config = j.at("config");
    m.dataset = fingerprint_from_json(j.at("dataset"));
    m.stage_seconds = j.at("stage_seconds").get<std::map<std::string, double>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.environment = j.at("environment").get<std::map<std::string, std::string>>();
    m.diagnostics = j.at("diagnostics");
    const json& resolved = j.at("resolved");
    if (resolved.contains("c_s")) m.center_s = resolved.at("c_s").get<double>();
    if (resolved.contains("c_y")) m.center_y = resolved.at("c_y").get<double>();
    return m;
}

ExperimentManifest read_manifest(const fs::path& dir) {
    const fs::path path = dir / kManifestJson;
    try {
        return ExperimentManifest::from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_manifest(const fs::path& dir, const ExperimentManifest& manifest) {
    ensure_dir(dir);
    write_file(dir / kManifestJson, manifest.to_json().dump(2) + "\n");
}

void write_trajectories(const fs::path& dir, const Dataset& dataset) {
    ensure_dir(dir);
    std::string body = "traj_id,k,s,y_L\n";
    std::string meta = "traj_id,y_L0,psi0,d_L,x_L,seed,resamples\n";
    for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
        const Trajectory& t = dataset.trajectories[i];
        const std::string id = std::to_string(i);
        for (std::size_t k = 0; k < t.samples.size(); ++k) {
            body += id;
            body += ',';
            body += std::to_string(k);
            body += ',';
            body += format_double(t.samples[k].s);
            body += ',';
            body += format_double(t.samples[k].y);
            body += '\n';
        }
        const LaneGeometry& g = t.geometry;
        meta += id + ',' + format_double(g.y_L0) + ',' + format_double(g.psi0) + ',' + format_double(g.d_L) + ',' +
                format_double(g.x_L) + ',' + std::to_string(t.seed_id) + ',' + std::to_string(t.resamples) + '\n';
    }
    write_file(dir / kTrajectoriesCsv, body);
    write_file(dir / kTrajectoriesMetaCsv, meta);
}

Dataset read_trajectories(const fs::path& dir) {
    const std::string meta_text = read_file(dir / kTrajectoriesMetaCsv);
    const auto meta_rows = parse_csv(meta_text, "traj_id,y_L0,psi0,d_L,x_L,seed,resamples", kTrajectoriesMetaCsv);
    Dataset ds;
    ds.trajectories.resize(meta_rows.size());
    for (std::size_t r = 0; r < meta_rows.size(); ++r) {
        const auto& f = meta_rows[r];
        if (f.size() != 7) throw IoError(std::string(kTrajectoriesMetaCsv) + ": row " + std::to_string(r + 2) + ": expected 7 fields");
        const auto id = parse_field<std::size_t>(f[0], kTrajectoriesMetaCsv, r);
        if (id != r) throw IoError(std::string(kTrajectoriesMetaCsv) + ": trajectories out of order");
        Trajectory& t = ds.trajectories[r];
        t.geometry = {parse_field<double>(f[1], kTrajectoriesMetaCsv, r), parse_field<double>(f[2], kTrajectoriesMetaCsv, r),
                      parse_field<double>(f[3], kTrajectoriesMetaCsv, r), parse_field<double>(f[4], kTrajectoriesMetaCsv, r)};
        t.seed_id = parse_field<std::uint64_t>(f[5], kTrajectoriesMetaCsv, r);
        t.resamples = parse_field<std::size_t>(f[6], kTrajectoriesMetaCsv, r);
    }
    const std::string text = read_file(dir / kTrajectoriesCsv);
    const auto rows = parse_csv(text, "traj_id,k,s,y_L", kTrajectoriesCsv);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 4) throw IoError(std::string(kTrajectoriesCsv) + ": row " + std::to_string(r + 2) + ": expected 4 fields");
        const auto id = parse_field<std::size_t>(f[0], kTrajectoriesCsv, r);
        const auto k = parse_field<std::size_t>(f[1], kTrajectoriesCsv, r);
        if (id >= ds.trajectories.size()) throw IoError(std::string(kTrajectoriesCsv) + ": unknown trajectory id");
        auto& samples = ds.trajectories[id].samples;
        if (k != samples.size()) throw IoError(std::string(kTrajectoriesCsv) + ": samples out of order");
        samples.push_back({parse_field<double>(f[2], kTrajectoriesCsv, r), parse_field<double>(f[3], kTrajectoriesCsv, r)});
    }
    return ds;
}

std::string model_file_name(const IdentifiedModel& model, bool reference) {
    return model.basis.label() + "_" + (reference ? std::string("reference") : rule_label(model.rule)) + ".json";
}

json model_to_json(const IdentifiedModel& model, const DatasetFingerprint& fp, bool reference) {
    std::vector<double> entries;
    entries.reserve(static_cast<std::size_t>(model.a.size()));
    for (Eigen::Index i = 0; i < model.a.rows(); ++i) {
        for (Eigen::Index j = 0; j < model.a.cols(); ++j) entries.push_back(model.a(i, j));
    }
    return json{
        {"basis", basis_to_json(model.basis)},
        {"rule", rule_to_json(model.rule)},
        {"reference", reference},
        {"rank", model.rank_used},
        {"r_max", model.r_max},
        {"d", model.a.rows()},
        {"A", entries},
        {"timing_ns", model.timing_ns},
        {"dataset", fingerprint_to_json(fp)},
    };
}

IdentifiedModel model_from_json(const json& j) {
    IdentifiedModel m;
    m.basis = basis_from_json(j.at("basis"));
    m.rule = rule_from_json(j.at("rule"));
    m.rank_used = j.at("rank").get<std::size_t>();
    m.r_max = j.at("r_max").get<std::size_t>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto entries = j.at("A").get<std::vector<double>>();
    if (entries.size() != static_cast<std::size_t>(d * d)) throw IoError("model file: A has wrong size");
    m.a.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index c = 0; c < d; ++c) m.a(i, c) = entries[static_cast<std::size_t>(i * d + c)];
    }
    m.timing_ns = j.at("timing_ns").get<std::int64_t>();
    return m;
}

Dataset run_generate(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    Dataset dataset{generate_dataset(cfg.lane, cfg.master_seed)};
    write_trajectories(cfg.output_dir, dataset);
    ExperimentManifest manifest = manifest_for(cfg, fingerprint(cfg, dataset));
    manifest.stage_seconds["generate"] = seconds_since(start);
    add_output(manifest, kTrajectoriesCsv);
    add_output(manifest, kTrajectoriesMetaCsv);
    add_output(manifest, kManifestJson);
    write_manifest(cfg.output_dir, manifest);
    return dataset;
}

IdentifyResult run_identify(const ExperimentConfig& cfg, const Dataset& dataset) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const DatasetFingerprint fp = fingerprint(cfg, dataset);
    ExperimentManifest manifest = continue_manifest(cfg, fp);

    const fs::path models_dir = cfg.output_dir / kModelsDir;
    ensure_dir(models_dir);
    for (const auto& entry : fs::directory_iterator(models_dir)) {
        if (entry.path().extension() == ".json") fs::remove(entry.path());
    }
    std::erase_if(manifest.outputs, [](const std::string& o) { return o.rfind("models/", 0) == 0; });

    IdentifyResult result;
    std::string spectrum = "basis,r,sigma,energy_percent\n";
    const std::vector<RankRule> rules = cfg.resolved_rules();
    for (BasisKind kind : cfg.bases) {
        const BasisSpec basis = resolve_basis(cfg, kind);
        BasisData data;
        try {
            data = prepare_basis(dataset, basis);
        } catch (const std::exception& e) {
            throw NumericalError("basis " + basis.label() + ": " + e.what());
        }
        const SvdFactors& f = data.factors;
        const Eigen::VectorXd energy = energy_profile(f.sigma, cfg.energy_squared);
        for (Eigen::Index i = 0; i < f.sigma.size(); ++i) {
            spectrum += basis.label() + ',' + std::to_string(i + 1) + ',' + format_double(f.sigma(i)) + ',' +
                        format_double(energy(i)) + '\n';
        }

        auto record = [&](IdentifiedModel model, bool reference) {
            const std::string name = model_file_name(model, reference);
            write_file(models_dir / name, model_to_json(model, fp, reference).dump(2) + "\n");
            add_output(manifest, std::string(kModelsDir) + "/" + name);
            ModelRun run{std::move(model), std::nullopt, data.pair.columns(), {}};
            run.extras = extras_for(run.model, data, cfg.energy_squared);
            (reference ? result.references : result.runs).push_back(std::move(run));
        };

        record(full_system_matrix(data.pair, f, basis), true);
        for (const RankRule& rule : rules) {
            try {
                const std::size_t r = select_rank(f, rule);
                record(truncated_system_matrix(data.pair, f, r, rule, basis), false);
            } catch (const std::exception& e) {
                throw NumericalError("basis " + basis.label() + ", rule " + rule_label(rule) + ": " + e.what());
            }
        }

        std::vector<double> sig(f.sigma.data(), f.sigma.data() + f.sigma.size());
        manifest.diagnostics[basis.label()] = {
            {"columns", data.pair.columns()},
            {"r_max", f.rank()},
            {"condition_number", f.sigma(0) / f.sigma(f.sigma.size() - 1)},
            {"sigma", sig},
            {"hard_threshold_value", hard_threshold_value(f)},
        };
    }
    write_file(cfg.output_dir / kSpectrumCsv, spectrum);
    add_output(manifest, kSpectrumCsv);
    add_output(manifest, kManifestJson);
    manifest.stage_seconds["identify"] = seconds_since(start);
    write_manifest(cfg.output_dir, manifest);
    return result;
}

IdentifyResult run_identify(const ExperimentConfig& cfg) {
    return run_identify(cfg, read_trajectories(cfg.output_dir));
}

std::vector<EvalRow> run_evaluate(const ExperimentConfig& cfg, std::ostream& report) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Dataset dataset = read_trajectories(cfg.output_dir);
    const DatasetFingerprint fp = fingerprint(cfg, dataset);
    ExperimentManifest manifest = continue_manifest(cfg, fp);

    const fs::path models_dir = cfg.output_dir / kModelsDir;
    if (!fs::is_directory(models_dir)) throw IoError("no models directory in " + cfg.output_dir.string() + "; run identify first");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(models_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<IdentifiedModel> references;
    std::vector<IdentifiedModel> models;
    for (const auto& path : files) {
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::exception& e) {
            throw IoError(path.string() + ": " + e.what());
        }
        if (fingerprint_from_json(j.at("dataset")) != fp) {
            throw ConfigError(path.string() + " was identified on a different dataset or configuration; rerun identify");
        }
        (j.at("reference").get<bool>() ? references : models).push_back(model_from_json(j));
    }

    std::vector<ModelRun> ref_runs;
    std::vector<ModelRun> runs;
    std::vector<std::string> failures;
    for (const IdentifiedModel& ref : references) {
        const BasisData data = prepare_basis(dataset, ref.basis);
        const SvdFactors& f = data.factors;
        if (f.rank() != ref.r_max) {
            failures.push_back(ref.basis.label() + ": numerical rank " + std::to_string(f.rank()) +
                               " differs from stored r_max " + std::to_string(ref.r_max));
            continue;
        }
        const double drift = reconstruction_error(solve_system(data.pair, f, f.rank()), ref.a);
        if (drift > kFullRankTolerancePercent) {
            failures.push_back(ref.basis.label() + ": stored reference differs from recomputed full-rank matrix by " +
                               format_double(drift) + " %");
        }

        ModelRun ref_run{ref, benchmark_solve(data.pair, f, std::nullopt, cfg.repeats, cfg.warmups, cfg.time_scope),
                         data.pair.columns(), extras_for(ref, data, cfg.energy_squared)};
        for (const IdentifiedModel& m : models) {
            if (!(m.basis == ref.basis)) continue;
            ModelRun run{m, std::nullopt, data.pair.columns(), extras_for(m, data, cfg.energy_squared)};
            if (m.rank_used < f.rank()) {
                run.timing = benchmark_solve(data.pair, f, m.rank_used, cfg.repeats, cfg.warmups, cfg.time_scope);
            }
            runs.push_back(std::move(run));
        }
        ref_runs.push_back(std::move(ref_run));
    }
    for (const IdentifiedModel& m : models) {
        const bool has_ref = std::any_of(references.begin(), references.end(),
                                         [&](const IdentifiedModel& r) { return r.basis == m.basis; });
        if (!has_ref) throw InvariantError("missing full-rank reference model for basis " + m.basis.label());
    }

    const std::vector<EvalRow> rows = build_table(runs, ref_runs);

    std::string table = "basis,rule,rank,re_percent,t_rel_min_percent,t_rel_median_percent,flops_full,flops_trunc\n";
    for (const EvalRow& row : rows) {
        table += row.basis_label + ',' + row.rule_label + ',' + std::to_string(row.rank) + ',' +
                 format_double(row.re_percent) + ',' + format_double(row.t_rel_min_percent) + ',' +
                 format_double(row.t_rel_median_percent) + ',' + std::to_string(row.flops_full) + ',' +
                 std::to_string(row.flops_trunc) + '\n';
        if (row.rank == row.r_max && !(row.re_percent <= kFullRankTolerancePercent && row.t_rel_min_percent == 100.0)) {
            failures.push_back(row.basis_label + "/" + row.rule_label + ": full-rank row has RE " +
                               format_double(row.re_percent) + " %");
        }
    }
    write_file(cfg.output_dir / kTableCsv, table);

    report << std::left << std::setw(18) << "basis" << std::setw(10) << "rank r" << std::setw(10) << "RE %"
           << "min t %" << '\n';
    for (const EvalRow& row : rows) {
        const std::string rank = std::to_string(row.rank) + (row.rank == row.r_max ? " (full)" : "");
        report << std::left << std::setw(18) << (row.basis_label + "/" + row.rule_label) << std::setw(10) << rank
               << std::setw(10) << fixed2(row.re_percent) << fixed2(row.t_rel_min_percent) << '\n';
    }

    manifest.stage_seconds["evaluate"] = seconds_since(start);
    manifest.diagnostics["evaluate"] = {
        {"time_scope", time_scope_name(cfg.time_scope)},
        {"repeats", cfg.repeats},
        {"warmups", cfg.warmups},
    };
    add_output(manifest, kTableCsv);
    add_output(manifest, kManifestJson);
    write_manifest(cfg.output_dir, manifest);

    if (!failures.empty()) {
        std::string msg = "evaluation invariants failed:";
        for (const auto& f : failures) msg += "\n  - " + f;
        throw InvariantError(msg);
    }
    return rows;
}

std::vector<EvalRow> run_all(const ExperimentConfig& cfg, std::ostream& report) {
    const Dataset dataset = in_stage("generate", [&] { return run_generate(cfg); });
    in_stage("identify", [&] { return run_identify(cfg, dataset); });
    return in_stage("evaluate", [&] { return run_evaluate(cfg, report); });
}

}  // namespace lanekoop
