#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lanekoop/config.hpp"
#include "lanekoop/pipeline.hpp"

using namespace lanekoop;

namespace {

std::string error_of(std::string_view text) {
    try {
        parse_config(text, "cfg.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    for (const char* text : {"", "# nothing\n", "~\n"}) {
        const auto cfg = parse_config(text);
        EXPECT_EQ(cfg.lane.lane_width, 3.5);
        EXPECT_EQ(cfg.lane.vehicle_width, 1.5);
        EXPECT_DOUBLE_EQ(cfg.lane.sigma_y, 1.0 / 3.0);
        EXPECT_DOUBLE_EQ(cfg.lane.sigma_a, 0.2 / 3.0);
        EXPECT_EQ(cfg.lane.sample_time, 0.1);
        EXPECT_EQ(cfg.lane.s0, 0.0);
        EXPECT_EQ(cfg.lane.v0, 10.0);
        EXPECT_EQ(cfg.lane.a0, 0.0);
        EXPECT_DOUBLE_EQ(cfg.lane.psi0_max, 15.0 * std::numbers::pi / 180.0);
        EXPECT_EQ(cfg.monomial_order, 2);
        EXPECT_EQ(cfg.lane.n_traj, 100u);
        EXPECT_EQ(cfg.bases.size(), 2u);
        ASSERT_EQ(cfg.rules.size(), 3u);
        EXPECT_EQ(rule_label(cfg.rules[0]), "E90");
        EXPECT_EQ(rule_label(cfg.rules[1]), "E99");
        EXPECT_EQ(rule_label(cfg.rules[2]), "HT");
        EXPECT_EQ(cfg.energy_slack, 1.5);
        EXPECT_EQ(cfg.repeats, 100u);
        EXPECT_EQ(cfg.warmups, 10u);
    }
}

TEST(Config, ReadsEveryKey) {
    const auto cfg = parse_config(R"(
w_L: 3.0
w_V: 1.0
sigma_a_s: 0.1
sigma_y_L: 0.25
T: 0.05
psi_0_max_deg: 20
s_0: 1.0
v_0: 12
a_0: 0.5
N_T: 7
N_m: 3
c_s: 0.2
c_y: -0.4
bases: [radial]
rules: [E95, r2, full]
seed: 9
repeats: 4
warmups: 0
output_dir: out/x
energy_slack: 0
energy_squared: true
ht_semantics: count
time_scope: svd+solve
)");
    EXPECT_EQ(cfg.lane.lane_width, 3.0);
    EXPECT_EQ(cfg.lane.sigma_y, 0.25);
    EXPECT_DOUBLE_EQ(cfg.lane.psi0_max, 20.0 * std::numbers::pi / 180.0);
    EXPECT_EQ(cfg.lane.n_traj, 7u);
    EXPECT_EQ(cfg.monomial_order, 3);
    EXPECT_EQ(cfg.center_s, 0.2);
    EXPECT_EQ(cfg.center_y, -0.4);
    EXPECT_EQ(cfg.bases, std::vector<BasisKind>{BasisKind::ThinPlateRadial});
    EXPECT_EQ(rule_label(cfg.rules[1]), "r2");
    EXPECT_EQ(cfg.master_seed, 9u);
    EXPECT_EQ(cfg.output_dir, "out/x");
    EXPECT_TRUE(cfg.energy_squared);
    EXPECT_EQ(cfg.ht_semantics, HtSemantics::Count);
    EXPECT_EQ(cfg.time_scope, TimeScope::SvdAndSolve);
}

TEST(Config, LateralSpreadFollowsWidthsWhenUnset) {
    const auto cfg = parse_config("w_L: 4.0\nw_V: 1.0\n");
    EXPECT_DOUBLE_EQ(cfg.lane.sigma_y, 0.5);
}

TEST(Config, UnknownKeyReportsLine) {
    const auto msg = error_of("w_L: 3.5\nlane_widht: 3\n");
    EXPECT_NE(msg.find("cfg.yaml:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("lane_widht"), std::string::npos) << msg;
}

TEST(Config, BadValueReportsField) {
    const auto msg = error_of("T: fast\n");
    EXPECT_NE(msg.find("'T'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("cfg.yaml:1"), std::string::npos) << msg;
}

TEST(Config, ZeroYawIsRejected) {
    EXPECT_NE(error_of("psi_0_max_deg: 0\n").find("psi_0_max"), std::string::npos);
}

TEST(Config, AllViolationsListed) {
    const auto msg = error_of("w_L: -1\nT: 0\nrules: [E90, E90]\n");
    EXPECT_NE(msg.find("w_L"), std::string::npos) << msg;
    EXPECT_NE(msg.find("T must"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorReportsLine) {
    const auto msg = error_of("w_L: 3.5\nrules: [E90\n");
    EXPECT_NE(msg.find("parse error"), std::string::npos) << msg;
}

TEST(Config, RuleSpellings) {
    EXPECT_EQ(rule_label(parse_rule("E99.9")), "E99.9");
    EXPECT_EQ(rule_label(parse_rule("HT")), "HT");
    EXPECT_EQ(rule_label(parse_rule("full")), "full");
    EXPECT_EQ(rule_label(parse_rule("r3")), "r3");
    EXPECT_THROW(parse_rule("r0"), std::invalid_argument);
    EXPECT_THROW(parse_rule("E"), std::invalid_argument);
    EXPECT_THROW(parse_rule("Q4"), std::invalid_argument);
}

TEST(Config, MissingFileIsConfigError) {
    EXPECT_THROW(load_config("/nonexistent/cfg.yaml"), ConfigError);
}

TEST(Config, SerializedFormParsesBackIdentically) {
    ExperimentConfig cfg;
    cfg.lane.psi0_max = 0.2;  // not a round number of degrees
    cfg.lane.sigma_a = 0.123456789;
    cfg.center_s = 0.5;
    cfg.rules = {EnergyRule{97.5}, FixedRule{2}};
    cfg.time_scope = TimeScope::SvdAndSolve;
    const auto back = parse_config(config_to_json(cfg).dump());
    EXPECT_EQ(back.lane.psi0_max, cfg.lane.psi0_max);
    EXPECT_EQ(back.lane.sigma_a, cfg.lane.sigma_a);
    EXPECT_EQ(back.lane.sigma_y, cfg.lane.sigma_y);
    EXPECT_EQ(back.center_s, cfg.center_s);
    EXPECT_FALSE(back.center_y.has_value());
    EXPECT_EQ(config_hash(back), config_hash(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
}
