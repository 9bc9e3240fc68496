#include "oracles.hpp"

#include <dcmpc/controller.hpp>
#include <dcmpc/scenario.hpp>
#include <dcmpc/trace.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace {

using oracle::rel_err;

dcmpc::WorkloadTrace small_trace(std::size_t length, std::uint64_t seed = 1) {
    dcmpc::SyntheticSpec s;
    s.clusters = 2;
    s.length = length;
    s.base = {5, 7};
    s.amplitude = {2, 2};
    s.period = {40, 60};
    s.noise = {0.5, 0.5};
    s.seed = seed;
    return dcmpc::synth(s);
}

TEST(Policy, ParseAndPrint) {
    for (auto p : {dcmpc::Policy::deterministic, dcmpc::Policy::penalized, dcmpc::Policy::scenario, dcmpc::Policy::oos}) {
        EXPECT_EQ(dcmpc::parse_policy(dcmpc::to_string(p)), p);
    }
    EXPECT_THROW(dcmpc::parse_policy("greedy"), dcmpc::ConfigError);
    EXPECT_EQ(dcmpc::parse_rounding("ceil"), dcmpc::Rounding::ceil);
}

TEST(Controller, MpcLogIsConsistentWithReplay) {
    const auto trace = small_trace(40);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 5;
    cfg.tf = 34;
    cfg.horizon = 4;
    const auto params = dcmpc::PlantParams::uniform(2);
    const dcmpc::SystemState init{5, {27, 27}};
    const auto log = dcmpc::run_mpc(trace, cfg, params, init);
    ASSERT_EQ(log.records.size(), 30u);
    EXPECT_EQ(log.stats.windows, 30);
    EXPECT_DOUBLE_EQ(log.satisfaction_rate(), 1.0);

    // Replaying the applied inputs through the oracle reproduces the log.
    dcmpc::ControlInput u;
    u.m.assign(2, {});
    for (const auto& r : log.records) {
        u.tc.push_back(r.tc);
        for (std::size_t j = 0; j < 2; ++j) u.m[j].push_back(r.m[j]);
    }
    oracle::Plant pl;
    pl.clusters.resize(2);
    const auto ref = oracle::rollout(pl, u.tc, u.m, trace.window(5, 30), init.t_cpu);
    EXPECT_LT(rel_err(ref.energy, log.total_energy()), 1e-12);
    EXPECT_TRUE(ref.delay_ok);
}

TEST(Controller, CeilRoundingKeepsConstraints) {
    const auto trace = small_trace(30);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 0;
    cfg.tf = 19;
    cfg.rounding = dcmpc::Rounding::ceil;
    const auto log = dcmpc::run_mpc(trace, cfg, dcmpc::PlantParams::uniform(2), {0, {27, 27}});
    for (const auto& r : log.records)
        for (double m : r.m) EXPECT_EQ(m, std::floor(m));
    EXPECT_EQ(log.delay_violations(), 0);
}

TEST(Controller, PenaltyReducesTcVariance) {
    const auto trace = small_trace(80);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 0;
    cfg.tf = 59;
    const auto params = dcmpc::PlantParams::uniform(2);
    const dcmpc::SystemState init{0, {27, 27}};
    const auto det = dcmpc::run_mpc(trace, cfg, params, init);
    cfg.policy = dcmpc::Policy::penalized;
    cfg.w_t = 1e6;
    const auto pen = dcmpc::run_mpc(trace, cfg, params, init);
    EXPECT_LT(pen.tc_variance(), det.tc_variance());
    EXPECT_GE(pen.total_energy(), det.total_energy() * (1.0 - 1e-9));
}

TEST(Controller, RejectsBadRuns) {
    const auto trace = small_trace(20);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 0;
    cfg.tf = 25;
    const auto params = dcmpc::PlantParams::uniform(2);
    EXPECT_THROW(dcmpc::run_mpc(trace, cfg, params, {0, {27, 27}}), dcmpc::UsageError);
    cfg.tf = 10;
    EXPECT_THROW(dcmpc::run_mpc(trace, cfg, params, {1, {27, 27}}), dcmpc::UsageError);
    EXPECT_THROW(dcmpc::run_mpc(trace, cfg, dcmpc::PlantParams::uniform(3), {0, {27, 27, 27}}), dcmpc::UsageError);
    cfg.policy = dcmpc::Policy::scenario;
    EXPECT_THROW(dcmpc::run_mpc(trace, cfg, params, {0, {27, 27}}), dcmpc::UsageError);
}

TEST(Controller, InfeasibleWindowNamesTau) {
    const auto trace = small_trace(20);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 0;
    cfg.tf = 10;
    auto params = dcmpc::PlantParams::uniform(2);
    for (auto& c : params.clusters) {
        c.t_cpu_max = 28.0;
        c.sigma = 4.0;
    }
    try {
        dcmpc::run_mpc(trace, cfg, params, {0, {27.9, 27.9}});
        FAIL() << "expected InfeasibleError";
    } catch (const dcmpc::InfeasibleError& e) {
        EXPECT_EQ(e.window(), 0);
    }
}

TEST(Controller, OosCurveAndOptimum) {
    const auto trace = small_trace(30);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 0;
    cfg.tf = 19;
    cfg.policy = dcmpc::Policy::oos;
    const auto params = dcmpc::PlantParams::uniform(2);
    const auto r = dcmpc::run_oos(trace, cfg, params, {0, {27, 27}});
    ASSERT_GE(r.curve.size(), 10u);
    double best = 1e300;
    for (const auto& [tc, e] : r.curve) best = std::min(best, e);
    EXPECT_DOUBLE_EQ(r.log.total_energy(), best);
    for (const auto& rec : r.log.records) EXPECT_DOUBLE_EQ(rec.tc, r.best_tc);
    EXPECT_GE(r.best_tc, 18.0);
    EXPECT_LE(r.best_tc, 27.0);
}

TEST(Controller, CompareComputesDeltas) {
    const auto trace = small_trace(20);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 0;
    cfg.tf = 9;
    const auto a = dcmpc::run_mpc(trace, cfg, dcmpc::PlantParams::uniform(2), {0, {27, 27}});
    const auto rows = dcmpc::compare({{"a", &a}, {"b", &a}});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].delta_pct, 0.0);
    EXPECT_EQ(rows[1].delta_pct, 0.0);
    EXPECT_EQ(rows[1].name, "b");
}

TEST(Scenario, ExtractPrefersExactMatches) {
    dcmpc::History h{100, {{1, 2, 3, 1, 5, 1, 7, 8}}};
    const std::vector<double> now{1.0};
    const auto s = dcmpc::extract_scenarios(h, now, 1, 3);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.start_indices, (std::vector<long>{0, 3, 5}));
    EXPECT_EQ(s.paths[1][0], (std::vector<double>{1, 5}));
    EXPECT_THROW(dcmpc::extract_scenarios(h, now, 1, 8), dcmpc::UsageError);
    EXPECT_THROW(dcmpc::extract_scenarios(h, now, 10, 1), dcmpc::UsageError);
}

TEST(Scenario, BoundAgainstExactSum) {
    for (const auto& [num, den, N, h, J] : std::vector<std::tuple<long, long, long, int, long>>{
             {1, 5, 100, 5, 3}, {1, 10, 50, 2, 2}, {1, 2, 40, 0, 1}, {3, 100, 200, 4, 5}}) {
        const double eps = static_cast<double>(num) / den;
        const auto b = dcmpc::satisfaction_bound(eps, static_cast<std::size_t>(N), h, static_cast<std::size_t>(J));
        const double exact = static_cast<double>(oracle::binomial_tail(num, den, N, (h + 1) * J));
        EXPECT_LT(rel_err(b.value, exact), 1e-11) << num << "/" << den << " N=" << N;
    }
    EXPECT_TRUE(dcmpc::satisfaction_bound(0.1, 10, 5, 3).vacuous);
    EXPECT_THROW(dcmpc::satisfaction_bound(1.5, 10, 1, 1), dcmpc::UsageError);
}

TEST(Scenario, EmpiricalSatisfactionCountsViolations) {
    const auto params = dcmpc::PlantParams::uniform(1);
    dcmpc::ControlInput u{{25, 25}, {{30, 30}}};
    dcmpc::ScenarioSet set;
    set.paths = {{{5, 5}}, {{5, 5}}, {{12, 12}}};  // 12 > 30 - 20 breaks the delay bound
    const double E = oracle::step_energy({}, 25, {30}, {5}) * 2.0;
    EXPECT_DOUBLE_EQ(dcmpc::empirical_satisfaction(u, std::log(E) + 1e-9, set, {0, {27}}, params), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(dcmpc::empirical_satisfaction(u, std::log(E) - 1e-3, set, {0, {27}}, params), 0.0);
}

TEST(Scenario, ScenarioMpcUsesHistoryOnly) {
    const auto trace = small_trace(260);
    const auto [head, tail] = dcmpc::split(trace, 200);
    dcmpc::ExperimentConfig cfg;
    cfg.t0 = 200;
    cfg.tf = 219;
    cfg.horizon = 3;
    cfg.policy = dcmpc::Policy::scenario;
    cfg.scenario_count = 20;
    const auto params = dcmpc::PlantParams::uniform(2);
    const auto log = dcmpc::run_scenario_mpc(head.history(), trace, cfg, params, {200, {27, 27}});
    EXPECT_EQ(log.records.size(), 20u);
    EXPECT_EQ(log.policy, "scenario");
    EXPECT_EQ(log.temperature_violations(), 0);
}

}  // namespace
