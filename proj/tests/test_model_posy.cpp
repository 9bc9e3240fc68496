#include "oracles.hpp"

#include <dcmpc/model.hpp>
#include <dcmpc/posy.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using oracle::rel_err;

TEST(Model, ServerPowerAndCop) {
    const dcmpc::PowerModel pm{10.0, 1.0};
    EXPECT_DOUBLE_EQ(dcmpc::server_power(5.0, 10.0, pm), 6.0);
    EXPECT_DOUBLE_EQ(dcmpc::server_power(0.0, 3.0, pm), 1.0);
    EXPECT_THROW(dcmpc::server_power(1.0, 0.0, pm), dcmpc::DomainError);
    EXPECT_THROW(dcmpc::server_power(-1.0, 2.0, pm), dcmpc::DomainError);
    for (double T : {11.0, 18.0, 22.5, 27.0}) EXPECT_DOUBLE_EQ(dcmpc::cop(T), oracle::cop(T));
}

TEST(Model, ResponseTime) {
    EXPECT_DOUBLE_EQ(dcmpc::response_time(5.0, 25.0, 1.0), 0.05);
    EXPECT_THROW(dcmpc::response_time(5.0, 5.0, 1.0), dcmpc::InstabilityError);
    EXPECT_THROW(dcmpc::response_time(5.0, 4.0, 1.0), dcmpc::InstabilityError);
}

TEST(Model, EnergyMatchesOracle) {
    oracle::Plant pl;
    pl.clusters.resize(2);
    const std::vector<double> L{3.0, 7.5}, m{23.0, 30.0};
    const auto e = dcmpc::energy_breakdown(L, m, 21.0, {10.0, 1.0});
    EXPECT_LT(rel_err(e.total, oracle::step_energy(pl, 21.0, m, L)), 1e-14);
    EXPECT_LT(rel_err(e.it + e.cooling, e.total), 1e-14);
    EXPECT_LT(rel_err(e.cooling, e.it / oracle::cop(21.0)), 1e-14);
}

TEST(Model, ParamsValidate) {
    auto p = dcmpc::PlantParams::uniform(2);
    EXPECT_NO_THROW(p.require_convex_bounds());
    p.clusters[1].beta = 1.0;
    EXPECT_THROW(p.validate(), dcmpc::DomainError);
    p = dcmpc::PlantParams::uniform(1);
    p.tc_min = 10.0;
    EXPECT_NO_THROW(p.validate());
    EXPECT_THROW(p.require_convex_bounds(), dcmpc::PreconditionError);
    p.tc_min = 30.0;
    EXPECT_THROW(p.validate(), dcmpc::DomainError);
}

TEST(Model, SimulateMatchesOracleRollout) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    oracle::Plant pl;
    pl.clusters = {{0.04, 0.93, 1.2, 1.1, 0.06, 80.0}, {0.06, 0.96, 1.8, 0.9, 0.04, 70.0}};
    const auto params = dcmpc::PlantParams::uniform(1);
    dcmpc::PlantParams lib = params;
    lib.clusters.clear();
    for (const auto& c : pl.clusters) lib.clusters.push_back({c.alpha, c.beta, c.sigma, c.mu, c.d_max, c.t_max});
    const std::size_t K = 15;
    dcmpc::ControlInput u;
    dcmpc::LoadMatrix L(2, std::vector<double>(K));
    u.m.assign(2, std::vector<double>(K));
    for (std::size_t k = 0; k < K; ++k) {
        u.tc.push_back(18.0 + 9.0 * U(gen));
        for (std::size_t j = 0; j < 2; ++j) {
            L[j][k] = 10.0 * U(gen);
            u.m[j][k] = 20.0 + 20.0 * U(gen);
        }
    }
    const dcmpc::SystemState init{40, {30.0, 45.0}};
    const auto log = dcmpc::simulate(u, L, init, lib);
    const auto ref = oracle::rollout(pl, u.tc, u.m, L, init.t_cpu);
    ASSERT_EQ(log.records.size(), K);
    EXPECT_LT(rel_err(log.total_energy(), ref.energy), 1e-13);
    for (std::size_t k = 0; k < K; ++k) {
        EXPECT_EQ(log.records[k].t, 40 + static_cast<long>(k));
        for (std::size_t j = 0; j < 2; ++j) EXPECT_LT(rel_err(log.records[k].t_cpu[j], ref.temps[j][k]), 1e-13);
    }
    for (std::size_t j = 0; j < 2; ++j) EXPECT_LT(rel_err(log.final_state.t_cpu[j], ref.temps[j][K]), 1e-13);
    EXPECT_EQ(log.final_state.t, 40 + static_cast<long>(K));
}

TEST(Model, ViolationsAreLoggedNotThrown) {
    auto p = dcmpc::PlantParams::uniform(1);
    dcmpc::ControlInput u{{30.0, 20.0}, {{5.0, 30.0}}};
    const dcmpc::LoadMatrix L{{6.0, 6.0}};
    const auto log = dcmpc::simulate(u, L, {0, {85.0}}, p);
    EXPECT_FALSE(log.records[0].tc_ok);
    EXPECT_FALSE(log.records[0].delay_ok[0]);
    EXPECT_TRUE(std::isinf(log.records[0].delay[0]));
    EXPECT_FALSE(log.records[0].temp_ok[0]);
    EXPECT_EQ(log.delay_violations(), 1);
    EXPECT_EQ(log.tc_violations(), 1);
    EXPECT_DOUBLE_EQ(log.satisfaction_rate(), 0.0);
}

TEST(Model, TcVarianceIsSampleVariance) {
    dcmpc::TrajectoryLog log;
    for (double tc : {20.0, 22.0, 24.0}) {
        dcmpc::StepRecord r;
        r.tc = tc;
        log.records.push_back(r);
    }
    EXPECT_DOUBLE_EQ(log.tc_variance(), 4.0);
}

TEST(Posy, MonomialAndPosynomialEval) {
    dcmpc::Posynomial p;
    p.add(dcmpc::Monomial(2.0, {{0, 1.0}, {1, -1.0}}));
    p.add(dcmpc::Monomial(3.0, {{1, 0.5}}));
    p.add(dcmpc::Monomial(1.5, {{0, 1.0}, {1, -1.0}}));
    p.collect();
    EXPECT_EQ(p.terms().size(), 2u);
    const std::vector<double> v{4.0, 9.0};
    EXPECT_NEAR(dcmpc::posy_eval(p, v), 3.5 * 4.0 / 9.0 + 3.0 * 3.0, 1e-14);
    EXPECT_THROW(dcmpc::Monomial(0.0), dcmpc::DomainError);
    EXPECT_THROW(dcmpc::posy_eval(dcmpc::Posynomial{}, v), dcmpc::UsageError);
}

TEST(Posy, LogEvalGradientMatchesFiniteDifference) {
    dcmpc::Posynomial p;
    p.add(dcmpc::Monomial(2.0, {{0, 1.5}, {2, -0.7}}));
    p.add(dcmpc::Monomial(0.3, {{1, 2.0}}));
    p.add(dcmpc::Monomial(5.0));
    const std::vector<double> w{0.2, -0.4, 1.1};
    const auto e = dcmpc::posy_log_eval(p, w);
    EXPECT_NEAR(e.value, std::log(dcmpc::posy_eval(p, std::vector<double>{std::exp(0.2), std::exp(-0.4), std::exp(1.1)})), 1e-14);
    for (std::size_t i = 0; i < 3; ++i) {
        auto wp = w, wm = w;
        wp[i] += 1e-6;
        wm[i] -= 1e-6;
        const double fd = (dcmpc::posy_log_eval(p, wp).value - dcmpc::posy_log_eval(p, wm).value) / 2e-6;
        EXPECT_NEAR(e.grad[i], fd, 1e-8);
    }
}

TEST(Posy, FluctuationPenalty) {
    const std::vector<double> flat{3.0, 3.0, 3.0, 3.0};
    EXPECT_DOUBLE_EQ(dcmpc::fluctuation_penalty(flat), 6.0);
    const std::vector<double> xi{1.0, 2.0, 4.0};
    EXPECT_DOUBLE_EQ(dcmpc::fluctuation_penalty(xi), 2.5 + 2.5);
    const std::vector<int> ids{0, 1, 2};
    const auto pp = dcmpc::penalty_posynomial(ids, 7.0);
    EXPECT_NEAR(dcmpc::posy_eval(pp, xi), 7.0 * 5.0, 1e-13);
    EXPECT_TRUE(dcmpc::penalty_posynomial(ids, 0.0).empty());
}

TEST(Posy, CoolingLogDerivatives) {
    for (double T : {11.0, 15.0, 20.0, 27.0, 40.0}) {
        const double x = std::log(T), h = 1e-5;
        const auto f = dcmpc::cooling_log(x);
        EXPECT_NEAR(f.value, std::log(1.0 + 1.0 / oracle::cop(T)), 1e-15);
        const double d1 = (dcmpc::cooling_log(x + h).value - dcmpc::cooling_log(x - h).value) / (2 * h);
        const double d2 = (dcmpc::cooling_log(x + h).d1 - dcmpc::cooling_log(x - h).d1) / (2 * h);
        EXPECT_LT(rel_err(f.d1, d1), 1e-8);
        EXPECT_LT(rel_err(f.d2, d2), 1e-6);
    }
}

TEST(Posy, QPolynomialSignMatchesCurvature) {
    const auto q = oracle::derived_q();
    for (double T = 5.0; T <= 45.0; T += 0.37) {
        EXPECT_EQ(dcmpc::q_poly(T) > 0.0, dcmpc::cooling_log(std::log(T)).d2 > 0.0) << "T = " << T;
        EXPECT_LT(rel_err(dcmpc::q_poly(T), oracle::eval(q, T)), 1e-12);
    }
    EXPECT_EQ(dcmpc::q_poly_exact(11), 37362464);
}

TEST(Posy, CpuTempPosynomialPreconditions) {
    const dcmpc::VariableLayout lay{5, 2, 1};
    const auto p = dcmpc::PlantParams::uniform(1);
    const dcmpc::LoadMatrix L{{1.0, 2.0, 3.0}};
    EXPECT_THROW(dcmpc::cpu_temp_posynomial(0, 9, lay, L, {5, {30.0}}, p), dcmpc::UsageError);
    EXPECT_THROW(dcmpc::cpu_temp_posynomial(0, 6, lay, L, {4, {30.0}}, p), dcmpc::UsageError);
    EXPECT_THROW(dcmpc::cpu_temp_posynomial(1, 6, lay, L, {5, {30.0}}, p), dcmpc::UsageError);
    // At t = tau the temperature is the measured constant.
    const auto c = dcmpc::cpu_temp_posynomial(0, 5, lay, L, {5, {30.0}}, p);
    ASSERT_EQ(c.terms().size(), 1u);
    EXPECT_DOUBLE_EQ(c.terms()[0].coeff(), 30.0);
}

TEST(Posy, LogConvexFnHessianMatchesFiniteDifference) {
    std::vector<dcmpc::LogTerm> terms{{std::log(2.0), {{0, 1.0}}, 1}, {std::log(0.5), {{1, -1.0}, {2, 2.0}}, -1},
                                      {std::log(3.0), {{2, 1.0}}, 0}};
    const dcmpc::LogConvexFn f(terms, {{2, -1.0}}, 0.3);
    const std::vector<double> w{std::log(20.0), std::log(24.0), 0.4};
    const auto H = f.hessian(w);
    const auto& sup = f.support();
    for (std::size_t a = 0; a < sup.size(); ++a) {
        for (std::size_t b = 0; b < sup.size(); ++b) {
            const double h = 1e-5;
            auto wp = w, wm = w;
            wp[static_cast<std::size_t>(sup[b])] += h;
            wm[static_cast<std::size_t>(sup[b])] -= h;
            const double fd = (f.gradient(wp)[static_cast<std::size_t>(sup[a])] -
                               f.gradient(wm)[static_cast<std::size_t>(sup[a])]) / (2 * h);
            EXPECT_NEAR(H(static_cast<long>(a), static_cast<long>(b)), fd, 1e-7);
        }
    }
    EXPECT_EQ(f.domain_lower().size(), 2u);
}

}  // namespace
