#ifndef DCMPC_MODEL_HPP
#define DCMPC_MODEL_HPP

/**
 * \file dcmpc/model.hpp
 *
 * \brief Plant model of a cold-aisle-contained data center.
 *
 * Per-server power p = a1 L/m + a2, the linear CPU temperature recursion
 * T(t+1) = alpha Tc(t) + sigma p(t) + beta T(t), the CRAC coefficient of
 * performance and the M/M/1 response time. Time advances in one-minute steps.
 */

#include <dcmpc/errors.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace dcmpc {

/// Relative slack used when reporting whether a realized constraint holds.
inline constexpr double kFeasibilityRelTol = 1e-9;

/// Load samples indexed as loads[j][k]: cluster j, k-th step of a window.
using LoadMatrix = std::vector<std::vector<double>>;

struct PowerModel {
    double a1 = 10.0;  ///< marginal power per unit CPU utilization
    double a2 = 1.0;   ///< static power per server

    void validate() const {
        if (!(a1 > 0.0) || !(a2 > 0.0)) {
            throw DomainError("power model requires a1 > 0 and a2 > 0");
        }
    }
};

struct ClusterParams {
    double alpha = 0.05;      ///< CRAC-to-CPU heat exchange per step
    double beta = 0.95;       ///< thermal retention per step
    double sigma = 1.5;       ///< power-to-temperature gain per step
    double mu = 1.0;          ///< service rate per server
    double d_max = 0.05;      ///< tolerable response time
    double t_cpu_max = 80.0;  ///< CPU temperature ceiling

    void validate() const {
        if (!(alpha > 0.0) || !(sigma > 0.0)) {
            throw DomainError("cluster requires alpha > 0 and sigma > 0");
        }
        if (!(beta > 0.0 && beta < 1.0)) {
            throw DomainError("cluster requires 0 < beta < 1");
        }
        if (!(mu > 0.0) || !(d_max > 0.0) || !(t_cpu_max > 0.0)) {
            throw DomainError("cluster requires mu, d_max and t_cpu_max > 0");
        }
    }
};

struct PlantParams {
    PowerModel power;
    std::vector<ClusterParams> clusters;
    double tc_min = 18.0;
    double tc_max = 27.0;

    std::size_t cluster_count() const noexcept { return clusters.size(); }

    void validate() const {
        power.validate();
        if (clusters.empty()) {
            throw DomainError("plant needs at least one cluster");
        }
        for (const auto& c : clusters) {
            c.validate();
        }
        if (!(tc_min > 0.0) || !(tc_min <= tc_max)) {
            throw DomainError("plant requires 0 < tc_min <= tc_max");
        }
    }

    /// The log-space reformulation is convex only for supply temperatures >= 11 C.
    void require_convex_bounds() const {
        validate();
        if (tc_min < 11.0) {
            throw PreconditionError("tc_min must be at least 11 for the convex reformulation, got " +
                                    std::to_string(tc_min));
        }
    }

    /// J identical clusters.
    static PlantParams uniform(std::size_t J, const ClusterParams& c = {}, const PowerModel& pm = {},
                               double tc_min = 18.0, double tc_max = 27.0) {
        PlantParams p;
        p.power = pm;
        p.clusters.assign(J, c);
        p.tc_min = tc_min;
        p.tc_max = tc_max;
        return p;
    }
};

struct SystemState {
    long t = 0;
    std::vector<double> t_cpu;
};

/// Decision sequence over a horizon: tc[k] and m[j][k] for k = 0..steps-1.
struct ControlInput {
    std::vector<double> tc;
    std::vector<std::vector<double>> m;

    std::size_t steps() const noexcept { return tc.size(); }
};

inline double server_power(double L, double m, const PowerModel& pm) {
    if (!(m > 0.0)) {
        throw DomainError("server count must be positive");
    }
    if (!(L >= 0.0)) {
        throw DomainError("request rate must be nonnegative");
    }
    return pm.a1 * L / m + pm.a2;
}

inline double cop(double T) noexcept {
    return 0.0068 * T * T + 0.0008 * T + 0.458;
}

inline SystemState step_temperature(const SystemState& state, double tc, std::span<const double> p,
                                    const PlantParams& params) {
    const std::size_t J = params.cluster_count();
    if (state.t_cpu.size() != J || p.size() != J) {
        throw UsageError("step_temperature: state and power vectors must have one entry per cluster");
    }
    SystemState next{state.t + 1, std::vector<double>(J)};
    for (std::size_t j = 0; j < J; ++j) {
        const auto& c = params.clusters[j];
        next.t_cpu[j] = c.alpha * tc + c.sigma * p[j] + c.beta * state.t_cpu[j];
    }
    return next;
}

inline double response_time(double L, double m, double mu) {
    if (!(m > 0.0)) {
        throw DomainError("server count must be positive");
    }
    const double capacity = m * mu - L;
    if (!(capacity > 0.0)) {
        throw InstabilityError("queue unstable: m * mu must exceed the request rate");
    }
    return 1.0 / capacity;
}

/// IT power, cooling power and their sum at one step.
struct EnergyBreakdown {
    double it = 0.0;
    double cooling = 0.0;
    double total = 0.0;
};

inline EnergyBreakdown energy_breakdown(std::span<const double> L, std::span<const double> m, double tc,
                                        const PowerModel& pm) {
    if (L.size() != m.size()) {
        throw UsageError("energy: load and server vectors differ in length");
    }
    double P = 0.0;
    for (std::size_t j = 0; j < L.size(); ++j) {
        P += server_power(L[j], m[j], pm) * m[j];
    }
    const double C = P / cop(tc);
    return {P, C, P + C};
}

inline double total_energy(std::span<const double> L, std::span<const double> m, double tc,
                           const PowerModel& pm) {
    return energy_breakdown(L, m, tc, pm).total;
}

struct StepRecord {
    long t = 0;
    double tc = 0.0;
    std::vector<double> m;
    std::vector<double> load;
    std::vector<double> t_cpu;  ///< state at time t, before the input acts
    double it_power = 0.0;
    double cooling = 0.0;
    double energy = 0.0;
    std::vector<double> delay;  ///< +inf when the queue is unstable
    bool tc_ok = true;
    std::vector<char> delay_ok;
    std::vector<char> temp_ok;

    bool all_ok() const noexcept {
        if (!tc_ok) return false;
        for (char c : delay_ok)
            if (!c) return false;
        for (char c : temp_ok)
            if (!c) return false;
        return true;
    }
};

struct SolveStats {
    long windows = 0;
    long newton_iterations = 0;
    long max_iter_windows = 0;
};

struct TrajectoryLog {
    std::string policy;
    SystemState initial;
    SystemState final_state;
    std::vector<StepRecord> records;
    SolveStats stats;

    double total_energy() const {
        double s = 0.0;
        for (const auto& r : records) s += r.energy;
        return s;
    }

    /// Sample variance (n - 1 denominator) of the applied supply temperature.
    double tc_variance() const {
        const std::size_t n = records.size();
        if (n < 2) return 0.0;
        double mean = 0.0;
        for (const auto& r : records) mean += r.tc;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : records) ss += (r.tc - mean) * (r.tc - mean);
        return ss / static_cast<double>(n - 1);
    }

    long delay_violations() const {
        long v = 0;
        for (const auto& r : records)
            for (char c : r.delay_ok) v += c ? 0 : 1;
        return v;
    }

    long temperature_violations() const {
        long v = 0;
        for (const auto& r : records)
            for (char c : r.temp_ok) v += c ? 0 : 1;
        return v;
    }

    long tc_violations() const {
        long v = 0;
        for (const auto& r : records) v += r.tc_ok ? 0 : 1;
        return v;
    }

    /// Fraction of steps at which every box, delay and temperature constraint held.
    double satisfaction_rate() const {
        if (records.empty()) return 1.0;
        long ok = 0;
        for (const auto& r : records) ok += r.all_ok() ? 1 : 0;
        return static_cast<double>(ok) / static_cast<double>(records.size());
    }
};

inline bool within_upper(double value, double bound) noexcept {
    return value <= bound * (1.0 + kFeasibilityRelTol);
}

/// Builds the log entry for applying (tc, m) at state with true loads L, and
/// returns the successor state through \p next.
inline StepRecord make_record(const SystemState& state, double tc, std::span<const double> m,
                              std::span<const double> L, const PlantParams& params, SystemState& next) {
    const std::size_t J = params.cluster_count();
    StepRecord r;
    r.t = state.t;
    r.tc = tc;
    r.m.assign(m.begin(), m.end());
    r.load.assign(L.begin(), L.end());
    r.t_cpu = state.t_cpu;
    const auto e = energy_breakdown(L, m, tc, params.power);
    r.it_power = e.it;
    r.cooling = e.cooling;
    r.energy = e.total;
    r.tc_ok = tc >= params.tc_min && tc <= params.tc_max;
    r.delay.resize(J);
    r.delay_ok.resize(J);
    r.temp_ok.resize(J);
    std::vector<double> p(J);
    for (std::size_t j = 0; j < J; ++j) {
        const auto& c = params.clusters[j];
        try {
            r.delay[j] = response_time(L[j], m[j], c.mu);
        } catch (const InstabilityError&) {
            r.delay[j] = std::numeric_limits<double>::infinity();
        }
        r.delay_ok[j] = within_upper(r.delay[j], c.d_max);
        r.temp_ok[j] = within_upper(state.t_cpu[j], c.t_cpu_max);
        p[j] = server_power(L[j], m[j], params.power);
    }
    next = step_temperature(state, tc, p, params);
    return r;
}

/// Forward roll-out of the plant under an input sequence. loads[j][k] is the
/// request rate of cluster j at time init.t + k.
inline TrajectoryLog simulate(const ControlInput& inputs, const LoadMatrix& loads, const SystemState& init,
                              const PlantParams& params) {
    const std::size_t J = params.cluster_count();
    const std::size_t K = inputs.steps();
    if (init.t_cpu.size() != J || inputs.m.size() != J || loads.size() != J) {
        throw UsageError("simulate: inputs, loads and state must cover every cluster");
    }
    for (std::size_t j = 0; j < J; ++j) {
        if (inputs.m[j].size() != K || loads[j].size() != K) {
            throw UsageError("simulate: input and trace lengths are misaligned");
        }
    }
    TrajectoryLog log;
    log.initial = init;
    SystemState state = init;
    std::vector<double> m(J), L(J);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < J; ++j) {
            m[j] = inputs.m[j][k];
            L[j] = loads[j][k];
        }
        SystemState next;
        log.records.push_back(make_record(state, inputs.tc[k], m, L, params, next));
        state = std::move(next);
    }
    log.final_state = state;
    return log;
}

}  // namespace dcmpc

#endif  // DCMPC_MODEL_HPP
