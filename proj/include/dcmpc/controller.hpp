#ifndef DCMPC_CONTROLLER_HPP
#define DCMPC_CONTROLLER_HPP

/**
 * \file dcmpc/controller.hpp
 *
 * \brief Receding-horizon policies and the Offline Optimal Static baseline.
 *
 * At every tau in [t0, tf] an MPC policy builds the window program over
 * tau..min(tau + t_h, tf) from the measured plant state, solves it, applies
 * only the first input against the true loads and advances the plant. The
 * next solve is warm-started from the previous optimum shifted by one step.
 */

#include <dcmpc/errors.hpp>
#include <dcmpc/model.hpp>
#include <dcmpc/program.hpp>
#include <dcmpc/scenario.hpp>
#include <dcmpc/solver.hpp>
#include <dcmpc/trace.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dcmpc {

enum class Policy { deterministic, penalized, scenario, oos };
enum class Rounding { none, ceil };

inline const char* to_string(Policy p) noexcept {
    switch (p) {
        case Policy::deterministic: return "deterministic";
        case Policy::penalized: return "penalized";
        case Policy::scenario: return "scenario";
        case Policy::oos: return "oos";
    }
    return "unknown";
}

inline Policy parse_policy(const std::string& s) {
    if (s == "deterministic" || s == "mpc") return Policy::deterministic;
    if (s == "penalized") return Policy::penalized;
    if (s == "scenario") return Policy::scenario;
    if (s == "oos") return Policy::oos;
    throw ConfigError("unknown policy '" + s + "'");
}

inline const char* to_string(Rounding r) noexcept { return r == Rounding::ceil ? "ceil" : "none"; }

inline Rounding parse_rounding(const std::string& s) {
    if (s == "none") return Rounding::none;
    if (s == "ceil") return Rounding::ceil;
    throw ConfigError("unknown rounding '" + s + "'");
}

struct ExperimentConfig {
    long t0 = 0;
    long tf = 0;
    int horizon = 5;
    Policy policy = Policy::deterministic;
    double w_t = 0.0;
    double w_m = 0.0;  ///< applied to every cluster
    std::size_t scenario_count = 100;
    Rounding rounding = Rounding::none;
    SolverConfig solver;

    void validate() const {
        if (!(t0 < tf)) throw UsageError("experiment requires t0 < tf");
        if (horizon < 0) throw UsageError("horizon must be nonnegative");
        if (!(w_t >= 0.0) || !(w_m >= 0.0)) throw UsageError("penalty weights must be nonnegative");
        if (policy == Policy::scenario && scenario_count < 1) throw UsageError("scenario policy needs N >= 1");
        solver.validate();
    }
};

/// Predicted loads for tau..tau+h, one row per cluster.
using Predictor = std::function<LoadMatrix(long tau, int h)>;

inline Predictor perfect_predictor(const WorkloadTrace& trace) {
    return [&trace](long tau, int h) { return trace.window(tau, static_cast<std::size_t>(h) + 1); };
}

namespace detail {

inline std::vector<double> applied_servers(const ControlInput& u, std::size_t k, Rounding rounding) {
    std::vector<double> m(u.m.size());
    for (std::size_t j = 0; j < m.size(); ++j) {
        m[j] = u.m[j][k];
        // Rounding up keeps every constraint that held for the continuous m.
        if (rounding == Rounding::ceil) m[j] = std::ceil(m[j] * (1.0 - 1e-12));
    }
    return m;
}

inline double clamp_tc(double tc, const PlantParams& p) noexcept { return std::clamp(tc, p.tc_min, p.tc_max); }

/// Previous optimum shifted one step forward, the last step duplicated.
inline std::vector<double> shift_warm_start(const std::vector<double>& w, const VariableLayout& from,
                                            const VariableLayout& to) {
    std::vector<double> out(static_cast<std::size_t>(to.size()));
    const long last = from.tau + from.horizon;
    for (long t = to.tau; t <= to.tau + to.horizon; ++t) {
        const long src = std::min(t, last);
        out[static_cast<std::size_t>(to.x(t))] = w[static_cast<std::size_t>(from.x(src))];
        for (int j = 0; j < to.clusters; ++j) {
            out[static_cast<std::size_t>(to.y(j, t))] = w[static_cast<std::size_t>(from.y(j, src))];
        }
    }
    out[static_cast<std::size_t>(to.gamma())] = w[static_cast<std::size_t>(from.gamma())];
    return out;
}

inline void check_run(const WorkloadTrace& truth, const ExperimentConfig& cfg, const PlantParams& params,
                      const SystemState& init) {
    cfg.validate();
    params.require_convex_bounds();
    truth.validate();
    if (truth.clusters() != params.cluster_count()) throw UsageError("trace and plant disagree on the cluster count");
    if (!truth.covers(cfg.t0, cfg.tf)) throw UsageError("trace does not cover [t0, tf]");
    if (init.t != cfg.t0 || init.t_cpu.size() != params.cluster_count()) {
        throw UsageError("initial state must be given at t0 for every cluster");
    }
}

using WindowBuilder = std::function<ConvexProgram(const WindowData&)>;

inline TrajectoryLog receding_horizon(const WorkloadTrace& truth, const ExperimentConfig& cfg, const PlantParams& params,
                                      const SystemState& init, const std::function<LoadMatrix(long, int)>& loads_for,
                                      const WindowBuilder& build) {
    check_run(truth, cfg, params, init);
    const std::size_t J = params.cluster_count();
    TrajectoryLog log;
    log.policy = to_string(cfg.policy);
    log.initial = init;
    SystemState state = init;
    std::optional<std::vector<double>> warm;
    VariableLayout prev_layout;
    for (long tau = cfg.t0; tau <= cfg.tf; ++tau) {
        WindowData d;
        d.tau = tau;
        d.horizon = static_cast<int>(std::min<long>(cfg.horizon, cfg.tf - tau));
        d.state = state;
        d.params = params;
        d.loads = loads_for(tau, d.horizon);
        if (cfg.policy != Policy::deterministic) {
            d.w_t = cfg.w_t;
            d.w_m.assign(J, cfg.w_m);
        }
        // A ceiling already exceeded by the measured state cannot be repaired
        // by any input; the violation is logged and the window constrains the future only.
        for (std::size_t j = 0; j < J; ++j) {
            if (!within_upper(state.t_cpu[j], params.clusters[j].t_cpu_max)) d.enforce_initial_temperature = false;
        }
        const ConvexProgram prog = build(d);
        std::optional<std::vector<double>> start;
        if (warm) start = shift_warm_start(*warm, prev_layout, prog.layout);
        const Solution sol = minimize(prog, cfg.solver, start);
        ++log.stats.windows;
        log.stats.newton_iterations += sol.iterations;
        if (sol.status == SolveStatus::infeasible) {
            throw InfeasibleError("window program at tau = " + std::to_string(tau) + " is infeasible", tau);
        }
        if (sol.status == SolveStatus::max_iter) ++log.stats.max_iter_windows;

        const auto [u, Gamma] = decode(sol.w_star, prog.layout);
        const double tc = clamp_tc(u.tc[0], params);
        const auto m = applied_servers(u, 0, cfg.rounding);
        SystemState next;
        log.records.push_back(make_record(state, tc, m, truth.at(tau), params, next));
        state = std::move(next);
        warm = sol.w_star;
        prev_layout = prog.layout;
    }
    log.final_state = state;
    return log;
}

}  // namespace detail

/// Deterministic or penalized MPC driven by \p predict; \p truth drives the plant.
inline TrajectoryLog run_mpc(const Predictor& predict, const WorkloadTrace& truth, const ExperimentConfig& config,
                             const PlantParams& params, const SystemState& init) {
    if (config.policy != Policy::deterministic && config.policy != Policy::penalized) {
        throw UsageError("run_mpc handles the deterministic and penalized policies");
    }
    const bool penalized = config.policy == Policy::penalized;
    return detail::receding_horizon(truth, config, params, init, predict, [penalized](const WindowData& d) {
        return penalized ? build_penalized(d) : build_deterministic(d);
    });
}

inline TrajectoryLog run_mpc(const WorkloadTrace& trace, const ExperimentConfig& config, const PlantParams& params,
                             const SystemState& init) {
    return run_mpc(perfect_predictor(trace), trace, config, params, init);
}

/// Scenario MPC: knows only the current load and the history.
inline TrajectoryLog run_scenario_mpc(const History& history, const WorkloadTrace& truth,
                                      const ExperimentConfig& config, const PlantParams& params,
                                      const SystemState& init) {
    if (config.policy != Policy::scenario) throw UsageError("run_scenario_mpc handles the scenario policy");
    if (history.clusters() != params.cluster_count()) throw UsageError("history and plant disagree on the cluster count");
    std::map<long, ScenarioSet> sets;  // keyed by tau; built lazily inside the loop
    auto loads_for = [&](long tau, int h) {
        const auto current = truth.at(tau);
        sets[tau] = extract_scenarios(history, current, h, config.scenario_count);
        return sets[tau].paths.front();
    };
    auto build = [&](const WindowData& d) {
        auto it = sets.find(d.tau);
        ConvexProgram p = build_scenario(d, it->second);
        sets.erase(it);
        return p;
    };
    return detail::receding_horizon(truth, config, params, init, loads_for, build);
}

struct OosResult {
    TrajectoryLog log;
    double best_tc = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<double, double>> curve;  ///< (Tc, total energy) in evaluation order; inf when infeasible
};

namespace detail {

struct OosCandidate {
    double tc = 0.0;
    double energy = std::numeric_limits<double>::infinity();
    std::optional<TrajectoryLog> log;
    std::vector<double> w;
};

inline OosCandidate oos_evaluate(double tc, const LoadMatrix& loads, const ExperimentConfig& cfg,
                                 const PlantParams& params, const SystemState& init,
                                 const std::optional<std::vector<double>>& warm) {
    WindowData d;
    d.tau = cfg.t0;
    d.horizon = static_cast<int>(cfg.tf - cfg.t0);
    d.loads = loads;
    d.state = init;
    d.params = params;
    ConvexProgram prog = build_deterministic(d);
    const double x = std::log(tc);
    for (long t = cfg.t0; t <= cfg.tf; ++t) {
        const auto i = static_cast<std::size_t>(prog.layout.x(t));
        prog.lower[i] = prog.upper[i] = x;
    }
    std::optional<std::vector<double>> start = warm;
    if (start) {
        for (long t = cfg.t0; t <= cfg.tf; ++t) (*start)[static_cast<std::size_t>(prog.layout.x(t))] = x;
    }
    OosCandidate c;
    c.tc = tc;
    const Solution sol = minimize(prog, cfg.solver, start);
    if (sol.status == SolveStatus::infeasible) return c;
    auto [u, Gamma] = decode(sol.w_star, prog.layout);
    std::fill(u.tc.begin(), u.tc.end(), tc);
    if (cfg.rounding == Rounding::ceil) {
        for (auto& row : u.m)
            for (double& m : row) m = std::ceil(m * (1.0 - 1e-12));
    }
    TrajectoryLog log = simulate(u, loads, init, params);
    log.policy = to_string(Policy::oos);
    log.stats.windows = 1;
    log.stats.newton_iterations = sol.iterations;
    log.stats.max_iter_windows = sol.status == SolveStatus::max_iter ? 1 : 0;
    c.energy = log.total_energy();
    c.log = std::move(log);
    c.w = sol.w_star;
    return c;
}

}  // namespace detail

/// Best constant supply temperature with full knowledge of [t0, tf]: a coarse
/// 10-point grid over [tc_min, tc_max], then golden-section refinement of the
/// best bracket down to 1e-3 C. Each candidate solves one full-horizon program
/// with every x(t) pinned.
inline OosResult run_oos(const WorkloadTrace& trace, const ExperimentConfig& config, const PlantParams& params,
                         const SystemState& init) {
    detail::check_run(trace, config, params, init);
    const LoadMatrix loads = trace.window(config.t0, static_cast<std::size_t>(config.tf - config.t0 + 1));
    OosResult res;
    detail::OosCandidate best;
    auto consider = [&](detail::OosCandidate&& c) {
        res.curve.emplace_back(c.tc, c.energy);
        const double e = c.energy;
        if (e < best.energy) best = std::move(c);
        return e;
    };

    constexpr int grid_points = 10;
    std::vector<double> grid(grid_points);
    for (int i = 0; i < grid_points; ++i) {
        grid[static_cast<std::size_t>(i)] =
            params.tc_min + (params.tc_max - params.tc_min) * static_cast<double>(i) / (grid_points - 1);
    }
    if (params.tc_min == params.tc_max) grid.assign(1, params.tc_min);
    // Grid candidates are independent programs.
    std::vector<std::future<detail::OosCandidate>> jobs;
    for (double tc : grid) {
        jobs.push_back(std::async(std::launch::async, [&, tc] {
            return detail::oos_evaluate(tc, loads, config, params, init, std::nullopt);
        }));
    }
    std::vector<double> energies;
    for (auto& j : jobs) energies.push_back(consider(j.get()));
    if (!std::isfinite(best.energy)) throw InfeasibleError("every constant supply temperature is infeasible", config.t0);

    const auto ibest = static_cast<std::size_t>(std::min_element(energies.begin(), energies.end()) - energies.begin());
    double a = grid[ibest > 0 ? ibest - 1 : 0];
    double b = grid[std::min(ibest + 1, grid.size() - 1)];
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    std::optional<std::vector<double>> warm = best.w;
    auto eval = [&](double tc) {
        auto c = detail::oos_evaluate(tc, loads, config, params, init, warm);
        if (!c.w.empty()) warm = c.w;
        return consider(std::move(c));
    };
    if (b - a > 1e-3) {
        double c = b - invphi * (b - a);
        double d = a + invphi * (b - a);
        double fc = eval(c), fd = eval(d);
        while (b - a > 1e-3) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = eval(d);
            }
        }
    }
    res.best_tc = best.tc;
    res.log = std::move(*best.log);
    return res;
}

struct ComparisonRow {
    std::string name;
    std::string policy;
    double total_energy = 0.0;
    double delta_pct = 0.0;  ///< relative to the lowest total energy
    double tc_variance = 0.0;
    double mean_tc = 0.0;
    long delay_violations = 0;
    long temperature_violations = 0;
    double satisfaction_rate = 1.0;
};

/// Runs must share the trace, plant and initial state; rows keep input order.
inline std::vector<ComparisonRow> compare(const std::vector<std::pair<std::string, const TrajectoryLog*>>& runs) {
    if (runs.empty()) return {};
    const TrajectoryLog& ref = *runs.front().second;
    for (const auto& [name, log] : runs) {
        if (log->records.size() != ref.records.size() || log->initial.t != ref.initial.t ||
            log->initial.t_cpu != ref.initial.t_cpu) {
            throw UsageError("compare: run '" + name + "' does not share the time range and initial state");
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [name, log] : runs) best = std::min(best, log->total_energy());
    std::vector<ComparisonRow> rows;
    for (const auto& [name, log] : runs) {
        ComparisonRow r;
        r.name = name;
        r.policy = log->policy;
        r.total_energy = log->total_energy();
        r.delta_pct = 100.0 * (r.total_energy - best) / best;
        r.tc_variance = log->tc_variance();
        double s = 0.0;
        for (const auto& rec : log->records) s += rec.tc;
        r.mean_tc = log->records.empty() ? 0.0 : s / static_cast<double>(log->records.size());
        r.delay_violations = log->delay_violations();
        r.temperature_violations = log->temperature_violations();
        r.satisfaction_rate = log->satisfaction_rate();
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace dcmpc

#endif  // DCMPC_CONTROLLER_HPP
