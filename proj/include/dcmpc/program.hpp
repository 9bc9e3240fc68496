#ifndef DCMPC_PROGRAM_HPP
#define DCMPC_PROGRAM_HPP

/**
 * \file dcmpc/program.hpp
 *
 * \brief Finite-horizon window problems written as convex programs in
 * w = (x, y_1, ..., y_J, Gamma) with x = log Tc, y_j = log m_j.
 *
 *   minimize    Gamma                          (deterministic)
 *               log(e^Gamma + w_T V(e^x) + sum_j w_j V(e^y_j))   (penalized)
 *   subject to  log tc_min <= x(t) <= log tc_max
 *               y_j(t) >= log(1/d_max + L_j(t)) - log mu_j
 *               log T_cpu,j(t; w) - log t_cpu_max <= 0
 *               log sum_t P(t; w) (1 + 1/CoP(e^x(t))) - Gamma <= 0
 *
 * The scenario program repeats the temperature and energy constraints once
 * per sample path and folds the delay bounds into per-variable maxima.
 */

#include <dcmpc/errors.hpp>
#include <dcmpc/layout.hpp>
#include <dcmpc/model.hpp>
#include <dcmpc/posy.hpp>
#include <dcmpc/scenario.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace dcmpc {

struct ConstraintTag {
    enum class Kind { temperature, energy };
    Kind kind = Kind::temperature;
    int scenario = 0;
    int cluster = -1;
    long t = 0;
};

struct ConvexProgram {
    VariableLayout layout;
    LogConvexFn objective;
    std::vector<LogConvexFn> constraints;  ///< each read as g(w) <= 0
    std::vector<ConstraintTag> tags;
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const noexcept { return lower.size(); }

    std::size_t count(ConstraintTag::Kind k) const noexcept {
        std::size_t n = 0;
        for (const auto& t : tags) n += t.kind == k ? 1 : 0;
        return n;
    }

    double max_constraint(std::span<const double> w) const {
        double g = -std::numeric_limits<double>::infinity();
        for (const auto& c : constraints) g = std::max(g, c.value(w));
        return g;
    }

    bool within_bounds(std::span<const double> w) const {
        for (std::size_t i = 0; i < size(); ++i) {
            if (w[i] < lower[i] || w[i] > upper[i]) return false;
        }
        return true;
    }
};

struct WindowData {
    long tau = 0;
    int horizon = 0;
    LoadMatrix loads;                 ///< loads[j][k] at tau + k, k = 0..horizon
    SystemState state;                ///< measured state at tau
    PlantParams params;
    double w_t = 0.0;                 ///< penalty weight on Tc fluctuations
    std::vector<double> w_m;          ///< per-cluster weights on m_j fluctuations; empty = zeros
    bool enforce_initial_temperature = true;

    VariableLayout layout() const {
        return {tau, horizon, static_cast<int>(params.cluster_count())};
    }
};

namespace detail {

inline void check_loads(const LoadMatrix& loads, std::size_t J, int horizon) {
    if (loads.size() != J) throw UsageError("window loads must cover every cluster");
    for (const auto& row : loads) {
        if (row.size() != static_cast<std::size_t>(horizon) + 1) throw UsageError("window loads must span the horizon");
        for (double L : row) {
            if (!(L >= 0.0) || !std::isfinite(L)) throw DomainError("loads must be finite and nonnegative");
        }
    }
}

inline void check_window(const WindowData& d) {
    d.params.require_convex_bounds();
    if (d.horizon < 0) throw UsageError("horizon must be nonnegative");
    if (d.state.t != d.tau) throw UsageError("window state is not measured at tau");
    if (d.state.t_cpu.size() != d.params.cluster_count()) throw UsageError("window state must cover every cluster");
    if (!(d.w_t >= 0.0)) throw DomainError("penalty weights must be nonnegative");
    for (double w : d.w_m)
        if (!(w >= 0.0)) throw DomainError("penalty weights must be nonnegative");
    if (!d.w_m.empty() && d.w_m.size() != d.params.cluster_count()) {
        throw UsageError("one server-count weight per cluster expected");
    }
}

inline LogConvexFn energy_constraint(const VariableLayout& lay, const LoadMatrix& loads, const PowerModel& pm) {
    std::vector<LogTerm> terms;
    for (long t = lay.tau; t <= lay.tau + lay.horizon; ++t) {
        const auto k = static_cast<std::size_t>(t - lay.tau);
        for (int j = 0; j < lay.clusters; ++j) {
            const double L = loads[static_cast<std::size_t>(j)][k];
            if (L > 0.0) terms.push_back({std::log(pm.a1 * L), {}, lay.x(t)});
            terms.push_back({std::log(pm.a2), {{lay.y(j, t), 1.0}}, lay.x(t)});
        }
    }
    return {std::move(terms), {{lay.gamma(), -1.0}}, 0.0};
}

inline LogConvexFn penalized_objective(const VariableLayout& lay, double w_t, const std::vector<double>& w_m) {
    Posynomial p;
    p.add(Monomial(1.0, {{lay.gamma(), 1.0}}));
    std::vector<int> ids;
    for (long t = lay.tau; t <= lay.tau + lay.horizon; ++t) ids.push_back(lay.x(t));
    const Posynomial vt = penalty_posynomial(ids, w_t);
    for (const auto& m : vt.terms()) p.add(m);
    for (int j = 0; j < lay.clusters; ++j) {
        const double w = w_m.empty() ? 0.0 : w_m[static_cast<std::size_t>(j)];
        ids.clear();
        for (long t = lay.tau; t <= lay.tau + lay.horizon; ++t) ids.push_back(lay.y(j, t));
        const Posynomial vm = penalty_posynomial(ids, w);
        for (const auto& m : vm.terms()) p.add(m);
    }
    return LogConvexFn::log_posynomial(p);
}

inline ConvexProgram assemble(const WindowData& d, const std::vector<LoadMatrix>& paths, bool penalized) {
    check_window(d);
    if (paths.empty()) throw UsageError("scenario set is empty");
    const std::size_t J = d.params.cluster_count();
    for (const auto& p : paths) check_loads(p, J, d.horizon);

    ConvexProgram prog;
    prog.layout = d.layout();
    const auto& lay = prog.layout;
    const auto n = static_cast<std::size_t>(lay.size());
    const double inf = std::numeric_limits<double>::infinity();
    prog.lower.assign(n, -inf);
    prog.upper.assign(n, inf);
    for (long t = lay.tau; t <= lay.tau + lay.horizon; ++t) {
        prog.lower[static_cast<std::size_t>(lay.x(t))] = std::log(d.params.tc_min);
        prog.upper[static_cast<std::size_t>(lay.x(t))] = std::log(d.params.tc_max);
        for (int j = 0; j < lay.clusters; ++j) {
            const auto& c = d.params.clusters[static_cast<std::size_t>(j)];
            double Lmax = 0.0;
            for (const auto& p : paths) Lmax = std::max(Lmax, p[static_cast<std::size_t>(j)][static_cast<std::size_t>(t - lay.tau)]);
            prog.lower[static_cast<std::size_t>(lay.y(j, t))] = std::log(1.0 / c.d_max + Lmax) - std::log(c.mu);
        }
    }

    for (std::size_t k = 0; k < paths.size(); ++k) {
        for (int j = 0; j < lay.clusters; ++j) {
            const double cap = std::log(d.params.clusters[static_cast<std::size_t>(j)].t_cpu_max);
            for (long t = lay.tau; t <= lay.tau + lay.horizon; ++t) {
                if (t == lay.tau && !d.enforce_initial_temperature) continue;
                prog.constraints.push_back(LogConvexFn::log_posynomial(
                    cpu_temp_posynomial(j, t, lay, paths[k], d.state, d.params), {}, -cap));
                prog.tags.push_back({ConstraintTag::Kind::temperature, static_cast<int>(k), j, t});
            }
        }
        prog.constraints.push_back(energy_constraint(lay, paths[k], d.params.power));
        prog.tags.push_back({ConstraintTag::Kind::energy, static_cast<int>(k), -1, lay.tau});
    }

    prog.objective = penalized ? penalized_objective(lay, d.w_t, d.w_m) : LogConvexFn::affine({{lay.gamma(), 1.0}});
    return prog;
}

}  // namespace detail

inline ConvexProgram build_deterministic(const WindowData& data) {
    return detail::assemble(data, {data.loads}, false);
}

inline ConvexProgram build_penalized(const WindowData& data) {
    return detail::assemble(data, {data.loads}, true);
}

/// data.loads is ignored; each scenario path supplies the window loads.
inline ConvexProgram build_scenario(const WindowData& data, const ScenarioSet& scenarios) {
    if (scenarios.size() == 0) throw UsageError("scenario set is empty");
    return detail::assemble(data, scenarios.paths, true);
}

inline std::pair<ControlInput, double> decode(std::span<const double> w, const VariableLayout& layout) {
    if (w.size() != static_cast<std::size_t>(layout.size())) throw UsageError("decode: vector does not match layout");
    ControlInput u;
    u.m.resize(static_cast<std::size_t>(layout.clusters));
    for (long t = layout.tau; t <= layout.tau + layout.horizon; ++t) {
        u.tc.push_back(std::exp(w[static_cast<std::size_t>(layout.x(t))]));
        for (int j = 0; j < layout.clusters; ++j) {
            u.m[static_cast<std::size_t>(j)].push_back(std::exp(w[static_cast<std::size_t>(layout.y(j, t))]));
        }
    }
    return {std::move(u), w[static_cast<std::size_t>(layout.gamma())]};
}

inline std::vector<double> encode(const ControlInput& u, double Gamma, const VariableLayout& layout) {
    if (u.steps() != static_cast<std::size_t>(layout.steps()) || u.m.size() != static_cast<std::size_t>(layout.clusters)) {
        throw UsageError("encode: input does not match layout");
    }
    std::vector<double> w(static_cast<std::size_t>(layout.size()));
    for (long t = layout.tau; t <= layout.tau + layout.horizon; ++t) {
        const auto k = static_cast<std::size_t>(t - layout.tau);
        if (!(u.tc[k] > 0.0)) throw DomainError("encode: temperatures must be positive");
        w[static_cast<std::size_t>(layout.x(t))] = std::log(u.tc[k]);
        for (int j = 0; j < layout.clusters; ++j) {
            const double m = u.m[static_cast<std::size_t>(j)][k];
            if (!(m > 0.0)) throw DomainError("encode: server counts must be positive");
            w[static_cast<std::size_t>(layout.y(j, t))] = std::log(m);
        }
    }
    w[static_cast<std::size_t>(layout.gamma())] = Gamma;
    return w;
}

}  // namespace dcmpc

#endif  // DCMPC_PROGRAM_HPP
