#ifndef DCMPC_SCENARIO_HPP
#define DCMPC_SCENARIO_HPP

/**
 * \file dcmpc/scenario.hpp
 *
 * \brief Sample paths drawn from a load history, and the reliability bound of
 * the scenario program.
 *
 * Windows are matched on their first sample: exact matches of the current
 * load are preferred, the rest of the set is filled with the windows whose
 * first sample is nearest (L1 over clusters, earliest start on ties). The
 * returned start indices are distinct, which is how "independent" paths are
 * approximated from a single history.
 */

#include <dcmpc/errors.hpp>
#include <dcmpc/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace dcmpc {

struct History {
    long start = 0;     ///< time index of the first sample
    LoadMatrix loads;   ///< loads[j][k] at time start + k

    std::size_t length() const noexcept { return loads.empty() ? 0 : loads.front().size(); }
    std::size_t clusters() const noexcept { return loads.size(); }
};

struct ScenarioSet {
    std::vector<LoadMatrix> paths;   ///< paths[k][j][s]
    std::vector<long> start_indices; ///< offsets into the history, sorted
    std::string provenance;

    std::size_t size() const noexcept { return paths.size(); }
};

/// Number of windows of length horizon + 1 a history can provide.
inline std::size_t available_windows(const History& h, int horizon) noexcept {
    const auto need = static_cast<std::size_t>(horizon) + 1;
    return h.length() >= need ? h.length() - need + 1 : 0;
}

inline ScenarioSet extract_scenarios(const History& history, std::span<const double> tau_loads, int horizon,
                                     std::size_t N) {
    if (horizon < 0) throw UsageError("horizon must be nonnegative");
    if (N == 0) throw UsageError("at least one scenario is required");
    if (tau_loads.size() != history.clusters()) throw UsageError("current loads must cover every cluster");
    const std::size_t windows = available_windows(history, horizon);
    if (windows == 0) throw UsageError("history is shorter than one window");
    if (N > windows) {
        throw UsageError("requested " + std::to_string(N) + " scenarios but the history provides at most " +
                         std::to_string(windows));
    }
    std::vector<double> dist(windows, 0.0);
    for (std::size_t s = 0; s < windows; ++s) {
        for (std::size_t j = 0; j < history.clusters(); ++j) dist[s] += std::abs(history.loads[j][s] - tau_loads[j]);
    }
    std::vector<long> idx(windows);
    std::iota(idx.begin(), idx.end(), 0L);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(N), idx.end(), [&](long a, long b) {
        const auto da = dist[static_cast<std::size_t>(a)], db = dist[static_cast<std::size_t>(b)];
        return da < db || (da == db && a < b);
    });
    idx.resize(N);
    std::sort(idx.begin(), idx.end());

    ScenarioSet set;
    std::size_t exact = 0;
    for (long s : idx) {
        if (dist[static_cast<std::size_t>(s)] == 0.0) ++exact;
        LoadMatrix path(history.clusters());
        for (std::size_t j = 0; j < history.clusters(); ++j) {
            const auto first = history.loads[j].begin() + s;
            path[j].assign(first, first + horizon + 1);
        }
        set.paths.push_back(std::move(path));
        set.start_indices.push_back(s);
    }
    set.provenance = "history windows, distinct starts; exact start matches " + std::to_string(exact) + "/" +
                     std::to_string(N);
    return set;
}

struct SatisfactionBound {
    double value = 1.0;
    bool vacuous = false;  ///< d >= N: the bound carries no information
};

/// Binomial lower tail sum_{i=0}^{d} C(N,i) eps^i (1-eps)^(N-i) with
/// d = (horizon + 1) * J unless overridden, evaluated term by term in log space.
inline SatisfactionBound satisfaction_bound(double epsilon, std::size_t N, int horizon, std::size_t J,
                                            long d_override = -1) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
    if (N == 0) throw UsageError("N must be positive");
    const long d = d_override >= 0 ? d_override : static_cast<long>(horizon + 1) * static_cast<long>(J);
    if (d >= static_cast<long>(N)) return {1.0, true};
    if (epsilon == 0.0) return {1.0, false};
    if (epsilon == 1.0) return {0.0, false};
    const double le = std::log(epsilon);
    const double l1e = std::log1p(-epsilon);
    const double n = static_cast<double>(N);
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(d) + 1);
    double lmax = -std::numeric_limits<double>::infinity();
    for (long i = 0; i <= d; ++i) {
        const double k = static_cast<double>(i);
        const double lt = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * le +
                          (n - k) * l1e;
        logs.push_back(lt);
        lmax = std::max(lmax, lt);
    }
    double s = 0.0;
    for (double lt : logs) s += std::exp(lt - lmax);
    const double v = std::exp(lmax + std::log(s));
    return {std::clamp(v, 0.0, 1.0), false};
}

/// Fraction of paths under which the delay, CPU temperature and energy level
/// constraints all hold over the window when u is applied from init.
inline double empirical_satisfaction(const ControlInput& u, double Gamma, const ScenarioSet& paths,
                                     const SystemState& init, const PlantParams& params) {
    if (paths.size() == 0) throw UsageError("empirical_satisfaction: empty test set");
    const double budget = std::exp(Gamma);
    std::size_t ok = 0;
    for (const auto& path : paths.paths) {
        const TrajectoryLog log = simulate(u, path, init, params);
        bool good = within_upper(log.total_energy(), budget);
        for (const auto& r : log.records) {
            for (char c : r.delay_ok) good = good && c;
            for (char c : r.temp_ok) good = good && c;
        }
        ok += good ? 1 : 0;
    }
    return static_cast<double>(ok) / static_cast<double>(paths.size());
}

}  // namespace dcmpc

#endif  // DCMPC_SCENARIO_HPP
