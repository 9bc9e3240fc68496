#ifndef DCMPC_TRACE_HPP
#define DCMPC_TRACE_HPP

/**
 * \file dcmpc/trace.hpp
 *
 * \brief Workload traces: per-minute request rates per cluster.
 *
 * The native CSV layout is
 *
 *     minute,cluster,rate
 *     0,0,4.25
 *     0,1,6.5
 *
 * one row per (minute, cluster), rates in requests per second. Raw event logs
 * (time in seconds, one request count per row) are aggregated to the same
 * per-minute mean rates through CsvSchema.
 */

#include <dcmpc/errors.hpp>
#include <dcmpc/format.hpp>
#include <dcmpc/model.hpp>
#include <dcmpc/scenario.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dcmpc {

struct WorkloadTrace {
    long start = 0;
    LoadMatrix loads;  ///< loads[j][k] at minute start + k
    std::string source;
    std::vector<long> gap_minutes;  ///< minutes with no data for some cluster, filled with zero

    std::size_t clusters() const noexcept { return loads.size(); }
    std::size_t length() const noexcept { return loads.empty() ? 0 : loads.front().size(); }
    long end() const noexcept { return start + static_cast<long>(length()); }

    bool covers(long t0, long t1) const noexcept { return t0 >= start && t1 < end() && t0 <= t1; }

    std::vector<double> at(long t) const {
        if (t < start || t >= end()) throw UsageError("trace has no sample at minute " + std::to_string(t));
        std::vector<double> v(clusters());
        for (std::size_t j = 0; j < clusters(); ++j) v[j] = loads[j][static_cast<std::size_t>(t - start)];
        return v;
    }

    /// Loads for minutes t0..t0+count-1.
    LoadMatrix window(long t0, std::size_t count) const {
        if (t0 < start || t0 + static_cast<long>(count) > end()) throw UsageError("window outside the trace");
        LoadMatrix w(clusters());
        for (std::size_t j = 0; j < clusters(); ++j) {
            const auto first = loads[j].begin() + (t0 - start);
            w[j].assign(first, first + static_cast<long>(count));
        }
        return w;
    }

    void validate() const {
        if (loads.empty()) throw UsageError("trace has no clusters");
        for (const auto& row : loads) {
            if (row.size() != length()) throw UsageError("trace clusters differ in length");
            for (double L : row)
                if (!(L >= 0.0) || !std::isfinite(L)) throw DomainError("trace loads must be finite and nonnegative");
        }
    }

    History history() const { return {start, loads}; }
};

struct CsvSchema {
    enum class TimeUnit { minutes, seconds };
    enum class ValueKind { rate, count };

    std::string time_column = "minute";
    std::string cluster_column = "cluster";
    std::string value_column = "rate";
    TimeUnit time_unit = TimeUnit::minutes;
    ValueKind value_kind = ValueKind::rate;
    std::optional<std::size_t> cluster_count;  ///< when set, ids outside [0, count) are rejected
    bool fill_gaps = true;                     ///< false: a missing minute is an error

    /// Raw request events: seconds, cluster, request count.
    static CsvSchema events(std::string time = "timestamp", std::string cluster = "cluster",
                            std::string count = "count") {
        CsvSchema s;
        s.time_column = std::move(time);
        s.cluster_column = std::move(cluster);
        s.value_column = std::move(count);
        s.time_unit = TimeUnit::seconds;
        s.value_kind = ValueKind::count;
        return s;
    }
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto c = line.find(',', pos);
        out.push_back(trim(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos)));
        if (c == std::string_view::npos) break;
        pos = c + 1;
    }
    return out;
}

}  // namespace detail

inline WorkloadTrace parse_csv(std::istream& in, const CsvSchema& schema = {}, const std::string& source = "<stream>") {
    std::string line;
    long lineno = 0;
    auto fail = [&](const std::string& what) {
        throw ConfigError(source + ":" + std::to_string(lineno) + ": " + what);
    };
    std::size_t ct = 0, cc = 0, cv = 0, ncols = 0;
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto cols = detail::split_csv(line);
        ncols = cols.size();
        auto find = [&](const std::string& name) {
            for (std::size_t i = 0; i < cols.size(); ++i)
                if (cols[i] == name) return i;
            fail("header lacks column '" + name + "'");
            return std::size_t{0};
        };
        ct = find(schema.time_column);
        cc = find(schema.cluster_column);
        cv = find(schema.value_column);
        have_header = true;
    }
    if (!have_header) fail("missing header row");

    // (minute, cluster) -> (sum, rows)
    std::map<std::pair<long, std::size_t>, std::pair<double, long>> cells;
    std::size_t max_cluster = 0;
    long tmin = 0, tmax = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto cols = detail::split_csv(line);
        if (cols.size() != ncols) fail("expected " + std::to_string(ncols) + " fields, found " + std::to_string(cols.size()));
        double time = 0.0, value = 0.0;
        long cluster = 0;
        if (!parse_double(cols[ct], time) || !std::isfinite(time) || time < 0.0) fail("bad time value");
        if (!parse_int(cols[cc], cluster) || cluster < 0) fail("bad cluster id");
        if (!parse_double(cols[cv], value) || !std::isfinite(value) || value < 0.0) fail("bad load value");
        if (schema.cluster_count && static_cast<std::size_t>(cluster) >= *schema.cluster_count) {
            fail("unknown cluster id " + std::to_string(cluster));
        }
        const long minute = schema.time_unit == CsvSchema::TimeUnit::minutes ? static_cast<long>(std::floor(time))
                                                                             : static_cast<long>(std::floor(time / 60.0));
        auto& cell = cells[{minute, static_cast<std::size_t>(cluster)}];
        cell.first += value;
        cell.second += 1;
        max_cluster = std::max(max_cluster, static_cast<std::size_t>(cluster));
        tmin = any ? std::min(tmin, minute) : minute;
        tmax = any ? std::max(tmax, minute) : minute;
        any = true;
    }
    if (!any) fail("trace has no data rows");

    const std::size_t J = schema.cluster_count ? *schema.cluster_count : max_cluster + 1;
    if (!schema.cluster_count) {
        std::vector<char> seen(J, 0);
        for (const auto& [key, v] : cells) seen[key.second] = 1;
        for (std::size_t j = 0; j < J; ++j)
            if (!seen[j]) throw ConfigError(source + ": cluster ids must be contiguous from 0; id " + std::to_string(j) + " never appears");
    }
    WorkloadTrace tr;
    tr.start = tmin;
    tr.source = source;
    const auto len = static_cast<std::size_t>(tmax - tmin + 1);
    tr.loads.assign(J, std::vector<double>(len, 0.0));
    for (long t = tmin; t <= tmax; ++t) {
        bool gap = false;
        for (std::size_t j = 0; j < J; ++j) {
            auto it = cells.find({t, j});
            if (it == cells.end()) {
                gap = true;
                continue;
            }
            const auto [sum, rows] = it->second;
            tr.loads[j][static_cast<std::size_t>(t - tmin)] =
                schema.value_kind == CsvSchema::ValueKind::rate ? sum / static_cast<double>(rows) : sum / 60.0;
        }
        if (gap) {
            if (!schema.fill_gaps) throw ConfigError(source + ": no data for minute " + std::to_string(t));
            tr.gap_minutes.push_back(t);
        }
    }
    return tr;
}

inline WorkloadTrace load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trace file " + path);
    return parse_csv(in, schema, path);
}

inline void write_csv(std::ostream& out, const WorkloadTrace& trace) {
    out << "minute,cluster,rate\n";
    for (std::size_t k = 0; k < trace.length(); ++k) {
        for (std::size_t j = 0; j < trace.clusters(); ++j) {
            out << trace.start + static_cast<long>(k) << ',' << j << ',' << format_double(trace.loads[j][k]) << '\n';
        }
    }
}

inline void save_csv(const std::string& path, const WorkloadTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace file " + path);
    write_csv(out, trace);
}

struct SyntheticSpec {
    std::size_t clusters = 1;
    std::size_t length = 0;
    long start = 0;
    std::vector<double> base;
    std::vector<double> amplitude;
    std::vector<double> period;  ///< minutes
    std::vector<double> noise;   ///< half-width of the uniform noise band
    std::uint64_t seed = 0;

    void validate() const {
        if (clusters == 0) throw UsageError("synthetic trace needs at least one cluster");
        for (const auto* v : {&base, &amplitude, &period, &noise}) {
            if (v->size() != clusters) throw UsageError("synthetic spec needs one value per cluster");
        }
        for (std::size_t j = 0; j < clusters; ++j) {
            if (!(amplitude[j] >= 0.0) || !(noise[j] >= 0.0) || !(period[j] > 0.0)) {
                throw DomainError("synthetic spec: amplitude and noise >= 0, period > 0");
            }
            if (!(base[j] > amplitude[j] + noise[j])) throw DomainError("synthetic spec requires base > amplitude + noise");
        }
    }
};

/// L_j(t) = base_j + amp_j sin(2 pi t / period_j) + noise_j U(-1, 1), clamped at 0.
inline WorkloadTrace synth(const SyntheticSpec& spec) {
    spec.validate();
    WorkloadTrace tr;
    tr.start = spec.start;
    tr.source = "synthetic:seed=" + std::to_string(spec.seed);
    tr.loads.assign(spec.clusters, std::vector<double>(spec.length));
    std::mt19937_64 gen(spec.seed);
    for (std::size_t k = 0; k < spec.length; ++k) {
        const double t = static_cast<double>(spec.start + static_cast<long>(k));
        for (std::size_t j = 0; j < spec.clusters; ++j) {
            // 53 random bits -> [0, 1), portable across standard libraries
            const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            const double L = spec.base[j] + spec.amplitude[j] * std::sin(2.0 * std::numbers::pi * t / spec.period[j]) +
                             spec.noise[j] * (2.0 * u - 1.0);
            tr.loads[j][k] = std::max(L, 0.0);
        }
    }
    return tr;
}

/// History [start, t0) and evaluation segment [t0, end), time indices preserved.
inline std::pair<WorkloadTrace, WorkloadTrace> split(const WorkloadTrace& trace, long t0) {
    if (!(t0 > trace.start && t0 < trace.end())) throw UsageError("split point outside the trace interior");
    const auto k = static_cast<std::size_t>(t0 - trace.start);
    WorkloadTrace head, tail;
    head.start = trace.start;
    tail.start = t0;
    head.source = tail.source = trace.source;
    head.loads = trace.window(trace.start, k);
    tail.loads = trace.window(t0, trace.length() - k);
    for (long g : trace.gap_minutes) (g < t0 ? head : tail).gap_minutes.push_back(g);
    return {std::move(head), std::move(tail)};
}

}  // namespace dcmpc

#endif  // DCMPC_TRACE_HPP
