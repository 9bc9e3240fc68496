#ifndef DCMPC_CONFIG_HPP
#define DCMPC_CONFIG_HPP

/**
 * \file dcmpc/config.hpp
 *
 * \brief Flat key = value configuration files and run manifests.
 *
 * One setting per line, '#' starts a comment. Keys mirror the field names of
 * ExperimentConfig, PlantParams and SolverConfig; see README.md for the full
 * list. Unknown keys are errors, so a typo never silently falls back to a
 * default. A RunManifest is written in the same format with every key
 * resolved, which makes it a valid config for an exact rerun.
 */

#include <dcmpc/controller.hpp>
#include <dcmpc/errors.hpp>
#include <dcmpc/format.hpp>
#include <dcmpc/model.hpp>
#include <dcmpc/trace.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#ifndef DCMPC_VERSION
#define DCMPC_VERSION "1.0.0"
#endif

namespace dcmpc {

inline constexpr const char* kVersion = DCMPC_VERSION;

/// Parsed key = value pairs; every key has to be consumed before finish().
class KeyValueFile {
public:
    KeyValueFile() = default;

    static KeyValueFile parse(std::istream& in, const std::string& source) {
        KeyValueFile f;
        f.source_ = source;
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            std::string_view body = trim(std::string_view(line).substr(0, hash));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key(trim(body.substr(0, eq)));
            const std::string value(trim(body.substr(eq + 1)));
            if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
            if (f.entries_.count(key)) {
                throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            }
            f.entries_[key] = {value, lineno, false};
        }
        return f;
    }

    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file " + path);
        return parse(in, path);
    }

    const std::string& source() const noexcept { return source_; }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    void set(const std::string& key, std::string value) { entries_[key] = {std::move(value), 0, false}; }

    std::optional<std::string> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    void read(const std::string& key, double& out) {
        if (auto v = take(key)) {
            if (!parse_double(*v, out)) fail(key, "expected a number");
        }
    }

    template <typename Int>
    void read_int(const std::string& key, Int& out) {
        if (auto v = take(key)) {
            if (!parse_int(*v, out)) fail(key, "expected an integer");
        }
    }

    void read(const std::string& key, std::string& out) {
        if (auto v = take(key)) out = *v;
    }

    /// Comma-separated numbers; a single value is broadcast to \p n entries when n > 0.
    std::optional<std::vector<double>> read_list(const std::string& key, std::size_t n = 0) {
        auto v = take(key);
        if (!v) return std::nullopt;
        std::vector<double> out;
        std::string_view s(*v);
        while (true) {
            const auto c = s.find(',');
            double x = 0.0;
            if (!parse_double(s.substr(0, c), x)) fail(key, "expected comma-separated numbers");
            out.push_back(x);
            if (c == std::string_view::npos) break;
            s.remove_prefix(c + 1);
        }
        if (n > 0 && out.size() == 1) out.assign(n, out.front());
        if (n > 0 && out.size() != n) fail(key, "expected " + std::to_string(n) + " values");
        return out;
    }

    /// Keys starting with \p prefix, in sorted order.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
        std::vector<std::string> out;
        for (const auto& [k, e] : entries_)
            if (k.rfind(prefix, 0) == 0) out.push_back(k);
        return out;
    }

    /// Throws on the first key for which \p known is false.
    template <typename Pred>
    void require_known(Pred known) const {
        for (const auto& [k, e] : entries_) {
            if (!known(k)) {
                throw ConfigError(source_ + (e.line > 0 ? ":" + std::to_string(e.line) : std::string()) +
                                  ": unknown key '" + k + "'");
            }
        }
    }

    /// Throws on the first key nobody consumed.
    void finish() const {
        for (const auto& [k, e] : entries_) {
            if (!e.used) {
                throw ConfigError(source_ + (e.line > 0 ? ":" + std::to_string(e.line) : std::string()) +
                                  ": unknown key '" + k + "'");
            }
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        auto it = entries_.find(key);
        const long line = it == entries_.end() ? 0 : it->second.line;
        throw ConfigError(source_ + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + key + ": " + what);
    }

private:
    struct Entry {
        std::string value;
        long line = 0;
        bool used = false;
    };
    std::string source_;
    std::map<std::string, Entry> entries_;
};

struct TraceSource {
    enum class Kind { file, synthetic };
    Kind kind = Kind::file;
    std::string path;                       ///< resolved against the config file's directory
    std::optional<std::uint64_t> checksum;  ///< FNV-1a of the file bytes, verified when present
    SyntheticSpec synthetic;
};

/// Everything a run needs besides the trace bytes.
struct RunConfig {
    ExperimentConfig experiment;
    PlantParams plant = PlantParams::uniform(1);
    std::vector<double> t_cpu_init;
    TraceSource trace;
    std::uint64_t seed = 0;  ///< drives the synthetic trace generator; file traces ignore it

    SystemState initial_state() const { return {experiment.t0, t_cpu_init}; }
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

inline std::uint64_t parse_hex64(const std::string& s, const KeyValueFile& f, const std::string& key) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) f.fail(key, "expected a hexadecimal checksum");
    return v;
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

/// Experiment keys that a compare config may override per run.
inline void read_experiment(KeyValueFile& f, const std::string& prefix, ExperimentConfig& e) {
    if (auto v = f.take(prefix + "policy")) e.policy = parse_policy(*v);
    f.read_int(prefix + "horizon", e.horizon);
    f.read(prefix + "w_t", e.w_t);
    f.read(prefix + "w_m", e.w_m);
    f.read_int(prefix + "scenario_count", e.scenario_count);
    if (auto v = f.take(prefix + "rounding")) e.rounding = parse_rounding(*v);
}

inline void read_solver(KeyValueFile& f, SolverConfig& s) {
    f.read("solver.tolerance", s.tolerance);
    f.read_int("solver.max_iterations", s.max_iterations);
    f.read("solver.growth", s.growth);
    f.read("solver.ls_alpha", s.ls_alpha);
    f.read("solver.ls_beta", s.ls_beta);
    f.read("solver.initial_barrier", s.initial_barrier);
    f.read("solver.strict_margin", s.strict_margin);
    f.read("solver.warm_slack", s.warm_slack);
}

inline void read_plant(KeyValueFile& f, PlantParams& p) {
    std::size_t J = 1;
    f.read_int("clusters", J);
    if (J == 0) f.fail("clusters", "at least one cluster is required");
    ClusterParams base;
    f.read("alpha", base.alpha);
    f.read("beta", base.beta);
    f.read("sigma", base.sigma);
    f.read("mu", base.mu);
    f.read("d_max", base.d_max);
    f.read("t_cpu_max", base.t_cpu_max);
    p.clusters.assign(J, base);
    for (std::size_t j = 0; j < J; ++j) {
        const std::string pre = "cluster." + std::to_string(j) + ".";
        auto& c = p.clusters[j];
        f.read(pre + "alpha", c.alpha);
        f.read(pre + "beta", c.beta);
        f.read(pre + "sigma", c.sigma);
        f.read(pre + "mu", c.mu);
        f.read(pre + "d_max", c.d_max);
        f.read(pre + "t_cpu_max", c.t_cpu_max);
    }
    f.read("a1", p.power.a1);
    f.read("a2", p.power.a2);
    f.read("tc_min", p.tc_min);
    f.read("tc_max", p.tc_max);
}

inline void read_trace(KeyValueFile& f, TraceSource& tr, std::size_t J, const std::string& base_dir) {
    std::string trace = "synthetic";
    f.read("trace", trace);
    if (trace == "synthetic") {
        tr.kind = TraceSource::Kind::synthetic;
        auto& s = tr.synthetic;
        s.clusters = J;
        f.read_int("synth.length", s.length);
        f.read_int("synth.start", s.start);
        auto need = [&](const std::string& key, std::vector<double>& out) {
            auto v = f.read_list(key, J);
            if (!v) throw ConfigError(f.source() + ": synthetic trace requires '" + key + "'");
            out = std::move(*v);
        };
        need("synth.base", s.base);
        need("synth.amplitude", s.amplitude);
        need("synth.period", s.period);
        need("synth.noise", s.noise);
        if (s.length == 0) throw ConfigError(f.source() + ": synthetic trace requires synth.length > 0");
    } else {
        tr.kind = TraceSource::Kind::file;
        std::filesystem::path p(trace);
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        tr.path = p.lexically_normal().string();
    }
    if (auto v = f.take("trace.fnv1a")) tr.checksum = parse_hex64(*v, f, "trace.fnv1a");
}

}  // namespace detail

/// True for every key read_run_config understands.
inline bool is_run_key(const std::string& k) {
    static const std::vector<std::string> exact{
        "version", "t0", "tf", "horizon", "policy", "w_t", "w_m", "scenario_count", "rounding", "clusters",
        "alpha", "beta", "sigma", "mu", "d_max", "t_cpu_max", "a1", "a2", "tc_min", "tc_max", "t_cpu_init",
        "trace", "trace.fnv1a", "seed", "synth.length", "synth.start", "synth.base", "synth.amplitude",
        "synth.period", "synth.noise", "solver.tolerance", "solver.max_iterations", "solver.growth",
        "solver.ls_alpha", "solver.ls_beta", "solver.initial_barrier", "solver.strict_margin", "solver.warm_slack"};
    if (std::find(exact.begin(), exact.end(), k) != exact.end()) return true;
    if (k.rfind("cluster.", 0) != 0) return false;
    const auto dot = k.find('.', 8);
    if (dot == std::string::npos || dot == 8) return false;
    for (std::size_t i = 8; i < dot; ++i)
        if (k[i] < '0' || k[i] > '9') return false;
    static const std::vector<std::string> fields{"alpha", "beta", "sigma", "mu", "d_max", "t_cpu_max"};
    return std::find(fields.begin(), fields.end(), k.substr(dot + 1)) != fields.end();
}

/// Reads the run keys; \p f is left with any keys the caller still has to consume.
inline RunConfig read_run_config(KeyValueFile& f, const std::string& base_dir) {
    RunConfig rc;
    f.take("version");  // informational in manifests
    f.read_int("t0", rc.experiment.t0);
    f.read_int("tf", rc.experiment.tf);
    detail::read_experiment(f, "", rc.experiment);
    detail::read_solver(f, rc.experiment.solver);
    detail::read_plant(f, rc.plant);
    const std::size_t J = rc.plant.cluster_count();
    rc.t_cpu_init = f.read_list("t_cpu_init", J).value_or(std::vector<double>(J, 27.0));
    detail::read_trace(f, rc.trace, J, base_dir);
    f.read_int("seed", rc.seed);
    rc.trace.synthetic.seed = rc.seed;
    return rc;
}

inline std::string directory_of(const std::string& path) {
    return std::filesystem::path(path).parent_path().string();
}

/// Loads the trace a config points at, verifying the checksum when one is recorded.
inline WorkloadTrace load_trace(TraceSource& src, std::size_t J) {
    if (src.kind == TraceSource::Kind::synthetic) return synth(src.synthetic);
    std::ifstream in(src.path, std::ios::binary);
    if (!in) throw ConfigError("cannot open trace file " + src.path);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    const std::string data = bytes.str();
    const std::uint64_t h = fnv1a(data);
    if (src.checksum && *src.checksum != h) {
        throw ConfigError("trace file " + src.path + " does not match the recorded checksum " +
                          detail::hex64(*src.checksum));
    }
    src.checksum = h;
    std::istringstream is(data);
    CsvSchema schema;
    schema.cluster_count = J;
    return parse_csv(is, schema, src.path);
}

/// Fully resolved run description; its text form is itself a config file.
struct RunManifest {
    RunConfig config;
    std::string version = kVersion;

    std::string to_text() const {
        const auto& e = config.experiment;
        const auto& p = config.plant;
        const auto& s = e.solver;
        std::ostringstream o;
        auto kv = [&o](const std::string& k, const std::string& v) { o << k << " = " << v << '\n'; };
        auto num = [&kv](const std::string& k, double v) { kv(k, format_double(v)); };
        o << "# run manifest: rerun with  dcmpc run --config <this file> --out <dir>\n";
        kv("version", version);
        kv("t0", std::to_string(e.t0));
        kv("tf", std::to_string(e.tf));
        kv("horizon", std::to_string(e.horizon));
        kv("policy", to_string(e.policy));
        num("w_t", e.w_t);
        num("w_m", e.w_m);
        kv("scenario_count", std::to_string(e.scenario_count));
        kv("rounding", to_string(e.rounding));
        num("a1", p.power.a1);
        num("a2", p.power.a2);
        num("tc_min", p.tc_min);
        num("tc_max", p.tc_max);
        kv("clusters", std::to_string(p.cluster_count()));
        for (std::size_t j = 0; j < p.cluster_count(); ++j) {
            const auto& c = p.clusters[j];
            const std::string pre = "cluster." + std::to_string(j) + ".";
            num(pre + "alpha", c.alpha);
            num(pre + "beta", c.beta);
            num(pre + "sigma", c.sigma);
            num(pre + "mu", c.mu);
            num(pre + "d_max", c.d_max);
            num(pre + "t_cpu_max", c.t_cpu_max);
        }
        kv("t_cpu_init", detail::join(config.t_cpu_init));
        const auto& tr = config.trace;
        if (tr.kind == TraceSource::Kind::synthetic) {
            kv("trace", "synthetic");
            kv("synth.length", std::to_string(tr.synthetic.length));
            kv("synth.start", std::to_string(tr.synthetic.start));
            kv("synth.base", detail::join(tr.synthetic.base));
            kv("synth.amplitude", detail::join(tr.synthetic.amplitude));
            kv("synth.period", detail::join(tr.synthetic.period));
            kv("synth.noise", detail::join(tr.synthetic.noise));
        } else {
            kv("trace", std::filesystem::absolute(tr.path).lexically_normal().string());
            if (tr.checksum) kv("trace.fnv1a", detail::hex64(*tr.checksum));
        }
        kv("seed", std::to_string(config.seed));
        num("solver.tolerance", s.tolerance);
        kv("solver.max_iterations", std::to_string(s.max_iterations));
        num("solver.growth", s.growth);
        num("solver.ls_alpha", s.ls_alpha);
        num("solver.ls_beta", s.ls_beta);
        num("solver.initial_barrier", s.initial_barrier);
        num("solver.strict_margin", s.strict_margin);
        num("solver.warm_slack", s.warm_slack);
        return o.str();
    }
};

}  // namespace dcmpc

#endif  // DCMPC_CONFIG_HPP
