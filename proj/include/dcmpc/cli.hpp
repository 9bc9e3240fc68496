#ifndef DCMPC_CLI_HPP
#define DCMPC_CLI_HPP

/**
 * \file dcmpc/cli.hpp
 *
 * \brief The run / compare / validate subcommands behind the dcmpc tool.
 *
 * Commands throw the library's error types; exit_code() maps them to the
 * process exit status. Output files are CSV (plus a manifest in config
 * format) and contain no timings, so reruns compare byte for byte.
 */

#include <dcmpc/config.hpp>
#include <dcmpc/controller.hpp>
#include <dcmpc/errors.hpp>
#include <dcmpc/format.hpp>
#include <dcmpc/trace.hpp>
#include <dcmpc/validate.hpp>

#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace dcmpc {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitInfeasible = 3,
    kExitValidation = 4,
};

/// Command-line overrides shared by the subcommands.
struct CliOptions {
    std::string config;
    std::optional<std::string> trace;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<Policy> policy;
};

/// Raised by cmd_validate when a claim check fails.
class ValidationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps the exception currently being handled to an exit status, printing a diagnostic.
inline int exit_code(std::exception_ptr e, std::ostream& err) {
    try {
        std::rethrow_exception(e);
    } catch (const InfeasibleError& x) {
        err << "dcmpc: infeasible: " << x.what() << '\n';
        return kExitInfeasible;
    } catch (const ValidationFailure& x) {
        err << "dcmpc: validation failed: " << x.what() << '\n';
        return kExitValidation;
    } catch (const ConfigError& x) {
        err << "dcmpc: config error: " << x.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& x) {
        err << "dcmpc: config error: " << x.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& x) {
        err << "dcmpc: config error: " << x.what() << '\n';
        return kExitConfig;
    } catch (const PreconditionError& x) {
        err << "dcmpc: config error: " << x.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& x) {
        err << "dcmpc: " << x.what() << '\n';
        return kExitFailure;
    }
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    return out;
}

inline void make_dir(const std::filesystem::path& p) {
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory " + p.string() + ": " + ec.message());
}

inline void warn_gaps(const WorkloadTrace& trace, std::ostream& err) {
    if (trace.gap_minutes.empty()) return;
    err << "dcmpc: warning: " << trace.gap_minutes.size() << " trace minute(s) missing data, filled with zero (first at "
        << trace.gap_minutes.front() << ")\n";
}

inline RunConfig load_run_config(const CliOptions& opt, KeyValueFile& f) {
    RunConfig rc = read_run_config(f, directory_of(opt.config));
    if (opt.trace) {
        rc.trace.kind = TraceSource::Kind::file;
        rc.trace.path = *opt.trace;
        rc.trace.checksum.reset();
    }
    if (opt.seed) {
        rc.seed = *opt.seed;
        rc.trace.synthetic.seed = *opt.seed;
    }
    if (opt.policy) rc.experiment.policy = *opt.policy;
    return rc;
}

struct RunOutput {
    TrajectoryLog log;
    std::optional<OosResult> oos;
};

inline RunOutput execute(const RunConfig& rc, const WorkloadTrace& trace) {
    const SystemState init = rc.initial_state();
    RunOutput r;
    switch (rc.experiment.policy) {
        case Policy::deterministic:
        case Policy::penalized:
            r.log = run_mpc(trace, rc.experiment, rc.plant, init);
            break;
        case Policy::scenario: {
            // Scenarios are drawn from the part of the trace before t0 only.
            const History history = split(trace, rc.experiment.t0).first.history();
            r.log = run_scenario_mpc(history, trace, rc.experiment, rc.plant, init);
            break;
        }
        case Policy::oos:
            r.oos = run_oos(trace, rc.experiment, rc.plant, init);
            r.log = r.oos->log;
            break;
    }
    return r;
}

inline std::string flag(bool b) { return b ? "1" : "0"; }

}  // namespace detail

/// Trajectory CSV: one row per applied step.
inline void write_trajectory(std::ostream& o, const TrajectoryLog& log) {
    const std::size_t J = log.initial.t_cpu.size();
    o << "t,tc";
    for (const char* col : {"m_", "load_", "t_cpu_"})
        for (std::size_t j = 0; j < J; ++j) o << ',' << col << j;
    o << ",E,P,C";
    for (std::size_t j = 0; j < J; ++j) o << ",D_" << j;
    o << ",tc_ok";
    for (std::size_t j = 0; j < J; ++j) o << ",delay_ok_" << j;
    for (std::size_t j = 0; j < J; ++j) o << ",temp_ok_" << j;
    o << '\n';
    for (const auto& r : log.records) {
        o << r.t << ',' << format_double(r.tc);
        for (const auto* v : {&r.m, &r.load, &r.t_cpu})
            for (double x : *v) o << ',' << format_double(x);
        o << ',' << format_double(r.energy) << ',' << format_double(r.it_power) << ',' << format_double(r.cooling);
        for (double d : r.delay) o << ',' << format_double(d);
        o << ',' << detail::flag(r.tc_ok);
        for (char c : r.delay_ok) o << ',' << detail::flag(c);
        for (char c : r.temp_ok) o << ',' << detail::flag(c);
        o << '\n';
    }
}

/// Summary CSV (key,value): totals, variances, violation counts and solver work.
inline void write_summary(std::ostream& o, const TrajectoryLog& log, const std::optional<OosResult>& oos = {}) {
    double it = 0.0, cool = 0.0, tc_sum = 0.0;
    for (const auto& r : log.records) {
        it += r.it_power;
        cool += r.cooling;
        tc_sum += r.tc;
    }
    const double n = static_cast<double>(log.records.size());
    auto kv = [&o](const std::string& k, const std::string& v) { o << k << ',' << v << '\n'; };
    o << "key,value\n";
    kv("policy", log.policy);
    kv("steps", std::to_string(log.records.size()));
    kv("total_energy", format_double(log.total_energy()));
    kv("it_energy", format_double(it));
    kv("cooling_energy", format_double(cool));
    kv("mean_tc", format_double(log.records.empty() ? 0.0 : tc_sum / n));
    kv("tc_variance", format_double(log.tc_variance()));
    kv("delay_violations", std::to_string(log.delay_violations()));
    kv("temperature_violations", std::to_string(log.temperature_violations()));
    kv("tc_violations", std::to_string(log.tc_violations()));
    kv("satisfaction_rate", format_double(log.satisfaction_rate()));
    for (std::size_t j = 0; j < log.final_state.t_cpu.size(); ++j) {
        kv("final_t_cpu_" + std::to_string(j), format_double(log.final_state.t_cpu[j]));
    }
    kv("windows", std::to_string(log.stats.windows));
    kv("newton_iterations", std::to_string(log.stats.newton_iterations));
    kv("max_iter_windows", std::to_string(log.stats.max_iter_windows));
    if (oos) {
        kv("oos_best_tc", format_double(oos->best_tc));
        kv("oos_candidates", std::to_string(oos->curve.size()));
    }
}

/// OOS scan: every evaluated (Tc, total energy) pair, sorted by Tc.
inline void write_oos_curve(std::ostream& o, const OosResult& r) {
    auto curve = r.curve;
    std::sort(curve.begin(), curve.end());
    o << "tc,total_energy\n";
    for (const auto& [tc, e] : curve) o << format_double(tc) << ',' << format_double(e) << '\n';
}

inline void write_comparison(std::ostream& o, const std::vector<ComparisonRow>& rows) {
    o << "name,policy,total_energy,delta_pct,tc_variance,mean_tc,delay_violations,temperature_violations,"
         "satisfaction_rate\n";
    for (const auto& r : rows) {
        o << r.name << ',' << r.policy << ',' << format_double(r.total_energy) << ',' << format_double(r.delta_pct)
          << ',' << format_double(r.tc_variance) << ',' << format_double(r.mean_tc) << ',' << r.delay_violations << ','
          << r.temperature_violations << ',' << format_double(r.satisfaction_rate) << '\n';
    }
}

inline std::vector<ComparisonRow> parse_comparison(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line) ||
        std::string(trim(line)) !=
            "name,policy,total_energy,delta_pct,tc_variance,mean_tc,delay_violations,temperature_violations,"
            "satisfaction_rate") {
        throw ConfigError(source + ": not a comparison table");
    }
    std::vector<ComparisonRow> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        ComparisonRow r;
        bool ok = f.size() == 9;
        if (ok) {
            r.name = std::string(f[0]);
            r.policy = std::string(f[1]);
            ok = parse_double(f[2], r.total_energy) && parse_double(f[3], r.delta_pct) &&
                 parse_double(f[4], r.tc_variance) && parse_double(f[5], r.mean_tc) &&
                 parse_int(f[6], r.delay_violations) && parse_int(f[7], r.temperature_violations) &&
                 parse_double(f[8], r.satisfaction_rate);
        }
        if (!ok) throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed comparison row");
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Loads the config and trace, runs one policy and writes trajectory.csv,
/// summary.csv, manifest.cfg (and oos_curve.csv for the oos policy) to opt.out.
inline TrajectoryLog cmd_run(const CliOptions& opt, std::ostream& log_out = std::cout) {
    KeyValueFile f = KeyValueFile::load(opt.config);
    f.require_known(is_run_key);
    RunConfig rc = detail::load_run_config(opt, f);
    f.finish();
    const WorkloadTrace trace = load_trace(rc.trace, rc.plant.cluster_count());
    detail::warn_gaps(trace, std::cerr);
    const auto out = detail::execute(rc, trace);

    const std::filesystem::path dir(opt.out);
    detail::make_dir(dir);
    {
        auto o = detail::open_out(dir / "trajectory.csv");
        write_trajectory(o, out.log);
    }
    {
        auto o = detail::open_out(dir / "summary.csv");
        write_summary(o, out.log, out.oos);
    }
    if (out.oos) {
        auto o = detail::open_out(dir / "oos_curve.csv");
        write_oos_curve(o, *out.oos);
    }
    {
        auto o = detail::open_out(dir / "manifest.cfg");
        o << RunManifest{rc}.to_text();
    }
    log_out << to_string(rc.experiment.policy) << ": total energy " << format_double(out.log.total_energy())
            << ", tc variance " << format_double(out.log.tc_variance()) << ", " << out.log.records.size()
            << " steps -> " << dir.string() << '\n';
    return out.log;
}

/// Runs every policy listed under `runs` against the shared trace and plant
/// and writes comparison.csv plus one subdirectory per run.
inline std::vector<ComparisonRow> cmd_compare(const CliOptions& opt, std::ostream& log_out = std::cout) {
    if (opt.policy) throw UsageError("--policy applies to the run subcommand; list policies under 'runs' instead");
    KeyValueFile f = KeyValueFile::load(opt.config);
    f.require_known([](const std::string& k) {
        if (k == "runs" || is_run_key(k)) return true;
        if (k.rfind("run.", 0) != 0) return false;
        static const std::vector<std::string> fields{"policy", "horizon", "w_t", "w_m", "scenario_count", "rounding"};
        const auto dot = k.rfind('.');
        return dot > 4 && std::find(fields.begin(), fields.end(), k.substr(dot + 1)) != fields.end();
    });
    const auto names_value = f.take("runs");
    if (!names_value || trim(*names_value).empty()) throw ConfigError(opt.config + ": compare needs 'runs = a, b, ...'");
    std::vector<std::string> names;
    {
        std::string_view s(*names_value);
        while (true) {
            const auto c = s.find(',');
            const std::string name(trim(s.substr(0, c)));
            if (name.empty() || name.find_first_of("./\\ ") != std::string::npos) {
                throw ConfigError(opt.config + ": bad run name '" + name + "'");
            }
            if (std::find(names.begin(), names.end(), name) != names.end()) {
                throw ConfigError(opt.config + ": duplicate run name '" + name + "'");
            }
            names.push_back(name);
            if (c == std::string_view::npos) break;
            s.remove_prefix(c + 1);
        }
    }
    const RunConfig base = detail::load_run_config(opt, f);
    std::vector<RunConfig> configs(names.size(), base);
    for (std::size_t i = 0; i < names.size(); ++i) {
        detail::read_experiment(f, "run." + names[i] + ".", configs[i].experiment);
    }
    f.finish();
    RunConfig first = base;
    const WorkloadTrace trace = load_trace(first.trace, base.plant.cluster_count());
    detail::warn_gaps(trace, std::cerr);
    for (auto& c : configs) c.trace.checksum = first.trace.checksum;

    // Runs are independent; results are collected in the listed order.
    std::vector<std::future<detail::RunOutput>> jobs;
    for (const auto& c : configs) {
        jobs.push_back(std::async(std::launch::async, [&c, &trace] { return detail::execute(c, trace); }));
    }
    std::vector<detail::RunOutput> outputs;
    for (auto& j : jobs) outputs.push_back(j.get());

    const std::filesystem::path dir(opt.out);
    detail::make_dir(dir);
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto sub = dir / names[i];
        detail::make_dir(sub);
        auto t = detail::open_out(sub / "trajectory.csv");
        write_trajectory(t, outputs[i].log);
        auto s = detail::open_out(sub / "summary.csv");
        write_summary(s, outputs[i].log, outputs[i].oos);
        if (outputs[i].oos) {
            auto c = detail::open_out(sub / "oos_curve.csv");
            write_oos_curve(c, *outputs[i].oos);
        }
        auto m = detail::open_out(sub / "manifest.cfg");
        m << RunManifest{configs[i]}.to_text();
    }
    std::vector<std::pair<std::string, const TrajectoryLog*>> runs;
    for (std::size_t i = 0; i < names.size(); ++i) {
        outputs[i].log.policy = to_string(configs[i].experiment.policy);
        runs.emplace_back(names[i], &outputs[i].log);
    }
    auto rows = compare(runs);
    {
        auto o = detail::open_out(dir / "comparison.csv");
        write_comparison(o, rows);
    }
    write_comparison(log_out, rows);
    return rows;
}

/// Runs the claim suite; throws ValidationFailure when any check fails.
inline void cmd_validate(const CliOptions& opt, std::ostream& log_out = std::cout) {
    const auto checks = run_claims(opt.seed.value_or(1));
    if (!report_claims(checks, log_out)) {
        long failed = 0;
        for (const auto& c : checks) failed += c.pass ? 0 : 1;
        throw ValidationFailure(std::to_string(failed) + " of " + std::to_string(checks.size()) + " checks failed");
    }
}

}  // namespace dcmpc

#endif  // DCMPC_CLI_HPP
