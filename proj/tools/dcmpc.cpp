// dcmpc: run, compare and validate data-center MPC experiments.

#include <dcmpc/cli.hpp>

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Data-center MPC: receding-horizon control of CRAC temperature and active servers"};
    app.set_version_flag("--version", std::string(dcmpc::kVersion));
    app.require_subcommand(1);

    dcmpc::CliOptions opt;
    std::string trace, policy;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opt.config, "key = value config file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--trace", trace, "workload CSV overriding the config's trace");
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "seed for the synthetic trace (validate: sampling seed)");
    };
    auto* run = app.add_subcommand("run", "run one policy and write trajectory, summary and manifest");
    add_common(run, true);
    run->add_option("--policy", policy, "override the config's policy")
        ->check(CLI::IsMember({"deterministic", "penalized", "scenario", "oos"}));
    auto* cmp = app.add_subcommand("compare", "run the policies listed in the config and tabulate them");
    add_common(cmp, true);
    auto* val = app.add_subcommand("validate", "check the mathematical claims the controller relies on");
    val->add_option("--seed", seed, "seed for the randomized convexity sample");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? dcmpc::kExitOk : dcmpc::kExitConfig;
    }

    try {
        if (!trace.empty()) opt.trace = trace;
        if (!policy.empty()) opt.policy = dcmpc::parse_policy(policy);
        for (auto* sub : {run, cmp, val}) {
            if (sub->count("--seed") > 0) opt.seed = seed;
        }
        if (*run) {
            dcmpc::cmd_run(opt);
        } else if (*cmp) {
            dcmpc::cmd_compare(opt);
        } else {
            dcmpc::cmd_validate(opt);
        }
    } catch (...) {
        return dcmpc::exit_code(std::current_exception(), std::cerr);
    }
    return dcmpc::kExitOk;
}
