#include <dcmpc/cli.hpp>
#include <dcmpc/config.hpp>
#include <dcmpc/trace.hpp>

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("dcmpc_test_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

TEST(Trace, ParseRates) {
    std::istringstream in("# comment\nminute,cluster,rate\n10,0,1.5\n10,1,2\n11,1,3\n11,0,4.25\n");
    const auto t = dcmpc::parse_csv(in);
    EXPECT_EQ(t.start, 10);
    EXPECT_EQ(t.length(), 2u);
    EXPECT_EQ(t.clusters(), 2u);
    EXPECT_EQ(t.at(11), (std::vector<double>{4.25, 3.0}));
    EXPECT_TRUE(t.gap_minutes.empty());
}

TEST(Trace, EventsAggregateToMeanRate) {
    std::istringstream in("timestamp,cluster,count\n0,0,30\n59.9,0,30\n60,0,120\n");
    const auto t = dcmpc::parse_csv(in, dcmpc::CsvSchema::events());
    EXPECT_EQ(t.length(), 2u);
    EXPECT_DOUBLE_EQ(t.loads[0][0], 1.0);
    EXPECT_DOUBLE_EQ(t.loads[0][1], 2.0);
}

TEST(Trace, GapsAndErrors) {
    std::istringstream gap("minute,cluster,rate\n0,0,1\n2,0,1\n");
    const auto t = dcmpc::parse_csv(gap);
    EXPECT_EQ(t.gap_minutes, (std::vector<long>{1}));
    EXPECT_EQ(t.loads[0][1], 0.0);
    std::istringstream strict("minute,cluster,rate\n0,0,1\n2,0,1\n");
    dcmpc::CsvSchema s;
    s.fill_gaps = false;
    EXPECT_THROW(dcmpc::parse_csv(strict, s), dcmpc::ConfigError);
    std::istringstream neg("minute,cluster,rate\n0,0,-1\n");
    EXPECT_THROW(dcmpc::parse_csv(neg), dcmpc::ConfigError);
    std::istringstream nohdr("a,b,c\n0,0,1\n");
    EXPECT_THROW(dcmpc::parse_csv(nohdr), dcmpc::ConfigError);
    std::istringstream skip("minute,cluster,rate\n0,0,1\n0,2,1\n");
    EXPECT_THROW(dcmpc::parse_csv(skip), dcmpc::ConfigError);
}

TEST(Trace, WriteParseRoundTripIsExact) {
    dcmpc::SyntheticSpec s;
    s.clusters = 3;
    s.length = 50;
    s.start = 7;
    s.base = {4, 6, 8};
    s.amplitude = {2, 3, 3};
    s.period = {18, 24, 30};
    s.noise = {1, 1, 1.5};
    s.seed = 9;
    const auto t = dcmpc::synth(s);
    std::stringstream buf;
    dcmpc::write_csv(buf, t);
    const auto back = dcmpc::parse_csv(buf);
    EXPECT_EQ(back.start, t.start);
    EXPECT_EQ(back.loads, t.loads);
    EXPECT_EQ(dcmpc::synth(s).loads, t.loads);
    s.seed = 10;
    EXPECT_NE(dcmpc::synth(s).loads, t.loads);
}

TEST(Trace, SplitKeepsTimeIndices) {
    std::istringstream in("minute,cluster,rate\n0,0,1\n1,0,2\n2,0,3\n3,0,4\n");
    const auto t = dcmpc::parse_csv(in);
    const auto [h, e] = dcmpc::split(t, 2);
    EXPECT_EQ(h.start, 0);
    EXPECT_EQ(h.length(), 2u);
    EXPECT_EQ(e.start, 2);
    EXPECT_EQ(e.at(3), (std::vector<double>{4.0}));
    EXPECT_THROW(dcmpc::split(t, 0), dcmpc::UsageError);
}

TEST(Trace, BundledTraceChecksum) {
    const std::string data = slurp(fs::path(DCMPC_DATA_DIR) / "synthetic_j3.csv");
    EXPECT_EQ(dcmpc::fnv1a(data), 0xefbd1580fc262dd4ULL);
}

TEST(Config, ParsesKeysAndRejectsUnknown) {
    std::istringstream in("t0 = 3 # start\ntf=9\npolicy = penalized\nw_t = 1e6\nclusters = 2\ncluster.1.mu = 2\n"
                          "t_cpu_init = 30, 31\ntrace = synthetic\nsynth.length = 20\nsynth.base = 5\n"
                          "synth.amplitude = 1\nsynth.period = 10\nsynth.noise = 0.5\nseed = 4\n");
    auto f = dcmpc::KeyValueFile::parse(in, "test");
    f.require_known(dcmpc::is_run_key);
    const auto rc = dcmpc::read_run_config(f, "");
    EXPECT_NO_THROW(f.finish());
    EXPECT_EQ(rc.experiment.t0, 3);
    EXPECT_EQ(rc.experiment.policy, dcmpc::Policy::penalized);
    EXPECT_EQ(rc.experiment.w_t, 1e6);
    EXPECT_EQ(rc.plant.clusters[1].mu, 2.0);
    EXPECT_EQ(rc.plant.clusters[0].mu, 1.0);
    EXPECT_EQ(rc.t_cpu_init, (std::vector<double>{30, 31}));
    EXPECT_EQ(rc.trace.synthetic.base, (std::vector<double>{5, 5}));
    EXPECT_EQ(rc.trace.synthetic.seed, 4u);

    std::istringstream bad("t0 = 1\nhorizn = 3\n");
    auto g = dcmpc::KeyValueFile::parse(bad, "bad");
    EXPECT_THROW(g.require_known(dcmpc::is_run_key), dcmpc::ConfigError);
    std::istringstream dup("t0 = 1\nt0 = 2\n");
    EXPECT_THROW(dcmpc::KeyValueFile::parse(dup, "dup"), dcmpc::ConfigError);
    std::istringstream num("t0 = soon\n");
    auto h = dcmpc::KeyValueFile::parse(num, "num");
    EXPECT_THROW(dcmpc::read_run_config(h, ""), dcmpc::ConfigError);
}

TEST(Config, ManifestRoundTrip) {
    std::ifstream in(fs::path(DCMPC_DATA_DIR) / "default.cfg");
    auto f = dcmpc::KeyValueFile::parse(in, "default.cfg");
    const auto rc = dcmpc::read_run_config(f, DCMPC_DATA_DIR);
    const std::string text = dcmpc::RunManifest{rc}.to_text();
    std::istringstream back(text);
    auto g = dcmpc::KeyValueFile::parse(back, "manifest");
    g.require_known(dcmpc::is_run_key);
    const auto rc2 = dcmpc::read_run_config(g, "");
    g.finish();
    EXPECT_EQ(dcmpc::RunManifest{rc2}.to_text(), text);
}

TEST(Cli, RunWritesFilesAndRerunsBitwise) {
    TempDir tmp;
    std::ostringstream sink;
    dcmpc::CliOptions opt;
    opt.config = std::string(DCMPC_DATA_DIR) + "/default.cfg";
    opt.out = (tmp.path / "a").string();
    const auto log = dcmpc::cmd_run(opt, sink);
    for (const char* f : {"trajectory.csv", "summary.csv", "manifest.cfg"}) EXPECT_TRUE(fs::exists(tmp.path / "a" / f)) << f;
    EXPECT_FALSE(fs::exists(tmp.path / "a" / "oos_curve.csv"));
    EXPECT_EQ(log.records.size(), 200u);

    std::istringstream traj(slurp(tmp.path / "a" / "trajectory.csv"));
    std::string header;
    std::getline(traj, header);
    EXPECT_EQ(header.rfind("t,tc,m_0,m_1,m_2,load_0", 0), 0u);
    long rows = 0;
    for (std::string line; std::getline(traj, line);) ++rows;
    EXPECT_EQ(rows, 200);

    dcmpc::CliOptions again;
    again.config = (tmp.path / "a" / "manifest.cfg").string();
    again.out = (tmp.path / "b").string();
    dcmpc::cmd_run(again, sink);
    EXPECT_EQ(slurp(tmp.path / "a" / "summary.csv"), slurp(tmp.path / "b" / "summary.csv"));
    EXPECT_EQ(slurp(tmp.path / "a" / "trajectory.csv"), slurp(tmp.path / "b" / "trajectory.csv"));
}

TEST(Cli, OosWritesCurve) {
    TempDir tmp;
    write(tmp.path / "oos.cfg",
          "t0 = 0\ntf = 19\npolicy = oos\nclusters = 1\ntrace = synthetic\nsynth.length = 20\nsynth.base = 5\n"
          "synth.amplitude = 1\nsynth.period = 15\nsynth.noise = 0.5\n");
    std::ostringstream sink;
    dcmpc::CliOptions opt;
    opt.config = (tmp.path / "oos.cfg").string();
    opt.out = (tmp.path / "out").string();
    dcmpc::cmd_run(opt, sink);
    const auto curve = slurp(tmp.path / "out" / "oos_curve.csv");
    EXPECT_EQ(curve.rfind("tc,total_energy\n", 0), 0u);
    EXPECT_NE(slurp(tmp.path / "out" / "summary.csv").find("oos_best_tc,"), std::string::npos);
}

TEST(Cli, SeedOverrideChangesSyntheticTrace) {
    TempDir tmp;
    write(tmp.path / "s.cfg",
          "t0 = 0\ntf = 9\nclusters = 1\ntrace = synthetic\nsynth.length = 10\nsynth.base = 5\n"
          "synth.amplitude = 1\nsynth.period = 15\nsynth.noise = 1\nseed = 1\n");
    std::ostringstream sink;
    dcmpc::CliOptions opt;
    opt.config = (tmp.path / "s.cfg").string();
    opt.out = (tmp.path / "one").string();
    dcmpc::cmd_run(opt, sink);
    opt.seed = 2;
    opt.out = (tmp.path / "two").string();
    dcmpc::cmd_run(opt, sink);
    EXPECT_NE(slurp(tmp.path / "one" / "trajectory.csv"), slurp(tmp.path / "two" / "trajectory.csv"));
    EXPECT_NE(slurp(tmp.path / "two" / "manifest.cfg").find("seed = 2"), std::string::npos);
}

TEST(Cli, CompareIdenticalPoliciesAndParseBack) {
    TempDir tmp;
    write(tmp.path / "c.cfg",
          "runs = one, two, pen\nrun.pen.policy = penalized\nrun.pen.w_t = 1e6\n"
          "t0 = 0\ntf = 29\nclusters = 2\ntrace = synthetic\nsynth.length = 30\nsynth.base = 5, 7\n"
          "synth.amplitude = 2\nsynth.period = 20, 30\nsynth.noise = 1\n");
    std::ostringstream sink;
    dcmpc::CliOptions opt;
    opt.config = (tmp.path / "c.cfg").string();
    opt.out = (tmp.path / "out").string();
    const auto rows = dcmpc::cmd_compare(opt, sink);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].total_energy, rows[1].total_energy);
    EXPECT_EQ(rows[0].delta_pct, 0.0);
    EXPECT_EQ(rows[1].delta_pct, 0.0);
    EXPECT_LT(rows[2].tc_variance, rows[0].tc_variance);
    std::ifstream in(tmp.path / "out" / "comparison.csv");
    const auto back = dcmpc::parse_comparison(in);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].name, rows[i].name);
        EXPECT_EQ(back[i].policy, rows[i].policy);
        EXPECT_EQ(back[i].total_energy, rows[i].total_energy);
        EXPECT_EQ(back[i].tc_variance, rows[i].tc_variance);
        EXPECT_EQ(back[i].delay_violations, rows[i].delay_violations);
    }
    EXPECT_TRUE(fs::exists(tmp.path / "out" / "pen" / "manifest.cfg"));
}

TEST(Cli, ExitCodes) {
    TempDir tmp;
    std::ostringstream err, sink;
    auto code = [&](auto&& fn) {
        try {
            fn();
        } catch (...) {
            return dcmpc::exit_code(std::current_exception(), err);
        }
        return 0;
    };
    dcmpc::CliOptions opt;
    opt.out = (tmp.path / "out").string();
    write(tmp.path / "bad.cfg", "t0 = 0\nbogus = 1\n");
    opt.config = (tmp.path / "bad.cfg").string();
    EXPECT_EQ(code([&] { dcmpc::cmd_run(opt, sink); }), dcmpc::kExitConfig);
    opt.config = (tmp.path / "missing.cfg").string();
    EXPECT_EQ(code([&] { dcmpc::cmd_run(opt, sink); }), dcmpc::kExitConfig);
    write(tmp.path / "inf.cfg",
          "t0 = 0\ntf = 5\nclusters = 1\nt_cpu_max = 28\nsigma = 4\nt_cpu_init = 27.9\ntrace = synthetic\n"
          "synth.length = 10\nsynth.base = 5\nsynth.amplitude = 1\nsynth.period = 15\nsynth.noise = 0.5\n");
    opt.config = (tmp.path / "inf.cfg").string();
    EXPECT_EQ(code([&] { dcmpc::cmd_run(opt, sink); }), dcmpc::kExitInfeasible);
    EXPECT_EQ(code([] { throw dcmpc::ValidationFailure("x"); }), dcmpc::kExitValidation);
    EXPECT_EQ(code([&] { dcmpc::cmd_validate(opt, sink); }), dcmpc::kExitOk);
}

}  // namespace
