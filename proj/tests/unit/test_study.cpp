#include "borrowsim/plotdata.hpp"
#include "borrowsim/runner.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace borrowsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("borrowsim_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

const char* kSmall = R"({
  "preset": "belimumab",
  "sample_sizes": [93, 140],
  "drifts": ["consistent", "null"],
  "methods": ["separate", {"method": "cpp", "gamma": [0.25, 0.5]}],
  "n_reps": {"success": 120, "estimation": 100},
  "seed": 7
})";

}  // namespace

TEST(Config, GridSizeAndOrder) {
    const auto c = parse_study_config(R"({
      "preset": "botox", "sample_sizes": [234, 117, 58, 39],
      "drifts": ["consistent", "partially_consistent", "null"],
      "methods": ["separate", "pooling", {"method": "cpp", "gamma": [0.25, 0.5]}, "ebpp"],
      "n_reps": 100})");
    const auto g = expand_grid(c);
    ASSERT_EQ(g.size(), 60u);
    EXPECT_EQ(g[0].scenario.n_per_arm, 234);
    EXPECT_EQ(g[0].drift_label, "consistent");
    EXPECT_EQ(method_key(g[2].method), "cpp(gamma=0.25)");
    EXPECT_EQ(g[5].drift_label, "partially_consistent");
    EXPECT_EQ(g[15].scenario.n_per_arm, 117);
    // Methods of one scenario share the seed.
    EXPECT_EQ(g[0].scenario.seed, g[4].scenario.seed);
    EXPECT_NE(g[0].scenario.seed, g[5].scenario.seed);
    EXPECT_EQ(c.n_reps.success, 100);
}

TEST(Config, DriftKeywords) {
    const auto bel = find_preset("belimumab");
    EXPECT_NEAR(resolve_drift(DriftKeyword::Null, bel), -std::log(1.62), 1e-15);
    EXPECT_NEAR(resolve_drift(DriftKeyword::PartiallyConsistent, bel), -std::log(1.62) / 2, 1e-15);
    EXPECT_EQ(resolve_drift(DriftKeyword::Consistent, bel), 0.0);
    const auto c = parse_study_config(R"({"preset": "belimumab", "sample_sizes": [93],
        "drifts": [{"auto": {"count": 5}}, 0.1], "methods": ["separate"], "n_reps": 100})");
    const auto g = expand_grid(c);
    ASSERT_EQ(g.size(), 6u);
    EXPECT_EQ(g[0].drift_label, "auto1of5");
    EXPECT_NEAR(g[5].scenario.knobs.drift, 0.1, 1e-15);
    EXPECT_LT(g[0].scenario.knobs.drift, g[4].scenario.knobs.drift);
}

TEST(Config, ErrorsNameTheKeyPath) {
    const auto expect_path = [](const std::string& json, const std::string& path) {
        try {
            parse_study_config(json);
            FAIL() << "accepted: " << json;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(path), std::string::npos) << e.what();
        }
    };
    expect_path(R"({"preset": "botox", "sample_sizes": [10], "drifts": [0], "methods": ["separate"], "n_reps": 100, "colour": 1})", "colour");
    expect_path(R"({"preset": "botox", "sample_sizes": [10], "drifts": [0], "methods": [{"method": "cpp", "gamma": 2}], "n_reps": 100})", "methods[0]");
    expect_path(R"({"preset": "botox", "sample_sizes": [10], "drifts": [0], "methods": ["separate"], "n_reps": 10})", "n_reps");
    expect_path(R"({"preset": "botox", "sample_sizes": [10], "drifts": ["sideways"], "methods": ["separate"], "n_reps": 100})", "drifts[0]");
    EXPECT_THROW(parse_study_config("{not json"), ConfigError);
}

TEST(Runner, JobsInvarianceAndResume) {
    const auto dir = scratch("run");
    auto c = parse_study_config(kSmall);
    RunOptions o;
    o.jobs = 1;
    o.output_dir = dir / "a";
    const auto m1 = run_study(c, o);
    EXPECT_EQ(m1.grid_size, 12u);
    EXPECT_EQ(m1.computed, 12u);
    EXPECT_EQ(exit_code(m1), 0);
    o.jobs = 8;
    o.output_dir = dir / "b";
    run_study(c, o);
    EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));

    o.resume = true;
    const auto m3 = run_study(c, o);
    EXPECT_EQ(m3.computed, 0u);
    EXPECT_EQ(m3.skipped, 12u);
    EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));

    // A changed config refuses to resume into the old directory.
    auto c2 = parse_study_config(std::string(kSmall).replace(std::string(kSmall).find("\"seed\": 7"), 9, "\"seed\": 8"));
    EXPECT_THROW(run_study(c2, o), ConfigError);
    fs::remove_all(dir);
}

TEST(PlotData, ViewsFromResults) {
    const auto dir = scratch("plot");
    RunOptions o;
    o.jobs = 1;
    o.output_dir = dir;
    run_study(parse_study_config(kSmall), o);
    std::ifstream in(dir / "results.csv");
    const auto table = read_csv(in);
    ASSERT_EQ(table.rows.size(), 12u);
    for (const char* v : {"forest_by_success", "metric_vs_tie", "metric_vs_drift", "metric_vs_ess"}) {
        const auto out = emit_plotdata(table, plot_view_from_string(v));
        std::istringstream ss(out);
        const auto t = read_csv(ss);
        EXPECT_EQ(t.header.front(), "case_study") << v;
        EXPECT_FALSE(t.rows.empty()) << v;
    }
    // vs TIE: rows at the consistent drift take x from the matching null row.
    std::istringstream ss(emit_plotdata(table, PlotView::MetricVsTIE, "success_prob"));
    const auto t = read_csv(ss);
    const auto x = t.column("x");
    for (const auto& row : t.rows) {
        const double v = std::stod(row[x]);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_THROW(plot_view_from_string("pie"), std::invalid_argument);
    fs::remove_all(dir);
}

#ifdef BORROWSIM_CLI
namespace {
int run_cli(const std::string& args) {
    const int rc = std::system((std::string(BORROWSIM_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    {
        std::ofstream(dir / "good.json") << kSmall;
        std::ofstream(dir / "bad.json") << R"({"preset": "botox", "bogus": 1})";
    }
    EXPECT_EQ(run_cli("validate " + (dir / "good.json").string()), 0);
    EXPECT_EQ(run_cli("validate " + (dir / "bad.json").string()), 1);
    EXPECT_EQ(run_cli("presets list"), 0);
    EXPECT_EQ(run_cli("presets show nosuch"), 1);
    EXPECT_EQ(run_cli("run " + (dir / "good.json").string() + " -q -j 2 -o " + (dir / "out").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
    EXPECT_EQ(run_cli("plot " + (dir / "out" / "results.csv").string() + " --view metric_vs_drift --out " +
                      (dir / "p.csv").string()),
              0);
    EXPECT_EQ(run_cli("plot " + (dir / "out" / "results.csv").string() + " --view nope"), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    fs::remove_all(dir);
}
#endif
