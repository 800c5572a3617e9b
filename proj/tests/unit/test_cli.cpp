#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mamlode/cli.hpp"
#include "mamlode/config.hpp"
#include "mamlode/losses.hpp"
#include "mamlode/optimizers.hpp"
#include "mamlode/trajectory_io.hpp"
#include "test_util.hpp"

using namespace mamlode;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "mamlode_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json two_task(const fs::path& out) {
  return {{"pool", {{"kind", "symmetric_pair"}}},
          {"algorithms", {"maml", "bi_maml"}},
          {"maml", {{"alpha", 0.1}, {"beta", 0.05}, {"eps", 1e-3}, {"eps0", 0.1}}},
          {"w0", {2.0}},
          {"timing", false},
          {"output_dir", out.string()}};
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesSections) {
  const RunConfig c = parse_config(two_task("o"));
  EXPECT_EQ(c.pool.size(), 2u);
  ASSERT_EQ(c.algorithms.size(), 2u);
  EXPECT_EQ(c.algorithms[1], Algorithm::bi_maml);
  EXPECT_DOUBLE_EQ(c.maml.beta, 0.05);
  EXPECT_EQ(c.w0[0], 2.0);
  EXPECT_FALSE(c.timing);
}

TEST(Config, ErrorsNameTheKey) {
  json d = two_task("o");
  d["algorithms"] = {"maml", "reptile"};
  EXPECT_NE(config_error(d).find("unknown algorithm"), std::string::npos);
  d = two_task("o");
  d["maml"]["beta"] = 0.0;
  EXPECT_NE(config_error(d).find("beta"), std::string::npos);
  d = two_task("o");
  d["bogus"] = 1;
  EXPECT_NE(config_error(d).find("bogus"), std::string::npos);
  d = two_task("o");
  d["w0"] = {1.0, 2.0};
  EXPECT_NE(config_error(d).find("w0"), std::string::npos);
  d = two_task("o");
  d["suite"] = {{"kind", "regression"}};
  EXPECT_NE(config_error(d).find("exactly one"), std::string::npos);
  d = two_task("o");
  d["pool"]["kind"] = "triangle";
  EXPECT_NE(config_error(d).find("pool.kind"), std::string::npos);
}

TEST(Config, QuadraticPoolAndRegionBroadcast) {
  json d = {{"pool",
             {{"kind", "quadratic"},
              {"tasks", {{{"H", {{2.0, 0.0}, {0.0, 1.0}}}, {"b", {1.0, 0.0}}}, {{"H", {{1.0, 0.0}, {0.0, 3.0}}}, {"b", {0.0, -1.0}}, {"c", 0.5}}}},
              {"weights", {0.25, 0.75}}}},
            {"region", {{"lo", {-2.0}}, {"hi", {2.0}}}}};
  const RunConfig c = parse_config(d);
  EXPECT_EQ(c.pool.dim(), 2u);
  EXPECT_DOUBLE_EQ(c.pool.weight(1), 0.75);
  ASSERT_TRUE(c.region.has_value());
  EXPECT_EQ(c.region->hi, Vector::Constant(2, 2.0));
}

TEST(Config, SeedOverrideChangesSuite) {
  json d = {{"suite", {{"kind", "regression"}, {"M", 2}, {"d", 3}, {"n", 10}}}, {"seed", 5}};
  const RunConfig a = parse_config(d);
  const RunConfig b = parse_config(d, 6);
  EXPECT_EQ(a.seed, 5u);
  EXPECT_EQ(b.seed, 6u);
  EXPECT_NE(a.w0, b.w0);
}

TEST(Config, SyntaxErrorMapsToConfig) {
  const fs::path dir = scratch("syntax");
  std::ofstream(dir / "bad.json") << "{ \"pool\": ";
  try {
    load_config((dir / "bad.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(TrajectoryIo, ShortestRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, (k % 40) - 20);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(-HUGE_VAL), "-inf");
}

TEST(TrajectoryIo, WriteReadRoundTrip) {
  const fs::path dir = scratch("io");
  MamlConfig m;
  m.alpha = 0.1;
  m.beta = 0.1;
  m.max_iters = 20;
  m.eps0 = 0.5;
  const Trajectory t = run_bi_maml(symmetric_pair_pool(), m, testutil::v1(2.0));
  write_trajectory_csv((dir / "t.csv").string(), t, "r1", "bi_maml");
  const std::string text = slurp(dir / "t.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), kTrajectoryHeader);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto rows = read_trajectory_csv((dir / "t.csv").string());
  ASSERT_EQ(rows.size(), t.samples.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].gradF_norm, t.samples[k].gradF_norm);
    EXPECT_EQ(rows[k].hess_evals_cum, t.samples[k].hess_evals_cum);
    EXPECT_EQ(rows[k].phase, to_string(t.samples[k].phase));
  }
  const json s = summary_json(t, "bi_maml");
  for (const char* key : {"algorithm", "terminal_gradF_norm", "iters", "t_final", "hess_evals", "grad_evals",
                          "wall_ns", "termination"}) {
    EXPECT_TRUE(s.contains(key)) << key;
  }
}

TEST(TrajectoryIo, HeaderMismatchRejected) {
  const fs::path dir = scratch("hdr");
  std::ofstream(dir / "x.csv") << "a,b\n1,2\n";
  EXPECT_THROW(read_trajectory_csv((dir / "x.csv").string()), Error);
}

TEST(CmdRun, WritesCsvsAndSummary) {
  const fs::path dir = scratch("run");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_run({write_config(dir, two_task(dir / "out")), {}, {}}, out, err), cli::kOk) << err.str();
  EXPECT_TRUE(fs::exists(dir / "out" / "maml.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "bi_maml.csv"));
  const json s = json::parse(slurp(dir / "out" / "summary.json"));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0]["algorithm"], "maml");
  const json cmp = json::parse(slurp(dir / "out" / "comparison_bi_maml.json"));
  EXPECT_LT(cmp["hess_evals_ratio"].get<double>(), 1.0);
}

TEST(CmdRun, ByteIdenticalReruns) {
  const fs::path dir = scratch("rerun");
  std::ostringstream out, err;
  json d = {{"suite", {{"kind", "regression"}, {"M", 3}, {"d", 4}, {"n", 20}}},
            {"algorithms", {"maml", "bi_maml", "fo_maml"}},
            {"maml", {{"alpha", 0.2}, {"beta", 0.05}}},
            {"budgets", {{"max_iters", 40}}},
            {"timing", false},
            {"seed", 9}};
  const std::string cfg = write_config(dir, d);
  ASSERT_EQ(cli::cmd_run({cfg, (dir / "a").string(), {}}, out, err), cli::kOk);
  ASSERT_EQ(cli::cmd_run({cfg, (dir / "b").string(), {}}, out, err), cli::kOk);
  for (const char* f : {"maml.csv", "bi_maml.csv", "fo_maml.csv", "summary.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  ASSERT_EQ(cli::cmd_run({cfg, (dir / "c").string(), 10}, out, err), cli::kOk);
  EXPECT_NE(slurp(dir / "a" / "maml.csv"), slurp(dir / "c" / "maml.csv"));
}

TEST(CmdRun, ExitCodes) {
  const fs::path dir = scratch("codes");
  std::ostringstream out, err;
  json d = two_task(dir / "out");
  d["algorithms"] = {"nope"};
  EXPECT_EQ(cli::cmd_run({write_config(dir, d), {}, {}}, out, err), cli::kUsage);
  EXPECT_NE(err.str().find("unknown algorithm"), std::string::npos);
  d = two_task(dir / "out");
  d["maml"]["beta"] = 0.0;
  EXPECT_EQ(cli::cmd_run({write_config(dir, d), {}, {}}, out, err), cli::kUsage);
  d = two_task(dir / "out");
  d["maml"]["beta"] = 5.0;
  d["algorithms"] = {"gd_f"};
  EXPECT_EQ(cli::cmd_run({write_config(dir, d), {}, {}}, out, err), cli::kDiverged);
  EXPECT_EQ(cli::cmd_run({(dir / "missing.json").string(), {}, {}}, out, err), cli::kUsage);
}

TEST(CmdVerify, TwoTaskAllPass) {
  const fs::path dir = scratch("verify");
  std::ostringstream out, err;
  json d = two_task(dir / "out");
  ASSERT_EQ(cli::cmd_verify({write_config(dir, d), {}, {}}, out, err), cli::kOk) << out.str() << err.str();
  const json r = json::parse(slurp(dir / "out" / "verification.json"));
  ASSERT_TRUE(r.is_array());
  for (const auto& c : r) {
    EXPECT_EQ(c["status"], "pass") << c.dump();
    for (const char* key : {"check", "status", "margin", "hypothesis", "details"}) EXPECT_TRUE(c.contains(key));
  }
}

TEST(CmdVerify, ForcedCheckAboveBoundIsHypothesisViolated) {
  const fs::path dir = scratch("forced");
  std::ostringstream out, err;
  json d = two_task(dir / "out");
  d["maml"]["alpha"] = 0.3;
  d["verify"] = {{"checks", {"time_bound_maml_ode"}}};
  ASSERT_EQ(cli::cmd_verify({write_config(dir, d), {}, {}}, out, err), cli::kOk) << out.str() << err.str();
  const json r = json::parse(slurp(dir / "out" / "verification.json"));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0]["status"], "hypothesis-violated");
}

TEST(CmdConstants, TwoTask) {
  const fs::path dir = scratch("constants");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_constants({write_config(dir, two_task(dir / "out")), {}, {}}, out, err), cli::kOk);
  const json c = json::parse(slurp(dir / "out" / "constants.json"));
  EXPECT_NEAR(c["L"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(c["mu"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(c["kappa"].get<double>(), 0.0);
  EXPECT_NEAR(c["sigma"].get<double>(), 1.0, 1e-12);
  for (const char* key : {"alpha_bound_maml_ode", "alpha_bound_bi_maml_ode", "alpha_bound_strong_convexity"}) {
    EXPECT_TRUE(c.contains(key)) << key;
  }
}

TEST(CmdConstants, HingePoolFlagged) {
  const fs::path dir = scratch("hinge");
  std::ofstream(dir / "h.csv") << "x,y\n1,1\n2,1\n-1,0\n-3,0\n";
  json d = {{"csv", {{"path", "h.csv"}, {"label", "y"}, {"loss", "hinge"}}},
            {"region", {{"lo", {-3.0}}, {"hi", {3.0}}}},
            {"output_dir", (dir / "out").string()}};
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_constants({write_config(dir, d), {}, {}}, out, err), cli::kVerifyFailed);
  const json c = json::parse(slurp(dir / "out" / "constants.json"));
  EXPECT_FALSE(c["strongly_convex"].get<bool>());
  EXPECT_LE(c["mu"].get<double>(), 1e-12);
}

TEST(CmdCounterexample, WritesCsvAndReport) {
  const fs::path dir = scratch("ce");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_counterexample(0.4, -3, 3, 1e-3, dir.string(), out, err), cli::kOk);
  const std::string csv = slurp(dir / "counterexample_F_second.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "w,F_second");
  const json r = json::parse(slurp(dir / "counterexample.json"));
  EXPECT_LT(r["min_F_second"].get<double>(), 0.0);
  EXPECT_TRUE(r["nonconvex"].get<bool>());
  ASSERT_EQ(cli::cmd_counterexample(0.0, -3, 3, 1e-3, dir.string(), out, err), cli::kOk);
  EXPECT_GE(json::parse(slurp(dir / "counterexample.json"))["min_F_second"].get<double>(), 0.01 - 1e-6);
  EXPECT_EQ(cli::cmd_counterexample(0.4, -3, 3, 0.0, dir.string(), out, err), cli::kUsage);
  EXPECT_EQ(cli::cmd_counterexample(0.4, -3, 3, -1.0, dir.string(), out, err), cli::kUsage);
}

TEST(CmdPlot, TwoPolylines) {
  const fs::path dir = scratch("plot");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_run({write_config(dir, two_task(dir / "out")), {}, {}}, out, err), cli::kOk);
  const std::vector<std::string> csvs = {(dir / "out" / "maml.csv").string(), (dir / "out" / "bi_maml.csv").string()};
  ASSERT_EQ(cli::cmd_plot(csvs, {"gradF_norm"}, (dir / "p.svg").string(), true, out, err), cli::kOk) << err.str();
  const std::string svg = slurp(dir / "p.svg");
  std::size_t count = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
  EXPECT_EQ(count, 2u);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
}

TEST(CmdPlot, Errors) {
  const fs::path dir = scratch("plot_err");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_run({write_config(dir, two_task(dir / "out")), {}, {}}, out, err), cli::kOk);
  const std::string good = (dir / "out" / "maml.csv").string();
  std::ofstream(dir / "empty.csv") << kTrajectoryHeader << "\n";
  std::ofstream(dir / "other.csv") << "a,b\n1,2\n";
  EXPECT_EQ(cli::cmd_plot({(dir / "empty.csv").string()}, {}, (dir / "p.svg").string(), false, out, err), cli::kUsage);
  EXPECT_EQ(cli::cmd_plot({good, (dir / "other.csv").string()}, {}, (dir / "p.svg").string(), false, out, err),
            cli::kUsage);
  std::ostringstream named;
  EXPECT_EQ(cli::cmd_plot({good}, {"loss_of_life"}, (dir / "p.svg").string(), false, out, named), cli::kUsage);
  EXPECT_NE(named.str().find("loss_of_life"), std::string::npos);
}

TEST(CmdTheoryMap, WritesTable) {
  const fs::path dir = scratch("map");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_theory_map({}, (dir / "docs" / "map.md").string(), out, err), cli::kOk);
  const std::string md = slurp(dir / "docs" / "map.md");
  EXPECT_NE(md.find("| lyapunov-descent |"), std::string::npos);
  EXPECT_NE(md.find("not-run"), std::string::npos);
}

TEST(Main, UsageErrors) {
  const char* no_sub[] = {"mamlode"};
  EXPECT_EQ(cli::main(1, const_cast<char**>(no_sub)), cli::kUsage);
  const char* no_cfg[] = {"mamlode", "run"};
  EXPECT_EQ(cli::main(2, const_cast<char**>(no_cfg)), cli::kUsage);
  const char* help[] = {"mamlode", "--help"};
  EXPECT_EQ(cli::main(2, const_cast<char**>(help)), cli::kOk);
}

TEST(ExitCodes, ErrorKindMapping) {
  EXPECT_EQ(cli::exit_code_for(ErrorKind::config), cli::kUsage);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::parse), cli::kUsage);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::non_finite), cli::kDiverged);
}
