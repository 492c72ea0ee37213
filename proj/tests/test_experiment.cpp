#include "afafed/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace afafed;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "afafed_experiment_test";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig quick() {
  ExperimentConfig c = preset("table_a1_small");
  c.T = 25;
  c.adaptive.iter_max = 3;
  c.examples_per_coworker = 60;
  return c;
}

}  // namespace

TEST(Config, PresetsAreValid) {
  EXPECT_NO_THROW(preset("table_a1_small").validate());
  const auto big = preset("table_a1");
  EXPECT_NO_THROW(big.validate());
  EXPECT_EQ(big.K, 100);
  EXPECT_EQ(big.category_of(0), 0);
  EXPECT_EQ(big.category_of(30), 1);
  EXPECT_EQ(big.category_of(99), 2);
  EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Config, LoadsIniOverPreset) {
  const auto p = write_text("ok.ini",
                            "preset = table_a1_small\n[link]\np_loss = 0.25\nrate = 1e5\n"
                            "[sim]\nT = 77\nseed = 3\n[partition]\nkind = 2-noniid\n");
  const auto c = load_config(p);
  EXPECT_EQ(c.T, 77);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.per_coworker(c.p_loss, 5, "link.p_loss"), 0.25);
  EXPECT_EQ(c.per_coworker(c.rate, 7, "link.rate"), 1e5);
  EXPECT_EQ(c.per_coworker(c.speed, 7, "compute.speed"), 1e7);   // category 3
  EXPECT_EQ(c.partition.kind, PartitionKind::kLabelSkew);
  EXPECT_EQ(c.partition.classes_per_coworker, 2);
}

TEST(Config, KBeforeCategoriesRegardlessOfOrder) {
  const auto p = write_text("k.ini", "[topology]\ncategories = 1, 1\nK = 2\n");
  const auto c = load_config(p);
  EXPECT_EQ(c.K, 2);
  EXPECT_EQ(c.categories, (std::vector<int>{1, 1}));
}

TEST(Config, ErrorsNameTheKeyPath) {
  auto expect_key = [](const std::string& text, const std::string& key) {
    const auto p = write_text("bad.ini", text);
    try {
      load_config(p);
      FAIL() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  expect_key("[link]\np_loss = 1.5\n", "link.p_loss");
  expect_key("[link]\nbogus = 1\n", "link.bogus");
  expect_key("[sim]\nT = ten\n", "sim.T");
  expect_key("[arrivals]\nrate = -1\n", "arrivals.rate");
  expect_key("[topology]\nK = 5\ncategories = 3,3\n", "topology.categories");
  expect_key("[compute]\nspeed = 1,2\n", "compute.speed");
  expect_key("[adaptive]\neta_min = 0\n", "adaptive");
  expect_key("[buffer]\nminibatch = 64\n", "buffer.minibatch");
  expect_key("[model]\nkind = svm\n", "model.kind");
  expect_key("[partition]\nkind = label_skew\nclasses_per_coworker = 20\n", "partition.classes_per_coworker");
}

TEST(Data, DeterministicInSeed) {
  auto c = quick();
  const auto a = generate_data(c);
  const auto b = generate_data(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      ASSERT_EQ(a[k][i].x, b[k][i].x);
      ASSERT_EQ(a[k][i].y, b[k][i].y);
    }
  c.seed = 2;
  EXPECT_NE(generate_data(c)[0][0].x, a[0][0].x);
  c.data_seed = 1;
  EXPECT_EQ(generate_data(c)[0][0].x, a[0][0].x);
}

TEST(Data, OneNonIidHasExactlyOneClass) {
  auto c = quick();
  c.partition = {PartitionKind::kLabelSkew, 1};
  for (const auto& shard : generate_data(c)) {
    std::set<int> classes;
    for (const auto& e : shard) classes.insert(e.label_class);
    EXPECT_EQ(classes.size(), 1u);
  }
  c.partition = {PartitionKind::kLabelSkew, 2};
  for (const auto& shard : generate_data(c)) {
    std::set<int> classes;
    for (const auto& e : shard) classes.insert(e.label_class);
    EXPECT_EQ(classes.size(), 2u);
  }
}

TEST(Data, IidShardsMatchTheGlobalHistogram) {
  auto c = quick();
  apply_setting(c, "topology.K", "2");
  c.classes = 5;
  c.examples_per_coworker = 10000;
  const auto shards = generate_data(c);
  // chi-square against the uniform class law, 4 dof; 99.9% quantile 18.47
  for (const auto& shard : shards) {
    std::vector<double> counts(5, 0.0);
    for (const auto& e : shard) counts[e.label_class] += 1.0;
    double chi2 = 0.0;
    for (double n : counts) chi2 += (n - 2000.0) * (n - 2000.0) / 2000.0;
    EXPECT_LT(chi2, 18.47);
  }
}

TEST(Data, LogisticLabelsAreBinary) {
  auto c = quick();
  c.loss = LossKind::kLogistic;
  for (const auto& shard : generate_data(c))
    for (const auto& e : shard) EXPECT_TRUE(e.y(0) == 0.0 || e.y(0) == 1.0);
}

TEST(Inputs, PerCategoryValuesAndAutoPayload) {
  const auto in = build_inputs(quick(), false);
  ASSERT_EQ(in.setups.size(), 8u);
  EXPECT_EQ(in.setups[0].compute.speed, 5e8);
  EXPECT_EQ(in.setups[3].compute.speed, 2.5e8);
  EXPECT_EQ(in.setups[7].link.rate.nominal, 2e4);
  EXPECT_EQ(in.setups[0].link.payload_bits, 64 * 12);
}

TEST(Inputs, TraceArrivalsBecomeTheShard) {
  for (int k = 0; k < 2; ++k)
    write_text("trace_" + std::to_string(k) + ".csv", "0.1,1,2,3\n0.2,4,5,6\n0.3,7,8,9\n");
  auto c = quick();
  apply_setting(c, "topology.K", "2");
  c.dim = 2;
  c.arrival_kind = ArrivalKind::kTrace;
  c.trace = scratch("trace_{k}.csv").string();
  const auto in = build_inputs(c, false);
  ASSERT_EQ(in.setups[1].shard.size(), 3u);
  EXPECT_EQ(in.setups[1].arrivals.trace_times, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(in.setups[1].shard[2].y(0), 9.0);
}

TEST(Metrics, CsvHasFixedHeaderAndOneRowPerAggregation) {
  const auto in = build_inputs(quick(), false);
  Simulation sim(in.sim, in.setups);
  const auto r = sim.run();
  std::ostringstream csv;
  write_metrics_csv(csv, r.records);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kMetricsHeader);
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
  }
  EXPECT_EQ(rows, 25);
}

TEST(Summary, ConsistentWithRecords) {
  auto c = quick();
  c.p_loss = {0.3};
  const auto in = build_inputs(c, true);
  Simulation sim(in.sim, in.setups);
  const auto r = sim.run();
  const auto s = summarize(r, r.lambdas_final);
  EXPECT_EQ(s.aggregations, 25);
  double p = 0.0;
  for (double x : s.access_probability) p += x;
  EXPECT_NEAR(p, 1.0, 1e-12);
  EXPECT_GE(s.I2_bar, s.I_bar * s.I_bar * (1 - 1e-12));
  EXPECT_LE(s.drops, s.attempts);
  ASSERT_TRUE(s.estimates);
  std::ostringstream out;
  write_summary(out, s);
  EXPECT_NE(out.str().find("[estimates]"), std::string::npos);
  EXPECT_NE(out.str().find("aggregations = 25"), std::string::npos);
}

TEST(BoundParams, RoundTripThroughFile) {
  BoundInputs<double> in;
  in.C = 0.7;
  in.Gamma = 1.3;
  in.A = 0.2;
  in.zeta = 3.0;
  in.F0 = 2.0;
  in.F_star = 0.5;
  in.T = 123;
  in.beta_min = 0.01;
  in.beta_max = 0.05;
  std::ostringstream out;
  write_bound_params(out, in);
  const auto p = write_text("params.ini", out.str());
  const auto back = load_bound_params(p);
  EXPECT_EQ(back.C, in.C);
  EXPECT_EQ(back.Gamma, in.Gamma);
  EXPECT_EQ(back.T, in.T);
  EXPECT_EQ(back.beta_max, in.beta_max);
  std::ostringstream report;
  EXPECT_EQ(command_bound(p, report), 0);
  EXPECT_NE(report.str().find("bound_clipped_beta"), std::string::npos);
}

TEST(BoundParams, InadmissibleBetaExitsTwo) {
  const auto p = write_text("inadmissible.ini", "[bound]\nC = 1\nGamma = 1\nzeta = 1\nepsilon = 0.5\n"
                                                "beta_min = 0.1\nbeta_max = 0.9\nF0 = 1\nT = 10\n");
  std::ostringstream report;
  EXPECT_EQ(command_bound(p, report), 2);
  EXPECT_NE(report.str().find("refused"), std::string::npos);
}

TEST(Commands, RunWritesArtifactsAndIsByteStable) {
  const auto dir = scratch("run_cmd");
  fs::remove_all(dir);
  EXPECT_EQ(command_run(quick(), dir / "a"), 0);
  EXPECT_EQ(command_run(quick(), dir / "b"), 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir / "a" / "summary.ini"), slurp(dir / "b" / "summary.ini"));
}

TEST(Commands, SweepWritesOneSummaryPerCell) {
  const auto dir = scratch("sweep_cmd");
  fs::remove_all(dir);
  EXPECT_EQ(command_sweep(quick(), dir, parse_seed_list("1-3"), {parse_grid_axis("link.p_loss=0,0.5")}), 0);
  int n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.path().filename() == "summary.ini";
  EXPECT_EQ(n, 6);
}

TEST(Parsing, SeedsAndGrid) {
  EXPECT_EQ(parse_seed_list("1-3,7"), (std::vector<std::uint64_t>{1, 2, 3, 7}));
  EXPECT_THROW(parse_seed_list("5-2"), ConfigError);
  const auto axis = parse_grid_axis("mixing.beta_max=0.1,0.2");
  EXPECT_EQ(axis.first, "mixing.beta_max");
  EXPECT_EQ(axis.second, (std::vector<std::string>{"0.1", "0.2"}));
  const auto lists = parse_grid_axis("link.rate=1e6,5e5,2e4;1e5");
  EXPECT_EQ(lists.second.size(), 2u);
  EXPECT_THROW(parse_grid_axis("novalue"), ConfigError);
}
