#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tebkit/analytic.hpp"
#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/harness.hpp"

using namespace tebkit;

namespace {

const std::filesystem::path kData = TEBKIT_TEST_DATA;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// First 1200 images of the bundled archive, enough for quick pipeline runs.
const MnistArchive& small_archive() {
  static const MnistArchive a = [] {
    auto full = load_idx(kData / "mnist10k-images-idx3-ubyte.gz", kData / "mnist10k-labels-idx1-ubyte.gz");
    const std::size_t n = 1200;
    full.count = n;
    full.images.resize(n * full.rows * full.cols);
    full.labels.resize(n);
    return full;
  }();
  return a;
}

RunConfig small_mnist_config() {
  return RunConfig::from_map({{"experiment", "causalmnist_bias"},
                              {"seeds", "0..3"},
                              {"schemes", "random_few,biased_few"},
                              {"n_few", "200"},
                              {"model", "logistic"},
                              {"lr", "0.01"},
                              {"epochs", "2"},
                              {"workers", "1"}});
}

}  // namespace

TEST(RunConfig, ParsesTextAndSeedRanges) {
  const auto m = RunConfig::parse_text("# comment\nseeds = 3..5\n\nsizes=10,20  # trailing\n");
  EXPECT_EQ(m.at("seeds"), "3..5");
  EXPECT_EQ(m.at("sizes"), "10,20");
  const auto c = RunConfig::from_map(m);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(c.sample_sizes, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(RunConfig::from_map({{"seed_count", "4"}}).seeds.size(), 4u);
  EXPECT_THROW(RunConfig::parse_text("novalue\n"), ParseError);
}

TEST(RunConfig, RejectsBadValues) {
  EXPECT_THROW(RunConfig::from_map({{"seeds", "1,1"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_map({{"bogus", "1"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_map({{"p_T", "1.5"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_map({{"lr", "abc"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_map({{"experiment", "causalmnist"}, {"d", "9"}}), ConfigError);
  EXPECT_THROW(RunConfig::from_map({{"experiment", "causalmnist"}, {"schemes", "a:random:5,a:random:6"}}),
               ConfigError);
}

TEST(RunConfig, HashIgnoresOutputAndWorkers) {
  auto a = RunConfig::from_map({{"seeds", "0..3"}, {"out", "/tmp/a"}, {"workers", "2"}});
  auto b = RunConfig::from_map({{"seeds", "0..3"}, {"out", "/tmp/b"}, {"workers", "5"}});
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  auto c = RunConfig::from_map({{"seeds", "0..3"}, {"lr", "0.02"}});
  EXPECT_NE(a.hash(), c.hash());
}

TEST(RunConfig, CustomSchemes) {
  const auto c = RunConfig::from_map({{"experiment", "custom"}, {"schemes", "pen1:biased:300:1,r:random:100"}});
  ASSERT_EQ(c.schemes.size(), 2u);
  EXPECT_EQ(c.schemes[0].kind, SamplingKind::covariate_biased);
  EXPECT_EQ(c.schemes[0].bias_value, 1.0);
  EXPECT_EQ(c.schemes[1].n_annotated, 100u);
  EXPECT_EQ(standard_scheme("biased_few").bias_value, 0.0);
  EXPECT_EQ(standard_scheme("random_many").n_annotated, 12000u);
}

TEST(Workers, EnvironmentVariable) {
  EXPECT_EQ(resolve_workers(3), 3u);
  ::setenv("TEBKIT_WORKERS", "2", 1);
  EXPECT_EQ(resolve_workers(0), 2u);
  ::setenv("TEBKIT_WORKERS", "many", 1);
  EXPECT_THROW(resolve_workers(0), ConfigError);
  ::unsetenv("TEBKIT_WORKERS");
  EXPECT_GE(resolve_workers(0), 1u);
}

TEST(Convergence, SingleCellReport) {
  auto c = RunConfig::from_map({{"seeds", "7"}, {"sizes", "500"}});
  const auto r = run_appendix_b_convergence(c);
  ASSERT_EQ(r.convergence.size(), 1u);
  EXPECT_EQ(r.convergence[0].n, 500u);
  const auto* a = r.find_aggregate("n=500", "ead_soft");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->count, 1u);
  EXPECT_EQ(a->mean, r.convergence[0].ead_soft);
  EXPECT_EQ(a->stddev, 0.0);
  EXPECT_DOUBLE_EQ(r.references.at("analytic_ad"), analytic_ad(1.0));
}

TEST(Convergence, NearDeterministicOutcomeMakesSoftAndHardAgree) {
  auto c = RunConfig::from_map({{"seeds", "0..4"}, {"sizes", "20000"}, {"sigma2_Y", "1e-8"}, {"epochs", "30"}});
  const auto r = run_appendix_b_convergence(c);
  const double soft = r.find_aggregate("n=20000", "ead_soft")->mean;
  const double hard = r.find_aggregate("n=20000", "ead_hard")->mean;
  EXPECT_NEAR(soft, hard, 0.01);
}

TEST(Convergence, ReproducibleAndOrderIndependent) {
  auto c = RunConfig::from_map({{"seeds", "4,1,3,2"}, {"sizes", "300,200"}, {"workers", "1"}});
  const auto a = run_appendix_b_convergence(c);
  c.workers = 3;
  const auto b = run_appendix_b_convergence(c);
  EXPECT_EQ(a.convergence, b.convergence);
  EXPECT_EQ(a.aggregates, b.aggregates);
  auto d = RunConfig::from_map({{"seeds", "1,2,3,4"}, {"sizes", "200,300"}});
  EXPECT_EQ(run_appendix_b_convergence(d).convergence, a.convergence);
  EXPECT_EQ(a.convergence.front().n, 200u);
  EXPECT_EQ(a.convergence.front().seed, 1u);
}

TEST(CausalMnist, PipelineIsReproducibleAndRecomputable) {
  auto c = small_mnist_config();
  const auto a = run_causalmnist_experiment(c, small_archive());
  c.workers = 2;
  const auto b = run_causalmnist_experiment(c, small_archive());
  EXPECT_TRUE(a.failures.empty());
  ASSERT_EQ(a.runs.size(), 8u);
  EXPECT_EQ(a.runs, b.runs);
  EXPECT_EQ(report_json(a), report_json(b));

  // Aggregates are recomputable from the embedded rows.
  auto copy = a;
  summarize_causalmnist(copy);
  EXPECT_EQ(copy.aggregates, a.aggregates);
  const auto biased = a.runs.filter_scheme("biased_few").column("abs_teb_full");
  EXPECT_DOUBLE_EQ(a.find_aggregate("biased_few", "abs_teb_full")->mean, mean(biased));

  EXPECT_NE(a.find_test("teb_zero:random_few"), nullptr);
  EXPECT_NE(a.find_test("discretization:paired"), nullptr);
  EXPECT_NE(a.find_test("abs_terb:biased_few_vs_random_few"), nullptr);
  EXPECT_NE(a.find_matrix("all"), nullptr);
  EXPECT_EQ(a.violin.at("biased_few:soft").size(), 4u);
  for (const auto& row : a.runs.rows) {
    EXPECT_EQ(row.abs_teb_full, std::abs(row.teb_full));
    EXPECT_GE(row.accuracy_val, 0.0);
    EXPECT_LE(row.accuracy_val, 1.0);
  }
}

TEST(CausalMnist, FailedCellsAreRecordedAndSweepContinues) {
  auto c = RunConfig::from_map({{"experiment", "custom"},
                                {"seeds", "0,1"},
                                {"schemes", "ok:random:100,toomany:biased:1100:0"},
                                {"model", "logistic"},
                                {"epochs", "1"}});
  const auto r = run_causalmnist_experiment(c, small_archive());
  EXPECT_EQ(r.runs.size(), 2u);
  ASSERT_EQ(r.failures.size(), 2u);
  EXPECT_NE(r.failures[0].cell.find("toomany"), std::string::npos);
  EXPECT_NE(r.failures[0].error.find("w = 0"), std::string::npos);
}

TEST(Report, JsonRoundTripAndEmptyReport) {
  ExperimentReport empty;
  empty.experiment = "causalmnist_bias";
  empty.config_hash = "0123456789abcdef";
  empty.tool_version = TEBKIT_VERSION;
  const auto text = report_json(empty);
  const auto back = parse_report_json(text);
  EXPECT_TRUE(back.runs.rows.empty());
  EXPECT_EQ(back.config_hash, empty.config_hash);
  EXPECT_EQ(report_json(back), text);
  EXPECT_NE(text.find("\"runs\": []"), std::string::npos);
  EXPECT_THROW(parse_report_json("{"), ParseError);
  EXPECT_THROW(parse_report_json("{\"format\": \"other\"}"), ParseError);

  const auto full = run_causalmnist_experiment(small_mnist_config(), small_archive());
  const auto j = report_json(full);
  EXPECT_EQ(report_json(parse_report_json(j)), j);
}

TEST(Report, EmissionIsByteStableAndCarriesHash) {
  const auto r = run_causalmnist_experiment(small_mnist_config(), small_archive());
  const auto base = std::filesystem::temp_directory_path() / "tebkit_emit_test";
  std::filesystem::remove_all(base);
  const auto p1 = emit_report(r, base / "a", ReportFormat::both);
  const auto p2 = emit_report(r, base / "b", ReportFormat::both);
  ASSERT_EQ(p1.size(), p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    EXPECT_EQ(p1[i].filename(), p2[i].filename());
    const auto a = slurp(p1[i]);
    EXPECT_EQ(fnv1a_hex(a), fnv1a_hex(slurp(p2[i]))) << p1[i];
    EXPECT_NE(a.find(r.config_hash), std::string::npos) << p1[i];
  }
  EXPECT_EQ(read_metric_table_csv(base / "a" / "metrics.csv"), r.runs);
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "violin.csv"));
  EXPECT_TRUE(std::filesystem::exists(base / "a" / "correlation_all.csv"));
  EXPECT_EQ(emit_report(r, base / "c", ReportFormat::json).size(), 1u);
  std::filesystem::remove_all(base);
  EXPECT_THROW(parse_report_format("xml"), ConfigError);
}

TEST(Report, UnwritableDirectory) {
  ExperimentReport r;
  EXPECT_THROW(emit_report(r, "/proc/tebkit_nope", ReportFormat::json), IoError);
}
