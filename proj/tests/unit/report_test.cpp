#include <sstream>

#include <gtest/gtest.h>

#include "nuig/report.hpp"
#include "nuig/scheduler.hpp"
#include "nuig/text.hpp"
#include "test_support.hpp"

namespace nuig {
namespace {

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    EXPECT_NE(eq, std::string::npos) << line;
    EXPECT_TRUE(kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second) << "duplicate " << line;
  }
  return kv;
}

TEST(Text, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
    const std::string s = text::format_real(v);
    EXPECT_EQ(text::parse_real(s), v) << s;
  }
  EXPECT_EQ(text::format_real(0.1), "0.1");
  EXPECT_EQ(text::format_real(1.0), "1");
  EXPECT_FALSE(text::parse_real("1.5x").has_value());
  EXPECT_FALSE(text::parse_size("-1").has_value());
}

TEST(Report, AttributionReportIsParseableAndRoundTrips) {
  const SharpSigmoid1D model = testing::sharp_transition_model();
  const AttributionResult r = nonuniform_ig(model, testing::unit_path_1d(), 64, 4);
  std::ostringstream os;
  write_attribution_report(os, r, {{"scheduler", "nonuniform"}});
  const auto kv = parse_kv(os.str());
  EXPECT_EQ(kv.at("scheduler"), "nonuniform");
  EXPECT_EQ(text::parse_real(kv.at("delta")), r.delta);
  EXPECT_EQ(text::parse_real(kv.at("phi")), r.phi[0]);
  EXPECT_EQ(kv.at("phi.shape"), "1");
  EXPECT_EQ(kv.at("total_steps"), "64");
  EXPECT_EQ(kv.at("work.n_forward"), "69");
  EXPECT_EQ(kv.at("work.n_backward"), "64");
  EXPECT_EQ(kv.at("work.n_probe_forward"), "5");
  EXPECT_EQ(kv.at("schedule.n_int"), "4");
  EXPECT_EQ(kv.at("schedule.boundaries"), "0 0.25 0.5 0.75 1");
  EXPECT_EQ(kv.at("schedule.steps"), text::join_ints<std::size_t>(r.schedule->steps));
}

TEST(Report, IdenticalRunsGiveIdenticalBytes) {
  std::mt19937_64 rng(1);
  const MLP2 model = testing::random_mlp(rng, {3, 3}, 4, 2);
  const PathSpec path{testing::random_tensor(rng, {3, 3}), Tensor({3, 3}), {1}};
  std::ostringstream a, b;
  write_attribution_report(a, uniform_ig(model, path, 50));
  write_attribution_report(b, uniform_ig(model, path, 50));
  EXPECT_EQ(a.str(), b.str());
  const auto kv = parse_kv(a.str());
  EXPECT_EQ(kv.at("phi.shape"), "3 3");
  EXPECT_EQ(kv.count("schedule.steps"), 0u);
}

TEST(Report, BenchReportKeys) {
  const SharpSigmoid1D model = testing::sharp_transition_model();
  std::vector<BenchReport> reps;
  reps.push_back(benchmark(model, testing::unit_path_1d(), {SchedulerConfig::nonuniform(8), 64}, 3, 10));
  normalize_latencies(reps);
  std::ostringstream os;
  write_bench_report(os, reps);
  const auto kv = parse_kv(os.str());
  EXPECT_EQ(kv.at("job0.warmup_runs"), "3");
  EXPECT_EQ(kv.at("job0.measured_runs"), "10");
  EXPECT_EQ(kv.at("job0.normalized_latency"), "1");
  EXPECT_EQ(kv.at("job0.config.n_int"), "8");
  EXPECT_EQ(kv.at("job0.work.n_probe_forward"), "9");
  EXPECT_EQ(text::parse_real(kv.at("job0.overhead.counter")), 9.0 / 137.0);
}

}  // namespace
}  // namespace nuig
