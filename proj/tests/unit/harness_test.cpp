#include <gtest/gtest.h>

#include <filesystem>

#include "splitguard/harness/config.hpp"
#include "splitguard/harness/experiment.hpp"
#include "splitguard/harness/report.hpp"
#include "splitguard/harness/trial.hpp"

using namespace splitguard;
using namespace splitguard::harness;
using protocol::Verdict;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.data.n = 3000;
  c.trials = 2;
  c.measure_overhead = false;
  c.threads = 1;
  return c;
}

class FixedDetector final : public protocol::Detector {
 public:
  FixedDetector(Verdict v, std::size_t at) : v_(v), at_(at) {}
  std::string_view name() const override { return "fixed"; }
  Verdict observe(std::size_t i, bool, const nn::GradVec&) override {
    return i >= at_ ? v_ : Verdict::undecided;
  }

 private:
  Verdict v_;
  std::size_t at_;
};

RunResult result(Truth truth, Verdict v, std::optional<double> t = std::nullopt) {
  RunResult r;
  r.truth = truth;
  r.verdict = v;
  r.detection_t = t;
  return r;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("splitguard_" + name);
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndWhitespace) {
  const auto c = parse_config(
      "# desk\n"
      "\n"
      "data.n = 500\n"
      "sg_lc.policy=fast\n"
      "  detector.kind = both  \n"
      "sg_ad.k = 0\n"
      "run.measure_overhead = false\n");
  EXPECT_EQ(c.data.n, 500u);
  EXPECT_EQ(c.policy.kind, sglc::PolicyKind::fast);
  EXPECT_EQ(c.detector, DetectorSelection::both);
  EXPECT_FALSE(c.sg_ad.k);
  EXPECT_FALSE(c.measure_overhead);
}

TEST(Config, DefaultsMatchDeskProfile) {
  const auto c = load_config(std::string(SPLITGUARD_CONFIGS) + "/desk.cfg");
  const ExperimentConfig d;
  EXPECT_EQ(c.data.n, d.data.n);
  EXPECT_EQ(c.batch_size, d.batch_size);
  EXPECT_EQ(c.sg_lc.alpha, d.sg_lc.alpha);
  EXPECT_EQ(c.sg_ad.lof_threshold, d.sg_ad.lof_threshold);
  EXPECT_EQ(c.fsha.distinguisher_lr, d.fsha.distinguisher_lr);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("bogus.key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("data.n\n"), ConfigError);
  EXPECT_THROW(parse_config("data.n = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("sg_lc.policy = median\n"), ConfigError);
  EXPECT_THROW(parse_config("run.measure_overhead = maybe\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/desk.cfg"), IoError);
  auto c = parse_config("attack.behavior = honest\n");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Trial, SameSeedSameResult) {
  const auto ctx = prepare_experiment(small_config());
  auto a = run_trial(ctx, Truth::attack, 5);
  auto b = run_trial(ctx, Truth::attack, 5);
  a.wall_detector_ms = b.wall_detector_ms = 0;
  a.wall_total_ms = b.wall_total_ms = 0;
  EXPECT_EQ(a, b);
}

TEST(Trial, NoDetectorsNeverFires) {
  const auto ctx = prepare_experiment(small_config());
  TrialOptions opt;
  opt.detectors = DetectorSelection::none;
  const auto r = run_trial(ctx, Truth::honest, 1, opt);
  EXPECT_NE(r.verdict, Verdict::attack);
  EXPECT_FALSE(r.detection_t);
  EXPECT_EQ(r.batches_run, ctx.batches_per_epoch);
  EXPECT_FALSE(r.reconstruction_mse);
}

TEST(Trial, SgAdFlagsAttack) {
  auto cfg = small_config();
  cfg.data.n = 30000;
  cfg.detector = DetectorSelection::sg_ad;
  const auto ctx = prepare_experiment(cfg);
  const auto r = run_trial(ctx, Truth::attack, 22);
  EXPECT_EQ(r.verdict, Verdict::attack);
  ASSERT_TRUE(r.detection_t);
  EXPECT_GT(*r.detection_t, 0.0);
  EXPECT_LT(*r.detection_t, 1.0);
  EXPECT_TRUE(r.reconstruction_mse);
}

TEST(Trial, OverheadRunsPairedBaseline) {
  const auto ctx = prepare_experiment(small_config());
  TrialOptions opt;
  opt.measure_overhead = true;
  const auto r = run_trial(ctx, Truth::honest, 3, opt);
  ASSERT_TRUE(r.wall_baseline_ms);
  EXPECT_GT(*r.wall_baseline_ms, 0.0);
  EXPECT_GE(r.wall_detector_ms, 0.0);
  EXPECT_LE(r.wall_detector_ms, r.wall_total_ms);
}

TEST(Experiment, PerfectStubScoresPerfectly) {
  const auto ctx = prepare_experiment(small_config());
  TrialOptions opt;
  opt.custom = [](Truth truth, std::uint64_t) {
    return std::make_unique<FixedDetector>(
        truth == Truth::attack ? Verdict::attack : Verdict::no_attack, 3);
  };
  const auto rep = run_experiment(ctx, opt);
  EXPECT_EQ(rep.tpr, 1.0);
  EXPECT_EQ(rep.fpr, 0.0);
  ASSERT_TRUE(rep.mean_t);
  EXPECT_DOUBLE_EQ(*rep.mean_t, 4.0 / static_cast<double>(ctx.batches_per_epoch));
  EXPECT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].truth, Truth::honest);
  EXPECT_EQ(rep.rows[3].truth, Truth::attack);
}

TEST(Experiment, SilentStubNeverFires) {
  const auto ctx = prepare_experiment(small_config());
  TrialOptions opt;
  opt.custom = [](Truth, std::uint64_t) {
    return std::make_unique<FixedDetector>(Verdict::no_attack, 0);
  };
  const auto rep = run_experiment(ctx, opt);
  EXPECT_EQ(rep.tpr, 0.0);
  EXPECT_EQ(rep.fpr, 0.0);
  EXPECT_FALSE(rep.mean_t);
}

TEST(Experiment, ThreadCountDoesNotChangeVerdicts) {
  auto cfg = small_config();
  const auto one = run_experiment(cfg);
  cfg.threads = 3;
  const auto three = run_experiment(cfg);
  ASSERT_EQ(one.rows.size(), three.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    EXPECT_EQ(one.rows[i].verdict, three.rows[i].verdict);
    EXPECT_EQ(one.rows[i].detection_t, three.rows[i].detection_t);
    EXPECT_EQ(one.rows[i].reconstruction_mse, three.rows[i].reconstruction_mse);
  }
}

TEST(Aggregate, HandCountedRates) {
  const std::vector<RunResult> rs = {
      result(Truth::honest, Verdict::attack),       result(Truth::honest, Verdict::no_attack),
      result(Truth::honest, Verdict::undecided),    result(Truth::honest, Verdict::no_attack),
      result(Truth::attack, Verdict::attack, 0.25), result(Truth::attack, Verdict::attack, 0.75),
      result(Truth::attack, Verdict::no_attack),
  };
  const auto rep = aggregate(rs);
  EXPECT_DOUBLE_EQ(rep.fpr, 0.25);
  EXPECT_DOUBLE_EQ(rep.tpr, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*rep.mean_t, 0.5);
  EXPECT_EQ(rep.honest_trials, 4u);
  EXPECT_EQ(rep.attack_trials, 3u);
}

TEST(Aggregate, OverheadShare) {
  RunResult r = result(Truth::honest, Verdict::no_attack);
  r.wall_total_ms = 12.0;
  r.wall_baseline_ms = 10.0;
  const std::vector<RunResult> rs = {r};
  EXPECT_DOUBLE_EQ(*aggregate(rs).mean_overhead_share, 0.2);
}

TEST(Report, CsvAndJsonRoundTrip) {
  std::vector<RunResult> rs = {result(Truth::honest, Verdict::no_attack),
                               result(Truth::attack, Verdict::attack, 0.1 + 0.2)};
  rs[0].trial = 0;
  rs[1].trial = 1;
  rs[1].wall_total_ms = 1.0 / 3.0;
  rs[1].reconstruction_mse = 0.123456789012345678;
  const auto rep = aggregate(rs);
  const auto csv = parse_csv(to_csv(rep));
  EXPECT_EQ(csv.rows, rep.rows);
  const auto js = parse_json(to_json(rep).dump());
  EXPECT_EQ(js, rep);
}

TEST(Report, EmptyReportIsHeaderOnly) {
  const AggregateReport rep;
  const auto csv = to_csv(rep);
  EXPECT_EQ(csv, std::string(kCsvHeader) + "\n");
  EXPECT_TRUE(parse_csv(csv).rows.empty());
}

TEST(Report, MissingValuesAreEmptyCellsAndNulls) {
  const std::vector<RunResult> rs = {result(Truth::honest, Verdict::no_attack)};
  const auto rep = aggregate(rs);
  const auto csv = to_csv(rep);
  EXPECT_NE(csv.find(",no-attack,,"), std::string::npos) << csv;
  const auto js = to_json(rep);
  EXPECT_TRUE(js.at("rows").at(0).at("detection_t").is_null());
  EXPECT_TRUE(js.at("aggregate").at("mean_t").is_null());
}

TEST(Report, FileRoundTripAndBadPath) {
  const std::vector<RunResult> rs = {result(Truth::attack, Verdict::attack, 0.5)};
  const auto rep = aggregate(rs);
  const auto path = temp_path("report.json").string();
  emit_report(rep, ReportFormat::json, path);
  EXPECT_EQ(load_report(path, ReportFormat::json), rep);
  std::filesystem::remove(path);
  EXPECT_THROW(emit_report(rep, ReportFormat::csv, "/nonexistent/dir/out.csv"), IoError);
}
