#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "splitguard/harness/trial.hpp"
#include "splitguard/sglc/detector.hpp"
#include "splitguard/sglc/policy.hpp"
#include "splitguard/sglc/score.hpp"
#include "support/oracles.hpp"

using namespace splitguard;
using sglc::GradSetSummary;
using sglc::ScorePoint;
using protocol::Verdict;

namespace {

GradSetSummary of(std::initializer_list<std::vector<double>> gs) {
  GradSetSummary s;
  for (const auto& g : gs) sglc::update_summary(s, nn::GradVec(g));
  return s;
}

std::vector<ScorePoint> scores(std::initializer_list<std::pair<double, int>> runs) {
  std::vector<ScorePoint> out;
  for (auto [v, n] : runs) {
    for (int i = 0; i < n; ++i) out.push_back({out.size(), 0.0, v, {}});
  }
  return out;
}

}  // namespace

TEST(Summary, FirstUpdateCopiesGradient) {
  const auto s = of({{3, 4}});
  EXPECT_EQ(s.sum_vec, (std::vector<double>{3, 4}));
  EXPECT_DOUBLE_EQ(s.mean_mag, 5.0);
  EXPECT_EQ(s.count, 1u);
}

TEST(Summary, OppositeGradientsCancelInSumOnly) {
  const auto s = of({{3, 4}, {-3, -4}});
  EXPECT_EQ(s.sum_vec, (std::vector<double>{0, 0}));
  EXPECT_DOUBLE_EQ(s.mean_mag, 5.0);
}

TEST(Summary, DimensionMismatchIsConfigError) {
  auto s = of({{1, 2}});
  EXPECT_THROW(sglc::update_summary(s, nn::GradVec(std::vector<double>{1, 2, 3})), ConfigError);
}

TEST(Summary, RunningSummaryMatchesStoreAll) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 50; ++t) {
    GradSetSummary s;
    oracle::StoreAll all;
    for (int i = 0; i < 200; ++i) {
      std::vector<double> g(7);
      for (double& v : g) v = (1 + t) * n01(rng);
      sglc::update_summary(s, nn::GradVec(g));
      all.items.push_back(g);
    }
    const auto sum = all.sum();
    for (std::size_t i = 0; i < sum.size(); ++i) {
      EXPECT_NEAR(s.sum_vec[i], sum[i], 1e-9 * std::max(1.0, std::abs(sum[i])));
    }
    EXPECT_NEAR(s.mean_mag, all.mean_norm(), 1e-9 * all.mean_norm());
  }
}

TEST(Summary, MergeEqualsSummaryOfUnion) {
  const auto a = of({{1, 0}, {0, 2}});
  const auto b = of({{3, 4}});
  const auto m = sglc::merge(a, b);
  const auto u = of({{1, 0}, {0, 2}, {3, 4}});
  EXPECT_EQ(m.sum_vec, u.sum_vec);
  EXPECT_NEAR(m.mean_mag, u.mean_mag, 1e-12);
  EXPECT_EQ(m.count, 3u);
}

TEST(Distance, Examples) {
  const auto a = of({{3, 0}});
  EXPECT_EQ(*sglc::set_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(*sglc::set_distance(a, of({{1, 0}})), 2.0);
  EXPECT_FALSE(sglc::set_distance(a, GradSetSummary{}));
}

TEST(Angle, Examples) {
  const auto x = of({{1, 0}});
  EXPECT_DOUBLE_EQ(*sglc::set_angle(x, of({{0, 1}})), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(*sglc::set_angle(x, x), 0.0);
  EXPECT_DOUBLE_EQ(*sglc::set_angle(x, of({{-1, 0}})), std::numbers::pi);
  EXPECT_FALSE(sglc::set_angle(x, of({{1, 1}, {-1, -1}})));
  EXPECT_FALSE(sglc::set_angle(x, GradSetSummary{}));
}

TEST(Angle, NearlyParallelStaysInRange) {
  const auto a = of({{1e8, 1}});
  const auto b = of({{1e8, 1 + 1e-9}});
  const auto t = sglc::set_angle(a, b);
  ASSERT_TRUE(t);
  EXPECT_GE(*t, 0.0);
  EXPECT_FALSE(std::isnan(*t));
}

TEST(SValue, AntiparallelFakeSet) {
  // F opposite to R with |F| - |R| = 1; R1 and R2 identical.
  const auto f = of({{-2, 0}});
  const auto r1 = of({{1, 0}});
  const auto r2 = of({{1, 0}});
  const auto t = sglc::score_terms(f, r1, r2, 1e-6);
  ASSERT_TRUE(t);
  EXPECT_DOUBLE_EQ(t->theta_fr, std::numbers::pi);
  EXPECT_DOUBLE_EQ(t->d_fr, 1.0);
  EXPECT_EQ(t->theta_r, 0.0);
  EXPECT_EQ(t->d_r, 0.0);
  EXPECT_NEAR(t->s, std::numbers::pi / (1 + 1e-6), 1e-12);
}

TEST(SValue, IdenticalSetsGiveZero) {
  const auto g = of({{0.3, -1.2, 2.0}});
  EXPECT_EQ(*sglc::s_value(g, g, g, 1e-6), 0.0);
}

TEST(SValue, EmptySetIsUndefined) {
  const auto g = of({{1, 0}});
  EXPECT_FALSE(sglc::s_value(g, g, GradSetSummary{}, 1e-6));
}

TEST(SgScore, Examples) {
  EXPECT_DOUBLE_EQ(sglc::sg_score(0.0, 7, 1), 0.5);
  // sigma(7 pi) = 1 - e^{-7 pi} / (1 + e^{-7 pi}), evaluated in long double.
  const long double e = std::exp(-7.0L * std::numbers::pi_v<long double>);
  EXPECT_NEAR(sglc::sg_score(std::numbers::pi, 7, 1), static_cast<double>(1.0L / (1.0L + e)), 1e-15);
  EXPECT_NEAR(1.0 - sglc::sg_score(std::numbers::pi, 7, 1), 2.8e-10, 0.05e-10);
  EXPECT_DOUBLE_EQ(sglc::sg_score(0.0, 7, 2), 0.25);
}

TEST(SgScore, BoundsHoldOverRandomSummaries) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  std::exponential_distribution<double> scale(0.3);
  std::size_t checked = 0;
  for (int t = 0; t < 10000; ++t) {
    GradSetSummary sets[3];
    std::uniform_int_distribution<int> count(1, 4);
    for (auto& s : sets) {
      const double c = scale(rng);
      for (int g = count(rng); g > 0; --g) {
        nn::GradVec v(3);
        for (double& x : v.values) x = c * n01(rng);
        sglc::update_summary(s, v);
      }
    }
    const auto s = sglc::s_value(sets[0], sets[1], sets[2], 1e-6);
    if (!s) continue;
    ++checked;
    EXPECT_GE(*s, -std::numbers::pi);
    EXPECT_LE(*s, std::numbers::pi);
    const double sg = sglc::sg_score(*s, 7, 1);
    EXPECT_GT(sg, 0.0);
    EXPECT_LT(sg, 1.0);
  }
  EXPECT_GT(checked, 9000u);
}

TEST(Params, Validation) {
  sglc::SgLcParams p;
  EXPECT_NO_THROW(p.validate());
  p.beta = 0.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.p_fake = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Policy, Fast) {
  EXPECT_EQ(sglc::policy_fast(scores({{0.95, 1}}), 0.9), Verdict::no_attack);
  EXPECT_EQ(sglc::policy_fast(scores({{0.5, 1}}), 0.9), Verdict::attack);
  EXPECT_EQ(sglc::policy_fast({}, 0.9), Verdict::undecided);
  EXPECT_EQ(sglc::policy_fast(scores({{0.5, 1}}), 0.9, 5), Verdict::undecided);
}

TEST(Policy, AvgK) {
  EXPECT_EQ(sglc::policy_avg_k(scores({{1.0, 1}, {0.7, 1}}), 2, 0.9), Verdict::attack);
  EXPECT_EQ(sglc::policy_avg_k(scores({{0.9, 2}}), 2, 0.9), Verdict::no_attack);
  EXPECT_EQ(sglc::policy_avg_k(scores({{0.1, 9}}), 10, 0.9), Verdict::undecided);
}

TEST(Policy, Voting) {
  EXPECT_EQ(sglc::policy_voting(scores({{1.0, 5}, {0.0, 5}}), 5, 0.9), Verdict::no_attack);
  EXPECT_EQ(sglc::policy_voting(scores({{0.1, 50}}), 5, 0.9), Verdict::attack);
  EXPECT_EQ(sglc::policy_voting(scores({{1.0, 50}}), 5, 0.9), Verdict::no_attack);
}

TEST(Policy, VotingIgnoresScoresThatDoNotCompleteAGroup) {
  sglc::DecisionPolicy pol({sglc::PolicyKind::voting, 10, 5, 10, 0}, 0.9);
  auto s = scores({{1.0, 50}});
  EXPECT_EQ(pol.decide(s), Verdict::no_attack);
  for (int i = 0; i < 4; ++i) {
    s.push_back({s.size(), 0.0, 0.0, {}});
    EXPECT_EQ(pol.decide(s), Verdict::no_attack);
  }
}

TEST(Policy, VotingWaitsForMinimumGroups) {
  sglc::DecisionPolicy pol({sglc::PolicyKind::voting, 10, 5, 10, 0}, 0.9);
  auto s = scores({{0.1, 45}});
  EXPECT_EQ(pol.decide(s), Verdict::undecided);
  s = scores({{0.1, 50}});
  EXPECT_EQ(pol.decide(s), Verdict::attack);
}

TEST(Policy, ParseNames) {
  EXPECT_EQ(sglc::parse_policy("fast"), sglc::PolicyKind::fast);
  EXPECT_EQ(sglc::parse_policy("avg-k"), sglc::PolicyKind::avg_k);
  EXPECT_EQ(sglc::parse_policy("voting"), sglc::PolicyKind::voting);
  EXPECT_THROW(sglc::parse_policy("median"), ConfigError);
}

TEST(Detector, WarmupBatchesLeaveNoTrace) {
  sglc::SgLcParams p;
  p.warmup = 5;
  sglc::SgLcDetector det(p, {}, 1);
  const data::Labels y = {0, 1, 2};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_FALSE(det.plan_batch(i, y, 3));
    det.observe(i, false, nn::GradVec(std::vector<double>{1, 2}));
  }
  EXPECT_TRUE(det.regular1().empty());
  EXPECT_TRUE(det.regular2().empty());
}

TEST(Detector, FakeBeforeAnyRegularGivesNoScore) {
  sglc::SgLcParams p;
  p.warmup = 0;
  sglc::SgLcDetector det(p, {}, 1);
  EXPECT_EQ(det.observe(0, true, nn::GradVec(std::vector<double>{1, 2})), Verdict::undecided);
  EXPECT_TRUE(det.scores().empty());
  EXPECT_EQ(det.fake_set().count, 1u);
}

TEST(Detector, FakeShareFollowsPf) {
  sglc::SgLcParams p;
  p.warmup = 0;
  sglc::SgLcDetector det(p, {}, 2);
  const data::Labels y(32, 1);
  std::size_t fakes = 0;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i) fakes += det.plan_batch(i, y, 4).has_value();
  const double sigma = std::sqrt(0.1 * 0.9 / n);
  EXPECT_NEAR(static_cast<double>(fakes) / n, 0.1, 3 * sigma);
}

// Fake batches must leave the client's parameters untouched.
TEST(Detector, FakeBatchesDoNotUpdateClient) {
  harness::ExperimentConfig cfg;
  cfg.data.n = 3000;
  cfg.measure_overhead = false;
  const auto ctx = harness::prepare_experiment(cfg);
  auto t = harness::build_trial(ctx, harness::Truth::honest, 3, harness::DetectorSelection::sg_lc);
  auto scfg = harness::session_config(ctx, 3);
  scfg.stop_on_attack = false;
  std::vector<nn::Network> snapshots{t.state.client.front};
  scfg.on_batch_end = [&](std::size_t, const protocol::SessionState& st) {
    snapshots.push_back(st.client.front);
  };
  protocol::Detector* dets[] = {t.sg_lc.get()};
  const auto res = protocol::run_session(t.state, ctx.splits.train, dets, scfg);
  std::size_t fakes = 0;
  for (const auto& rec : res.transcript.records) {
    const auto i = rec.batch_index;
    if (rec.is_fake) {
      ++fakes;
      EXPECT_EQ(snapshots[i + 1], snapshots[i]) << "batch " << i;
    } else {
      EXPECT_NE(snapshots[i + 1], snapshots[i]) << "batch " << i;
    }
  }
  EXPECT_GT(fakes, 0u);
}
