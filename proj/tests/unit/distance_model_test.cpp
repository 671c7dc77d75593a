#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fdi/distance_model.hpp"
#include "oracle.hpp"

namespace fdi::distance {
namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kInvalidArgument;
}

DistanceConfig norm(double p) {
  DistanceConfig cfg;
  cfg.norm_p = p;
  return cfg;
}

// Exact mean and variance of lp(A, B) where A and B keep each coordinate of
// x and y independently with probability p.
std::pair<double, double> independent_pair_moments(const oracle::Dense& x, const oracle::Dense& y,
                                                   double p, double norm_p) {
  std::vector<std::size_t> sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0) sx.push_back(i);
    if (y[i] != 0) sy.push_back(i);
  }
  auto build = [&](const oracle::Dense& src, const std::vector<std::size_t>& support, std::uint32_t mask,
                   double* prob) {
    oracle::Dense out(src.size(), 0.0);
    *prob = 1;
    for (std::size_t j = 0; j < support.size(); ++j) {
      const bool keep = mask >> j & 1U;
      if (keep) out[support[j]] = src[support[j]];
      *prob *= keep ? p : 1 - p;
    }
    return out;
  };
  double m1 = 0, m2 = 0;
  for (std::uint32_t a = 0; a < (1U << sx.size()); ++a) {
    double pa;
    const auto va = build(x, sx, a, &pa);
    for (std::uint32_t b = 0; b < (1U << sy.size()); ++b) {
      double pb;
      const auto vb = build(y, sy, b, &pb);
      const double d = oracle::lp(va, vb, norm_p);
      m1 += pa * pb * d;
      m2 += pa * pb * d * d;
    }
  }
  return {m1, m2 - m1 * m1};
}

TEST(LpDistance, Examples) {
  const SparseProfile a("a", {{0, 3.0}});
  const SparseProfile b("b", {{1, 4.0}});
  EXPECT_DOUBLE_EQ(distance(a, b, norm(2)), 5.0);
  EXPECT_DOUBLE_EQ(distance(a, b, norm(1)), 7.0);
  EXPECT_NEAR(distance(a, b, norm(3)), std::cbrt(91.0), 1e-12);
  EXPECT_EQ(distance(a, a, norm(2)), 0.0);
}

TEST(LpDistance, BadNorm) {
  const SparseProfile a("a", {});
  EXPECT_EQ(code_of([&] { distance(a, a, norm(0.5)); }), Errc::kBadNorm);
  EXPECT_EQ(code_of([&] { distance(a, a, norm(std::numeric_limits<double>::infinity())); }), Errc::kBadNorm);
}

TEST(LpDistance, MatchesDenseOracleUnderTransforms) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> w(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = oracle::random_dataset(rng, 3, 12, false);
    auto weights = std::make_shared<std::vector<double>>();
    for (int i = 0; i < 12; ++i) weights->push_back(w(rng));
    for (const Combiner c : {Combiner::kProduct, Combiner::kRaw, Combiner::kLogProduct}) {
      for (const double p : {1.0, 2.0, 3.5}) {
        DistanceConfig cfg = norm(p);
        cfg.transform.combiner = c;
        cfg.transform.weights = weights;
        const auto& x = d.profiles()[0];
        const auto& y = d.profiles()[1];
        const auto& z = d.profiles()[2];
        const double expected = oracle::lp(oracle::combined(x, 12, cfg.transform),
                                           oracle::combined(y, 12, cfg.transform), p);
        const double dxy = distance(x, y, cfg);
        EXPECT_NEAR(dxy, expected, 1e-9 * (1 + expected));
        EXPECT_DOUBLE_EQ(dxy, distance(y, x, cfg));
        EXPECT_LE(distance(x, z, cfg), dxy + distance(y, z, cfg) + 1e-9);
      }
    }
  }
}

TEST(EstimatePairStats, Endpoints) {
  const SparseProfile x("x", {{0, 1.0}, {2, 2.0}});
  const SparseProfile y("y", {{1, 2.0}, {2, 1.0}});
  const auto full = estimate_pair_stats(x, y, 1.0, 30, 1, norm(2));
  EXPECT_NEAR(full.mu, distance(x, y, norm(2)), 1e-12);
  EXPECT_NEAR(full.zeta, 2 * std::sqrt(5.0), 1e-12);
  EXPECT_EQ(full.samples, 30u);
  EXPECT_EQ(estimate_pair_stats(x, y, 0.0, 30, 1, norm(2)).mu, 0.0);
  EXPECT_THROW(estimate_pair_stats(x, y, 0.5, 29, 1, norm(2)), Error);
  EXPECT_EQ(code_of([&] { estimate_pair_stats(x, y, 1.5, 30, 1, norm(2)); }), Errc::kBadP);
}

TEST(EstimatePairStats, MeanMatchesEnumerationOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset d = oracle::random_dataset(rng, 2, 10, false, 0.5);
    const auto& x = d.profiles()[0];
    const auto& y = d.profiles()[1];
    for (const double p : {0.3, 0.7}) {
      const std::size_t trials = 4000;
      const auto [mean, var] = independent_pair_moments(oracle::dense(x, 10), oracle::dense(y, 10), p, 2);
      const auto stats = estimate_pair_stats(x, y, p, trials, 100 + trial, norm(2));
      EXPECT_LE(std::abs(stats.mu - mean), 4 * std::sqrt(var / trials) + 1e-12);
      // Sub-vectors never exceed the triangle-inequality bound.
      EXPECT_LE(stats.mu, stats.zeta + 1e-12);
    }
  }
}

TEST(PairwiseCondition, EqualMeans) {
  EXPECT_EQ(code_of([] { pairwise_condition({1, 1, 30}, {1, 1, 30}, 10); }), Errc::kEqualMeans);
}

TEST(PairwiseCondition, BranchBoundaries) {
  const double n = std::numbers::e;  // 2(2 ln N + 1) = 6
  // Branch 1 with unit zetas: min{1, 1/2} >= 6 / gap^2 iff gap^2 >= 12.
  EXPECT_TRUE(pairwise_condition({0, 1, 30}, {3.5, 1, 30}, n));
  EXPECT_FALSE(pairwise_condition({0, 1, 30}, {3.4, 1, 30}, n));
  // The factor 2 lands on the farther pair's zeta.
  EXPECT_TRUE(pairwise_condition({0, 1, 30}, {2.5, 0.5, 30}, n));   // lhs 1, gap^2 6.25
  EXPECT_FALSE(pairwise_condition({2.5, 1, 30}, {0, 0.5, 30}, n));  // lhs 1/2
  EXPECT_TRUE(pairwise_condition({2.5, 0.5, 30}, {0, 1, 30}, n));   // mirror of the first
}

TEST(PairwiseCondition, TighterZetaNeverHurts) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 5);
  for (int i = 0; i < 500; ++i) {
    PairStats a{u(rng), u(rng), 30}, b{u(rng), u(rng), 30};
    if (a.mu == b.mu) continue;
    const bool before = pairwise_condition(a, b, 100);
    a.zeta *= 0.5;
    b.zeta *= 0.5;
    EXPECT_TRUE(!before || pairwise_condition(a, b, 100));
  }
}

TEST(TopKInfer, MatchesFullSortOracle) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = oracle::random_dataset(rng, 7, 9, false);
    const Dataset t = oracle::random_dataset(rng, 1, 9, false);
    const auto& v = t.profiles()[0];
    for (const double p : {1.0, 2.0}) {
      std::vector<std::pair<double, std::string>> scored;
      for (const auto& x : d.profiles()) {
        scored.emplace_back(oracle::lp(oracle::dense(v, 9), oracle::dense(x, 9), p), x.user());
      }
      for (std::size_t k = 1; k <= 7; ++k) {
        const auto expected = oracle::topk(scored, k, true);
        const auto got = topk_infer_distance(v, d, k, norm(p));
        ASSERT_EQ(got.size(), k);
        for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(got.ranked[i].user, expected[i]);
      }
    }
  }
}

TEST(TopKInfer, UniformWeightScalingKeepsRanking) {
  std::mt19937_64 rng(45);
  const Dataset d = oracle::random_dataset(rng, 20, 15, false);
  const Dataset t = oracle::random_dataset(rng, 1, 15, false);
  DistanceConfig scaled = norm(2);
  scaled.transform.weights = std::make_shared<const std::vector<double>>(15, 7.5);
  for (std::size_t k : {1u, 5u, 20u}) {
    const auto a = topk_infer_distance(t.profiles()[0], d, k, norm(2));
    const auto b = topk_infer_distance(t.profiles()[0], d, k, scaled);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(a.ranked[i].user, b.ranked[i].user);
  }
}

Dataset users(std::initializer_list<const char*> ids) {
  auto space = std::make_shared<const FeatureSpace>(std::vector<std::string>{"f"});
  std::vector<SparseProfile> profiles;
  for (const char* id : ids) profiles.emplace_back(id, std::vector<Entry>{{0, 1.0}});
  return Dataset(space, std::move(profiles), Role::kTraining);
}

TEST(TopKCondition, HandBuiltStats) {
  const Dataset d = users({"a", "b", "c", "d"});
  const StatsMap stats{{"a", {1, 0.01, 30}}, {"b", {5, 0.02, 30}}, {"c", {9, 0.01, 30}}, {"d", {2, 0.05, 30}}};
  const double n = std::numbers::e;
  const auto k1 = topk_condition("a", d, 1, stats, n);
  EXPECT_EQ(k1.mu_min, 1.0);
  EXPECT_DOUBLE_EQ(k1.zeta_max, 0.05);
  EXPECT_NEAR(k1.threshold, 8 + 4 * std::log(6.0), 1e-12);
  // K = 2 drops d, the competitor with the closest mean.
  const auto k2 = topk_condition("a", d, 2, stats, n);
  EXPECT_EQ(k2.mu_min, 16.0);
  EXPECT_DOUBLE_EQ(k2.zeta_max, 0.02);
  EXPECT_NEAR(k2.threshold, (8 + 4 * std::log(4.0)) / 16, 1e-12);
  EXPECT_TRUE(k2.pass);
  EXPECT_DOUBLE_EQ(k2.lhs, 1 / (0.02 * 0.02));
}

TEST(TopKCondition, VacuousAtKEqualsN) {
  const Dataset d = users({"a", "b"});
  const StatsMap stats{{"a", {1, 100, 30}}, {"b", {1, 100, 30}}};
  const auto r = topk_condition("a", d, 2, stats, 1000);
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.applicable);
}

TEST(TopKCondition, EqualMeansNotApplicable) {
  const Dataset d = users({"a", "b", "c"});
  const StatsMap stats{{"a", {1, 0.1, 30}}, {"b", {1, 0.1, 30}}, {"c", {4, 0.1, 30}}};
  const auto r = topk_condition("a", d, 1, stats, 10);
  EXPECT_FALSE(r.applicable);
  EXPECT_EQ(r.equal_mean_users, std::vector<std::string>{"b"});
  EXPECT_TRUE(topk_condition("a", d, 2, stats, 10).applicable);
}

TEST(TopKCondition, MissingStatsRejected) {
  const Dataset d = users({"a", "b"});
  EXPECT_THROW(topk_condition("a", d, 1, StatsMap{{"a", {1, 1, 30}}}, 10), Error);
  EXPECT_THROW(topk_condition("z", d, 1, StatsMap{}, 10), Error);
}

TEST(TopKCondition, ShrinkingZetaIsMonotone) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 10);
  const Dataset d = users({"a", "b", "c", "d", "e"});
  for (int trial = 0; trial < 200; ++trial) {
    StatsMap stats;
    for (const char* id : {"a", "b", "c", "d", "e"}) stats[id] = {u(rng), 0.01 + u(rng) / 50, 30};
    for (std::size_t k = 1; k <= 5; ++k) {
      const bool before = topk_condition("a", d, k, stats, 50).pass;
      StatsMap tighter = stats;
      for (auto& [id, s] : tighter) s.zeta /= 3;
      EXPECT_TRUE(!before || topk_condition("a", d, k, tighter, 50).pass);
    }
  }
}

TEST(DeltaKCondition, CountsAndLogTerm) {
  const Dataset d = users({"a", "b", "c", "d"});
  TargetStats all;
  all["a"] = {{"a", {0, 0.001, 30}}, {"b", {10, 0.001, 30}}, {"c", {10, 0.001, 30}}, {"d", {10, 0.001, 30}}};
  all["b"] = {{"a", {3, 0.001, 30}}, {"b", {3, 0.001, 30}}, {"c", {9, 0.001, 30}}, {"d", {9, 0.001, 30}}};
  all["c"] = {{"a", {9, 0.001, 30}}, {"b", {9, 0.001, 30}}, {"c", {0, 0.001, 30}}, {"d", {9, 0.001, 30}}};
  all["d"] = {{"a", {9, 0.001, 30}}, {"b", {9, 0.001, 30}}, {"c", {9, 0.001, 30}}, {"d", {0, 0.001, 30}}};
  const auto r = delta_k_condition(d, d.with_role(Role::kTarget), 1, 0.75, all, 100);
  EXPECT_EQ(r.required, 3u);
  EXPECT_EQ(r.passing, 3u);
  EXPECT_EQ(r.not_assessable, 1u);  // b ties with its true match
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.rows[0].threshold, (8 * std::log(100.0) + 4 * std::log(2.0 * 3 * 3)) / 100, 1e-12);

  const auto zero = delta_k_condition(d, d.with_role(Role::kTarget), 1, 0.0, all, 100);
  EXPECT_TRUE(zero.holds);
  EXPECT_EQ(zero.required, 0u);
}

TEST(DeltaKCondition, SoundZetaIsUnsatisfiableOnRealPairs) {
  // With zeta bounding every achievable distance, mu_min <= zeta_max^2 and
  // the threshold exceeds 1/zeta_max^2 once N >= 2.
  std::mt19937_64 rng(21);
  const Dataset raw = oracle::random_dataset(rng, 6, 20, false);
  std::vector<std::string> ids;
  for (const auto& p : raw.profiles()) ids.push_back(p.user());
  const auto stats = estimate_target_stats(raw, ids, 0.8, 30, 5, norm(2));
  const auto r = delta_k_condition(raw, raw.with_role(Role::kTarget), 1, 1.0, stats, 20);
  EXPECT_EQ(r.passing, 0u);
}

TEST(EstimateTargetStats, IndependentOfJobs) {
  std::mt19937_64 rng(22);
  const Dataset raw = oracle::random_dataset(rng, 8, 10, false);
  const std::vector<std::string> ids{"user0", "user3", "user7"};
  const auto a = estimate_target_stats(raw, ids, 0.6, 40, 9, norm(2), 1);
  const auto b = estimate_target_stats(raw, ids, 0.6, 40, 9, norm(2), 3);
  for (const auto& id : ids) {
    for (const auto& [x, s] : a.at(id)) EXPECT_EQ(s.mu, b.at(id).at(x).mu);
  }
  EXPECT_THROW(estimate_target_stats(raw, {"nobody"}, 0.6, 40, 9, norm(2)), Error);
}

}  // namespace
}  // namespace fdi::distance
