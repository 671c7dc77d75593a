#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fdi/harness.hpp"
#include "fdi/ingest.hpp"
#include "oracle.hpp"

namespace fdi::harness {
namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kInvalidArgument;
}

Dataset synth(std::size_t n, std::size_t dim, double density, std::uint64_t seed) {
  ingest::SynthSpec spec;
  spec.n_users = n;
  spec.n_features = dim;
  spec.p_feature = density;
  spec.gamma_separation = 1;  // distinct profiles
  spec.seed = seed;
  return ingest::synth_generate(spec);
}

ModelConfig model_of(ModelKind kind) {
  ModelConfig m;
  m.kind = kind;
  return m;
}

constexpr ModelKind kAllModels[] = {ModelKind::kBinary, ModelKind::kDistance, ModelKind::kDistribution};

TEST(RunCell, FullSamplingIdentifiesEveryone) {
  const Dataset raw = synth(25, 60, 0.3, 1);
  for (const ModelKind kind : kAllModels) {
    const CellResult r = run_cell(raw, 1.0, 1, model_of(kind), 5);
    ASSERT_TRUE(r.delta.has_value());
    EXPECT_EQ(*r.delta, 1.0) << to_string(kind);
    EXPECT_EQ(r.m_tilde, 25u);
  }
}

TEST(RunCell, KEqualsNContainsEveryone) {
  const Dataset raw = synth(15, 40, 0.2, 2);
  for (const ModelKind kind : kAllModels) {
    const CellResult r = run_cell(raw, 0.6, 15, model_of(kind), 9);
    if (r.delta) {
      EXPECT_EQ(*r.delta, 1.0) << to_string(kind);
    }
  }
}

TEST(RunCell, BinaryAtHalfAgreementIsRejected) {
  // p^2 + (1-p)^2 = 1/2 only at p = 1/2.
  EXPECT_EQ(binary_agreement(0.5), 0.5);
  const Dataset raw = synth(5, 20, 0.5, 3);
  EXPECT_EQ(code_of([&] { run_cell(raw, 0.5, 1, model_of(ModelKind::kBinary), 1); }), Errc::kDegenerateP);
}

TEST(RunCell, RankPathAgreesWithLiteralTopK) {
  const Dataset raw = synth(30, 50, 0.2, 4);
  for (const ModelKind kind : kAllModels) {
    ModelConfig model = model_of(kind);
    model.idf = kind != ModelKind::kBinary;
    for (const double p : {0.4, 0.7}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Dataset u = sample_replica(raw, p, training_seed(seed), Role::kTraining);
        const Dataset v = sample_replica(raw, p, target_seed(seed), Role::kTarget);
        const auto ranks = true_match_ranks(u, v, p, model, 2);
        for (const std::size_t k : {1u, 3u, 10u}) {
          const CellResult literal = run_cell(raw, p, k, model, seed);
          const CellResult fast = delta_from_ranks(ranks, k);
          EXPECT_EQ(literal.hits, fast.hits) << to_string(kind) << " p=" << p << " k=" << k;
          EXPECT_EQ(literal.m_tilde, fast.m_tilde);
        }
      }
    }
  }
}

TEST(RunCell, JobsDoNotChangeResults) {
  const Dataset raw = synth(20, 40, 0.3, 5);
  for (const ModelKind kind : kAllModels) {
    const auto a = run_cell(raw, 0.7, 2, model_of(kind), 3, 1);
    const auto b = run_cell(raw, 0.7, 2, model_of(kind), 3, 3);
    EXPECT_EQ(a.hits, b.hits);
  }
}

TEST(DeltaFromRanks, CountsAndEmpty) {
  const CellResult r = delta_from_ranks({0, 2, kUnranked, 1}, 2);
  EXPECT_EQ(r.hits, 2u);
  EXPECT_EQ(*r.delta, 0.5);
  EXPECT_FALSE(delta_from_ranks({}, 1).delta.has_value());
}

TEST(ResolveK, FractionsAndIntegers) {
  EXPECT_EQ(resolve_k(0.1, 50), 5u);
  EXPECT_EQ(resolve_k(0.001, 50), 1u);
  EXPECT_EQ(resolve_k(7, 50), 7u);
  EXPECT_EQ(code_of([] { resolve_k(2.5, 50); }), Errc::kBadK);
  EXPECT_EQ(code_of([] { resolve_k(51, 50); }), Errc::kBadK);
  EXPECT_EQ(code_of([] { resolve_k(0, 50); }), Errc::kBadK);
}

SweepConfig small_sweep(ModelKind kind) {
  SweepConfig cfg;
  cfg.p_grid = {0.5, 0.7, 0.9};
  cfg.k_grid = {1, 2, 5, 0.5, 20};
  cfg.model = model_of(kind);
  cfg.reps = 4;
  cfg.seed = 77;
  return cfg;
}

TEST(Sweep, ExactlyMonotoneInK) {
  const Dataset raw = synth(20, 40, 0.25, 6);
  for (const ModelKind kind : kAllModels) {
    SweepConfig cfg = small_sweep(kind);
    cfg.k_grid = {1, 2, 3, 5, 8, 13, 20};
    const SweepResult r = sweep(raw, cfg);
    for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi) {
      for (std::size_t ki = 1; ki < cfg.k_grid.size(); ++ki) {
        const auto& prev = r.at(pi, ki - 1, cfg.k_grid.size());
        const auto& cur = r.at(pi, ki, cfg.k_grid.size());
        if (!cur.error.empty()) continue;
        EXPECT_GE(cur.delta_mean, prev.delta_mean);
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
          if (cur.per_rep[rep]) {
            EXPECT_GE(*cur.per_rep[rep], *prev.per_rep[rep]);
          }
        }
      }
      const auto& last = r.at(pi, cfg.k_grid.size() - 1, cfg.k_grid.size());
      if (last.error.empty()) {
        EXPECT_EQ(last.delta_mean, 1.0);
      }
    }
  }
}

TEST(Sweep, DeterministicAcrossJobs) {
  const Dataset raw = synth(20, 40, 0.25, 7);
  SweepConfig cfg = small_sweep(ModelKind::kDistance);
  const SweepResult a = sweep(raw, cfg);
  cfg.jobs = 3;
  const SweepResult b = sweep(raw, cfg);
  std::ostringstream ca, cb;
  write_sweep_csv(ca, a);
  write_sweep_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(sweep_json(cfg, a).dump(), sweep_json(cfg, b).dump());
}

TEST(Sweep, CellsMatchRunCell) {
  const Dataset raw = synth(15, 30, 0.3, 8);
  const SweepConfig cfg = small_sweep(ModelKind::kDistribution);
  const SweepResult r = sweep(raw, cfg);
  for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi) {
    for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki) {
      const auto& cell = r.at(pi, ki, cfg.k_grid.size());
      if (!cell.error.empty()) continue;
      for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        const CellResult direct = run_cell(raw, cfg.p_grid[pi], cell.k, cfg.model, rep_seed(cfg.seed, pi, rep));
        EXPECT_EQ(direct.delta, cell.per_rep[rep]);
      }
    }
  }
}

TEST(Sweep, CsvLayoutAndPerCellErrors) {
  const Dataset raw = synth(10, 30, 0.3, 9);
  const SweepConfig cfg = small_sweep(ModelKind::kBinary);
  const SweepResult r = sweep(raw, cfg);
  ASSERT_EQ(r.cells.size(), 15u);
  // Binary at p = 0.5 cannot run; K = 20 exceeds n = 10.
  EXPECT_NE(r.at(0, 0, 5).error.find("DegenerateP"), std::string::npos);
  EXPECT_NE(r.at(1, 4, 5).error.find("BadK"), std::string::npos);
  EXPECT_TRUE(r.at(1, 0, 5).error.empty());
  EXPECT_EQ(r.at(1, 3, 5).k, 5u);
  std::ostringstream csv;
  write_sweep_csv(csv, r);
  std::istringstream lines(csv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "p,K,delta_mean,delta_stddev,m_tilde_mean,reps_used");
  EXPECT_EQ(first.substr(0, 4), "0.5,");
  EXPECT_NE(first.find("nan"), std::string::npos);
}

TEST(Sweep, ConfigValidation) {
  const Dataset raw = synth(5, 10, 0.5, 10);
  SweepConfig cfg = small_sweep(ModelKind::kDistance);
  cfg.p_grid = {1.5};
  EXPECT_EQ(code_of([&] { sweep(raw, cfg); }), Errc::kBadP);
  cfg = small_sweep(ModelKind::kDistance);
  cfg.reps = 0;
  EXPECT_THROW(sweep(raw, cfg), Error);
  cfg = small_sweep(ModelKind::kDistance);
  cfg.model.distance.norm_p = 0.5;
  EXPECT_EQ(code_of([&] { sweep(raw, cfg); }), Errc::kBadNorm);
}

TEST(Chernoff, Values) {
  EXPECT_EQ(chernoff_upper(10, 0, 1, 5, 0, TailSide::kUpper), 1.0);
  EXPECT_EQ(chernoff_upper(10, 0, 1, 5, 0, TailSide::kLower), 1.0);
  // 2 xi^2 mu^2 / (n (b-a)^2) = ln 2.
  const double n = 10, mu = 5;
  const double xi = std::sqrt(std::log(2.0) * n / (2 * mu * mu));
  EXPECT_NEAR(chernoff_upper(n, 0, 1, mu, xi, TailSide::kUpper), 0.5, 1e-15);
  EXPECT_NEAR(chernoff_upper(n, 0, 1, mu, xi, TailSide::kLower), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(code_of([] { chernoff_upper(10, 1, 1, 5, 0.1, TailSide::kUpper); }), Errc::kDegenerateBounds);
  EXPECT_EQ(code_of([] { chernoff_upper(10, 2, 1, 5, 0.1, TailSide::kUpper); }), Errc::kDegenerateBounds);
  double prev = 1.0;
  for (double x = 0.05; x < 1; x += 0.05) {
    const double b = chernoff_upper(n, 0, 1, mu, x, TailSide::kUpper);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(StratifiedSubsample, KeepsBucketsAndIsDeterministic) {
  std::mt19937_64 rng(11);
  const Dataset d = oracle::random_dataset(rng, 400, 64, true, 0.1);
  EXPECT_TRUE(equivalent(stratified_user_subsample(d, 1.0, 1), d));
  const Dataset half = stratified_user_subsample(d, 0.5, 3);
  EXPECT_TRUE(equivalent(half, stratified_user_subsample(d, 0.5, 3)));
  std::map<int, int> full_buckets, half_buckets;
  for (const auto& p : d.profiles()) ++full_buckets[static_cast<int>(std::log2(p.size() + 1.0))];
  for (const auto& p : half.profiles()) ++half_buckets[static_cast<int>(std::log2(p.size() + 1.0))];
  for (const auto& [bucket, count] : full_buckets) {
    EXPECT_EQ(half_buckets[bucket], static_cast<int>(std::llround(count * 0.5)));
  }
  std::set<std::string> ids;
  for (const auto& p : half.profiles()) ids.insert(p.user());
  EXPECT_EQ(ids.size(), half.size());
  EXPECT_THROW(stratified_user_subsample(d, 0.0, 1), Error);
}

}  // namespace
}  // namespace fdi::harness
