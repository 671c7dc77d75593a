#ifndef FDI_DISTANCE_MODEL_HPP_
#define FDI_DISTANCE_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/parallel.hpp"
#include "fdi/report.hpp"
#include "fdi/rng.hpp"
#include "fdi/sampling.hpp"
#include "fdi/topk.hpp"
#include "fdi/transform.hpp"

namespace fdi::distance {

struct DistanceConfig {
  FeatureTransform transform;
  double norm_p = 2.0;

  void validate() const {
    if (!(norm_p >= 1.0) || std::isinf(norm_p)) fail(Errc::kBadNorm, "norm exponent must be a finite real >= 1");
  }
};

// l_p distance between two already-combined sparse vectors. Absent
// coordinates are 0.
inline double lp_distance(const SparseProfile& gx, const SparseProfile& gy, double norm_p) {
  auto a = gx.entries();
  auto b = gy.entries();
  double sum = 0.0;
  auto term = [norm_p](double d) {
    d = std::abs(d);
    if (norm_p == 1.0) return d;
    if (norm_p == 2.0) return d * d;
    return std::pow(d, norm_p);
  };
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].index < b[j].index)) {
      sum += term(a[i++].weight);
    } else if (i == a.size() || b[j].index < a[i].index) {
      sum += term(b[j++].weight);
    } else {
      sum += term(a[i++].weight - b[j++].weight);
    }
  }
  if (norm_p == 1.0) return sum;
  if (norm_p == 2.0) return std::sqrt(sum);
  return std::pow(sum, 1.0 / norm_p);
}

// D_{x,y} = (sum_i |g(f_x^i, w^i) - g(f_y^i, w^i)|^p)^(1/p).
inline double distance(const SparseProfile& x, const SparseProfile& y, const DistanceConfig& cfg) {
  cfg.validate();
  return lp_distance(combine(x, cfg.transform), combine(y, cfg.transform), cfg.norm_p);
}

// Estimated expected distance and a sound upper bound for one pair.
struct PairStats {
  double mu = 0.0;
  double zeta = 0.0;
  std::size_t samples = 0;
};

// mu: mean distance between independent Bernoulli(p) replicas of x_raw and
// y_raw over `trials` draws. zeta: ||g(x)|| + ||g(y)||, which bounds the
// distance of any pair of sub-vectors by the triangle inequality.
inline PairStats estimate_pair_stats(const SparseProfile& x_raw, const SparseProfile& y_raw,
                                     double p, std::size_t trials, std::uint64_t seed,
                                     const DistanceConfig& cfg) {
  cfg.validate();
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::kBadP, "sampling probability must lie in [0, 1]");
  if (trials < 30) fail(Errc::kInvalidArgument, "at least 30 trials are required");
  const SparseProfile gx = combine(x_raw, cfg.transform);
  const SparseProfile gy = combine(y_raw, cfg.transform);
  const SparseProfile empty;
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const SparseProfile sx = sample_profile(gx, p, rng);
    const SparseProfile sy = sample_profile(gy, p, rng);
    total += lp_distance(sx, sy, cfg.norm_p);
  }
  PairStats stats;
  stats.mu = total / static_cast<double>(trials);
  stats.zeta = lp_distance(gx, empty, cfg.norm_p) + lp_distance(empty, gy, cfg.norm_p);
  stats.samples = trials;
  return stats;
}

// Pairwise condition. Branch (1) when mu_vu < mu_vw:
//   min{1/zeta_vu^2, 1/(2 zeta_vw^2)} >= 2(2 ln N + 1) / (mu_vw - mu_vu)^2,
// branch (2) swaps which zeta carries the factor 2.
inline bool pairwise_condition(const PairStats& vu, const PairStats& vw, double dimension) {
  if (vu.mu == vw.mu) fail(Errc::kEqualMeans, "mu_vu == mu_vw; the condition does not apply");
  const double gap = vw.mu - vu.mu;
  const double rhs = 2.0 * (2.0 * std::log(dimension) + 1.0) / (gap * gap);
  const double zu2 = vu.zeta * vu.zeta;
  const double zw2 = vw.zeta * vw.zeta;
  const double lhs = gap > 0 ? std::min(1.0 / zu2, 1.0 / (2.0 * zw2))
                             : std::min(1.0 / (2.0 * zu2), 1.0 / zw2);
  return lhs >= rhs;
}

// Training side of distance inference: holds the combined training vectors.
class DistanceScorer {
 public:
  DistanceScorer(const Dataset& training, DistanceConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.transform.is_identity()) {
      combined_ = std::shared_ptr<const Dataset>(std::shared_ptr<const Dataset>(), &training);
    } else {
      combined_ = std::make_shared<const Dataset>(combine(training, cfg_.transform));
    }
  }

  const Dataset& combined_training() const noexcept { return *combined_; }

  std::vector<double> scores(const SparseProfile& v) const {
    const SparseProfile gv = combine(v, cfg_.transform);
    std::vector<double> out;
    out.reserve(combined_->size());
    for (const auto& x : combined_->profiles()) out.push_back(lp_distance(gv, x, cfg_.norm_p));
    return out;
  }

 private:
  DistanceConfig cfg_;
  std::shared_ptr<const Dataset> combined_;
};

// The K training users closest to v.
inline CandidateSet topk_infer_distance(const SparseProfile& v, const Dataset& training,
                                        std::size_t k, const DistanceConfig& cfg) {
  require_k(k, training.size());
  const DistanceScorer scorer(training, cfg);
  return select_top_k(training.profiles(), scorer.scores(v), k, Order::kAscending);
}

using StatsMap = std::map<std::string, PairStats, std::less<>>;     // training user -> stats(v, x)
using TargetStats = std::map<std::string, StatsMap, std::less<>>;  // target user -> StatsMap

struct TopKVerdict {
  bool applicable = true;
  bool pass = false;
  double mu_min = 0.0;     // min (mu_vu - mu_vx)^2 over K̄
  double zeta_max = 0.0;   // max zeta over {u} ∪ K̄
  double threshold = 0.0;  // (8 ln N + 4 ln(2 c)) / mu_min
  double lhs = 0.0;        // 1 / zeta_max^2
  std::vector<std::string> equal_mean_users;
};

// Shared body of the Top-K and (delta, K) checks. `log_count` is the count
// c inside 4 ln(2c): theta*n for a single user, floor(delta m)*theta*n for
// the whole target set. K̄ drops the K-1 competitors whose means sit
// closest to mu_vu, which maximizes mu_min.
inline TopKVerdict distance_certificate(std::string_view true_match, const Dataset& training,
                                          std::size_t k, const StatsMap& stats, double dimension,
                                          double log_count) {
  require_k(k, training.size());
  auto find_stats = [&](std::string_view user) -> const PairStats& {
    auto it = stats.find(user);
    if (it == stats.end()) {
      fail(Errc::kInvalidArgument, "missing pair stats for training user '" + std::string(user) + "'");
    }
    return it->second;
  };
  if (training.find(true_match) == nullptr) {
    fail(Errc::kInvalidArgument, "true match '" + std::string(true_match) + "' not in U");
  }
  const PairStats& su = find_stats(true_match);

  struct Competitor {
    const std::string* user;
    double gap2;
    double zeta;
  };
  std::vector<Competitor> competitors;
  competitors.reserve(training.size());
  for (const auto& x : training.profiles()) {
    if (x.user() == true_match) continue;
    const PairStats& sx = find_stats(x.user());
    const double gap = su.mu - sx.mu;
    competitors.push_back({&x.user(), gap * gap, sx.zeta});
  }
  std::sort(competitors.begin(), competitors.end(), [](const Competitor& a, const Competitor& b) {
    return a.gap2 != b.gap2 ? a.gap2 < b.gap2 : *a.user < *b.user;
  });
  competitors.erase(competitors.begin(), competitors.begin() + static_cast<std::ptrdiff_t>(k - 1));

  TopKVerdict verdict;
  if (competitors.empty() || log_count == 0.0) {
    verdict.pass = true;
    verdict.mu_min = kInfinity;
    verdict.zeta_max = su.zeta;
    verdict.threshold = -kInfinity;
    verdict.lhs = 1.0 / (su.zeta * su.zeta);
    return verdict;
  }
  verdict.mu_min = kInfinity;
  verdict.zeta_max = su.zeta;
  for (const auto& c : competitors) {
    if (c.gap2 == 0.0) verdict.equal_mean_users.push_back(*c.user);
    verdict.mu_min = std::min(verdict.mu_min, c.gap2);
    verdict.zeta_max = std::max(verdict.zeta_max, c.zeta);
  }
  verdict.lhs = 1.0 / (verdict.zeta_max * verdict.zeta_max);
  if (!verdict.equal_mean_users.empty()) {
    verdict.applicable = false;
    verdict.pass = false;
    verdict.threshold = kInfinity;
    return verdict;
  }
  verdict.threshold = (8.0 * std::log(dimension) + 4.0 * std::log(2.0 * log_count)) / verdict.mu_min;
  verdict.pass = verdict.lhs >= verdict.threshold;
  return verdict;
}

// Top-K condition for one target user with true match `true_match`, given
// stats(v, x) for every training user x.
inline TopKVerdict topk_condition(std::string_view true_match, const Dataset& training,
                                  std::size_t k, const StatsMap& stats, double dimension) {
  require_k(k, training.size());
  return distance_certificate(true_match, training, k, stats, dimension,
                              static_cast<double>(training.size() - k));
}

// (delta, K) check: per-user certificate with the strengthened log term
// 4 ln(2 delta theta m n), then count >= floor(delta m).
inline QuantReport delta_k_condition(const Dataset& training, const Dataset& target, std::size_t k,
                                  double delta, const TargetStats& stats, double dimension) {
  if (!(delta >= 0.0 && delta <= 1.0)) fail(Errc::kInvalidArgument, "delta must lie in [0, 1]");
  require_k(k, training.size());
  const OverlapView view = overlap(training, target);
  if (view.m_tilde() == 0) fail(Errc::kEmptyOverlap, "no user appears in both datasets");

  QuantReport report;
  report.model = ModelKind::kDistance;
  report.stat_names = {"mu_min", "zeta_max"};
  report.k = k;
  report.delta = delta;
  report.m_tilde = view.m_tilde();
  report.required = floor_delta_m(delta, view.m_tilde());
  const double log_count =
      static_cast<double>(report.required) * static_cast<double>(training.size() - k);

  for (const auto& user : view.users) {
    auto it = stats.find(user);
    if (it == stats.end()) fail(Errc::kInvalidArgument, "missing pair stats for target user '" + user + "'");
    const TopKVerdict v = distance_certificate(user, training, k, it->second, dimension, log_count);
    report.rows.push_back({user, {v.mu_min, v.zeta_max}, v.threshold, v.pass, v.applicable});
  }
  finalize(report);
  return report;
}

// Pair stats of every (target, training) pair, estimated from raw profiles.
// Each pair draws from its own seeded stream so results do not depend on
// the number of jobs.
inline TargetStats estimate_target_stats(const Dataset& raw, const std::vector<std::string>& targets,
                                         double p, std::size_t trials, std::uint64_t seed,
                                         const DistanceConfig& cfg, std::size_t jobs = 1) {
  std::vector<StatsMap> per_target(targets.size());
  parallel_for(targets.size(), jobs, [&](std::size_t t) {
    const SparseProfile* v = raw.find(targets[t]);
    if (v == nullptr) fail(Errc::kInvalidArgument, "target user '" + targets[t] + "' not in raw data");
    const auto vi = static_cast<std::uint64_t>(v - raw.profiles().data());
    for (std::size_t xi = 0; xi < raw.size(); ++xi) {
      const auto& x = raw.profiles()[xi];
      per_target[t].emplace(x.user(), estimate_pair_stats(*v, x, p, trials,
                                                          derive_seed(seed, {vi, xi}), cfg));
    }
  });
  TargetStats out;
  for (std::size_t t = 0; t < targets.size(); ++t) out.emplace(targets[t], std::move(per_target[t]));
  return out;
}

}  // namespace fdi::distance

#endif  // FDI_DISTANCE_MODEL_HPP_
