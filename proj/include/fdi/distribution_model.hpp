#ifndef FDI_DISTRIBUTION_MODEL_HPP_
#define FDI_DISTRIBUTION_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/report.hpp"
#include "fdi/rng.hpp"
#include "fdi/sampling.hpp"
#include "fdi/topk.hpp"
#include "fdi/transform.hpp"

// Cosine quantification: similarity, the per-feature comparison statistic
// for a (v, u, w) triple, and the threshold checkers built on it.
namespace fdi::distribution {

inline double squared_magnitude(const SparseProfile& g) {
  double s = 0.0;
  for (const Entry& e : g.entries()) s += e.weight * e.weight;
  return s;
}

inline double magnitude(const SparseProfile& g) { return std::sqrt(squared_magnitude(g)); }

inline double dot(const SparseProfile& a, const SparseProfile& b) {
  auto x = a.entries();
  auto y = b.entries();
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i].index < y[j].index) {
      ++i;
    } else if (y[j].index < x[i].index) {
      ++j;
    } else {
      s += x[i++].weight * y[j++].weight;
    }
  }
  return s;
}

// Cosine of two already-combined vectors with known squared magnitudes.
// Computed as sign(d) sqrt(d^2 / (ss_x ss_y)): a single rounded division, so
// equal ratios of exactly representable values (integer counts) give
// bit-identical scores and ties break by user id as documented. It also
// keeps cos(x, x) == 1 exactly.
inline double cosine_combined(const SparseProfile& gx, double ss_x, const SparseProfile& gy,
                              double ss_y) {
  if (ss_x == 0.0 || ss_y == 0.0) fail(Errc::kZeroVector, "cosine of a zero-magnitude vector");
  const double d = dot(gx, gy);
  return std::clamp(std::copysign(std::sqrt(d * d / (ss_x * ss_y)), d), -1.0, 1.0);
}

inline double cosine(const SparseProfile& x, const SparseProfile& y, const FeatureTransform& t = {}) {
  const SparseProfile gx = combine(x, t);
  const SparseProfile gy = combine(y, t);
  return cosine_combined(gx, squared_magnitude(gx), gy, squared_magnitude(gy));
}

struct CosineTerm {
  std::uint32_t index;
  double value;
};

// X = sum_i X_i with X_i = g_v^i (|w| g_u^i - |u| g_w^i). X > 0 exactly when
// v is closer in angle to u than to w; X / (|v||u||w|) = cos(v,u) - cos(v,w).
struct CosineTriple {
  std::vector<CosineTerm> terms;  // nonzero-support terms, ascending index
  double x_sum = 0.0;
  double l = 0.0;  // lower bound on any X_i
  double h = 0.0;  // upper bound on any X_i
  double mu = 0.0;
  std::size_t samples = 0;  // sampled draws behind mu; 0 when mu = x_sum
  double mag_v = 0.0;
  double mag_u = 0.0;
  double mag_w = 0.0;

  double h_minus_l() const noexcept { return h - l; }
};

// Estimate mu as the mean of X over independent Bernoulli(p) replicas of
// v, u, w instead of taking the observed X.
struct CosineSampling {
  double p = 1.0;
  std::size_t trials = 30;
  std::uint64_t seed = 0;
};

namespace detail {

// X and its terms for combined vectors; magnitudes passed in.
inline double triple_terms(const SparseProfile& gv, const SparseProfile& gu, double mag_u,
                           const SparseProfile& gw, double mag_w, std::vector<CosineTerm>* terms) {
  double sum = 0.0;
  for (const Entry& e : gv.entries()) {
    const double fu = gu.weight(e.index);
    const double fw = gw.weight(e.index);
    if (fu == 0.0 && fw == 0.0) continue;
    const double x = e.weight * (mag_w * fu - mag_u * fw);
    if (terms != nullptr) terms->push_back({e.index, x});
    sum += x;
  }
  return sum;
}

}  // namespace detail

// Bounds: observed min/max over the terms, widened to include 0 (every
// feature outside the supports contributes a zero term) and then multiplied
// by `slack` >= 1.
inline CosineTriple build_cosine_triple(const SparseProfile& v, const SparseProfile& u,
                                        const SparseProfile& w, const FeatureTransform& t = {},
                                        std::optional<CosineSampling> sampling = std::nullopt,
                                        double slack = 1.0) {
  if (!(slack >= 1.0) || !std::isfinite(slack)) {
    fail(Errc::kInvalidArgument, "bound slack must be a finite factor >= 1");
  }
  const SparseProfile gv = combine(v, t);
  const SparseProfile gu = combine(u, t);
  const SparseProfile gw = combine(w, t);
  CosineTriple out;
  out.mag_v = magnitude(gv);
  out.mag_u = magnitude(gu);
  out.mag_w = magnitude(gw);
  if (out.mag_u == 0.0 || out.mag_w == 0.0) fail(Errc::kZeroVector, "u and w need nonzero magnitude");

  out.x_sum = detail::triple_terms(gv, gu, out.mag_u, gw, out.mag_w, &out.terms);
  double lo = 0.0, hi = 0.0;
  for (const auto& term : out.terms) {
    lo = std::min(lo, term.value);
    hi = std::max(hi, term.value);
  }
  out.l = lo * slack;
  out.h = hi * slack;

  if (!sampling) {
    out.mu = out.x_sum;
    return out;
  }
  const CosineSampling& s = *sampling;
  if (!(s.p > 0.0 && s.p <= 1.0)) fail(Errc::kBadP, "sampling probability must lie in (0, 1]");
  if (s.trials == 0) fail(Errc::kInvalidArgument, "sampling needs at least one trial");
  Rng rng(s.seed);
  double total = 0.0;
  for (std::size_t i = 0; i < s.trials; ++i) {
    const SparseProfile sv = sample_profile(gv, s.p, rng);
    const SparseProfile su = sample_profile(gu, s.p, rng);
    const SparseProfile sw = sample_profile(gw, s.p, rng);
    const double mu_u = magnitude(su);
    const double mu_w = magnitude(sw);
    if (mu_u == 0.0 || mu_w == 0.0) continue;
    total += detail::triple_terms(sv, su, mu_u, sw, mu_w, nullptr);
    ++out.samples;
  }
  out.mu = out.samples == 0 ? 0.0 : total / static_cast<double>(out.samples);
  return out;
}

inline void require_xi(double xi) {
  if (!(xi > 0.0 && xi < 1.0)) fail(Errc::kBadXi, "xi must lie in (0, 1)");
}

// (h - l) sqrt(N ln(N^2 c)) / xi. c = 1 gives the pairwise threshold
// (h - l) sqrt(2 N ln N) / xi; c = 0 means nothing has to be separated.
inline double cosine_threshold(double h_minus_l, double dimension, double c, double xi) {
  require_xi(xi);
  if (c == 0.0) return -kInfinity;
  return h_minus_l * std::sqrt(dimension * std::log(dimension * dimension * c)) / xi;
}

inline bool pairwise_condition(const CosineTriple& t, double dimension, double xi) {
  require_xi(xi);
  if (t.h < t.l) fail(Errc::kDegenerateBounds, "h < l");
  if (t.h == t.l) return t.mu > 0.0;
  return t.mu >= cosine_threshold(t.h - t.l, dimension, 1.0, xi);
}

// Combined training vectors and their squared magnitudes.
class CosineScorer {
 public:
  CosineScorer(const Dataset& training, FeatureTransform t) : transform_(std::move(t)) {
    if (transform_.is_identity()) {
      combined_ = std::shared_ptr<const Dataset>(std::shared_ptr<const Dataset>(), &training);
    } else {
      combined_ = std::make_shared<const Dataset>(combine(training, transform_));
    }
    squares_.reserve(combined_->size());
    for (const auto& x : combined_->profiles()) squares_.push_back(squared_magnitude(x));
    usable_ = static_cast<std::size_t>(
        std::count_if(squares_.begin(), squares_.end(), [](double s) { return s > 0.0; }));
  }

  const Dataset& combined_training() const noexcept { return *combined_; }
  std::span<const double> squared_magnitudes() const noexcept { return squares_; }

  // cos(v, x) per training user; NaN for zero-magnitude training users.
  std::vector<double> scores(const SparseProfile& v) const {
    if (usable_ == 0) fail(Errc::kZeroVector, "every training user has zero magnitude");
    const SparseProfile gv = combine(v, transform_);
    const double ss_v = squared_magnitude(gv);
    if (ss_v == 0.0) fail(Errc::kZeroVector, "target '" + v.user() + "' has zero magnitude");
    std::vector<double> out;
    out.reserve(squares_.size());
    for (std::size_t i = 0; i < squares_.size(); ++i) {
      out.push_back(squares_[i] == 0.0
                        ? std::numeric_limits<double>::quiet_NaN()
                        : cosine_combined(gv, ss_v, combined_->profiles()[i], squares_[i]));
    }
    return out;
  }

 private:
  FeatureTransform transform_;
  std::shared_ptr<const Dataset> combined_;
  std::vector<double> squares_;
  std::size_t usable_ = 0;
};

// The K training users most similar to v. Zero-magnitude training users are
// skipped and counted in `excluded`.
inline CandidateSet topk_infer_cosine(const SparseProfile& v, const Dataset& training,
                                      std::size_t k, const FeatureTransform& t = {}) {
  require_k(k, training.size());
  const CosineScorer scorer(training, t);
  return select_top_k(training.profiles(), scorer.scores(v), k, Order::kDescending);
}

struct CosineCheckOptions {
  double xi = 0.5;
  double slack = 1.0;
  std::optional<CosineSampling> sampling;
};

struct TopKVerdict {
  bool applicable = true;
  bool pass = false;
  // Taken from the binding pair (u, w): the one with the least mu - threshold.
  double mu = 0.0;
  double h_minus_l = 0.0;
  double threshold = 0.0;
};

// Shared body of the Top-K and (delta, K) checks; `c` is the count inside
// ln(N^2 c). Every (u, w) pair over K̄ must clear the threshold; K̄ leaves out
// the K-1 competitors with the smallest margin. Zero-magnitude competitors
// can never be ranked and count as cleared.
inline TopKVerdict cosine_certificate(const SparseProfile& v, std::string_view true_match,
                                        const Dataset& training, std::size_t k,
                                        const FeatureTransform& t, double c,
                                        const CosineCheckOptions& opt) {
  require_k(k, training.size());
  require_xi(opt.xi);
  const SparseProfile* u = training.find(true_match);
  if (u == nullptr) fail(Errc::kInvalidArgument, "true match '" + std::string(true_match) + "' not in U");
  TopKVerdict verdict;
  if (magnitude(combine(v, t)) == 0.0 || magnitude(combine(*u, t)) == 0.0) {
    verdict.applicable = false;
    verdict.mu = std::numeric_limits<double>::quiet_NaN();
    verdict.h_minus_l = std::numeric_limits<double>::quiet_NaN();
    verdict.threshold = std::numeric_limits<double>::quiet_NaN();
    return verdict;
  }

  struct Pair {
    const std::string* user;
    double mu, h_minus_l, threshold, margin;
  };
  std::vector<Pair> pairs;
  const bool vacuous = c == 0.0;
  for (std::size_t i = 0; i < training.size(); ++i) {
    const SparseProfile& w = training.profiles()[i];
    if (w.user() == u->user()) continue;
    if (magnitude(combine(w, t)) == 0.0) {
      pairs.push_back({&w.user(), kInfinity, 0.0, -kInfinity, kInfinity});
      continue;
    }
    std::optional<CosineSampling> s = opt.sampling;
    if (s) s->seed = derive_seed(s->seed, {static_cast<std::uint64_t>(i)});
    const CosineTriple tri = build_cosine_triple(v, *u, w, t, s, opt.slack);
    double threshold = -kInfinity;
    bool cleared = true;
    if (!vacuous) {
      if (tri.h == tri.l) {
        cleared = tri.mu > 0.0;
        threshold = 0.0;
      } else {
        threshold = cosine_threshold(tri.h_minus_l(), static_cast<double>(training.dimension()), c, opt.xi);
        cleared = tri.mu >= threshold;
      }
    }
    // A degenerate pair that fails gets margin -inf so it is dropped first.
    double margin = tri.mu - threshold;
    if (tri.h == tri.l && !vacuous) margin = cleared ? kInfinity : -kInfinity;
    pairs.push_back({&w.user(), tri.mu, tri.h_minus_l(), threshold, margin});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.margin != b.margin ? a.margin < b.margin : *a.user < *b.user;
  });
  pairs.erase(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(k - 1));
  if (pairs.empty()) {
    verdict.pass = true;
    verdict.mu = kInfinity;
    verdict.threshold = -kInfinity;
    return verdict;
  }
  const Pair& binding = pairs.front();
  verdict.mu = binding.mu;
  verdict.h_minus_l = binding.h_minus_l;
  verdict.threshold = binding.threshold;
  verdict.pass = binding.margin >= 0.0;
  return verdict;
}

// Top-K condition for target v whose true match in U is `true_match`:
// threshold (h - l) sqrt(N ln(N^2 theta n)) / xi with theta n = n - K.
inline TopKVerdict topk_condition(const SparseProfile& v, std::string_view true_match,
                                  const Dataset& training, std::size_t k,
                                  const FeatureTransform& t = {}, const CosineCheckOptions& opt = {}) {
  require_k(k, training.size());
  return cosine_certificate(v, true_match, training, k, t,
                            static_cast<double>(training.size() - k), opt);
}

// (delta, K) check with ln(N^2 floor(delta m) theta n) inside the root.
inline QuantReport delta_k_condition(const Dataset& training, const Dataset& target, std::size_t k,
                                  double delta, const FeatureTransform& t = {},
                                  const CosineCheckOptions& opt = {}) {
  if (!(delta >= 0.0 && delta <= 1.0)) fail(Errc::kInvalidArgument, "delta must lie in [0, 1]");
  require_xi(opt.xi);
  require_k(k, training.size());
  const OverlapView view = overlap(training, target);
  if (view.m_tilde() == 0) fail(Errc::kEmptyOverlap, "no user appears in both datasets");

  QuantReport report;
  report.model = ModelKind::kDistribution;
  report.stat_names = {"mu", "h_minus_l"};
  report.k = k;
  report.delta = delta;
  report.m_tilde = view.m_tilde();
  report.required = floor_delta_m(delta, view.m_tilde());
  const double c = static_cast<double>(report.required) * static_cast<double>(training.size() - k);

  for (const auto& user : view.users) {
    CosineCheckOptions per_user = opt;
    if (per_user.sampling) per_user.sampling->seed = derive_seed(opt.sampling->seed, {report.rows.size()});
    const TopKVerdict v = cosine_certificate(*target.find(user), user, training, k, t, c, per_user);
    report.rows.push_back({user, {v.mu, v.h_minus_l}, v.threshold, v.pass, v.applicable});
  }
  finalize(report);
  return report;
}

}  // namespace fdi::distribution

#endif  // FDI_DISTRIBUTION_MODEL_HPP_
