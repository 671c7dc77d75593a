#ifndef FDI_BINARY_MODEL_HPP_
#define FDI_BINARY_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/report.hpp"
#include "fdi/topk.hpp"

// Naive quantification over 0/1 feature vectors: XOR distance, the pairwise
// and Top-K inference rules, and their sufficient-condition checkers.
namespace fdi::binary {

// Model parameters. p is the per-feature preservation probability
// Pr(f_v = f_u | v ~ u); p = 1/2 makes every user look alike and is rejected.
class BinaryParams {
 public:
  BinaryParams(double p, double dimension, std::size_t k, double delta = 1.0)
      : p_(p), dimension_(dimension), k_(k), delta_(delta) {
    if (!(p >= 0.0 && p <= 1.0)) fail(Errc::kBadP, "p must lie in [0, 1]");
    if (p == 0.5) fail(Errc::kDegenerateP, "p must differ from 1/2");
    if (!(dimension >= 1.0)) fail(Errc::kInvalidArgument, "N must be >= 1");
    if (k < 1) fail(Errc::kBadK, "K must be >= 1");
    if (!(delta >= 0.0 && delta <= 1.0)) fail(Errc::kInvalidArgument, "delta must lie in [0, 1]");
  }

  double p() const noexcept { return p_; }
  double dimension() const noexcept { return dimension_; }
  std::size_t k() const noexcept { return k_; }
  double delta() const noexcept { return delta_; }

  // (1 - 2p)^2, the squared bias that drives every bound.
  double bias2() const noexcept { return (1.0 - 2.0 * p_) * (1.0 - 2.0 * p_); }

  // theta = (n - K) / n.
  double theta(std::size_t n) const {
    require_k(k_, n);
    return static_cast<double>(n - k_) / static_cast<double>(n);
  }

  Order order() const noexcept { return p_ > 0.5 ? Order::kAscending : Order::kDescending; }

 private:
  double p_;
  double dimension_;
  std::size_t k_;
  double delta_;
};

inline void require_binary(const SparseProfile& x) {
  if (!is_binary(x)) fail(Errc::kNotBinary, "profile of '" + x.user() + "' has non-unit weights");
}

// Gamma_x: number of set features.
inline std::size_t gamma(const SparseProfile& x) {
  require_binary(x);
  return x.size();
}

// Gamma_{x xor y}: Hamming distance of the 0/1 vectors.
inline std::size_t gamma_xor(const SparseProfile& x, const SparseProfile& y) {
  require_binary(x);
  require_binary(y);
  auto a = x.entries();
  auto b = y.entries();
  std::size_t i = 0, j = 0, shared = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].index < b[j].index) {
      ++i;
    } else if (b[j].index < a[i].index) {
      ++j;
    } else {
      ++shared;
      ++i;
      ++j;
    }
  }
  return a.size() + b.size() - 2 * shared;
}

// Pairwise rule: p > 1/2 picks the closer of {u, w}, p < 1/2 the farther.
inline const SparseProfile& pairwise_infer(const SparseProfile& v, const SparseProfile& u,
                                           const SparseProfile& w, const BinaryParams& params) {
  const auto du = static_cast<double>(gamma_xor(v, u));
  const auto dw = static_cast<double>(gamma_xor(v, w));
  if (du == dw) return u.user() <= w.user() ? u : w;
  const bool u_wins = params.order() == Order::kAscending ? du < dw : du > dw;
  return u_wins ? u : w;
}

// (16 ln N + 8) / (1 - 2p)^2.
inline double pairwise_threshold(const BinaryParams& params) {
  if (params.dimension() < 2.0) fail(Errc::kInvalidArgument, "N must be >= 2");
  return (16.0 * std::log(params.dimension()) + 8.0) / params.bias2();
}

inline bool pairwise_condition(const SparseProfile& u, const SparseProfile& w,
                         const BinaryParams& params) {
  return static_cast<double>(gamma_xor(u, w)) >= pairwise_threshold(params);
}

// max{0, 1 - 2 exp(-(1-2p)^2 Gamma / 8)}.
inline double pairwise_success_bound(double gamma_uw, double p) {
  if (p == 0.5) fail(Errc::kDegenerateP, "p must differ from 1/2");
  const double b2 = (1.0 - 2.0 * p) * (1.0 - 2.0 * p);
  return std::max(0.0, 1.0 - 2.0 * std::exp(-b2 * gamma_uw / 8.0));
}

inline double pairwise_success_bound(const SparseProfile& u, const SparseProfile& w,
                               const BinaryParams& params) {
  return pairwise_success_bound(static_cast<double>(gamma_xor(u, w)), params.p());
}

// Top-K rule: the K smallest (p > 1/2) or largest (p < 1/2) XOR distances.
inline CandidateSet topk_infer(const SparseProfile& v, const Dataset& training,
                               const BinaryParams& params) {
  require_k(params.k(), training.size());
  std::vector<double> scores;
  scores.reserve(training.size());
  for (const auto& x : training.profiles()) scores.push_back(static_cast<double>(gamma_xor(v, x)));
  return select_top_k(training.profiles(), scores, params.k(), params.order());
}

// Largest achievable min{Gamma_{u xor w} : w in K̄} over all (n-K)-subsets K̄
// of U \ {u}: drop the K-1 closest non-matches and take the next distance.
// +inf when K̄ is empty.
inline double best_gamma_min(std::string_view true_match, const Dataset& training, std::size_t k) {
  require_k(k, training.size());
  const SparseProfile* u = training.find(true_match);
  if (u == nullptr) fail(Errc::kInvalidArgument, "true match '" + std::string(true_match) + "' not in U");
  if (k == training.size()) return kInfinity;
  std::vector<std::size_t> dists;
  dists.reserve(training.size() - 1);
  for (const auto& w : training.profiles()) {
    if (w.user() != u->user()) dists.push_back(gamma_xor(*u, w));
  }
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1), dists.end());
  return static_cast<double>(dists[k - 1]);
}

struct TopKVerdict {
  bool inferable_guaranteed = false;
  double min_gamma = 0.0;  // +inf when K̄ is empty
  double threshold = 0.0;
};

// (16 ln N + 8 ln(2 theta n)) / (1-2p)^2; with theta n = n - K.
inline TopKVerdict topk_condition(const SparseProfile& v, const SparseProfile& u,
                                  const Dataset& training, const BinaryParams& params) {
  require_binary(v);
  const std::size_t n = training.size();
  TopKVerdict verdict;
  verdict.min_gamma = best_gamma_min(u.user(), training, params.k());
  const double theta_n = params.theta(n) * static_cast<double>(n);
  if (theta_n == 0.0) {
    verdict.threshold = -kInfinity;
    verdict.inferable_guaranteed = true;
    return verdict;
  }
  verdict.threshold =
      (16.0 * std::log(params.dimension()) + 8.0 * std::log(2.0 * theta_n)) / params.bias2();
  verdict.inferable_guaranteed = verdict.min_gamma >= verdict.threshold;
  return verdict;
}

// max{0, 1 - 2 theta n exp(-(1-2p)^2 Gamma_min / 8)}.
inline double topk_success_bound(double gamma_min, std::size_t n, std::size_t k, double p) {
  if (p == 0.5) fail(Errc::kDegenerateP, "p must differ from 1/2");
  require_k(k, n);
  const double theta_n = static_cast<double>(n - k);
  if (theta_n == 0.0) return 1.0;
  const double b2 = (1.0 - 2.0 * p) * (1.0 - 2.0 * p);
  return std::max(0.0, 1.0 - 2.0 * theta_n * std::exp(-b2 * gamma_min / 8.0));
}

inline double topk_success_bound(const SparseProfile& v, const SparseProfile& u,
                               const Dataset& training, const BinaryParams& params) {
  require_binary(v);
  return topk_success_bound(best_gamma_min(u.user(), training, params.k()), training.size(),
                          params.k(), params.p());
}

// Checks every overlap user against the strengthened per-user condition
// (16 ln N + 8 ln(2 delta theta m n)) / (1-2p)^2 and counts passes.
inline QuantReport delta_k_condition(const Dataset& training, const Dataset& target,
                                  const BinaryParams& params) {
  const OverlapView view = overlap(training, target);
  if (view.m_tilde() == 0) fail(Errc::kEmptyOverlap, "no user appears in both datasets");
  const std::size_t n = training.size();
  const double theta = params.theta(n);

  QuantReport report;
  report.model = ModelKind::kBinary;
  report.stat_names = {"gamma_min"};
  report.k = params.k();
  report.delta = params.delta();
  report.m_tilde = view.m_tilde();
  report.required = floor_delta_m(params.delta(), view.m_tilde());

  const double union_size =
      2.0 * static_cast<double>(report.required) * theta * static_cast<double>(n);
  const double threshold =
      union_size == 0.0
          ? -kInfinity
          : (16.0 * std::log(params.dimension()) + 8.0 * std::log(union_size)) / params.bias2();

  for (const auto& user : view.users) {
    require_binary(*target.find(user));
    const double gmin = best_gamma_min(user, training, params.k());
    report.rows.push_back({user, {gmin}, threshold, gmin >= threshold, true});
  }
  finalize(report);
  return report;
}

}  // namespace fdi::binary

#endif  // FDI_BINARY_MODEL_HPP_
