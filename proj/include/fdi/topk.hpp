#ifndef FDI_TOPK_HPP_
#define FDI_TOPK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"

namespace fdi {

struct Candidate {
  std::string user;
  double score = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

// Ranked Top-K result for one target user, best candidate first.
struct CandidateSet {
  std::vector<Candidate> ranked;
  // Training users left out because they could not be scored.
  std::size_t excluded = 0;

  std::size_t size() const noexcept { return ranked.size(); }

  bool contains(std::string_view user) const {
    return std::any_of(ranked.begin(), ranked.end(),
                       [&](const Candidate& c) { return c.user == user; });
  }
};

// kAscending ranks small scores first (distances), kDescending large first
// (similarities). Ties always go to the smaller user identifier.
enum class Order { kAscending, kDescending };

namespace detail {

template <class IdOf>
bool ranks_before(double sa, double sb, std::size_t a, std::size_t b, Order order, IdOf&& id_of) {
  if (sa != sb) return order == Order::kAscending ? sa < sb : sa > sb;
  return id_of(a) < id_of(b);
}

}  // namespace detail

// Picks the K best pool members; NaN scores mark unscorable members, which
// are skipped and counted in `excluded`.
inline CandidateSet select_top_k(std::span<const SparseProfile> pool, std::span<const double> scores,
                                 std::size_t k, Order order) {
  std::vector<std::size_t> idx;
  idx.reserve(pool.size());
  CandidateSet out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (std::isnan(scores[i])) {
      ++out.excluded;
    } else {
      idx.push_back(i);
    }
  }
  const std::size_t take = std::min(k, idx.size());
  auto id_of = [&](std::size_t i) -> const std::string& { return pool[i].user(); };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return detail::ranks_before(scores[a], scores[b], a, b, order, id_of);
                    });
  out.ranked.reserve(take);
  for (std::size_t j = 0; j < take; ++j) out.ranked.push_back({pool[idx[j]].user(), scores[idx[j]]});
  return out;
}

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline constexpr std::size_t kUnranked = std::numeric_limits<std::size_t>::max();

// Number of pool members ranked strictly ahead of pool[target] under the
// same order select_top_k uses. pool[target] is in the Top-K set iff the
// result is < K. Returns kUnranked when the target itself is unscorable.
inline std::size_t rank_of(std::span<const SparseProfile> pool, std::span<const double> scores,
                           std::size_t target, Order order) {
  if (std::isnan(scores[target])) return kUnranked;
  auto id_of = [&](std::size_t i) -> const std::string& { return pool[i].user(); };
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i == target || std::isnan(scores[i])) continue;
    if (detail::ranks_before(scores[i], scores[target], i, target, order, id_of)) ++ahead;
  }
  return ahead;
}

inline void require_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    fail(Errc::kBadK, "K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

}  // namespace fdi

#endif  // FDI_TOPK_HPP_
