#ifndef FDI_DATASET_HPP_
#define FDI_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fdi/error.hpp"

namespace fdi {

enum class Role { kTraining, kTarget };

inline std::string_view to_string(Role role) {
  return role == Role::kTraining ? "training" : "target";
}

// One non-zero coordinate of a user's feature vector.
struct Entry {
  std::uint32_t index = 0;
  double weight = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

// A raw (user, feature, weight) relationship as produced by the parsers.
struct Edge {
  std::string user;
  std::string feature;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

namespace detail {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

}  // namespace detail

// Bijection between external feature identifiers and dense indices 0..N-1.
class FeatureSpace {
 public:
  FeatureSpace() = default;

  explicit FeatureSpace(std::vector<std::string> ids) {
    index_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto [it, inserted] = index_.emplace(ids[i], static_cast<std::uint32_t>(i));
      if (!inserted) fail(Errc::kInvalidArgument, "duplicate feature id '" + ids[i] + "'");
    }
    ids_ = std::move(ids);
  }

  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& id(std::uint32_t index) const { return ids_.at(index); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::optional<std::uint32_t> find(std::string_view id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const FeatureSpace& a, const FeatureSpace& b) {
    return a.ids_ == b.ids_;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t, detail::StringHash, std::equal_to<>> index_;
};

// A user's feature vector: strictly ascending indices, all weights > 0.
class SparseProfile {
 public:
  SparseProfile() = default;

  // Accepts entries in any order; duplicate indices are summed and
  // zero-weight entries dropped.
  SparseProfile(std::string user, std::vector<Entry> entries) : user_(std::move(user)) {
    for (const Entry& e : entries) {
      if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
        fail(Errc::kInvalidArgument, "weight for user '" + user_ + "' must be finite and >= 0");
      }
    }
    // Sorting on (index, weight) fixes the summation order of duplicates,
    // so the result does not depend on input order.
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.index != b.index ? a.index < b.index : a.weight < b.weight;
    });
    for (const Entry& e : entries) {
      if (!entries_.empty() && entries_.back().index == e.index) {
        entries_.back().weight += e.weight;
      } else {
        entries_.push_back(e);
      }
    }
    std::erase_if(entries_, [](const Entry& e) { return e.weight == 0.0; });
  }

  const std::string& user() const noexcept { return user_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  double weight(std::uint32_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, std::uint32_t i) { return e.index < i; });
    return (it != entries_.end() && it->index == index) ? it->weight : 0.0;
  }

  double total_weight() const {
    double s = 0.0;
    for (const Entry& e : entries_) s += e.weight;
    return s;
  }

  friend bool operator==(const SparseProfile&, const SparseProfile&) = default;

 private:
  std::string user_;
  std::vector<Entry> entries_;
};

// Named collection of profiles over one shared feature space. Immutable.
class Dataset {
 public:
  Dataset() : space_(std::make_shared<FeatureSpace>()) {}

  Dataset(std::shared_ptr<const FeatureSpace> space, std::vector<SparseProfile> profiles,
          Role role)
      : space_(std::move(space)), profiles_(std::move(profiles)), role_(role) {
    if (!space_) fail(Errc::kInvalidArgument, "dataset requires a feature space");
    std::sort(profiles_.begin(), profiles_.end(),
              [](const SparseProfile& a, const SparseProfile& b) { return a.user() < b.user(); });
    for (std::size_t i = 0; i < profiles_.size(); ++i) {
      if (i > 0 && profiles_[i - 1].user() == profiles_[i].user()) {
        fail(Errc::kInvalidArgument, "duplicate user '" + profiles_[i].user() + "'");
      }
      for (const Entry& e : profiles_[i].entries()) {
        if (e.index >= space_->size()) {
          fail(Errc::kInvalidArgument, "feature index out of range for user '" +
                                           profiles_[i].user() + "'");
        }
      }
    }
  }

  const FeatureSpace& space() const noexcept { return *space_; }
  const std::shared_ptr<const FeatureSpace>& space_ptr() const noexcept { return space_; }
  std::span<const SparseProfile> profiles() const noexcept { return profiles_; }
  std::size_t size() const noexcept { return profiles_.size(); }
  std::size_t dimension() const noexcept { return space_->size(); }
  Role role() const noexcept { return role_; }

  const SparseProfile* find(std::string_view user) const {
    auto it = std::lower_bound(profiles_.begin(), profiles_.end(), user,
                               [](const SparseProfile& p, std::string_view u) { return p.user() < u; });
    return (it != profiles_.end() && it->user() == user) ? &*it : nullptr;
  }

  std::size_t relationship_count() const {
    std::size_t n = 0;
    for (const auto& p : profiles_) n += p.size();
    return n;
  }

  Dataset with_role(Role role) const { return Dataset(space_, profiles_, role); }

 private:
  std::shared_ptr<const FeatureSpace> space_;
  std::vector<SparseProfile> profiles_;
  Role role_ = Role::kTraining;
};

inline bool same_space(const Dataset& a, const Dataset& b) {
  return a.space_ptr() == b.space_ptr() || a.space() == b.space();
}

// Content equality at the level of feature identifiers: two datasets are
// equivalent when every user maps to the same {feature-id: weight} set,
// regardless of how indices were assigned.
inline bool equivalent(const Dataset& a, const Dataset& b) {
  if (a.role() != b.role() || a.size() != b.size()) return false;
  if (a.dimension() != b.dimension()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& pa = a.profiles()[i];
    const auto& pb = b.profiles()[i];
    if (pa.user() != pb.user() || pa.size() != pb.size()) return false;
    std::map<std::string_view, double> wa;
    for (const Entry& e : pa.entries()) wa.emplace(a.space().id(e.index), e.weight);
    for (const Entry& e : pb.entries()) {
      auto it = wa.find(b.space().id(e.index));
      if (it == wa.end() || it->second != e.weight) return false;
    }
  }
  return true;
}

// Duplicate (user, feature) edges are summed. Zero-weight edges keep their
// user (with whatever else it has, possibly nothing) but do not register a
// feature. Features are indexed in first-occurrence order.
inline Dataset build_dataset(std::span<const Edge> edges, Role role) {
  if (edges.empty()) fail(Errc::kEmptyDataset, "edge list is empty");
  std::vector<std::string> feature_ids;
  std::unordered_map<std::string, std::uint32_t, detail::StringHash, std::equal_to<>> feature_index;
  std::map<std::string, std::vector<Entry>, std::less<>> per_user;
  for (const Edge& edge : edges) {
    if (!(edge.weight >= 0.0) || !std::isfinite(edge.weight)) {
      fail(Errc::kInvalidArgument, "edge (" + edge.user + ", " + edge.feature +
                                       ") has a negative or non-finite weight");
    }
    auto& entries = per_user[edge.user];
    if (edge.weight == 0.0) continue;
    auto it = feature_index.find(edge.feature);
    if (it == feature_index.end()) {
      it = feature_index.emplace(edge.feature, static_cast<std::uint32_t>(feature_ids.size())).first;
      feature_ids.push_back(edge.feature);
    }
    entries.push_back({it->second, edge.weight});
  }
  auto space = std::make_shared<const FeatureSpace>(std::move(feature_ids));
  std::vector<SparseProfile> profiles;
  profiles.reserve(per_user.size());
  for (auto& [user, entries] : per_user) profiles.emplace_back(user, std::move(entries));
  return Dataset(std::move(space), std::move(profiles), role);
}

inline Dataset binary_view(const Dataset& d) {
  std::vector<SparseProfile> profiles;
  profiles.reserve(d.size());
  for (const auto& p : d.profiles()) {
    std::vector<Entry> entries(p.entries().begin(), p.entries().end());
    for (Entry& e : entries) e.weight = 1.0;
    profiles.emplace_back(p.user(), std::move(entries));
  }
  return Dataset(d.space_ptr(), std::move(profiles), d.role());
}

inline bool is_binary(const SparseProfile& p) {
  return std::all_of(p.entries().begin(), p.entries().end(),
                     [](const Entry& e) { return e.weight == 1.0; });
}

inline bool is_binary(const Dataset& d) {
  return std::all_of(d.profiles().begin(), d.profiles().end(),
                     [](const SparseProfile& p) { return is_binary(p); });
}

using DegreeHistogram = std::map<std::size_t, std::size_t>;

// Degree of a user = number of features it has.
inline DegreeHistogram user_degree_histogram(const Dataset& d) {
  DegreeHistogram hist;
  for (const auto& p : d.profiles()) ++hist[p.size()];
  return hist;
}

// Number of users holding each feature, indexed by feature.
inline std::vector<std::size_t> feature_degrees(const Dataset& d) {
  std::vector<std::size_t> degree(d.dimension(), 0);
  for (const auto& p : d.profiles())
    for (const Entry& e : p.entries()) ++degree[e.index];
  return degree;
}

inline DegreeHistogram feature_degree_histogram(const Dataset& d) {
  DegreeHistogram hist;
  for (std::size_t deg : feature_degrees(d)) ++hist[deg];
  return hist;
}

// Users present with at least one entry in both datasets (sorted).
struct OverlapView {
  std::vector<std::string> users;

  std::size_t m_tilde() const noexcept { return users.size(); }
};

inline OverlapView overlap(const Dataset& training, const Dataset& target) {
  if (!same_space(training, target)) {
    fail(Errc::kSpaceMismatch, "training and target datasets use different feature spaces");
  }
  OverlapView view;
  auto a = training.profiles().begin();
  auto b = target.profiles().begin();
  while (a != training.profiles().end() && b != target.profiles().end()) {
    if (a->user() < b->user()) {
      ++a;
    } else if (b->user() < a->user()) {
      ++b;
    } else {
      if (!a->empty() && !b->empty()) view.users.push_back(a->user());
      ++a;
      ++b;
    }
  }
  return view;
}

}  // namespace fdi

#endif  // FDI_DATASET_HPP_
