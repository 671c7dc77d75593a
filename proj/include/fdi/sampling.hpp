#ifndef FDI_SAMPLING_HPP_
#define FDI_SAMPLING_HPP_

#include <cstdint>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/rng.hpp"

namespace fdi {

// Keeps each relationship of `x` independently with probability p.
inline SparseProfile sample_profile(const SparseProfile& x, double p, Rng& rng) {
  std::vector<Entry> kept;
  kept.reserve(x.size());
  for (const Entry& e : x.entries()) {
    if (bernoulli(rng, p)) kept.push_back(e);
  }
  return SparseProfile(x.user(), std::move(kept));
}

// Relationship-sampled replica of a raw dataset: all users and features are
// kept (users may end up empty), each relationship survives with prob. p.
inline Dataset sample_replica(const Dataset& raw, double p, std::uint64_t seed,
                              Role role = Role::kTraining) {
  if (!(p > 0.0 && p <= 1.0)) fail(Errc::kBadP, "sampling probability must lie in (0, 1]");
  Rng rng(seed);
  std::vector<SparseProfile> out;
  out.reserve(raw.size());
  for (const auto& profile : raw.profiles()) out.push_back(sample_profile(profile, p, rng));
  return Dataset(raw.space_ptr(), std::move(out), role);
}

}  // namespace fdi

#endif  // FDI_SAMPLING_HPP_
