#ifndef FDI_NEW_USER_HPP_
#define FDI_NEW_USER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/distance_model.hpp"
#include "fdi/distribution_model.hpp"
#include "fdi/parallel.hpp"
#include "fdi/report.hpp"
#include "fdi/rng.hpp"
#include "fdi/sampling.hpp"

// Flags target users that have no counterpart in the training data by
// comparing their distance/similarity statistics to the matched-pair mean.
namespace fdi::new_user {

enum class DetectionMode { kDistance, kDistribution };

inline std::string_view to_string(DetectionMode mode) {
  return mode == DetectionMode::kDistance ? "distance" : "distribution";
}

inline DetectionMode parse_mode(std::string_view name) {
  if (name == "distance") return DetectionMode::kDistance;
  if (name == "distribution") return DetectionMode::kDistribution;
  fail(Errc::kInvalidArgument, "unknown detection mode '" + std::string(name) + "'");
}

struct NewUserThresholds {
  DetectionMode mode = DetectionMode::kDistance;
  double mu_star_d = 0.0;  // mean matched-pair distance
  double mu_star_s = 0.0;  // mean matched-pair cosine
  double xi = 0.5;
  double zeta = 0.0;       // bound on any pair distance: 2 max ||g(x)||
  double dimension = 1.0;
  std::size_t samples = 0;
};

// Mean statistic over matched pairs: every training user sampled twice
// independently at rate p, `trials` times. Cosine draws where a replica has
// zero magnitude are skipped.
inline NewUserThresholds estimate_thresholds(const Dataset& raw, double p, std::size_t trials,
                                             std::uint64_t seed, DetectionMode mode,
                                             const distance::DistanceConfig& cfg, double xi = 0.5) {
  distribution::require_xi(xi);
  cfg.validate();
  if (!(p > 0.0 && p <= 1.0)) fail(Errc::kBadP, "sampling probability must lie in (0, 1]");
  if (trials < 30) fail(Errc::kInvalidArgument, "at least 30 trials are required");
  if (raw.size() == 0) fail(Errc::kEmptyTraining, "training dataset has no users");

  NewUserThresholds out;
  out.mode = mode;
  out.xi = xi;
  out.dimension = static_cast<double>(raw.dimension());
  const Dataset g = combine(raw, cfg.transform);
  const SparseProfile empty;
  double max_norm = 0.0;
  for (const auto& x : g.profiles()) max_norm = std::max(max_norm, distance::lp_distance(x, empty, cfg.norm_p));
  out.zeta = 2.0 * max_norm;

  Rng rng(seed);
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (const auto& x : g.profiles()) {
      const SparseProfile a = sample_profile(x, p, rng);
      const SparseProfile b = sample_profile(x, p, rng);
      if (mode == DetectionMode::kDistance) {
        total += distance::lp_distance(a, b, cfg.norm_p);
      } else {
        const double sa = distribution::squared_magnitude(a);
        const double sb = distribution::squared_magnitude(b);
        if (sa == 0.0 || sb == 0.0) continue;
        total += distribution::cosine_combined(a, sa, b, sb);
      }
      ++out.samples;
    }
  }
  const double mean = out.samples == 0 ? 0.0 : total / static_cast<double>(out.samples);
  (mode == DetectionMode::kDistance ? out.mu_star_d : out.mu_star_s) = mean;
  return out;
}

enum class Clause { kNone, kDMin, kDMax, kCMax };

inline std::string_view to_string(Clause c) {
  switch (c) {
    case Clause::kNone: return "none";
    case Clause::kDMin: return "d_min";
    case Clause::kDMax: return "d_max";
    case Clause::kCMax: return "c_max";
  }
  return "none";
}

struct Detection {
  std::string user;
  bool is_new = false;
  bool assessable = true;
  Clause clause = Clause::kNone;  // clause that fired, if any
  double statistic = 0.0;         // D_min, D_max or C_max
  double threshold = 0.0;
  bool high_confidence = false;   // the estimation precondition holds
};

// Distance: new when D_min >= (1+xi) mu*_d or D_max <= (1-xi) mu*_d.
// Distribution: new when C_max <= (1-xi) mu*_s.
// A target with zero magnitude (distribution mode) is not assessable.
inline Detection detect_new_user(const SparseProfile& target, const Dataset& training,
                                 const NewUserThresholds& th, const distance::DistanceConfig& cfg) {
  if (training.size() == 0) fail(Errc::kEmptyTraining, "training dataset has no users");
  distribution::require_xi(th.xi);
  Detection d;
  d.user = target.user();
  const double root = std::sqrt(2.0 * std::log(th.dimension)) / th.xi;

  if (th.mode == DetectionMode::kDistance) {
    const distance::DistanceScorer scorer(training, cfg);
    const std::vector<double> dist = scorer.scores(target);
    const auto [lo, hi] = std::minmax_element(dist.begin(), dist.end());
    d.high_confidence = th.mu_star_d >= th.zeta * root;
    const double upper = (1.0 + th.xi) * th.mu_star_d;
    const double lower = (1.0 - th.xi) * th.mu_star_d;
    if (*lo >= upper) {
      d.is_new = true;
      d.clause = Clause::kDMin;
      d.statistic = *lo;
      d.threshold = upper;
    } else if (*hi <= lower) {
      d.is_new = true;
      d.clause = Clause::kDMax;
      d.statistic = *hi;
      d.threshold = lower;
    } else {
      d.statistic = *lo;
      d.threshold = upper;
    }
    return d;
  }

  // Cosine lies in [0, 1] for non-negative vectors, so h - l = 1.
  d.high_confidence = th.mu_star_s >= root;
  d.threshold = (1.0 - th.xi) * th.mu_star_s;
  const distribution::CosineScorer scorer(training, cfg.transform);
  const SparseProfile g = combine(target, cfg.transform);
  const bool usable_training = std::any_of(scorer.squared_magnitudes().begin(),
                                           scorer.squared_magnitudes().end(),
                                           [](double s) { return s > 0.0; });
  if (distribution::squared_magnitude(g) == 0.0 || !usable_training) {
    d.assessable = false;
    d.statistic = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  double c_max = -kInfinity;
  for (double s : scorer.scores(target)) {
    if (!std::isnan(s)) c_max = std::max(c_max, s);
  }
  d.statistic = c_max;
  if (c_max <= d.threshold) {
    d.is_new = true;
    d.clause = Clause::kCMax;
  }
  return d;
}

inline std::vector<Detection> detect_all(const Dataset& target, const Dataset& training,
                                         const NewUserThresholds& th,
                                         const distance::DistanceConfig& cfg, std::size_t jobs = 1) {
  if (training.size() == 0) fail(Errc::kEmptyTraining, "training dataset has no users");
  std::vector<Detection> out(target.size());
  parallel_for(target.size(), jobs, [&](std::size_t i) {
    out[i] = detect_new_user(target.profiles()[i], training, th, cfg);
  });
  return out;
}

inline void write_detection_csv(std::ostream& out, const std::vector<Detection>& rows,
                                DetectionMode mode) {
  out << "user,mode,statistic,threshold,verdict,confidence\n";
  for (const auto& d : rows) {
    out << d.user << ',' << to_string(mode) << ',' << format_number(d.statistic) << ','
        << format_number(d.threshold) << ','
        << (!d.assessable ? "na" : (d.is_new ? "new" : "returning")) << ','
        << (d.high_confidence ? "high" : "low") << '\n';
  }
}

}  // namespace fdi::new_user

#endif  // FDI_NEW_USER_HPP_
