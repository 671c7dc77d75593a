#ifndef FDI_HARNESS_HPP_
#define FDI_HARNESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdi/binary_model.hpp"
#include "fdi/dataset.hpp"
#include "fdi/distance_model.hpp"
#include "fdi/distribution_model.hpp"
#include "fdi/parallel.hpp"
#include "fdi/report.hpp"
#include "fdi/rng.hpp"
#include "fdi/sampling.hpp"
#include "fdi/topk.hpp"
#include "fdi/transform.hpp"

// Experiment driver: replica sampling, Top-K inference runs and (p, K)
// sweeps, plus the tail-bound utility.
namespace fdi::harness {

inline ModelKind parse_model(std::string_view name) {
  if (name == "binary") return ModelKind::kBinary;
  if (name == "distance") return ModelKind::kDistance;
  if (name == "distribution") return ModelKind::kDistribution;
  fail(Errc::kInvalidArgument, "unknown model '" + std::string(name) + "'");
}

struct ModelConfig {
  ModelKind kind = ModelKind::kDistance;
  distance::DistanceConfig distance;  // combiner, fixed weights, norm
  bool idf = false;                   // learn ln(n/deg) weights from the U replica
};

// Both replicas of the same raw user agree on a feature with probability
// p^2 + (1-p)^2, which is the preservation probability the binary rule sees.
inline double binary_agreement(double p) { return p * p + (1.0 - p) * (1.0 - p); }

// Rank of each overlap user's true match in its own score list (0 = best).
// kUnranked when the target could not be scored.
inline std::vector<std::size_t> true_match_ranks(const Dataset& training, const Dataset& target,
                                                 double p, const ModelConfig& model,
                                                 std::size_t jobs = 1) {
  const OverlapView view = overlap(training, target);
  std::vector<std::size_t> ranks(view.m_tilde(), kUnranked);
  if (view.m_tilde() == 0) return ranks;
  auto index_of = [&](const std::string& user) {
    return static_cast<std::size_t>(training.find(user) - training.profiles().data());
  };

  switch (model.kind) {
    case ModelKind::kBinary: {
      const double agreement = binary_agreement(p);
      if (agreement == 0.5) fail(Errc::kDegenerateP, "p must differ from 1/2");
      const Order order = agreement > 0.5 ? Order::kAscending : Order::kDescending;
      const Dataset u = binary_view(training);
      const Dataset v = binary_view(target);
      parallel_for(view.m_tilde(), jobs, [&](std::size_t i) {
        const SparseProfile& tv = *v.find(view.users[i]);
        std::vector<double> scores;
        scores.reserve(u.size());
        for (const auto& x : u.profiles()) scores.push_back(static_cast<double>(binary::gamma_xor(tv, x)));
        ranks[i] = rank_of(u.profiles(), scores, index_of(view.users[i]), order);
      });
      break;
    }
    case ModelKind::kDistance: {
      distance::DistanceConfig cfg = model.distance;
      if (model.idf) cfg.transform.weights = inverse_feature_frequency(training);
      const distance::DistanceScorer scorer(training, cfg);
      parallel_for(view.m_tilde(), jobs, [&](std::size_t i) {
        const auto scores = scorer.scores(*target.find(view.users[i]));
        ranks[i] = rank_of(training.profiles(), scores, index_of(view.users[i]), Order::kAscending);
      });
      break;
    }
    case ModelKind::kDistribution: {
      FeatureTransform t = model.distance.transform;
      if (model.idf) t.weights = inverse_feature_frequency(training);
      const distribution::CosineScorer scorer(training, t);
      parallel_for(view.m_tilde(), jobs, [&](std::size_t i) {
        try {
          const auto scores = scorer.scores(*target.find(view.users[i]));
          ranks[i] = rank_of(training.profiles(), scores, index_of(view.users[i]), Order::kDescending);
        } catch (const Error& e) {
          if (e.code() != Errc::kZeroVector) throw;
          ranks[i] = kUnranked;  // zero-magnitude target: counted as a miss
        }
      });
      break;
    }
  }
  return ranks;
}

struct CellResult {
  std::optional<double> delta;  // empty when the overlap is empty
  std::size_t m_tilde = 0;
  std::size_t hits = 0;
};

inline CellResult delta_from_ranks(const std::vector<std::size_t>& ranks, std::size_t k) {
  CellResult out;
  out.m_tilde = ranks.size();
  out.hits = static_cast<std::size_t>(
      std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r < k; }));
  if (out.m_tilde > 0) out.delta = static_cast<double>(out.hits) / static_cast<double>(out.m_tilde);
  return out;
}

inline std::uint64_t training_seed(std::uint64_t rep_seed) { return derive_seed(rep_seed, {0}); }
inline std::uint64_t target_seed(std::uint64_t rep_seed) { return derive_seed(rep_seed, {1}); }

// One repetition: sample U and V independently, run each overlap user's
// Top-K inference against U and count how often the true identity is in it.
inline CellResult run_cell(const Dataset& raw, double p, std::size_t k, const ModelConfig& model,
                           std::uint64_t rep_seed, std::size_t jobs = 1) {
  require_k(k, raw.size());
  const Dataset u = sample_replica(raw, p, training_seed(rep_seed), Role::kTraining);
  const Dataset v = sample_replica(raw, p, target_seed(rep_seed), Role::kTarget);
  const OverlapView view = overlap(u, v);
  CellResult out;
  out.m_tilde = view.m_tilde();
  if (out.m_tilde == 0) return out;

  const std::vector<std::size_t> hits_flags = [&] {
    std::vector<std::size_t> flags(view.m_tilde(), 0);
    switch (model.kind) {
      case ModelKind::kBinary: {
        const binary::BinaryParams params(binary_agreement(p), static_cast<double>(raw.dimension()), k);
        const Dataset ub = binary_view(u);
        const Dataset vb = binary_view(v);
        parallel_for(view.m_tilde(), jobs, [&](std::size_t i) {
          flags[i] = binary::topk_infer(*vb.find(view.users[i]), ub, params).contains(view.users[i]);
        });
        break;
      }
      case ModelKind::kDistance: {
        distance::DistanceConfig cfg = model.distance;
        if (model.idf) cfg.transform.weights = inverse_feature_frequency(u);
        parallel_for(view.m_tilde(), jobs, [&](std::size_t i) {
          flags[i] = distance::topk_infer_distance(*v.find(view.users[i]), u, k, cfg)
                         .contains(view.users[i]);
        });
        break;
      }
      case ModelKind::kDistribution: {
        FeatureTransform t = model.distance.transform;
        if (model.idf) t.weights = inverse_feature_frequency(u);
        parallel_for(view.m_tilde(), jobs, [&](std::size_t i) {
          try {
            flags[i] = distribution::topk_infer_cosine(*v.find(view.users[i]), u, k, t)
                           .contains(view.users[i]);
          } catch (const Error& e) {
            if (e.code() != Errc::kZeroVector) throw;
          }
        });
        break;
      }
    }
    return flags;
  }();
  for (std::size_t f : hits_flags) out.hits += f;
  out.delta = static_cast<double>(out.hits) / static_cast<double>(out.m_tilde);
  return out;
}

// K spec below 1 is a fraction of n, rounded to the nearest integer >= 1.
inline std::size_t resolve_k(double spec, std::size_t n) {
  if (!(spec > 0.0) || !std::isfinite(spec)) fail(Errc::kBadK, "K must be positive");
  std::size_t k;
  if (spec < 1.0) {
    k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec * static_cast<double>(n))));
  } else {
    if (spec != std::floor(spec)) fail(Errc::kBadK, "K >= 1 must be an integer");
    k = static_cast<std::size_t>(spec);
  }
  require_k(k, n);
  return k;
}

struct SweepConfig {
  std::vector<double> p_grid;
  std::vector<double> k_grid;  // absolute K, or fractions of n when < 1
  ModelConfig model;
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (p_grid.empty() || k_grid.empty()) fail(Errc::kInvalidArgument, "p and K grids must be nonempty");
    if (reps < 1) fail(Errc::kInvalidArgument, "reps must be >= 1");
    for (double p : p_grid) {
      if (!(p > 0.0 && p <= 1.0)) fail(Errc::kBadP, "every p must lie in (0, 1]");
    }
    model.distance.validate();
  }
};

// Seed of repetition `rep` at grid point p_index. K is not part of it: every
// K of one (p, rep) reads the same pair of replicas.
inline std::uint64_t rep_seed(std::uint64_t base, std::size_t p_index, std::size_t rep) {
  return derive_seed(base, {p_index, rep});
}

struct CellSummary {
  double p = 0.0;
  double k_spec = 0.0;
  std::size_t k = 0;
  double delta_mean = 0.0;
  double delta_stddev = 0.0;  // sample standard deviation; 0 for one rep
  double m_tilde_mean = 0.0;
  std::size_t reps_used = 0;  // reps with a nonempty overlap
  std::vector<std::optional<double>> per_rep;
  std::vector<std::size_t> m_tilde_per_rep;
  std::string error;  // set when the cell could not run
};

struct SweepResult {
  std::vector<CellSummary> cells;  // p-major, then K, in grid order

  const CellSummary& at(std::size_t p_index, std::size_t k_index, std::size_t k_count) const {
    return cells.at(p_index * k_count + k_index);
  }
};

inline SweepResult sweep(const Dataset& raw, const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t np = cfg.p_grid.size();
  const std::size_t nk = cfg.k_grid.size();

  // ranks[pi][rep]; an error string per p when the model rejects that p.
  std::vector<std::vector<std::vector<std::size_t>>> ranks(np, std::vector<std::vector<std::size_t>>(cfg.reps));
  std::vector<std::string> p_error(np);
  std::vector<std::string> job_error(np * cfg.reps);
  parallel_for(np * cfg.reps, cfg.jobs, [&](std::size_t job) {
    const std::size_t pi = job / cfg.reps;
    const std::size_t rep = job % cfg.reps;
    const double p = cfg.p_grid[pi];
    const std::uint64_t s = rep_seed(cfg.seed, pi, rep);
    try {
      const Dataset u = sample_replica(raw, p, training_seed(s), Role::kTraining);
      const Dataset v = sample_replica(raw, p, target_seed(s), Role::kTarget);
      ranks[pi][rep] = true_match_ranks(u, v, p, cfg.model);
    } catch (const Error& e) {
      job_error[job] = e.what();
    }
  });
  for (std::size_t job = 0; job < job_error.size(); ++job) {
    if (!job_error[job].empty() && p_error[job / cfg.reps].empty()) p_error[job / cfg.reps] = job_error[job];
  }

  SweepResult result;
  result.cells.reserve(np * nk);
  for (std::size_t pi = 0; pi < np; ++pi) {
    for (std::size_t ki = 0; ki < nk; ++ki) {
      CellSummary cell;
      cell.p = cfg.p_grid[pi];
      cell.k_spec = cfg.k_grid[ki];
      try {
        cell.k = resolve_k(cell.k_spec, raw.size());
      } catch (const Error& e) {
        cell.error = e.what();
      }
      if (cell.error.empty() && !p_error[pi].empty()) cell.error = p_error[pi];
      if (!cell.error.empty()) {
        cell.delta_mean = cell.delta_stddev = cell.m_tilde_mean = std::numeric_limits<double>::quiet_NaN();
        result.cells.push_back(std::move(cell));
        continue;
      }
      double sum = 0.0, m_sum = 0.0;
      for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        const CellResult r = delta_from_ranks(ranks[pi][rep], cell.k);
        cell.per_rep.push_back(r.delta);
        cell.m_tilde_per_rep.push_back(r.m_tilde);
        m_sum += static_cast<double>(r.m_tilde);
        if (r.delta) {
          sum += *r.delta;
          ++cell.reps_used;
        }
      }
      cell.m_tilde_mean = m_sum / static_cast<double>(cfg.reps);
      if (cell.reps_used == 0) {
        cell.delta_mean = cell.delta_stddev = std::numeric_limits<double>::quiet_NaN();
      } else {
        cell.delta_mean = sum / static_cast<double>(cell.reps_used);
        double ss = 0.0;
        for (const auto& d : cell.per_rep) {
          if (d) ss += (*d - cell.delta_mean) * (*d - cell.delta_mean);
        }
        cell.delta_stddev = cell.reps_used > 1 ? std::sqrt(ss / static_cast<double>(cell.reps_used - 1)) : 0.0;
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "p,K,delta_mean,delta_stddev,m_tilde_mean,reps_used\n";
  for (const auto& c : result.cells) {
    out << format_number(c.p) << ',' << c.k << ',' << format_number(c.delta_mean) << ','
        << format_number(c.delta_stddev) << ',' << format_number(c.m_tilde_mean) << ','
        << c.reps_used << '\n';
  }
}

inline nlohmann::ordered_json sweep_json(const SweepConfig& cfg, const SweepResult& result) {
  nlohmann::ordered_json j;
  j["model"] = std::string(to_string(cfg.model.kind));
  j["combiner"] = std::string(to_string(cfg.model.distance.transform.combiner));
  j["norm"] = cfg.model.distance.norm_p;
  j["idf"] = cfg.model.idf;
  j["p_grid"] = cfg.p_grid;
  j["k_grid"] = cfg.k_grid;
  j["reps"] = cfg.reps;
  j["seed"] = cfg.seed;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi) {
    for (std::size_t ki = 0; ki < cfg.k_grid.size(); ++ki) {
      const auto& c = result.at(pi, ki, cfg.k_grid.size());
      nlohmann::ordered_json cell;
      cell["p"] = c.p;
      cell["k"] = c.k;
      cell["reps_used"] = c.reps_used;
      auto& reps = cell["reps"] = nlohmann::ordered_json::array();
      for (std::size_t r = 0; r < c.per_rep.size(); ++r) {
        const std::uint64_t s = rep_seed(cfg.seed, pi, r);
        reps.push_back({{"rep_seed", s},
                        {"training_seed", training_seed(s)},
                        {"target_seed", target_seed(s)},
                        {"m_tilde", c.m_tilde_per_rep[r]},
                        {"delta", c.per_rep[r] ? nlohmann::ordered_json(*c.per_rep[r]) : nlohmann::ordered_json()}});
      }
      if (!c.error.empty()) cell["error"] = c.error;
      cells.push_back(std::move(cell));
    }
  }
  return j;
}

enum class TailSide { kUpper, kLower };

// Tail bound for a sum of n independent variables in [a, b] with mean mu:
// upper exp(-2 xi^2 mu^2 / (n (b-a)^2)), lower exp(-xi^2 mu^2 / (n (b-a)^2)).
inline double chernoff_upper(double n_vars, double a, double b, double mu, double xi, TailSide side) {
  if (!(a < b)) fail(Errc::kDegenerateBounds, "tail bound needs a < b");
  if (!(n_vars > 0.0)) fail(Errc::kInvalidArgument, "need at least one variable");
  if (!(mu >= 0.0)) fail(Errc::kInvalidArgument, "mu must be >= 0");
  if (!(xi >= 0.0)) fail(Errc::kBadXi, "xi must be >= 0");
  const double scale = (xi * mu) * (xi * mu) / (n_vars * (b - a) * (b - a));
  return std::exp(side == TailSide::kUpper ? -2.0 * scale : -scale);
}

// Keeps about `fraction` of the users, sampling each log2-degree bucket
// separately so the degree distribution is preserved.
inline Dataset stratified_user_subsample(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(Errc::kInvalidArgument, "fraction must lie in (0, 1]");
  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < d.size(); ++i) {
    buckets[static_cast<int>(std::log2(static_cast<double>(d.profiles()[i].size()) + 1.0))].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [bucket, members] : buckets) {
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    // Partial Fisher-Yates with the portable uniform01 draw.
    for (std::size_t j = 0; j < take; ++j) {
      const std::size_t r = j + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(members.size() - j));
      std::swap(members[j], members[std::min(r, members.size() - 1)]);
      keep.push_back(members[j]);
    }
  }
  std::sort(keep.begin(), keep.end());
  std::vector<SparseProfile> profiles;
  profiles.reserve(keep.size());
  for (std::size_t i : keep) profiles.push_back(d.profiles()[i]);
  if (profiles.empty()) fail(Errc::kEmptyDataset, "subsample kept no users");
  return Dataset(d.space_ptr(), std::move(profiles), d.role());
}

}  // namespace fdi::harness

#endif  // FDI_HARNESS_HPP_
