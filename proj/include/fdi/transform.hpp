#ifndef FDI_TRANSFORM_HPP_
#define FDI_TRANSFORM_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"

namespace fdi {

// g(f, w): how a raw feature value f and a per-feature model weight w are
// combined into one coordinate. Every combiner maps f = 0 to 0, so sparse
// vectors stay sparse.
enum class Combiner {
  kProduct,     // w * f
  kRaw,         // f
  kLogProduct,  // w * ln(1 + f)
};

inline std::string_view to_string(Combiner c) {
  switch (c) {
    case Combiner::kProduct: return "product";
    case Combiner::kRaw: return "raw";
    case Combiner::kLogProduct: return "logproduct";
  }
  return "unknown";
}

inline Combiner parse_combiner(std::string_view name) {
  if (name == "product") return Combiner::kProduct;
  if (name == "raw") return Combiner::kRaw;
  if (name == "logproduct") return Combiner::kLogProduct;
  fail(Errc::kInvalidArgument, "unknown combiner '" + std::string(name) + "'");
}

struct FeatureTransform {
  Combiner combiner = Combiner::kProduct;
  // Per-feature model weights w^i; null means every weight is 1.
  std::shared_ptr<const std::vector<double>> weights;

  double model_weight(std::uint32_t index) const {
    if (!weights) return 1.0;
    return index < weights->size() ? (*weights)[index] : 0.0;
  }

  double apply(double f, std::uint32_t index) const {
    switch (combiner) {
      case Combiner::kProduct: return model_weight(index) * f;
      case Combiner::kRaw: return f;
      case Combiner::kLogProduct: return model_weight(index) * std::log1p(f);
    }
    return f;
  }

  bool is_identity() const noexcept {
    return combiner == Combiner::kRaw || (combiner == Combiner::kProduct && !weights);
  }
};

// The combined vector <g(f^i, w^i)> of a profile.
inline SparseProfile combine(const SparseProfile& x, const FeatureTransform& t) {
  if (t.is_identity()) return x;
  std::vector<Entry> out;
  out.reserve(x.size());
  for (const Entry& e : x.entries()) out.push_back({e.index, t.apply(e.weight, e.index)});
  return SparseProfile(x.user(), std::move(out));
}

inline Dataset combine(const Dataset& d, const FeatureTransform& t) {
  if (t.is_identity()) return d;
  std::vector<SparseProfile> out;
  out.reserve(d.size());
  for (const auto& p : d.profiles()) out.push_back(combine(p, t));
  return Dataset(d.space_ptr(), std::move(out), d.role());
}

// ln(n / degree) per feature, learned from a training dataset. Features no
// training user holds get weight 0.
inline std::shared_ptr<const std::vector<double>> inverse_feature_frequency(const Dataset& training) {
  const auto degree = feature_degrees(training);
  auto w = std::make_shared<std::vector<double>>(degree.size(), 0.0);
  const double n = static_cast<double>(training.size());
  for (std::size_t i = 0; i < degree.size(); ++i) {
    if (degree[i] > 0) (*w)[i] = std::log(n / static_cast<double>(degree[i]));
  }
  return w;
}

inline void validate_weights(const std::vector<double>& weights) {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(Errc::kInvalidArgument, "model weights must be finite and >= 0");
  }
}

}  // namespace fdi

#endif  // FDI_TRANSFORM_HPP_
