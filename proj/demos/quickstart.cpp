// Builds a small synthetic population, samples training/target replicas and
// asks each model how many target users are recoverable.

#include <cstdio>

#include "fdi/fdi.hpp"

int main() {
  fdi::ingest::SynthSpec spec;
  spec.n_users = 60;
  spec.n_features = 400;
  spec.p_feature = 0.05;
  spec.seed = 7;
  const fdi::Dataset raw = fdi::ingest::synth_generate(spec);

  for (const auto kind : {fdi::ModelKind::kBinary, fdi::ModelKind::kDistance,
                          fdi::ModelKind::kDistribution}) {
    fdi::harness::ModelConfig model;
    model.kind = kind;
    for (const double p : {0.6, 0.9}) {
      const auto cell = fdi::harness::run_cell(raw, p, 1, model, fdi::derive_seed(1, {0}));
      std::printf("%-12s p=%.1f  m=%3zu  top-1 hits=%3zu  delta=%.3f\n",
                  std::string(fdi::to_string(kind)).c_str(), p, cell.m_tilde, cell.hits,
                  cell.delta.value_or(0.0));
    }
  }

  // Sufficient-condition check for the binary model on the raw data.
  const fdi::binary::BinaryParams params(0.9, static_cast<double>(raw.dimension()), 1, 1.0);
  const auto report = fdi::binary::delta_k_condition(raw, raw.with_role(fdi::Role::kTarget), params);
  std::printf("binary condition: %zu of %zu users certified (need %zu)\n", report.passing,
              report.m_tilde, report.required);
  return 0;
}
