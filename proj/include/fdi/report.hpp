#ifndef FDI_REPORT_HPP_
#define FDI_REPORT_HPP_

#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fdi {

// Shortest round-trip decimal form; infinities and NaN spelled out.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

enum class ModelKind { kBinary, kDistance, kDistribution };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBinary: return "binary";
    case ModelKind::kDistance: return "distance";
    case ModelKind::kDistribution: return "distribution";
  }
  return "unknown";
}

// One target user's verdict under a (delta, K) condition checker.
struct QuantRow {
  std::string user;
  std::vector<double> stats;  // named by QuantReport::stat_names
  double threshold = 0.0;
  bool pass = false;
  bool assessable = true;
};

// Per-user condition verdicts plus the aggregate (delta, K) outcome.
struct QuantReport {
  ModelKind model = ModelKind::kBinary;
  std::vector<std::string> stat_names;
  std::vector<QuantRow> rows;
  std::size_t k = 0;
  double delta = 0.0;
  std::size_t m_tilde = 0;
  std::size_t required = 0;  // floor(delta * m_tilde)
  std::size_t passing = 0;
  std::size_t not_assessable = 0;
  bool holds = false;

  double delta_achieved() const {
    return m_tilde == 0 ? 0.0 : static_cast<double>(passing) / static_cast<double>(m_tilde);
  }
};

// Counts passes and settles the aggregate verdict; rows must be filled.
inline void finalize(QuantReport& report) {
  report.passing = 0;
  report.not_assessable = 0;
  for (const auto& row : report.rows) {
    if (!row.assessable) {
      ++report.not_assessable;
    } else if (row.pass) {
      ++report.passing;
    }
  }
  report.holds = report.passing >= report.required;
}

inline std::size_t floor_delta_m(double delta, std::size_t m_tilde) {
  // The small epsilon keeps e.g. 0.3 * 10 from flooring to 2.
  return static_cast<std::size_t>(std::floor(delta * static_cast<double>(m_tilde) + 1e-9));
}

inline void write_quant_csv(std::ostream& out, const QuantReport& report) {
  out << "user";
  for (const auto& name : report.stat_names) out << ',' << name;
  out << ",threshold,pass\n";
  for (const auto& row : report.rows) {
    out << row.user;
    for (double s : row.stats) out << ',' << format_number(s);
    out << ',' << format_number(row.threshold) << ','
        << (!row.assessable ? "na" : (row.pass ? "true" : "false")) << '\n';
  }
}

inline nlohmann::ordered_json quant_summary_json(const QuantReport& report) {
  nlohmann::ordered_json j;
  j["model"] = std::string(to_string(report.model));
  j["k"] = report.k;
  j["delta"] = report.delta;
  j["m_tilde"] = report.m_tilde;
  j["required"] = report.required;
  j["passing"] = report.passing;
  j["not_assessable"] = report.not_assessable;
  j["delta_achieved"] = report.delta_achieved();
  j["inferable"] = report.holds;
  return j;
}

}  // namespace fdi

#endif  // FDI_REPORT_HPP_
