#ifndef FDI_INGEST_HPP_
#define FDI_INGEST_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fdi/binary_model.hpp"
#include "fdi/dataset.hpp"
#include "fdi/io.hpp"
#include "fdi/rng.hpp"

namespace fdi::ingest {

struct MalformedLine {
  std::size_t line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<Edge> edges;
  std::vector<MalformedLine> malformed;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool is_skippable(std::string_view line) {
  return line.empty() || line.front() == '#' ||
         line.find_first_not_of(" \t") == std::string_view::npos;
}

inline void report_malformed(const std::string& path, std::vector<MalformedLine>& malformed,
                             bool strict) {
  if (strict && !malformed.empty()) {
    const auto& m = malformed.front();
    fail(Errc::kParseError, path + ":" + std::to_string(m.line) + ": " + m.reason + " (" +
                                std::to_string(malformed.size()) + " malformed line(s))");
  }
}

}  // namespace detail

// "user<TAB>feature[<TAB>weight]" per line; '#' lines and blank lines are
// ignored. Malformed lines are collected, or abort the parse when strict.
inline ParseResult parse_tsv(const std::filesystem::path& path, bool strict = false) {
  GzLineReader reader(path);
  ParseResult out;
  std::string line;
  while (reader.next(line)) {
    if (detail::is_skippable(line)) continue;
    const auto fields = detail::split(line, '\t');
    auto bad = [&](std::string reason) { out.malformed.push_back({reader.line_number(), std::move(reason)}); };
    if (fields.size() < 2 || fields.size() > 3) {
      bad("expected 2 or 3 tab-separated fields, got " + std::to_string(fields.size()));
      continue;
    }
    if (fields[0].empty() || fields[1].empty()) {
      bad("empty user or feature");
      continue;
    }
    double weight = 1.0;
    if (fields.size() == 3) {
      const auto w = detail::parse_double(fields[2]);
      if (!w || !(*w >= 0.0) || !std::isfinite(*w)) {
        bad("weight '" + std::string(fields[2]) + "' is not a finite number >= 0");
        continue;
      }
      weight = *w;
    }
    out.edges.push_back({std::string(fields[0]), std::string(fields[1]), weight});
  }
  detail::report_malformed(reader.path(), out.malformed, strict);
  return out;
}

// ---- SNAP ego networks -----------------------------------------------------

namespace detail {

// "0.feat.gz" -> ("0", ".feat").
inline std::pair<std::string, std::string> snap_stem(const std::filesystem::path& path) {
  std::filesystem::path p = path.filename();
  if (p.extension() == ".gz") p = p.stem();
  return {p.stem().string(), p.extension().string()};
}

inline std::optional<std::vector<std::string>> read_featnames(const std::filesystem::path& dir,
                                                              const std::string& ego) {
  for (const char* suffix : {".featnames", ".featnames.gz"}) {
    const auto path = dir / (ego + suffix);
    if (!std::filesystem::exists(path)) continue;
    GzLineReader reader(path);
    std::vector<std::string> names;
    std::string line;
    while (reader.next(line)) {
      if (line.empty()) continue;
      const auto space = line.find(' ');
      if (space == std::string::npos) {
        fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) +
                                    ": expected '<index> <name>'");
      }
      names.push_back(line.substr(space + 1));
    }
    return names;
  }
  return std::nullopt;
}

}  // namespace detail

// Edges from SNAP .feat ("node b1 ... bF") and .egofeat ("b1 ... bF", node =
// ego id) files. Names come from the sibling .featnames file, else
// "<ego>:<column>". Files from several egos are unioned; a (node, feature)
// pair seen twice is kept once. Nodes whose row is all zero get a
// zero-weight edge so they stay in the dataset.
inline std::vector<Edge> parse_snap_ego(const std::vector<std::filesystem::path>& files) {
  std::vector<Edge> edges;
  std::unordered_set<std::string> seen;
  std::map<std::string, std::optional<std::vector<std::string>>> names_cache;
  std::string line;
  for (const auto& path : files) {
    const auto [ego, ext] = detail::snap_stem(path);
    const bool ego_file = ext == ".egofeat";
    if (!ego_file && ext != ".feat") fail(Errc::kInvalidArgument, "not a .feat/.egofeat file: " + path.string());
    auto cached = names_cache.find(ego);
    if (cached == names_cache.end()) {
      cached = names_cache.emplace(ego, detail::read_featnames(path.parent_path(), ego)).first;
    }
    const auto& names = cached->second;

    GzLineReader reader(path);
    while (reader.next(line)) {
      if (detail::is_skippable(line)) continue;
      std::vector<std::string_view> tokens;
      for (auto tok : detail::split(line, ' ')) {
        if (!tok.empty()) tokens.push_back(tok);
      }
      std::string node = ego;
      std::size_t first = 0;
      if (!ego_file) {
        node = std::string(tokens.front());
        first = 1;
      }
      const std::size_t width = tokens.size() - first;
      if (names && width != names->size()) {
        fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) + ": row has " +
                                    std::to_string(width) + " columns, featnames lists " +
                                    std::to_string(names->size()));
      }
      bool any = false;
      for (std::size_t c = 0; c < width; ++c) {
        const auto bit = tokens[first + c];
        if (bit == "0") continue;
        if (bit != "1") {
          fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) +
                                      ": feature value '" + std::string(bit) + "' is not 0/1");
        }
        any = true;
        std::string feature = names ? (*names)[c] : ego + ":" + std::to_string(c);
        std::string key = node;
        key.push_back('\x1f');
        key += feature;
        if (seen.insert(std::move(key)).second) edges.push_back({node, std::move(feature), 1.0});
      }
      if (!any) edges.push_back({node, std::string(), 0.0});
    }
  }
  return edges;
}

// Every .feat/.egofeat file directly inside `dir`, sorted by name.
inline std::vector<std::filesystem::path> snap_files_in(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = detail::snap_stem(entry.path()).second;
    if (ext == ".feat" || ext == ".egofeat") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---- HTTP logs -------------------------------------------------------------

struct HttpRecord {
  std::string user;
  std::string url;
};

// "user<TAB>url" per line.
inline std::vector<HttpRecord> parse_http_log(const std::filesystem::path& path, bool strict = false,
                                              std::vector<MalformedLine>* malformed_out = nullptr) {
  GzLineReader reader(path);
  std::vector<HttpRecord> out;
  std::vector<MalformedLine> malformed;
  std::string line;
  while (reader.next(line)) {
    if (detail::is_skippable(line)) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      malformed.push_back({reader.line_number(), "expected 'user<TAB>url'"});
      continue;
    }
    out.push_back({std::string(fields[0]), std::string(fields[1])});
  }
  detail::report_malformed(reader.path(), malformed, strict);
  if (malformed_out != nullptr) *malformed_out = std::move(malformed);
  return out;
}

struct SplitUrl {
  std::string host;
  std::string rest;  // path and query without the leading '/'; no fragment
};

// Accepts "scheme://host/path?q", "host/path?q" and "//host/path". Returns
// nullopt when there is no host or the URL contains whitespace.
inline std::optional<SplitUrl> split_url(std::string_view url) {
  if (url.find_first_of(" \t\r\n") != std::string_view::npos) return std::nullopt;
  if (const auto scheme = url.find("://"); scheme != std::string_view::npos) {
    url.remove_prefix(scheme + 3);
  } else if (url.starts_with("//")) {
    url.remove_prefix(2);
  }
  if (const auto hash = url.find('#'); hash != std::string_view::npos) url = url.substr(0, hash);
  const auto end = url.find_first_of("/?");
  SplitUrl out;
  out.host = std::string(url.substr(0, end));
  if (out.host.empty()) return std::nullopt;
  if (end != std::string_view::npos) {
    std::string_view rest = url.substr(end);
    if (rest.front() == '/') rest.remove_prefix(1);
    out.rest = std::string(rest);
  }
  return out;
}

inline constexpr std::string_view kPathDelimiters = "/?=&";

// Non-empty tokens of `rest` split on any delimiter character, verbatim.
inline std::vector<std::string> tokenize_path(std::string_view rest,
                                              std::string_view delimiters = kPathDelimiters) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= rest.size()) {
    const std::size_t pos = rest.find_first_of(delimiters, start);
    const std::size_t stop = pos == std::string_view::npos ? rest.size() : pos;
    if (stop > start) out.emplace_back(rest.substr(start, stop - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct HttpOptions {
  bool domain = true;
  bool path = true;
  std::string delimiters{kPathDelimiters};
};

struct HttpFeatures {
  std::vector<Edge> edges;  // weights are occurrence counts
  std::size_t skipped = 0;  // records with an unparseable URL
};

// Per record: one "D:<host>" feature and one "P:<token>" per path token.
inline HttpFeatures extract_http_features(const std::vector<HttpRecord>& records,
                                          const HttpOptions& opt = {}) {
  std::map<std::pair<std::string, std::string>, double> counts;
  HttpFeatures out;
  for (const auto& r : records) {
    const auto parts = split_url(r.url);
    if (!parts) {
      ++out.skipped;
      continue;
    }
    if (opt.domain) counts[{r.user, "D:" + parts->host}] += 1.0;
    if (opt.path) {
      for (auto& tok : tokenize_path(parts->rest, opt.delimiters)) counts[{r.user, "P:" + tok}] += 1.0;
    }
    // A user with no features in the enabled namespaces is still present.
    counts.try_emplace({r.user, std::string()}, 0.0);
  }
  out.edges.reserve(counts.size());
  for (auto& [key, count] : counts) out.edges.push_back({key.first, key.second, count});
  return out;
}

// ---- Synthetic data --------------------------------------------------------

struct SynthSpec {
  std::size_t n_users = 0;
  std::size_t n_features = 0;
  double p_feature = 0.5;
  std::optional<std::size_t> gamma_separation;  // minimum pairwise XOR distance
  std::uint64_t seed = 0;
  std::size_t max_attempts = 10000;  // per user

  void validate() const {
    if (n_users == 0 || n_features == 0) fail(Errc::kInvalidArgument, "n_users and n_features must be positive");
    if (!(p_feature > 0.0 && p_feature < 1.0)) fail(Errc::kBadP, "p_feature must lie in (0, 1)");
    if (gamma_separation && *gamma_separation > n_features) {
      fail(Errc::kInvalidArgument, "gamma_separation cannot exceed n_features");
    }
    if (max_attempts == 0) fail(Errc::kInvalidArgument, "max_attempts must be positive");
  }
};

inline std::string padded_name(char prefix, std::size_t i, std::size_t count) {
  const std::size_t width = std::to_string(count == 0 ? 0 : count - 1).size();
  std::string digits = std::to_string(i);
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

// Independent Bernoulli(p_feature) bits per (user, feature). With a
// separation target, each user is redrawn until it is at least that far
// from every earlier user.
inline Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<std::string> ids;
  ids.reserve(spec.n_features);
  for (std::size_t f = 0; f < spec.n_features; ++f) ids.push_back(padded_name('f', f, spec.n_features));
  auto space = std::make_shared<const FeatureSpace>(std::move(ids));

  Rng rng(spec.seed);
  std::vector<SparseProfile> profiles;
  profiles.reserve(spec.n_users);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::string name = padded_name('u', u, spec.n_users);
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == spec.max_attempts) {
        fail(Errc::kInfeasibleSeparation, "could not place user " + name + " at separation " +
                                              std::to_string(*spec.gamma_separation) + " within " +
                                              std::to_string(spec.max_attempts) + " attempts");
      }
      std::vector<Entry> entries;
      for (std::size_t f = 0; f < spec.n_features; ++f) {
        if (bernoulli(rng, spec.p_feature)) entries.push_back({static_cast<std::uint32_t>(f), 1.0});
      }
      SparseProfile candidate(name, std::move(entries));
      const bool ok =
          !spec.gamma_separation ||
          std::all_of(profiles.begin(), profiles.end(), [&](const SparseProfile& other) {
            return binary::gamma_xor(candidate, other) >= *spec.gamma_separation;
          });
      if (ok) {
        profiles.push_back(std::move(candidate));
        break;
      }
    }
  }
  return Dataset(std::move(space), std::move(profiles), Role::kTraining);
}

}  // namespace fdi::ingest

#endif  // FDI_INGEST_HPP_
