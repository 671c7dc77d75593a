#ifndef FDI_ARCHIVE_HPP_
#define FDI_ARCHIVE_HPP_

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fdi/dataset.hpp"
#include "fdi/io.hpp"
#include "fdi/report.hpp"

// Plain-text dataset archive:
//
//   fdi-dataset 1
//   role training|target
//   features <N>
//   <feature id>            (N lines, index order)
//   users <n>
//   <user>\t<idx>:<w> ...   (n lines, sorted by user, entries by index)
//
// Weights use the shortest round-trip decimal form, so write/read is exact.
namespace fdi::archive {

inline constexpr std::string_view kMagic = "fdi-dataset 1";

inline void write(std::ostream& out, const Dataset& d) {
  out << kMagic << '\n' << "role " << to_string(d.role()) << '\n';
  out << "features " << d.dimension() << '\n';
  for (const auto& id : d.space().ids()) {
    if (id.find_first_of("\r\n") != std::string::npos) {
      fail(Errc::kInvalidArgument, "feature id contains a line break");
    }
    out << id << '\n';
  }
  out << "users " << d.size() << '\n';
  for (const auto& p : d.profiles()) {
    if (p.user().find_first_of("\t\r\n") != std::string::npos) {
      fail(Errc::kInvalidArgument, "user id '" + p.user() + "' contains a tab or line break");
    }
    out << p.user() << '\t';
    bool first = true;
    for (const Entry& e : p.entries()) {
      if (!first) out << ' ';
      first = false;
      out << e.index << ':' << format_number(e.weight);
    }
    out << '\n';
  }
}

namespace detail {

template <class T>
T parse_number(std::string_view s, const GzLineReader& reader) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) +
                                ": bad number '" + std::string(s) + "'");
  }
  return v;
}

inline std::string_view expect_prefix(std::string_view line, std::string_view prefix,
                                      const GzLineReader& reader) {
  if (!line.starts_with(prefix)) {
    fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) +
                                ": expected '" + std::string(prefix) + "'");
  }
  return line.substr(prefix.size());
}

}  // namespace detail

inline Dataset read(const std::filesystem::path& path) {
  GzLineReader reader(path);
  std::string line;
  auto next = [&]() -> std::string_view {
    if (!reader.next(line)) fail(Errc::kParseError, reader.path() + ": unexpected end of archive");
    return line;
  };
  if (next() != kMagic) fail(Errc::kParseError, reader.path() + ": not a dataset archive");

  const std::string_view role_name = detail::expect_prefix(next(), "role ", reader);
  Role role;
  if (role_name == "training") {
    role = Role::kTraining;
  } else if (role_name == "target") {
    role = Role::kTarget;
  } else {
    fail(Errc::kParseError, reader.path() + ": unknown role '" + std::string(role_name) + "'");
  }

  const auto n_features =
      detail::parse_number<std::size_t>(detail::expect_prefix(next(), "features ", reader), reader);
  std::vector<std::string> ids;
  ids.reserve(n_features);
  for (std::size_t i = 0; i < n_features; ++i) ids.emplace_back(next());
  auto space = std::make_shared<const FeatureSpace>(std::move(ids));

  const auto n_users =
      detail::parse_number<std::size_t>(detail::expect_prefix(next(), "users ", reader), reader);
  std::vector<SparseProfile> profiles;
  profiles.reserve(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    const std::string_view row = next();
    const auto tab = row.find('\t');
    if (tab == std::string_view::npos) {
      fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) + ": missing tab");
    }
    std::vector<Entry> entries;
    std::string_view rest = row.substr(tab + 1);
    while (!rest.empty()) {
      const auto space_pos = rest.find(' ');
      const std::string_view tok = rest.substr(0, space_pos);
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        fail(Errc::kParseError, reader.path() + ":" + std::to_string(reader.line_number()) +
                                    ": expected '<index>:<weight>'");
      }
      entries.push_back({detail::parse_number<std::uint32_t>(tok.substr(0, colon), reader),
                         detail::parse_number<double>(tok.substr(colon + 1), reader)});
      rest = space_pos == std::string_view::npos ? std::string_view() : rest.substr(space_pos + 1);
    }
    profiles.emplace_back(std::string(row.substr(0, tab)), std::move(entries));
  }
  if (reader.next(line) && !line.empty()) fail(Errc::kParseError, reader.path() + ": trailing data");
  return Dataset(std::move(space), std::move(profiles), role);
}

inline void save(const std::filesystem::path& path, const Dataset& d) {
  write_atomically(path, [&](std::ostream& out) { write(out, d); });
}

}  // namespace fdi::archive

#endif  // FDI_ARCHIVE_HPP_
