#ifndef FDI_IO_HPP_
#define FDI_IO_HPP_

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "fdi/error.hpp"

namespace fdi {

// Line reader over plain or gzip-compressed files (zlib detects which).
// Strips the trailing '\n' and any '\r'.
class GzLineReader {
 public:
  explicit GzLineReader(const std::filesystem::path& path) : path_(path.string()) {
    file_ = gzopen(path_.c_str(), "rb");
    if (file_ == nullptr) fail(Errc::kIoError, "cannot open '" + path_ + "'");
    gzbuffer(file_, 1 << 17);
  }
  GzLineReader(const GzLineReader&) = delete;
  GzLineReader& operator=(const GzLineReader&) = delete;
  ~GzLineReader() {
    if (file_ != nullptr) gzclose(file_);
  }

  bool next(std::string& line) {
    line.clear();
    char buf[8192];
    bool got = false;
    while (gzgets(file_, buf, sizeof(buf)) != nullptr) {
      got = true;
      line.append(buf);
      if (!line.empty() && line.back() == '\n') break;
    }
    if (!got) {
      int err = Z_OK;
      const char* msg = gzerror(file_, &err);
      if (err != Z_OK && err != Z_STREAM_END) fail(Errc::kIoError, "read error in '" + path_ + "': " + msg);
      return false;
    }
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    ++line_number_;
    return true;
  }

  std::size_t line_number() const noexcept { return line_number_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  gzFile file_ = nullptr;
  std::size_t line_number_ = 0;
};

// Writes through a sibling temp file and renames it into place, so readers
// never see a partial file.
inline void write_atomically(const std::filesystem::path& target,
                             const std::function<void(std::ostream&)>& body) {
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::kIoError, "cannot write '" + tmp.string() + "'");
    body(out);
    out.flush();
    if (!out) fail(Errc::kIoError, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(Errc::kIoError, "cannot move output into '" + target.string() + "'");
  }
}

}  // namespace fdi

#endif  // FDI_IO_HPP_
