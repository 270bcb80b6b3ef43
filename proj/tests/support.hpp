#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "interdoc/interdoc.hpp"

namespace support {

inline interdoc::Section text_section(std::string id, std::string heading, std::string text) {
  return interdoc::Section{std::move(id), std::move(heading), {{interdoc::SegmentKind::text, std::move(text)}}};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("interdoc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << body;
}

/// Small corpus and queries where each document has a private keyword that
/// also appears in its queries.
struct Separable {
  interdoc::Corpus corpus;
  std::vector<interdoc::Query> queries;
  std::vector<interdoc::QRel> qrels;
};

inline Separable separable(std::size_t docs, std::size_t sections) {
  Separable s;
  for (std::size_t d = 0; d < docs; ++d) {
    interdoc::Document doc{"d" + std::to_string(d), "Doc " + std::to_string(d), {}};
    for (std::size_t k = 0; k < sections; ++k) {
      doc.sections.push_back(text_section("s" + std::to_string(k), k == 0 ? "" : "part",
                                          "key" + std::to_string(d) + " sec" + std::to_string(k) + " common words"));
    }
    s.corpus.push_back(std::move(doc));
    const std::size_t gold = d % sections;
    const std::string qid = "q" + std::to_string(d);
    s.queries.push_back({qid, "key" + std::to_string(d) + " sec" + std::to_string(gold) + "?", {}});
    s.qrels.push_back({qid, "d" + std::to_string(d), "s" + std::to_string(gold)});
  }
  return s;
}

}  // namespace support
