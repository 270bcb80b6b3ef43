#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "interdoc/corpus.hpp"
#include "interdoc/error.hpp"

namespace interdoc {

using ojson = nlohmann::ordered_json;

namespace io_detail {

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, p.string(), "cannot open for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, p.string(), "cannot open for writing");
  return out;
}

inline const ojson& field(const ojson& obj, const char* key, ojson::value_t type, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::SchemaError, "line=" + std::to_string(line), std::string("missing \"") + key + "\"");
  }
  if (it->type() != type) {
    throw Error(ErrorKind::SchemaError, "line=" + std::to_string(line), std::string("wrong type for \"") + key + "\"");
  }
  return *it;
}

inline std::string str_field(const ojson& obj, const char* key, std::size_t line) {
  return field(obj, key, ojson::value_t::string, line).get<std::string>();
}

template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::is_blank(line)) continue;
    fn(line, n);
  }
}

inline ojson parse_line(const std::string& line, std::size_t n) {
  ojson j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::SchemaError, "line=" + std::to_string(n), "not a JSON object");
  }
  return j;
}

}  // namespace io_detail

inline ojson to_json(const Document& d) {
  ojson sections = ojson::array();
  for (const auto& s : d.sections) {
    ojson segs = ojson::array();
    for (const auto& g : s.segments) {
      segs.push_back(ojson{{"kind", std::string(to_string(g.kind))}, {"content", g.content}});
    }
    sections.push_back(ojson{{"section_id", s.section_id}, {"heading", s.heading}, {"segments", std::move(segs)}});
  }
  return ojson{{"doc_id", d.doc_id}, {"title", d.title}, {"sections", std::move(sections)}};
}

inline Document document_from_json(const ojson& j, std::size_t line) {
  using io_detail::field;
  using io_detail::str_field;
  Document d;
  d.doc_id = str_field(j, "doc_id", line);
  d.title = str_field(j, "title", line);
  for (const auto& sj : field(j, "sections", ojson::value_t::array, line)) {
    if (!sj.is_object()) throw Error(ErrorKind::SchemaError, "line=" + std::to_string(line), "section is not an object");
    Section s;
    s.section_id = str_field(sj, "section_id", line);
    s.heading = str_field(sj, "heading", line);
    for (const auto& gj : field(sj, "segments", ojson::value_t::array, line)) {
      if (!gj.is_object()) throw Error(ErrorKind::SchemaError, "line=" + std::to_string(line), "segment is not an object");
      auto kind = segment_kind_from(str_field(gj, "kind", line));
      if (!kind) throw Error(ErrorKind::SchemaError, "line=" + std::to_string(line), "unknown segment kind");
      s.segments.push_back(Segment{*kind, str_field(gj, "content", line)});
    }
    d.sections.push_back(std::move(s));
  }
  return d;
}

inline ojson to_json(const Query& q) {
  return ojson{{"query_id", q.query_id}, {"text", q.text}, {"image_refs", q.image_refs}};
}

inline Query query_from_json(const ojson& j, std::size_t line) {
  using io_detail::field;
  using io_detail::str_field;
  Query q;
  q.query_id = str_field(j, "query_id", line);
  q.text = str_field(j, "text", line);
  if (j.contains("image_refs")) {
    for (const auto& r : field(j, "image_refs", ojson::value_t::array, line)) {
      if (!r.is_string()) throw Error(ErrorKind::SchemaError, "line=" + std::to_string(line), "image_refs must hold strings");
      q.image_refs.push_back(r.get<std::string>());
    }
  }
  return q;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  auto out = io_detail::open_out(path);
  for (const auto& d : corpus.documents()) out << to_json(d).dump() << '\n';
  if (!out) throw Error(ErrorKind::Io, path.string(), "write failed");
}

/// Loads and validates a corpus; schema problems carry the 1-based line number.
inline Corpus read_corpus(const std::filesystem::path& path) {
  Corpus c;
  io_detail::for_each_line(path, [&](const std::string& line, std::size_t n) {
    Document d = document_from_json(io_detail::parse_line(line, n), n);
    validate_document(d);
    if (c.find(d.doc_id) != nullptr) {
      throw Error(ErrorKind::SchemaError, "line=" + std::to_string(n), "duplicate doc_id " + d.doc_id);
    }
    c.push_back(std::move(d));
  });
  return c;
}

inline void write_queries(const std::vector<Query>& queries, const std::filesystem::path& path) {
  auto out = io_detail::open_out(path);
  for (const auto& q : queries) out << to_json(q).dump() << '\n';
}

inline std::vector<Query> read_queries(const std::filesystem::path& path) {
  std::vector<Query> out;
  io_detail::for_each_line(path, [&](const std::string& line, std::size_t n) {
    Query q = query_from_json(io_detail::parse_line(line, n), n);
    validate_query(q);
    out.push_back(std::move(q));
  });
  return out;
}

inline void write_qrels(const std::vector<QRel>& qrels, const std::filesystem::path& path) {
  auto out = io_detail::open_out(path);
  for (const auto& r : qrels) {
    out << r.query_id << '\t' << r.doc_id << '\t' << (r.section_id ? *r.section_id : "-") << '\n';
  }
}

/// Reads query_id TAB doc_id TAB section_id (or "-").
inline std::vector<QRel> read_qrels(const std::filesystem::path& path) {
  std::vector<QRel> out;
  io_detail::for_each_line(path, [&](const std::string& line, std::size_t n) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty()) {
      throw Error(ErrorKind::SchemaError, "line=" + std::to_string(n), "expected 3 tab-separated columns");
    }
    QRel r{cols[0], cols[1], std::nullopt};
    if (cols[2] != "-") r.section_id = cols[2];
    out.push_back(std::move(r));
  });
  return out;
}

inline std::vector<QRel> read_qrels(const std::filesystem::path& path, const Corpus& corpus,
                                    const std::vector<Query>& queries) {
  auto qrels = read_qrels(path);
  validate_qrels(qrels, corpus, queries);
  return qrels;
}

}  // namespace interdoc
