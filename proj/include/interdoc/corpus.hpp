#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "interdoc/error.hpp"
#include "interdoc/text.hpp"

namespace interdoc {

enum class SegmentKind { text, image, table };

constexpr std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::text: return "text";
    case SegmentKind::image: return "image";
    case SegmentKind::table: return "table";
  }
  return "text";
}

inline std::optional<SegmentKind> segment_kind_from(std::string_view s) {
  if (s == "text") return SegmentKind::text;
  if (s == "image") return SegmentKind::image;
  if (s == "table") return SegmentKind::table;
  return std::nullopt;
}

/// One piece of content. Images hold "src | alt"; tables hold normalized markup.
struct Segment {
  SegmentKind kind = SegmentKind::text;
  std::string content;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Section {
  std::string section_id;
  std::string heading;  // empty for the lead section
  std::vector<Segment> segments;

  friend bool operator==(const Section&, const Section&) = default;
};

struct Document {
  std::string doc_id;
  std::string title;
  std::vector<Section> sections;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Query {
  std::string query_id;
  std::string text;
  std::vector<std::string> image_refs;

  friend bool operator==(const Query&, const Query&) = default;
};

struct QRel {
  std::string query_id;
  std::string doc_id;
  std::optional<std::string> section_id;

  friend bool operator==(const QRel&, const QRel&) = default;
};

enum class DocFormat { entity, summary, text_only, single_image, interleaved };

inline constexpr DocFormat kAllFormats[] = {DocFormat::entity, DocFormat::summary,
                                            DocFormat::text_only, DocFormat::single_image,
                                            DocFormat::interleaved};

constexpr std::string_view to_string(DocFormat f) {
  switch (f) {
    case DocFormat::entity: return "entity";
    case DocFormat::summary: return "summary";
    case DocFormat::text_only: return "text_only";
    case DocFormat::single_image: return "single_image";
    case DocFormat::interleaved: return "interleaved";
  }
  return "interleaved";
}

inline std::optional<DocFormat> doc_format_from(std::string_view s) {
  for (auto f : kAllFormats) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

inline void validate_segment(const Segment& seg, std::string_view owner) {
  if (text::is_blank(seg.content)) {
    throw Error(ErrorKind::EmptySegment, std::string(owner));
  }
  if (seg.kind == SegmentKind::table) {
    std::string_view c = seg.content;
    if (!c.starts_with("<table") || !c.ends_with("</table>")) {
      throw Error(ErrorKind::InvalidDocument, std::string(owner),
                  "table segment must be <table ...>...</table>");
    }
  }
}

/// Throws on the first broken invariant, naming the offending id.
inline void validate_document(const Document& doc) {
  if (doc.sections.empty()) throw Error(ErrorKind::EmptySections, doc.doc_id);
  std::unordered_set<std::string_view> ids;
  for (const auto& s : doc.sections) {
    if (!ids.insert(s.section_id).second) {
      throw Error(ErrorKind::DuplicateSectionId, s.section_id);
    }
    if (s.segments.empty()) throw Error(ErrorKind::EmptySegment, s.section_id);
    for (const auto& seg : s.segments) validate_segment(seg, s.section_id);
  }
}

inline void validate_query(const Query& q) {
  if (text::is_blank(q.text) && q.image_refs.empty()) {
    throw Error(ErrorKind::InvalidQuery, q.query_id, "query needs text or an image");
  }
}

namespace detail {

inline Section title_section(const Document& doc) {
  const std::string& t = text::is_blank(doc.title) ? doc.doc_id : doc.title;
  return Section{"title", "", {Segment{SegmentKind::text, t}}};
}

inline Section text_segments_of(const Section& s) {
  Section out{s.section_id, s.heading, {}};
  for (const auto& seg : s.segments) {
    if (seg.kind == SegmentKind::text) out.segments.push_back(seg);
  }
  return out;
}

}  // namespace detail

/// Produces the document view used by one arm of the format ablation.
/// Sections emptied by the filter are dropped; a document that loses every
/// section is represented by its title.
inline Document apply_format(const Document& doc, DocFormat fmt) {
  if (fmt == DocFormat::interleaved) return doc;

  Document out{doc.doc_id, doc.title, {}};
  switch (fmt) {
    case DocFormat::entity:
      break;
    case DocFormat::summary:
      if (!doc.sections.empty()) out.sections.push_back(detail::text_segments_of(doc.sections[0]));
      break;
    case DocFormat::text_only:
    case DocFormat::single_image: {
      bool image_taken = fmt == DocFormat::text_only;
      for (const auto& s : doc.sections) {
        Section kept = detail::text_segments_of(s);
        if (!image_taken) {
          for (const auto& seg : s.segments) {
            if (seg.kind == SegmentKind::image) {
              kept.segments.insert(kept.segments.begin(), seg);
              image_taken = true;
              break;
            }
          }
        }
        out.sections.push_back(std::move(kept));
      }
      break;
    }
    case DocFormat::interleaved:
      break;
  }

  std::erase_if(out.sections, [](const Section& s) { return s.segments.empty(); });
  if (out.sections.empty()) out.sections.push_back(detail::title_section(doc));
  return out;
}

/// Documents with an id lookup. Order is the corpus order.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> docs) : docs_(std::move(docs)) { reindex(); }

  const std::vector<Document>& documents() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const Document& operator[](std::size_t i) const { return docs_[i]; }

  const Document* find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
  }

  std::optional<std::size_t> position(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  void push_back(Document d) {
    by_id_.emplace(d.doc_id, docs_.size());
    docs_.push_back(std::move(d));
  }

  /// Checks every document plus doc_id uniqueness.
  void validate() const {
    std::unordered_set<std::string_view> seen;
    for (const auto& d : docs_) {
      if (!seen.insert(d.doc_id).second) {
        throw Error(ErrorKind::InvalidDocument, d.doc_id, "duplicate doc_id");
      }
      validate_document(d);
    }
  }

  Corpus with_format(DocFormat fmt) const {
    std::vector<Document> out;
    out.reserve(docs_.size());
    for (const auto& d : docs_) out.push_back(apply_format(d, fmt));
    return Corpus(std::move(out));
  }

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.docs_ == b.docs_; }

 private:
  void reindex() {
    by_id_.clear();
    for (std::size_t i = 0; i < docs_.size(); ++i) by_id_.emplace(docs_[i].doc_id, i);
  }

  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

inline const Section* find_section(const Document& doc, std::string_view section_id) {
  for (const auto& s : doc.sections) {
    if (s.section_id == section_id) return &s;
  }
  return nullptr;
}

/// Rejects qrels that name unknown queries, documents or sections.
inline void validate_qrels(const std::vector<QRel>& qrels, const Corpus& corpus,
                           const std::vector<Query>& queries) {
  std::unordered_set<std::string_view> qids;
  for (const auto& q : queries) qids.insert(q.query_id);
  for (const auto& r : qrels) {
    if (!qids.contains(r.query_id)) throw Error(ErrorKind::DanglingReference, r.query_id, "unknown query");
    const Document* d = corpus.find(r.doc_id);
    if (d == nullptr) throw Error(ErrorKind::DanglingReference, r.doc_id, "unknown document");
    if (r.section_id && find_section(*d, *r.section_id) == nullptr) {
      throw Error(ErrorKind::DanglingReference, *r.section_id, "unknown section of " + r.doc_id);
    }
  }
}

}  // namespace interdoc
