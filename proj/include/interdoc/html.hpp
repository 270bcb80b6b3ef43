#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "interdoc/corpus.hpp"
#include "interdoc/error.hpp"
#include "interdoc/text.hpp"

namespace interdoc {

namespace html_detail {

struct Tag {
  std::string name;  // lowercased, without '/'
  bool closing = false;
  bool self_closing = false;
  std::vector<std::pair<std::string, std::string>> attrs;  // names lowercased
  std::size_t begin = 0;  // offset of '<'
  std::size_t end = 0;    // one past '>'

  std::string attr(std::string_view key) const {
    for (const auto& [k, v] : attrs) {
      if (k == key) return v;
    }
    return {};
  }
};

inline bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
         c == ':' || c == '_';
}

/// Parses the tag starting at s[pos] == '<'. Returns false when the text is
/// not a tag (a bare '<' in text), in which case the caller treats it as text.
inline bool parse_tag(std::string_view s, std::size_t pos, Tag& tag) {
  std::size_t i = pos + 1;
  tag = Tag{};
  tag.begin = pos;
  if (i < s.size() && s[i] == '/') {
    tag.closing = true;
    ++i;
  }
  if (i >= s.size() || !((s[i] >= 'a' && s[i] <= 'z') || (s[i] >= 'A' && s[i] <= 'Z'))) return false;
  std::size_t name_start = i;
  while (i < s.size() && is_name_char(s[i])) ++i;
  tag.name = text::to_lower_ascii(s.substr(name_start, i - name_start));
  while (i < s.size()) {
    while (i < s.size() && text::is_space(s[i])) ++i;
    if (i >= s.size()) break;
    if (s[i] == '>') {
      tag.end = i + 1;
      return true;
    }
    if (s[i] == '/') {
      tag.self_closing = true;
      ++i;
      continue;
    }
    std::size_t k = i;
    while (i < s.size() && !text::is_space(s[i]) && s[i] != '=' && s[i] != '>' && s[i] != '/') ++i;
    std::string key = text::to_lower_ascii(s.substr(k, i - k));
    if (key.empty()) {
      ++i;
      continue;
    }
    while (i < s.size() && text::is_space(s[i])) ++i;
    std::string value;
    if (i < s.size() && s[i] == '=') {
      ++i;
      while (i < s.size() && text::is_space(s[i])) ++i;
      if (i < s.size() && (s[i] == '"' || s[i] == '\'')) {
        const char q = s[i++];
        std::size_t v = i;
        while (i < s.size() && s[i] != q) ++i;
        value.assign(s.substr(v, i - v));
        if (i < s.size()) ++i;
      } else {
        std::size_t v = i;
        while (i < s.size() && !text::is_space(s[i]) && s[i] != '>') ++i;
        value.assign(s.substr(v, i - v));
      }
    }
    tag.attrs.emplace_back(std::move(key), std::move(value));
  }
  tag.end = s.size();
  return true;
}

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// Decodes the handful of entities that show up in article bodies; unknown
/// entities pass through verbatim.
inline std::string decode_entities(std::string_view s) {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 7> named{{
      {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", " "}, {"ndash", "-"},
  }};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto body = s.substr(i + 1, semi - i - 1);
    bool done = false;
    if (!body.empty() && body[0] == '#') {
      std::uint32_t cp = 0;
      bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
      std::string_view digits = body.substr(hex ? 2 : 1);
      bool ok = !digits.empty();
      for (char c : digits) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else { ok = false; break; }
        cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
        if (cp > 0x10FFFF) { ok = false; break; }
      }
      if (ok && cp != 0 && !(cp >= 0xD800 && cp <= 0xDFFF)) {
        append_utf8(out, cp);
        done = true;
      }
    } else {
      for (const auto& [name, value] : named) {
        if (body == name) {
          out.append(value);
          done = true;
          break;
        }
      }
    }
    if (done) {
      i = semi;
    } else {
      out.push_back('&');
    }
  }
  return out;
}

inline bool is_table_structure(std::string_view name) {
  return name == "table" || name == "thead" || name == "tbody" || name == "tfoot" || name == "tr" ||
         name == "th" || name == "td" || name == "caption";
}

inline bool is_skipped_container(std::string_view name) {
  return name == "script" || name == "style" || name == "nav" || name == "footer" ||
         name == "noscript" || name == "template";
}

inline bool is_raw_text(std::string_view name) { return name == "script" || name == "style"; }

inline bool is_inline(std::string_view name) {
  static constexpr std::array<std::string_view, 22> names{
      "a", "abbr", "b", "bdi", "bdo", "cite", "code", "dfn", "em", "font", "i",
      "kbd", "mark", "q", "s", "samp", "small", "span", "strong", "sub", "sup", "u"};
  return std::find(names.begin(), names.end(), name) != names.end();
}

inline bool is_void(std::string_view name) {
  return name == "img" || name == "br" || name == "hr" || name == "meta" || name == "link" ||
         name == "input" || name == "source" || name == "wbr" || name == "col" || name == "area";
}

/// Offset just past the closing tag of a raw-text element, or end of input.
inline std::size_t skip_raw_text(std::string_view s, std::size_t from, std::string_view name) {
  std::size_t i = from;
  while ((i = s.find("</", i)) != std::string_view::npos) {
    if (text::starts_with_ci(s.substr(i + 2), name)) {
      auto gt = s.find('>', i);
      return gt == std::string_view::npos ? s.size() : gt + 1;
    }
    i += 2;
  }
  return s.size();
}

inline std::size_t skip_comment(std::string_view s, std::size_t pos) {
  if (s.substr(pos).starts_with("<!--")) {
    auto e = s.find("-->", pos + 4);
    return e == std::string_view::npos ? s.size() : e + 3;
  }
  auto e = s.find('>', pos);
  return e == std::string_view::npos ? s.size() : e + 1;
}

}  // namespace html_detail

/// Rewrites table markup into its linearized form: lowercase structural tags,
/// no attributes, other tags dropped, cell text whitespace-collapsed.
inline std::string linearize_table(std::string_view table_html) {
  using namespace html_detail;
  std::size_t start = 0;
  while (start < table_html.size() && text::is_space(table_html[start])) ++start;
  if (!text::starts_with_ci(table_html.substr(start), "<table")) {
    throw Error(ErrorKind::NotATable, std::string(table_html.substr(0, 32)));
  }
  std::string out;
  std::string pending;
  auto flush = [&] {
    std::string t = text::collapse_whitespace(pending);
    out += t;
    pending.clear();
  };
  std::size_t i = start;
  const auto s = table_html;
  while (i < s.size()) {
    if (s[i] == '<') {
      if (s.substr(i).starts_with("<!")) {
        i = skip_comment(s, i);
        continue;
      }
      Tag tag;
      if (parse_tag(s, i, tag)) {
        i = tag.end;
        if (is_raw_text(tag.name) && !tag.closing) {
          i = skip_raw_text(s, i, tag.name);
          continue;
        }
        if (is_table_structure(tag.name)) {
          flush();
          out += tag.closing ? "</" : "<";
          out += tag.name;
          out += '>';
        } else if (tag.name == "br") {
          pending.push_back(' ');
        }
        continue;
      }
    }
    pending.push_back(s[i]);
    ++i;
  }
  flush();
  if (!std::string_view(out).ends_with("</table>")) out += "</table>";
  return out;
}

/// Parses one HTML page into sections split at <h2>/<h3> subtitles. The lead
/// content before the first subtitle becomes a section with an empty heading.
inline Document parse_html(std::string_view html, const std::string& doc_id) {
  using namespace html_detail;
  if (!text::valid_utf8(html)) throw Error(ErrorKind::MalformedInput, doc_id, "input is not UTF-8");

  Document doc{doc_id, "", {}};
  std::string title_tag, first_h1;
  bool have_title_tag = false, have_h1 = false;

  struct Pending {
    std::string heading;
    std::vector<Segment> segments;
  };
  std::vector<Pending> sections(1);
  std::string text_run;

  auto flush_text = [&] {
    std::string t = text::collapse_whitespace(decode_entities(text_run));
    text_run.clear();
    if (t.empty()) return;
    auto& segs = sections.back().segments;
    if (!segs.empty() && segs.back().kind == SegmentKind::text) {
      segs.back().content += ' ';
      segs.back().content += t;
    } else {
      segs.push_back({SegmentKind::text, std::move(t)});
    }
  };

  // Capture mode collects text into a side buffer (title, h1, headings).
  enum class Capture { none, title, h1, heading };
  Capture capture = Capture::none;
  std::string captured;
  std::string capture_tag;

  const auto s = html;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      std::size_t next = s.find('<', i);
      if (next == std::string_view::npos) next = s.size();
      auto chunk = s.substr(i, next - i);
      if (capture != Capture::none) captured.append(chunk);
      else text_run.append(chunk);
      i = next;
      continue;
    }
    if (s.substr(i).starts_with("<!") || s.substr(i).starts_with("<?")) {
      i = skip_comment(s, i);
      continue;
    }
    Tag tag;
    if (!parse_tag(s, i, tag)) {
      if (capture != Capture::none) captured.push_back('<');
      else text_run.push_back('<');
      ++i;
      continue;
    }
    i = tag.end;
    const std::string& name = tag.name;

    if (!tag.closing && is_skipped_container(name)) {
      if (is_raw_text(name)) {
        i = skip_raw_text(s, i, name);
        continue;
      }
      int depth = 1;
      while (i < s.size() && depth > 0) {
        auto lt = s.find('<', i);
        if (lt == std::string_view::npos) {
          i = s.size();
          break;
        }
        Tag inner;
        if (parse_tag(s, lt, inner)) {
          if (inner.name == name) depth += inner.closing ? -1 : (inner.self_closing ? 0 : 1);
          if (!inner.closing && is_raw_text(inner.name)) {
            i = skip_raw_text(s, inner.end, inner.name);
            continue;
          }
          i = inner.end;
        } else {
          i = lt + 1;
        }
      }
      continue;
    }

    if (capture != Capture::none) {
      if (tag.closing && name == capture_tag) {
        std::string t = text::collapse_whitespace(decode_entities(captured));
        if (capture == Capture::title && !have_title_tag) {
          title_tag = t;
          have_title_tag = true;
        } else if (capture == Capture::h1 && !have_h1) {
          first_h1 = t;
          have_h1 = true;
        } else if (capture == Capture::heading) {
          sections.push_back(Pending{t, {}});
        }
        capture = Capture::none;
        captured.clear();
      } else if (name == "br") {
        captured.push_back(' ');
      }
      continue;
    }

    if (!tag.closing && (name == "title" || name == "h1" || name == "h2" || name == "h3")) {
      flush_text();
      capture = name == "title" ? Capture::title : name == "h1" ? Capture::h1 : Capture::heading;
      capture_tag = name;
      continue;
    }

    if (!tag.closing && name == "img") {
      flush_text();
      std::string src = text::collapse_whitespace(tag.attr("src"));
      std::string alt = text::collapse_whitespace(decode_entities(tag.attr("alt")));
      // Only string-level URL validation: a usable src is non-empty with no spaces.
      if (!src.empty() && src.find(' ') == std::string::npos) {
        std::string content = alt.empty() ? src : src + " | " + alt;
        sections.back().segments.push_back({SegmentKind::image, std::move(content)});
      }
      continue;
    }

    if (!tag.closing && name == "table") {
      flush_text();
      int depth = 1;
      std::size_t j = i;
      std::size_t end = s.size();
      while (j < s.size()) {
        auto lt = s.find('<', j);
        if (lt == std::string_view::npos) break;
        Tag inner;
        if (parse_tag(s, lt, inner)) {
          if (inner.name == "table") depth += inner.closing ? -1 : 1;
          j = inner.end;
          if (depth == 0) {
            end = inner.end;
            break;
          }
        } else {
          j = lt + 1;
        }
      }
      std::string table = linearize_table(s.substr(tag.begin, end - tag.begin));
      sections.back().segments.push_back({SegmentKind::table, std::move(table)});
      i = end;
      continue;
    }

    // Block-level tags separate words; inline markup does not.
    if ((!is_void(name) && !is_inline(name)) || name == "br" || name == "hr") text_run.push_back(' ');
  }
  flush_text();

  doc.title = have_title_tag ? title_tag : first_h1;
  std::size_t next_id = 0;
  for (auto& p : sections) {
    if (p.segments.empty()) continue;
    doc.sections.push_back(Section{"s" + std::to_string(next_id++), std::move(p.heading),
                                   std::move(p.segments)});
  }
  if (doc.sections.empty()) throw Error(ErrorKind::NoContent, doc_id);
  return doc;
}

}  // namespace interdoc
