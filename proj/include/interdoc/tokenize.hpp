#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "interdoc/corpus.hpp"
#include "interdoc/text.hpp"

namespace interdoc {

inline constexpr std::string_view kEndOfQuery = "[EOQ]";
inline constexpr std::string_view kEndOfSection = "[EOS]";
inline constexpr std::string_view kSeparator = "[SEP]";

inline constexpr std::string_view kTextPrefix = "txt:";
inline constexpr std::string_view kImagePrefix = "img:";
inline constexpr std::string_view kTablePrefix = "tbl:";

/// Modality-prefixed tokens; role tokens are the only unprefixed entries.
struct TokenStream {
  std::vector<std::string> tokens;

  friend bool operator==(const TokenStream&, const TokenStream&) = default;
};

namespace tok_detail {

inline bool is_word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline void push_words(std::string_view s, std::string_view prefix, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_word_byte(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && is_word_byte(s[j])) ++j;
    if (j > i) out.push_back(std::string(prefix) + text::to_lower_ascii(s.substr(i, j - i)));
    i = j;
  }
}

/// "src | alt": the reference stays one token, the alt text is split into words.
inline void push_image(std::string_view s, std::vector<std::string>& out) {
  auto bar = s.find('|');
  std::string_view src = bar == std::string_view::npos ? s : s.substr(0, bar);
  std::string src_tok = text::collapse_whitespace(src);
  if (bar == std::string_view::npos && src_tok.find(' ') != std::string::npos) {
    push_words(s, kImagePrefix, out);
    return;
  }
  if (!src_tok.empty()) out.push_back(std::string(kImagePrefix) + text::to_lower_ascii(src_tok));
  if (bar != std::string_view::npos) push_words(s.substr(bar + 1), kImagePrefix, out);
}

inline void push_table(std::string_view s, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<') {
      auto gt = s.find('>', i);
      if (gt == std::string_view::npos) gt = s.size() - 1;
      out.push_back(std::string(kTablePrefix) + text::to_lower_ascii(s.substr(i, gt - i + 1)));
      i = gt + 1;
      continue;
    }
    auto lt = s.find('<', i);
    if (lt == std::string_view::npos) lt = s.size();
    push_words(s.substr(i, lt - i), kTablePrefix, out);
    i = lt;
  }
}

inline void push_segment(const Segment& seg, std::vector<std::string>& out) {
  switch (seg.kind) {
    case SegmentKind::text: push_words(seg.content, kTextPrefix, out); break;
    case SegmentKind::image: push_image(seg.content, out); break;
    case SegmentKind::table: push_table(seg.content, out); break;
  }
}

}  // namespace tok_detail

/// Text words then image tokens, terminated by [EOQ].
inline TokenStream tokenize_query(const Query& q) {
  TokenStream ts;
  tok_detail::push_words(q.text, kTextPrefix, ts.tokens);
  for (const auto& ref : q.image_refs) tok_detail::push_image(ref, ts.tokens);
  ts.tokens.emplace_back(kEndOfQuery);
  return ts;
}

/// Heading words, then each segment in order, terminated by [EOS].
inline TokenStream tokenize_section(const Section& s) {
  TokenStream ts;
  tok_detail::push_words(s.heading, kTextPrefix, ts.tokens);
  for (const auto& seg : s.segments) tok_detail::push_segment(seg, ts.tokens);
  ts.tokens.emplace_back(kEndOfSection);
  return ts;
}

}  // namespace interdoc
