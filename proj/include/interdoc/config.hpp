#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "interdoc/error.hpp"
#include "interdoc/synth.hpp"
#include "interdoc/text.hpp"
#include "interdoc/train.hpp"

namespace interdoc {

/// Line-oriented `key = value` settings. '#' starts a comment line. Later
/// assignments replace earlier ones, so command-line overrides are applied
/// with set() after parsing the file.
class Config {
 public:
  static Config parse(std::string_view src) {
    Config c;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= src.size()) {
      const auto nl = src.find('\n', pos);
      std::string_view line = src.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? src.size() + 1 : nl + 1;
      ++line_no;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorKind::MalformedInput, "line=" + std::to_string(line_no), "expected key = value");
      }
      std::string key = trim(std::string_view(trimmed).substr(0, eq));
      if (key.empty()) throw Error(ErrorKind::MalformedInput, "line=" + std::to_string(line_no), "empty key");
      c.set(std::move(key), trim(std::string_view(trimmed).substr(eq + 1)));
    }
    if (!text::valid_utf8(src)) throw Error(ErrorKind::MalformedInput, "config", "not valid UTF-8");
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, path, "cannot open config");
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(body);
  }

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  bool has(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  template <class T>
  bool read(const std::string& key, T& out) const {
    auto v = get(key);
    if (!v) return false;
    out = convert<T>(key, *v);
    return true;
  }

 private:
  static std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && text::is_space(s[b])) ++b;
    while (e > b && text::is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
  }

  template <class T>
  static T convert(const std::string& key, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw Error(ErrorKind::SchemaError, key, "expected true or false, got '" + v + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
      try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<T>(d);
      } catch (const std::exception&) {
        throw Error(ErrorKind::SchemaError, key, "expected a number, got '" + v + "'");
      }
    } else if constexpr (std::is_integral_v<T>) {
      T out{};
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || p != v.data() + v.size()) {
        throw Error(ErrorKind::SchemaError, key, "expected a non-negative integer, got '" + v + "'");
      }
      return out;
    } else {
      return T(v);
    }
  }

  std::map<std::string, std::string> values_;
};

inline void apply_config(const Config& c, SynthConfig& s) {
  c.read("num_docs", s.num_docs);
  c.read("sections_per_doc", s.sections_per_doc);
  c.read("vocab_size", s.vocab_size);
  c.read("queries_per_split", s.queries_per_split);
  c.read("answer_pool", s.answer_pool);
  c.read("entity_words", s.entity_words);
  c.read("section_words", s.section_words);
  c.read("distractor_facts", s.distractor_facts);
  c.read("p_img", s.p_img);
  c.read("p_tbl", s.p_tbl);
  c.read("seed", s.seed);
}

/// Plain keys set both models' hyperparameters; "reranker."-prefixed keys
/// apply to the reranker only (pass prefix "reranker.").
inline void apply_config(const Config& c, Hyperparams& h, const std::string& prefix = "") {
  auto rd = [&](const std::string& key, auto& field) {
    c.read(key, field);
    if (!prefix.empty()) c.read(prefix + key, field);
  };
  rd("batch_size", h.batch_size);
  rd("lr", h.lr);
  rd("epochs", h.epochs);
  rd("sections_per_doc", h.sections_per_doc);
  rd("features", h.features);
  rd("d_emb", h.d_emb);
  rd("seed", h.seed);
  rd("top_k_pool", h.top_k_pool);
  rd("bce_eps", h.bce_eps);
  rd("tied_init", h.tied_init);
  std::string s;
  for (const auto& key : {std::string("negatives"), prefix + "negatives"}) {
    if (!key.empty() && c.read(key, s)) {
      auto v = negative_strategy_from(s);
      if (!v) throw Error(ErrorKind::SchemaError, key, "unknown negative strategy '" + s + "'");
      h.negative_strategy = *v;
    }
  }
  for (const auto& key : {std::string("objective"), prefix + "objective"}) {
    if (c.read(key, s)) {
      auto v = rerank_objective_from(s);
      if (!v) throw Error(ErrorKind::SchemaError, key, "unknown objective '" + s + "'");
      h.objective = *v;
    }
  }
}

}  // namespace interdoc
