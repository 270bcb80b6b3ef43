#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "interdoc/corpus.hpp"
#include "interdoc/error.hpp"
#include "interdoc/rng.hpp"

namespace interdoc {

struct SynthConfig {
  std::size_t num_docs = 500;
  std::size_t sections_per_doc = 4;
  std::size_t vocab_size = 200;  // entity descriptor words
  std::size_t answer_pool = 100;
  std::size_t queries_per_split = 1000;
  std::size_t entity_words = 3;   // descriptors per document and split half
  std::size_t section_words = 2;  // text descriptors per section and split half
  bool distractor_facts = true;   // non-gold sections state facts too
  double p_img = 0.3;
  double p_tbl = 0.2;
  std::uint64_t seed = 0;

  static constexpr std::size_t kSectionVocab = 200;

  void validate() const {
    if (num_docs < 2 || sections_per_doc < 1 || vocab_size < 16 || answer_pool < 1 || queries_per_split < 1) {
      throw Error(ErrorKind::InvalidArgument, "synth", "counts must be >= 1 (num_docs >= 2, vocab_size >= 16)");
    }
    if (p_img < 0 || p_tbl < 0 || p_img + p_tbl > 1.0) {
      throw Error(ErrorKind::InvalidArgument, "synth", "need p_img, p_tbl >= 0 and p_img + p_tbl <= 1");
    }
    if (entity_words < 2 || 2 * entity_words > vocab_size) {
      throw Error(ErrorKind::InvalidArgument, "entity_words", "need 2 <= entity_words <= vocab_size / 2");
    }
    if (2 * sections_per_doc * section_words > kSectionVocab) {
      throw Error(ErrorKind::InvalidArgument, "section_words", "too many section descriptors per document");
    }
  }
};

enum class Placement { text, image, table };

/// Where a fact was planted; used by tests and reports.
struct PlantedAnswer {
  std::string doc_id;
  std::string section_id;
  std::string answer;
  Placement placement;
};

struct SynthData {
  Corpus corpus;
  std::vector<Query> train_queries;
  std::vector<QRel> train_qrels;
  std::vector<Query> test_queries;
  std::vector<QRel> test_qrels;
  std::vector<PlantedAnswer> answers;  // gold fact of each document, corpus order
  std::vector<PlantedAnswer> distractors;  // facts of non-gold sections
};

/// Entity-style corpus built from descriptor words, fact words and filler.
///
/// A document owns `2 * entity_words` entity descriptors from a shared
/// vocabulary of `vocab_size` words, split into a train half and a test half.
/// One descriptor per half sits in running text; the rest appear only in an
/// image alt text or a table cell. Each lands in one random section. Every
/// section also carries `section_words` text descriptors per half.
///
/// Each document has one gold section whose fact word, drawn from a pool of
/// `answer_pool` words, is the answer. It sits in an image with probability
/// p_img, in a table with probability p_tbl, otherwise in running text. With
/// `distractor_facts` the other sections state distinct facts placed the same
/// way.
///
/// A query names two entity descriptors, the gold section's descriptors and
/// the answer. Both splits cover every document; train queries use the train
/// half of each descriptor set and test queries the test half.
inline SynthData gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(Rng::mix(cfg.seed ^ 0x73796e7468ULL));

  constexpr std::size_t kEntityTextPerHalf = 1;
  constexpr double kMediaImageShare = 0.5;
  constexpr std::size_t kFillerPerText = 5;
  constexpr std::size_t kFillerVocab = 30;
  constexpr std::size_t kImageNames = 10;
  const std::size_t S = cfg.sections_per_doc;

  auto word = [](char tag, std::size_t i) {
    std::string num = std::to_string(i);
    return std::string(1, tag) + std::string(num.size() < 4 ? 4 - num.size() : 0, '0') + num;
  };
  auto image_name = [&] { return "img" + word('f', rng.below(kImageNames)).substr(1) + ".jpg"; };

  struct DocWords {
    std::vector<std::string> entity[2];                // [train half, test half]
    std::vector<std::vector<std::string>> section[2];  // per half, per section
    std::size_t gold = 0;
  };
  SynthData out;
  std::vector<DocWords> words(cfg.num_docs);
  const std::size_t width = std::to_string(cfg.num_docs).size();

  for (std::size_t d = 0; d < cfg.num_docs; ++d) {
    std::string num = std::to_string(d);
    std::string doc_id = "doc" + std::string(width - num.size(), '0') + num;
    auto& w = words[d];

    std::vector<std::vector<std::string>> sec_text(S), sec_images(S), sec_cells(S);
    auto place = [&](const std::string& t, std::size_t s, bool in_text) {
      if (in_text) sec_text[s].push_back(t);
      else (rng.bernoulli(kMediaImageShare) ? sec_images : sec_cells)[s].push_back(t);
    };
    const auto entity = rng.sample(cfg.vocab_size, 2 * cfg.entity_words);
    const auto section = rng.sample(SynthConfig::kSectionVocab, 2 * S * cfg.section_words);
    std::size_t ne = 0, ns = 0;
    for (int h = 0; h < 2; ++h) {
      for (std::size_t k = 0; k < cfg.entity_words; ++k) {
        w.entity[h].push_back(word('d', entity[ne++]));
        place(w.entity[h].back(), rng.below(S), k < kEntityTextPerHalf);
      }
      w.section[h].resize(S);
      for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t j = 0; j < cfg.section_words; ++j) {
          w.section[h][s].push_back(word('k', section[ns++]));
          sec_text[s].push_back(w.section[h][s].back());
        }
      }
    }

    w.gold = rng.below(S);
    const auto facts = rng.sample(cfg.answer_pool, std::min(S, cfg.answer_pool));
    std::vector<std::string> fact(S);
    std::vector<Placement> fact_at(S, Placement::text);
    for (std::size_t s = 0; s < S; ++s) {
      if (s != w.gold && !cfg.distractor_facts) continue;
      const double u = rng.uniform();
      fact[s] = word('a', facts[s % facts.size()]);
      fact_at[s] = u < cfg.p_img ? Placement::image : u < cfg.p_img + cfg.p_tbl ? Placement::table : Placement::text;
      if (fact_at[s] == Placement::text) sec_text[s].push_back(fact[s]);
    }

    Document doc{doc_id, "Entity " + word('e', d), {}};
    for (std::size_t s = 0; s < S; ++s) {
      Section sec{"s" + std::to_string(s), s == 0 ? "" : "Part " + word('f', rng.below(kFillerVocab)), {}};
      std::vector<std::string> body = sec_text[s];
      for (std::size_t f = 0; f < kFillerPerText; ++f) body.push_back(word('f', rng.below(kFillerVocab)));
      rng.shuffle(body);
      std::string text;
      for (const auto& t : body) text += (text.empty() ? "" : " ") + t;
      sec.segments.push_back({SegmentKind::text, text});
      const bool has_fact = !fact[s].empty();
      if (has_fact && fact_at[s] == Placement::image) {
        sec.segments.insert(sec.segments.begin(), Segment{SegmentKind::image, image_name() + " | " + fact[s]});
      }
      for (const auto& t : sec_images[s]) sec.segments.push_back({SegmentKind::image, image_name() + " | " + t});
      std::vector<std::string> cells = sec_cells[s];
      if (has_fact && fact_at[s] == Placement::table) cells.push_back(fact[s]);
      if (!cells.empty()) {
        std::string t = "<table><tr>";
        for (const auto& c : cells) t += "<td>" + c + "</td>";
        sec.segments.push_back({SegmentKind::table, t + "</tr></table>"});
      }
      doc.sections.push_back(std::move(sec));
      if (has_fact) {
        PlantedAnswer a{doc_id, doc.sections.back().section_id, fact[s], fact_at[s]};
        (s == w.gold ? out.answers : out.distractors).push_back(std::move(a));
      }
    }
    out.corpus.push_back(std::move(doc));
  }

  auto make_queries = [&](int half, std::vector<Query>& qs, std::vector<QRel>& rels) {
    const auto pool = rng.sample(cfg.num_docs, cfg.num_docs);
    for (std::size_t i = 0; i < cfg.queries_per_split; ++i) {
      const std::size_t d = pool[i % pool.size()];
      const auto& w = words[d];
      const auto& gold = out.answers[d];
      std::vector<std::string> parts;
      for (auto k : rng.sample(w.entity[half].size(), 2)) parts.push_back(w.entity[half][k]);
      for (const auto& t : w.section[half][w.gold]) parts.push_back(t);
      rng.shuffle(parts);
      std::string text;
      for (const auto& t : parts) text += t + " ";
      text += gold.answer + "?";
      std::string qid = std::string(half == 0 ? "train" : "test") + std::to_string(i);
      qs.push_back(Query{qid, text, {}});
      rels.push_back(QRel{qid, gold.doc_id, gold.section_id});
    }
  };
  make_queries(0, out.train_queries, out.train_qrels);
  make_queries(1, out.test_queries, out.test_qrels);
  return out;
}

}  // namespace interdoc
