#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "interdoc/corpus.hpp"
#include "interdoc/error.hpp"
#include "interdoc/features.hpp"
#include "interdoc/rng.hpp"
#include "interdoc/tokenize.hpp"

namespace interdoc {

/// Logistic classifier over [query | section | overlap] hashed blocks.
struct RerankerParams {
  std::uint32_t features = 65536;  // F; the weight vector spans 3F
  std::vector<float> w;
  float b = 0.0f;
  std::uint64_t seed = 0;

  static RerankerParams init(std::uint32_t features, std::uint64_t seed, double scale = 0.0) {
    if (!is_power_of_two(features)) {
      throw Error(ErrorKind::InvalidArgument, std::to_string(features), "F must be a power of two");
    }
    RerankerParams p{features, std::vector<float>(3 * static_cast<std::size_t>(features), 0.0f), 0.0f, seed};
    if (scale > 0.0) {
      Rng rng(seed);
      for (auto& v : p.w) v = static_cast<float>(rng.uniform(-scale, scale));
    }
    return p;
  }

  void check() const {
    if (w.size() != 3 * static_cast<std::size_t>(features)) throw Error(ErrorKind::ShapeMismatch, "reranker weights");
    for (float v : w) {
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "reranker", "non-finite weight");
    }
    if (!std::isfinite(b)) throw Error(ErrorKind::InvalidArgument, "reranker", "non-finite bias");
  }

  friend bool operator==(const RerankerParams&, const RerankerParams&) = default;
};

/// Query block features: the query stream with [EOQ] swapped for [SEP].
inline FeatureVector query_pair_block(const Query& q, std::uint32_t features) {
  TokenStream ts = tokenize_query(q);
  ts.tokens.back() = std::string(kSeparator);
  return hash_features(ts, features);
}

/// Assembles the 3F-wide pair vector from precomputed block features.
inline FeatureVector pair_features(const FeatureVector& query_block, const FeatureVector& section_block) {
  if (query_block.dim != section_block.dim) throw Error(ErrorKind::DimMismatch, "pair blocks");
  const std::uint32_t f = query_block.dim;
  FeatureVector out{3 * f, {}};
  out.entries.reserve(query_block.entries.size() * 2 + section_block.entries.size());
  for (const auto& e : query_block.entries) out.entries.push_back(e);
  for (const auto& e : section_block.entries) out.entries.push_back({e.bucket + f, e.value});
  // Overlap: min(|q|, |s|) on buckets active in both blocks (both lists sorted).
  auto qi = query_block.entries.begin();
  auto si = section_block.entries.begin();
  while (qi != query_block.entries.end() && si != section_block.entries.end()) {
    if (qi->bucket < si->bucket) {
      ++qi;
    } else if (si->bucket < qi->bucket) {
      ++si;
    } else {
      out.entries.push_back({qi->bucket + 2 * f, std::min(std::abs(qi->value), std::abs(si->value))});
      ++qi;
      ++si;
    }
  }
  return out;
}

inline FeatureVector pair_features(const Query& q, const Section& s, std::uint32_t features) {
  return pair_features(query_pair_block(q, features), hash_features(tokenize_section(s), features));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double pair_logit(const RerankerParams& params, const FeatureVector& x) {
  if (x.dim != 3 * params.features) {
    throw Error(ErrorKind::DimMismatch, std::to_string(x.dim) + "!=" + std::to_string(3 * params.features));
  }
  double z = params.b;
  for (const auto& e : x.entries) z += static_cast<double>(params.w[e.bucket]) * e.value;
  return z;
}

inline double score_pair(const RerankerParams& params, const Query& q, const Section& s) {
  return sigmoid(pair_logit(params, pair_features(q, s, params.features)));
}

struct SectionHit {
  std::string doc_id;
  std::string section_id;
  double score;
  double logit;
};

/// Orders hits by logit (the score is its sigmoid, so the order is the same
/// but saturated scores still separate), then (doc_id, section_id).
inline void sort_section_hits(std::vector<SectionHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const SectionHit& a, const SectionHit& b) {
    if (a.logit != b.logit) return a.logit > b.logit;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.section_id < b.section_id;
  });
}

/// Scores every section of every given document against the query.
inline std::vector<SectionHit> rerank_sections(const RerankerParams& params, const Query& q,
                                               std::span<const Document> docs) {
  const FeatureVector qb = query_pair_block(q, params.features);
  std::vector<SectionHit> hits;
  for (const auto& d : docs) {
    for (const auto& s : d.sections) {
      const double z = pair_logit(params, pair_features(qb, hash_features(tokenize_section(s), params.features)));
      hits.push_back({d.doc_id, s.section_id, sigmoid(z), z});
    }
  }
  sort_section_hits(hits);
  return hits;
}

/// Highest-scoring section of a single document.
inline std::string classify_gold_doc(const RerankerParams& params, const Query& q, const Document& doc) {
  auto hits = rerank_sections(params, q, std::span<const Document>(&doc, 1));
  if (hits.empty()) throw Error(ErrorKind::EmptySections, doc.doc_id);
  return hits.front().section_id;
}

}  // namespace interdoc
