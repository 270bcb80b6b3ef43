#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "interdoc/corpus.hpp"
#include "interdoc/encoder.hpp"
#include "interdoc/error.hpp"
#include "interdoc/features.hpp"
#include "interdoc/index.hpp"
#include "interdoc/losses.hpp"
#include "interdoc/optim.hpp"
#include "interdoc/rerank.hpp"
#include "interdoc/rng.hpp"

namespace interdoc {

enum class NegativeStrategy { in_document, in_batch, top_k };
enum class RerankObjective { section_bce, contrastive, document_bce };

constexpr std::string_view to_string(NegativeStrategy s) {
  switch (s) {
    case NegativeStrategy::in_document: return "in_document";
    case NegativeStrategy::in_batch: return "in_batch";
    case NegativeStrategy::top_k: return "top_k";
  }
  return "in_document";
}

constexpr std::string_view to_string(RerankObjective o) {
  switch (o) {
    case RerankObjective::section_bce: return "section_bce";
    case RerankObjective::contrastive: return "contrastive";
    case RerankObjective::document_bce: return "document_bce";
  }
  return "section_bce";
}

inline std::optional<NegativeStrategy> negative_strategy_from(std::string_view s) {
  for (auto v : {NegativeStrategy::in_document, NegativeStrategy::in_batch, NegativeStrategy::top_k}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline std::optional<RerankObjective> rerank_objective_from(std::string_view s) {
  for (auto v : {RerankObjective::section_bce, RerankObjective::contrastive, RerankObjective::document_bce}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

struct Hyperparams {
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t sections_per_doc = 4;
  std::uint32_t features = 65536;
  std::uint32_t d_emb = 256;
  std::uint64_t seed = 0;
  NegativeStrategy negative_strategy = NegativeStrategy::in_document;
  std::size_t top_k_pool = 25;
  double bce_eps = kDefaultBceEps;
  RerankObjective objective = RerankObjective::section_bce;
  bool tied_init = true;

  void validate() const {
    if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size", "must be >= 1");
    if (!(lr >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lr", "must be >= 0");
    if (sections_per_doc < 1) throw Error(ErrorKind::InvalidArgument, "sections_per_doc", "must be >= 1");
    if (top_k_pool < 1) throw Error(ErrorKind::InvalidArgument, "top_k_pool", "must be >= 1");
    if (!is_power_of_two(features) || features < 2) {
      throw Error(ErrorKind::InvalidArgument, "features", "must be a power of two >= 2");
    }
    if (d_emb < 2) throw Error(ErrorKind::InvalidArgument, "d_emb", "must be >= 2");
  }
};

/// Hashed features for a corpus and query set, computed once per run.
struct FeatureTables {
  std::uint32_t features = 0;
  std::vector<FeatureVector> query;       // [EOQ]-terminated streams
  std::vector<FeatureVector> query_pair;  // [SEP]-terminated, reranker block 1
  std::vector<std::vector<FeatureVector>> section;

  static FeatureTables build(const Corpus& corpus, std::span<const Query> queries, std::uint32_t features) {
    FeatureTables t;
    t.features = features;
    for (const auto& q : queries) {
      t.query.push_back(hash_features(tokenize_query(q), features));
      t.query_pair.push_back(query_pair_block(q, features));
    }
    for (const auto& d : corpus.documents()) {
      auto& row = t.section.emplace_back();
      for (const auto& s : d.sections) row.push_back(hash_features(tokenize_section(s), features));
    }
    return t;
  }
};

/// A (query, document, optional section) positive, by position.
struct LabeledPair {
  std::size_t query;
  std::size_t doc;
  std::optional<std::size_t> section;
};

/// Resolves qrels to positions; every query must have at least one relevant document.
inline std::vector<LabeledPair> resolve_pairs(const Corpus& corpus, std::span<const Query> queries,
                                              std::span<const QRel> qrels) {
  std::unordered_map<std::string_view, std::size_t> qpos;
  for (std::size_t i = 0; i < queries.size(); ++i) qpos.emplace(queries[i].query_id, i);
  std::vector<LabeledPair> out;
  std::vector<bool> covered(queries.size(), false);
  for (const auto& r : qrels) {
    auto qi = qpos.find(r.query_id);
    if (qi == qpos.end()) continue;  // qrels may cover a superset of the query list
    auto di = corpus.position(r.doc_id);
    if (!di) throw Error(ErrorKind::DanglingReference, r.doc_id, "unknown document");
    LabeledPair p{qi->second, *di, std::nullopt};
    if (r.section_id) {
      const auto& secs = corpus[*di].sections;
      auto it = std::find_if(secs.begin(), secs.end(), [&](const Section& s) { return s.section_id == *r.section_id; });
      if (it == secs.end()) throw Error(ErrorKind::DanglingReference, *r.section_id, "unknown section");
      p.section = static_cast<std::size_t>(it - secs.begin());
    }
    covered[qi->second] = true;
    out.push_back(p);
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!covered[i]) throw Error(ErrorKind::DanglingReference, queries[i].query_id, "query has no relevant document");
  }
  return out;
}

/// Splits `order` into batches of up to `size` whose keys are distinct. An
/// item whose key is already in the batch is deferred to the next one.
template <class KeyFn>
std::vector<std::vector<std::size_t>> assemble_batches(std::span<const std::size_t> order, std::size_t size,
                                                       KeyFn&& key) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> carry;
  std::size_t pos = 0;
  while (pos < order.size() || !carry.empty()) {
    std::vector<std::size_t> batch;
    std::vector<std::size_t> next_carry;
    std::unordered_set<std::size_t> seen;
    for (auto c : carry) {
      if (batch.size() < size && seen.insert(key(c)).second) batch.push_back(c);
      else next_carry.push_back(c);
    }
    while (batch.size() < size && pos < order.size()) {
      const auto c = order[pos++];
      if (seen.insert(key(c)).second) batch.push_back(c);
      else next_carry.push_back(c);
    }
    batches.push_back(std::move(batch));
    carry = std::move(next_carry);
  }
  return batches;
}

namespace train_detail {

using SparseD = std::vector<std::pair<std::uint32_t, double>>;

inline SparseD mean_features(std::span<const FeatureVector* const> parts) {
  std::vector<std::pair<std::uint32_t, double>> raw;
  for (const auto* p : parts) {
    for (const auto& e : p->entries) raw.emplace_back(e.bucket, e.value);
  }
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseD out;
  for (const auto& [b, v] : raw) {
    if (!out.empty() && out.back().first == b) out.back().second += v;
    else out.emplace_back(b, v);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (auto& e : out) e.second *= inv;
  return out;
}

inline SparseD to_sparse(const FeatureVector& fv) {
  SparseD out;
  out.reserve(fv.entries.size());
  for (const auto& e : fv.entries) out.emplace_back(e.bucket, e.value);
  return out;
}

inline Vec project(std::span<const float> w, std::size_t d, const SparseD& x) {
  Vec z(d, 0.0);
  for (const auto& [b, v] : x) {
    const float* col = w.data() + static_cast<std::size_t>(b) * d;
    for (std::size_t i = 0; i < d; ++i) z[i] += v * col[i];
  }
  return z;
}

inline void accumulate(std::span<float> g, std::size_t d, const SparseD& x, const Vec& dz) {
  for (const auto& [b, v] : x) {
    float* col = g.data() + static_cast<std::size_t>(b) * d;
    for (std::size_t i = 0; i < d; ++i) col[i] += static_cast<float>(v * dz[i]);
  }
}

}  // namespace train_detail

template <class Params>
struct Trained {
  Params params;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::uint64_t steps = 0;
};

namespace train_detail {

/// Shared loop of the two dual encoders. With `section_units` every pair is
/// one (query, gold section) retrieval unit instead of a sampled document.
inline Trained<EncoderParams> train_dual_encoder(const Corpus& corpus, std::span<const Query> queries,
                                                 std::span<const QRel> qrels, const Hyperparams& hp,
                                                 bool section_units) {
  hp.validate();
  auto pairs = resolve_pairs(corpus, queries, qrels);
  if (section_units) {
    std::erase_if(pairs, [](const LabeledPair& p) { return !p.section; });
    if (pairs.empty()) throw Error(ErrorKind::InvalidArgument, "qrels", "section encoder training needs section labels");
  }
  const auto tables = FeatureTables::build(corpus, queries, hp.features);
  std::vector<std::size_t> unit_base(corpus.size() + 1, 0);
  for (std::size_t i = 0; i < corpus.size(); ++i) unit_base[i + 1] = unit_base[i] + corpus[i].sections.size();

  Trained<EncoderParams> out{EncoderParams::init(hp.d_emb, hp.features, hp.seed, hp.tied_init), {}, 0};
  auto& p = out.params;
  const std::size_t d = hp.d_emb;
  const std::size_t n = p.w_query.size();
  Adam opt_q(n), opt_s(n);
  std::vector<float> gq(n), gs(n);

  Rng rng(Rng::mix(hp.seed ^ 0x7265747269657665ULL));
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    auto batches = assemble_batches(order, hp.batch_size, [&](std::size_t i) {
      // Units repeat across queries; a repeated unit must not be its own negative.
      return section_units ? unit_base[pairs[i].doc] + *pairs[i].section : pairs[i].doc;
    });
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      std::vector<SparseD> xq, xd;
      std::vector<Vec> zq, zd;
      for (auto i : batch) {
        const auto& pr = pairs[i];
        xq.push_back(to_sparse(tables.query[pr.query]));
        std::vector<const FeatureVector*> parts;
        if (section_units) {
          parts.push_back(&tables.section[pr.doc][*pr.section]);
        } else {
          for (auto s : pick_sections(tables.section[pr.doc].size(), hp.sections_per_doc, rng)) {
            parts.push_back(&tables.section[pr.doc][s]);
          }
        }
        xd.push_back(mean_features(parts));
        zq.push_back(project(p.w_query, d, xq.back()));
        zd.push_back(project(p.w_section, d, xd.back()));
      }
      auto res = contrastive_loss(zq, zd);
      loss_sum += res.loss;
      std::fill(gq.begin(), gq.end(), 0.0f);
      std::fill(gs.begin(), gs.end(), 0.0f);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        accumulate(gq, d, xq[k], res.d_query[k]);
        accumulate(gs, d, xd[k], res.d_doc[k]);
      }
      ++out.steps;
      opt_q.step(p.w_query, gq, hp.lr, out.steps);
      opt_s.step(p.w_section, gs, hp.lr, out.steps);
    }
    out.epoch_loss.push_back(batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size()));
  }
  return out;
}

}  // namespace train_detail

/// Dual-encoder training with the in-batch contrastive loss. Documents are
/// represented by `sections_per_doc` sampled sections; gradients flow through
/// the section mean into W_S and through the query projection into W_Q.
inline Trained<EncoderParams> train_retriever(const Corpus& corpus, std::span<const Query> queries,
                                              std::span<const QRel> qrels, const Hyperparams& hp) {
  return train_detail::train_dual_encoder(corpus, queries, qrels, hp, false);
}

/// The contrastive reranker: the retriever's loss and encoder with sections
/// as retrieval units, trained on (query, gold section) pairs. Sections are
/// then reranked by cosine, without any query-section interaction.
inline Trained<EncoderParams> train_section_encoder(const Corpus& corpus, std::span<const Query> queries,
                                                    std::span<const QRel> qrels, const Hyperparams& hp) {
  return train_detail::train_dual_encoder(corpus, queries, qrels, hp, true);
}

/// A query paired with one section of one document, by position.
struct RerankExample {
  std::size_t query;
  std::size_t doc;
  std::size_t section;
  int label;

  friend bool operator==(const RerankExample&, const RerankExample&) = default;
};

/// A trained retriever plus its index; needed by the top_k strategy.
struct RetrievalContext {
  const Index* index = nullptr;
  const EncoderBackend* backend = nullptr;
};

/// Produces label-0 examples for a positive. Retrieval results for top_k
/// are cached per query.
class NegativeSampler {
 public:
  NegativeSampler(const Corpus& corpus, std::span<const Query> queries, std::size_t pool,
                  const RetrievalContext* retrieval = nullptr)
      : corpus_(corpus), queries_(queries), pool_(pool), retrieval_(retrieval) {}

  std::vector<RerankExample> sample(NegativeStrategy strategy, const RerankExample& positive,
                                    std::span<const RerankExample> batch) {
    std::vector<RerankExample> out;
    switch (strategy) {
      case NegativeStrategy::in_document: {
        const auto& doc = corpus_[positive.doc];
        if (doc.sections.size() < 2) throw Error(ErrorKind::InsufficientNegatives, doc.doc_id);
        for (std::size_t s = 0; s < doc.sections.size(); ++s) {
          if (s != positive.section) out.push_back({positive.query, positive.doc, s, 0});
        }
        break;
      }
      case NegativeStrategy::in_batch:
        for (const auto& other : batch) {
          if (other.doc == positive.doc && other.section == positive.section) continue;
          out.push_back({positive.query, other.doc, other.section, 0});
        }
        break;
      case NegativeStrategy::top_k: {
        if (retrieval_ == nullptr || retrieval_->index == nullptr || retrieval_->backend == nullptr) {
          throw Error(ErrorKind::InvalidArgument, "top_k", "requires a retrieval index");
        }
        for (auto d : retrieved(positive.query)) {
          for (std::size_t s = 0; s < corpus_[d].sections.size(); ++s) {
            if (d == positive.doc && s == positive.section) continue;
            out.push_back({positive.query, d, s, 0});
          }
        }
        break;
      }
    }
    return out;
  }

  const std::vector<std::size_t>& retrieved(std::size_t query) {
    auto it = cache_.find(query);
    if (it != cache_.end()) return it->second;
    auto hits = retrieval_->index->search(retrieval_->backend->encode_query(queries_[query]), pool_);
    std::vector<std::size_t> docs;
    for (const auto& h : hits) {
      if (auto pos = corpus_.position(h.doc_id)) docs.push_back(*pos);
    }
    return cache_.emplace(query, std::move(docs)).first->second;
  }

 private:
  const Corpus& corpus_;
  std::span<const Query> queries_;
  std::size_t pool_;
  const RetrievalContext* retrieval_;
  std::unordered_map<std::size_t, std::vector<std::size_t>> cache_;
};

inline std::vector<RerankExample> sample_negatives(NegativeStrategy strategy, const RerankExample& positive,
                                                   std::span<const RerankExample> batch, const Corpus& corpus,
                                                   std::span<const Query> queries,
                                                   const RetrievalContext* retrieval = nullptr,
                                                   std::size_t pool = 25) {
  NegativeSampler sampler(corpus, queries, pool, retrieval);
  return sampler.sample(strategy, positive, batch);
}

/// Trains the pair classifier. `section_bce` scores each (query, section)
/// pair alone with strategy-selected negatives; `document_bce` scores
/// sections in a document-ordered prefix so each score also sees the
/// preceding sections. The contrastive objective has no pair classifier; see
/// train_section_encoder.
inline Trained<RerankerParams> train_reranker(const Corpus& corpus, std::span<const Query> queries,
                                              std::span<const QRel> qrels, const Hyperparams& hp,
                                              const RetrievalContext* retrieval = nullptr) {
  hp.validate();
  if (hp.objective == RerankObjective::contrastive) {
    throw Error(ErrorKind::InvalidArgument, "objective", "contrastive trains a section encoder (train_section_encoder)");
  }
  std::vector<RerankExample> positives;
  for (const auto& p : resolve_pairs(corpus, queries, qrels)) {
    if (p.section) positives.push_back({p.query, p.doc, *p.section, 1});
  }
  if (positives.empty()) throw Error(ErrorKind::InvalidArgument, "qrels", "reranker training needs section labels");
  const auto tables = FeatureTables::build(corpus, queries, hp.features);
  NegativeSampler sampler(corpus, queries, hp.top_k_pool, retrieval);

  Trained<RerankerParams> out{RerankerParams::init(hp.features, hp.seed), {}, 0};
  auto& p = out.params;
  Adam opt_w(p.w.size()), opt_b(1);
  std::vector<float> gw(p.w.size());

  Rng rng(Rng::mix(hp.seed ^ 0x72657261616e6b65ULL));
  std::vector<std::size_t> order(positives.size());
  for (std::size_t e = 0; e < hp.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    auto batches = assemble_batches(order, hp.batch_size, [&](std::size_t i) { return positives[i].doc; });
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      std::vector<RerankExample> items;
      for (auto i : batch) items.push_back(positives[i]);

      // groups[i] holds the feature vectors scored for item i, labels alongside.
      std::vector<std::vector<FeatureVector>> groups(items.size());
      std::vector<std::vector<int>> labels(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& pos = items[i];
        const auto& qb = tables.query_pair[pos.query];
        switch (hp.objective) {
          case RerankObjective::section_bce: {
            groups[i].push_back(pair_features(qb, tables.section[pos.doc][pos.section]));
            labels[i].push_back(1);
            for (const auto& neg : sampler.sample(hp.negative_strategy, pos, items)) {
              groups[i].push_back(pair_features(qb, tables.section[neg.doc][neg.section]));
              labels[i].push_back(0);
            }
            break;
          }
          case RerankObjective::contrastive:
            break;  // rejected above
          case RerankObjective::document_bce: {
            const auto count = tables.section[pos.doc].size();
            std::vector<std::size_t> picks{pos.section};
            if (hp.sections_per_doc > 1) {
              for (auto s : rng.sample(count, count)) {
                if (picks.size() >= hp.sections_per_doc) break;
                if (s != pos.section) picks.push_back(s);
              }
            }
            std::sort(picks.begin(), picks.end());
            FeatureVector prefix{hp.features, {}};
            for (auto s : picks) {
              prefix = prefix + tables.section[pos.doc][s];
              groups[i].push_back(pair_features(qb, prefix));
              labels[i].push_back(s == pos.section ? 1 : 0);
            }
            break;
          }
        }
      }

      std::vector<Vec> logits(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        for (const auto& x : groups[i]) logits[i].push_back(pair_logit(p, x));
      }
      std::vector<Vec> dlogit(items.size());
      std::vector<Vec> scores(items.size());
      for (std::size_t i = 0; i < items.size(); ++i) {
        for (double z : logits[i]) scores[i].push_back(sigmoid(z));
      }
      auto res = bce_reranker_loss(scores, labels, hp.bce_eps);
      loss_sum += res.loss;
      for (std::size_t i = 0; i < items.size(); ++i) {
        dlogit[i].resize(scores[i].size());
        for (std::size_t j = 0; j < scores[i].size(); ++j) {
          const double y = scores[i][j];
          dlogit[i][j] = res.d_scores[i][j] * y * (1.0 - y);
        }
      }

      std::fill(gw.begin(), gw.end(), 0.0f);
      double gb = 0.0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = 0; j < groups[i].size(); ++j) {
          const double g = dlogit[i][j];
          gb += g;
          for (const auto& e : groups[i][j].entries) gw[e.bucket] += static_cast<float>(g * e.value);
        }
      }
      ++out.steps;
      opt_w.step(p.w, gw, hp.lr, out.steps);
      const float gbf = static_cast<float>(gb);
      opt_b.step(std::span<float>(&p.b, 1), std::span<const float>(&gbf, 1), hp.lr, out.steps);
    }
    out.epoch_loss.push_back(batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size()));
  }
  return out;
}

}  // namespace interdoc
