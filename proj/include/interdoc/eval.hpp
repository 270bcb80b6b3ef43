#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "interdoc/corpus.hpp"
#include "interdoc/encoder.hpp"
#include "interdoc/error.hpp"
#include "interdoc/index.hpp"
#include "interdoc/metrics.hpp"
#include "interdoc/rerank.hpp"
#include "interdoc/synth.hpp"
#include "interdoc/train.hpp"

namespace interdoc {

using ojson = nlohmann::ordered_json;

struct EvalReport {
  std::vector<std::pair<std::string, double>> metrics;  // emission order
  ojson per_query = ojson::array();
  ojson config = ojson::object();
  std::uint64_t seed = 0;

  double metric(std::string_view name) const {
    for (const auto& [k, v] : metrics) {
      if (k == name) return v;
    }
    throw Error(ErrorKind::InvalidArgument, std::string(name), "metric not in report");
  }

  bool has(std::string_view name) const {
    return std::any_of(metrics.begin(), metrics.end(), [&](const auto& m) { return m.first == name; });
  }

  ojson to_json() const {
    ojson m = ojson::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    return ojson{{"config", config}, {"seed", seed}, {"metrics", m}, {"per_query", per_query}};
  }

  std::string to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    for (const auto& [k, v] : metrics) os << std::left << std::setw(12) << k << ' ' << v << '\n';
    return os.str();
  }
};

/// Recall@K monotone in K and MRR@K <= R@K for every K present in the report.
inline bool report_invariants_hold(const EvalReport& r) {
  std::vector<std::pair<std::size_t, double>> recalls;
  for (const auto& [k, v] : r.metrics) {
    if (v < 0.0 || v > 1.0 || std::isnan(v)) return false;
    if (k.starts_with("R@")) recalls.emplace_back(std::stoul(k.substr(2)), v);
  }
  std::sort(recalls.begin(), recalls.end());
  for (std::size_t i = 1; i < recalls.size(); ++i) {
    if (recalls[i].second < recalls[i - 1].second) return false;
  }
  for (const auto& [k, v] : r.metrics) {
    if (k.starts_with("MRR@")) {
      const std::string rk = "R@" + k.substr(4);
      if (r.has(rk) && v > r.metric(rk) + 1e-12) return false;
    }
  }
  return true;
}

namespace eval_detail {

/// Same conventions as Index: clamped to [-1, 1], -inf for a zero vector.
inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return -std::numeric_limits<double>::infinity();
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

inline std::unordered_map<std::string, RelevantSet> relevant_docs(const std::vector<QRel>& qrels) {
  std::unordered_map<std::string, RelevantSet> out;
  for (const auto& r : qrels) out[r.query_id].insert(r.doc_id);
  return out;
}

inline std::string section_key(std::string_view doc_id, std::string_view section_id) {
  std::string k(doc_id);
  k += '#';
  k += section_id;
  return k;
}

inline std::unordered_map<std::string, RelevantSet> relevant_sections(const std::vector<QRel>& qrels) {
  std::unordered_map<std::string, RelevantSet> out;
  for (const auto& r : qrels) {
    if (r.section_id) out[r.query_id].insert(section_key(r.doc_id, *r.section_id));
  }
  return out;
}

/// Accumulates R@K and MRR@K over queries from a ranked id list each.
struct MetricAccumulator {
  std::vector<std::size_t> ks;
  std::size_t mrr_k = 10;
  std::vector<double> recall_sums;
  double mrr_sum = 0.0;
  std::size_t count = 0;
  ojson rows = ojson::array();

  MetricAccumulator(std::vector<std::size_t> k, std::size_t mrr) : ks(std::move(k)), mrr_k(mrr), recall_sums(ks.size()) {}

  void add(const std::string& query_id, std::span<const std::string> ranked, const RelevantSet& relevant) {
    for (std::size_t i = 0; i < ks.size(); ++i) recall_sums[i] += recall_at_k(ranked, relevant, ks[i]);
    mrr_sum += mrr_at_k(ranked, relevant, mrr_k);
    ++count;
    const auto rank = first_relevant_rank(ranked, relevant);
    rows.push_back(ojson{{"query_id", query_id},
                         {"rank", rank},
                         {"top", ranked.empty() ? std::string() : ranked.front()}});
  }

  EvalReport finish() const {
    EvalReport r;
    const double n = count == 0 ? 1.0 : static_cast<double>(count);
    for (std::size_t i = 0; i < ks.size(); ++i) r.metrics.emplace_back("R@" + std::to_string(ks[i]), recall_sums[i] / n);
    r.metrics.emplace_back("MRR@" + std::to_string(mrr_k), mrr_sum / n);
    r.per_query = rows;
    return r;
  }
};

}  // namespace eval_detail

/// Document retrieval metrics: R@K for each K and MRR@10.
inline EvalReport run_document_eval(const Index& index, const EncoderBackend& backend, const std::vector<Query>& queries,
                                    const std::vector<QRel>& qrels,
                                    std::vector<std::size_t> ks = {1, 10, 20, 100}) {
  std::sort(ks.begin(), ks.end());
  const auto rel = eval_detail::relevant_docs(qrels);
  const std::size_t depth = std::max<std::size_t>(ks.back(), 10);
  eval_detail::MetricAccumulator acc(ks, 10);
  for (const auto& q : queries) {
    auto it = rel.find(q.query_id);
    if (it == rel.end() || it->second.empty()) {
      throw Error(ErrorKind::InvalidArgument, q.query_id, "query has no relevant documents");
    }
    std::vector<std::string> ranked;
    for (const auto& h : index.search(backend.encode_query(q), depth)) ranked.push_back(h.doc_id);
    acc.add(q.query_id, ranked, it->second);
  }
  return acc.finish();
}

enum class Granularity { document, passage, passage_star };

constexpr std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::document: return "document";
    case Granularity::passage: return "passage";
    case Granularity::passage_star: return "passage_star";
  }
  return "document";
}

/// Every section becomes its own one-section document "doc_id#section_id".
inline Corpus to_passage_corpus(const Corpus& corpus) {
  std::vector<Document> out;
  for (const auto& d : corpus.documents()) {
    for (const auto& s : d.sections) {
      out.push_back(Document{eval_detail::section_key(d.doc_id, s.section_id), d.title, {s}});
    }
  }
  return Corpus(std::move(out));
}

inline std::vector<QRel> to_passage_qrels(const std::vector<QRel>& qrels) {
  std::vector<QRel> out;
  for (const auto& r : qrels) {
    if (r.section_id) out.push_back(QRel{r.query_id, eval_detail::section_key(r.doc_id, *r.section_id), std::nullopt});
  }
  return out;
}

inline std::vector<QRel> document_level(const std::vector<QRel>& qrels) {
  std::vector<QRel> out;
  for (const auto& r : qrels) out.push_back(QRel{r.query_id, r.doc_id, std::nullopt});
  return out;
}

/// Section retrieval pipeline. `document`: retrieve `pool` documents with the
/// document retriever, rerank all their sections. `passage`: retrieve `pool`
/// sections with a passage retriever, rerank them. `passage_star`: the
/// passage retriever's ranking with no reranking.
struct SectionPipeline {
  const Corpus* corpus = nullptr;
  const EncoderParams* retriever = nullptr;  // document or passage retriever, per mode
  const RerankerParams* reranker = nullptr;  // unused for passage_star
  // Contrastive reranker: sections scored by cosine under this encoder.
  // Takes the place of `reranker` when set.
  const EncoderParams* section_encoder = nullptr;
  Granularity mode = Granularity::document;
  std::size_t pool = 25;
  unsigned threads = 1;
};

inline EvalReport run_section_eval(const SectionPipeline& pipe, const std::vector<Query>& queries,
                                   const std::vector<QRel>& qrels, std::vector<std::size_t> ks = {1, 10, 20}) {
  if (pipe.corpus == nullptr || pipe.retriever == nullptr) throw Error(ErrorKind::InvalidArgument, "pipeline", "missing corpus or retriever");
  if (pipe.mode != Granularity::passage_star && pipe.reranker == nullptr && pipe.section_encoder == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "pipeline", "reranking modes need reranker params");
  }
  if (pipe.pool < 1) throw Error(ErrorKind::InvalidArgument, "pool", "must be >= 1");
  std::sort(ks.begin(), ks.end());
  const Corpus& corpus = *pipe.corpus;
  const bool passages = pipe.mode != Granularity::document;
  const Corpus units = passages ? to_passage_corpus(corpus) : corpus;
  ReferenceEncoder backend(*pipe.retriever);
  const Index index = build_index(units, backend, std::nullopt, 0, pipe.threads);

  // Section features for reranking, keyed by the unit corpus.
  std::optional<FeatureTables> tables;
  std::optional<ReferenceEncoder> section_backend;
  std::vector<std::vector<Embedding>> unit_sections;
  if (pipe.section_encoder) {
    section_backend.emplace(*pipe.section_encoder);
    for (std::size_t i = 0; i < units.size(); ++i) unit_sections.push_back(section_backend->encode_sections(units[i].sections));
  } else if (pipe.reranker) {
    tables = FeatureTables::build(units, queries, pipe.reranker->features);
  }

  const auto rel = eval_detail::relevant_sections(qrels);
  eval_detail::MetricAccumulator acc(ks, 10);
  const std::size_t depth = std::max<std::size_t>(ks.back(), 10);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    auto it = rel.find(q.query_id);
    if (it == rel.end()) throw Error(ErrorKind::InvalidArgument, q.query_id, "query has no relevant section");
    const Embedding zq = backend.encode_query(q);
    std::vector<std::string> ranked;
    if (pipe.mode == Granularity::passage_star) {
      for (const auto& h : index.search(zq, depth)) ranked.push_back(h.doc_id);
    } else {
      std::vector<SectionHit> hits;
      std::optional<Embedding> zs;
      if (section_backend) zs = section_backend->encode_query(q);
      for (const auto& h : index.search(zq, pipe.pool)) {
        const auto pos = *units.position(h.doc_id);
        const auto& doc = units[pos];
        for (std::size_t s = 0; s < doc.sections.size(); ++s) {
          const double z = zs ? eval_detail::cosine(zs->values, unit_sections[pos][s].values)
                              : pair_logit(*pipe.reranker, pair_features(tables->query_pair[qi], tables->section[pos][s]));
          // Passage units already carry the "doc#section" key as their doc id.
          hits.push_back(passages ? SectionHit{h.doc_id, "", sigmoid(z), z}
                                  : SectionHit{doc.doc_id, doc.sections[s].section_id, sigmoid(z), z});
        }
      }
      sort_section_hits(hits);
      for (const auto& h : hits) {
        ranked.push_back(passages ? h.doc_id : eval_detail::section_key(h.doc_id, h.section_id));
      }
    }
    acc.add(q.query_id, ranked, it->second);
  }
  auto report = acc.finish();
  report.config = ojson{{"mode", std::string(to_string(pipe.mode))}, {"pool", pipe.pool}};
  return report;
}

/// Acc@1 of picking the gold section inside the gold document.
inline EvalReport run_classify_eval(const Corpus& corpus, const RerankerParams& reranker,
                                    const std::vector<Query>& queries, const std::vector<QRel>& qrels) {
  std::unordered_map<std::string_view, const Query*> by_id;
  for (const auto& q : queries) by_id.emplace(q.query_id, &q);
  double hits = 0.0;
  std::size_t n = 0;
  EvalReport r;
  for (const auto& rel : qrels) {
    if (!rel.section_id) continue;
    auto qit = by_id.find(rel.query_id);
    if (qit == by_id.end()) continue;
    const Document* doc = corpus.find(rel.doc_id);
    if (doc == nullptr) throw Error(ErrorKind::DanglingReference, rel.doc_id);
    const auto predicted = classify_gold_doc(reranker, *qit->second, *doc);
    const bool ok = predicted == *rel.section_id;
    hits += ok ? 1.0 : 0.0;
    ++n;
    r.per_query.push_back(ojson{{"query_id", rel.query_id}, {"predicted", predicted}, {"gold", *rel.section_id}});
  }
  r.metrics.emplace_back("Acc@1", n == 0 ? 0.0 : hits / static_cast<double>(n));
  return r;
}

/// Shared knobs for experiment runners.
struct RunConfig {
  Hyperparams retriever;
  Hyperparams reranker;
  std::vector<std::size_t> doc_ks{1, 10, 20, 100};
  std::size_t pool = 25;
  unsigned threads = 1;

  ojson to_json() const {
    auto hp = [](const Hyperparams& h) {
      return ojson{{"batch_size", h.batch_size},   {"lr", h.lr},
                   {"epochs", h.epochs},           {"sections_per_doc", h.sections_per_doc},
                   {"features", h.features},       {"d_emb", h.d_emb},
                   {"seed", h.seed},               {"negatives", std::string(to_string(h.negative_strategy))},
                   {"top_k_pool", h.top_k_pool},   {"objective", std::string(to_string(h.objective))},
                   {"bce_eps", h.bce_eps}};
    };
    return ojson{{"retriever", hp(retriever)}, {"reranker", hp(reranker)}, {"doc_ks", doc_ks}, {"pool", pool}};
  }
};

struct ArmResult {
  std::string name;
  EvalReport report;
};

/// Bundles arms into one report: metrics keyed "arm/metric", full arm
/// reports under "arms".
struct ComparisonReport {
  std::vector<ArmResult> arms;
  ojson config = ojson::object();
  std::uint64_t seed = 0;

  const ArmResult& arm(std::string_view name) const {
    for (const auto& a : arms) {
      if (a.name == name) return a;
    }
    throw Error(ErrorKind::InvalidArgument, std::string(name), "no such arm");
  }

  ojson to_json() const {
    ojson metrics = ojson::object();
    ojson arm_json = ojson::array();
    for (const auto& a : arms) {
      for (const auto& [k, v] : a.report.metrics) metrics[a.name + "/" + k] = v;
      ojson aj = a.report.to_json();
      aj["name"] = a.name;
      arm_json.push_back(std::move(aj));
    }
    return ojson{{"config", config}, {"seed", seed}, {"metrics", metrics}, {"per_query", ojson::array()}, {"arms", arm_json}};
  }

  std::string to_text() const {
    std::ostringstream os;
    std::vector<std::string> cols;
    for (const auto& a : arms) {
      for (const auto& [k, v] : a.report.metrics) {
        if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
      }
    }
    std::size_t w = 6;
    for (const auto& a : arms) w = std::max(w, a.name.size());
    os << std::left << std::setw(static_cast<int>(w)) << "arm";
    for (const auto& c : cols) os << "  " << std::right << std::setw(8) << c;
    os << '\n' << std::fixed << std::setprecision(4);
    for (const auto& a : arms) {
      os << std::left << std::setw(static_cast<int>(w)) << a.name;
      for (const auto& c : cols) {
        os << "  " << std::right << std::setw(8);
        if (a.report.has(c)) os << a.report.metric(c);
        else os << "-";
      }
      os << '\n';
    }
    return os.str();
  }
};

/// Trains a document retriever on `corpus` (already in its target view) and
/// evaluates test queries.
inline EvalReport train_and_eval_documents(const Corpus& corpus, const std::vector<Query>& train_q,
                                           const std::vector<QRel>& train_rel, const std::vector<Query>& test_q,
                                           const std::vector<QRel>& test_rel, const RunConfig& cfg) {
  const auto trained = train_retriever(corpus, train_q, document_level(train_rel), cfg.retriever);
  ReferenceEncoder backend(trained.params);
  const Index index = build_index(corpus, backend, std::nullopt, 0, cfg.threads);
  auto report = run_document_eval(index, backend, test_q, document_level(test_rel), cfg.doc_ks);
  report.seed = cfg.retriever.seed;
  return report;
}

/// One retriever per document view; rows sorted by MRR@10 descending.
inline ComparisonReport run_format_ablation(const SynthData& data, std::span<const DocFormat> formats,
                                            const RunConfig& cfg) {
  ComparisonReport out;
  out.config = cfg.to_json();
  out.seed = cfg.retriever.seed;
  for (auto fmt : formats) {
    const Corpus view = data.corpus.with_format(fmt);
    out.arms.push_back({std::string(to_string(fmt)),
                        train_and_eval_documents(view, data.train_queries, data.train_qrels, data.test_queries,
                                                 data.test_qrels, cfg)});
  }
  std::stable_sort(out.arms.begin(), out.arms.end(), [](const ArmResult& a, const ArmResult& b) {
    return a.report.metric("MRR@10") > b.report.metric("MRR@10");
  });
  return out;
}

/// Document retriever + reranker against passage retrieval with and without
/// reranking. All arms share one reranker.
inline ComparisonReport run_granularity(const SynthData& data, const RunConfig& cfg) {
  ComparisonReport out;
  out.config = cfg.to_json();
  out.seed = cfg.retriever.seed;
  const auto doc_ret = train_retriever(data.corpus, data.train_queries, document_level(data.train_qrels), cfg.retriever);
  const Corpus passages = to_passage_corpus(data.corpus);
  const auto psg_ret = train_retriever(passages, data.train_queries, to_passage_qrels(data.train_qrels), cfg.retriever);
  const auto reranker = train_reranker(data.corpus, data.train_queries, data.train_qrels, cfg.reranker);

  for (auto mode : {Granularity::passage_star, Granularity::passage, Granularity::document}) {
    SectionPipeline pipe{&data.corpus, mode == Granularity::document ? &doc_ret.params : &psg_ret.params,
                         &reranker.params, nullptr, mode, cfg.pool, cfg.threads};
    auto report = run_section_eval(pipe, data.test_queries, data.test_qrels);
    report.seed = cfg.retriever.seed;
    out.arms.push_back({std::string(to_string(mode)), std::move(report)});
  }
  return out;
}

/// Section retrieval (document retriever + reranker) for each reranker
/// variant. `variants` pairs an arm name with the reranker hyperparameters.
inline ComparisonReport run_reranker_variants(const SynthData& data, const RunConfig& cfg,
                                              const std::vector<std::pair<std::string, Hyperparams>>& variants) {
  ComparisonReport out;
  out.config = cfg.to_json();
  out.seed = cfg.retriever.seed;
  const auto doc_ret = train_retriever(data.corpus, data.train_queries, document_level(data.train_qrels), cfg.retriever);
  ReferenceEncoder backend(doc_ret.params);
  const Index index = build_index(data.corpus, backend, std::nullopt, 0, cfg.threads);
  RetrievalContext ctx{&index, &backend};
  for (const auto& [name, hp] : variants) {
    SectionPipeline pipe{&data.corpus, &doc_ret.params, nullptr, nullptr, Granularity::document, cfg.pool, cfg.threads};
    std::optional<Trained<RerankerParams>> reranker;
    std::optional<Trained<EncoderParams>> encoder;
    if (hp.objective == RerankObjective::contrastive) {
      encoder = train_section_encoder(data.corpus, data.train_queries, data.train_qrels, hp);
      pipe.section_encoder = &encoder->params;
    } else {
      reranker = train_reranker(data.corpus, data.train_queries, data.train_qrels, hp, &ctx);
      pipe.reranker = &reranker->params;
    }
    auto report = run_section_eval(pipe, data.test_queries, data.test_qrels);
    report.seed = hp.seed;
    out.arms.push_back({name, std::move(report)});
  }
  return out;
}

/// The configured reranker under each negative sampling strategy.
inline std::vector<std::pair<std::string, Hyperparams>> negative_arms(const RunConfig& cfg) {
  std::vector<std::pair<std::string, Hyperparams>> out;
  for (auto ns : {NegativeStrategy::in_document, NegativeStrategy::in_batch, NegativeStrategy::top_k}) {
    auto h = cfg.reranker;
    h.negative_strategy = ns;
    out.emplace_back(std::string(to_string(ns)), h);
  }
  return out;
}

/// The reranker objectives. The contrastive arm is the retriever's objective
/// over sections, so it trains with the retriever's hyperparameters.
inline std::vector<std::pair<std::string, Hyperparams>> objective_arms(const RunConfig& cfg) {
  std::vector<std::pair<std::string, Hyperparams>> out;
  for (auto ob : {RerankObjective::section_bce, RerankObjective::contrastive, RerankObjective::document_bce}) {
    auto h = ob == RerankObjective::contrastive ? cfg.retriever : cfg.reranker;
    h.objective = ob;
    out.emplace_back(std::string(to_string(ob)), h);
  }
  return out;
}

/// Subsamples training queries (in their original order) at each ratio and
/// reports document and section retrieval. Ratio 1.0 keeps every query.
inline ComparisonReport learning_curve(const SynthData& data, std::span<const double> ratios, const RunConfig& cfg) {
  ComparisonReport out;
  out.config = cfg.to_json();
  out.seed = cfg.retriever.seed;
  for (double ratio : ratios) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorKind::InvalidArgument, std::to_string(ratio), "ratio must be in (0, 1]");
    const std::size_t n = data.train_queries.size();
    const auto keep_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));
    Rng rng(Rng::mix(cfg.retriever.seed ^ 0x6375727665ULL));
    auto keep = rng.sample(n, keep_n);
    std::sort(keep.begin(), keep.end());
    std::vector<Query> qs;
    std::vector<QRel> rels;
    std::unordered_set<std::string_view> ids;
    for (auto i : keep) {
      qs.push_back(data.train_queries[i]);
      ids.insert(data.train_queries[i].query_id);
    }
    for (const auto& r : data.train_qrels) {
      if (ids.contains(r.query_id)) rels.push_back(r);
    }
    auto doc_report = train_and_eval_documents(data.corpus, qs, rels, data.test_queries, data.test_qrels, cfg);
    const auto doc_ret = train_retriever(data.corpus, qs, document_level(rels), cfg.retriever);
    const auto reranker = train_reranker(data.corpus, qs, rels, cfg.reranker);
    SectionPipeline pipe{&data.corpus, &doc_ret.params, &reranker.params, nullptr, Granularity::document, cfg.pool, cfg.threads};
    auto sec = run_section_eval(pipe, data.test_queries, data.test_qrels);
    EvalReport row;
    row.seed = cfg.retriever.seed;
    row.config = ojson{{"ratio", ratio}, {"train_queries", qs.size()}};
    for (const auto& [k, v] : doc_report.metrics) row.metrics.emplace_back("doc/" + k, v);
    for (const auto& [k, v] : sec.metrics) row.metrics.emplace_back("sec/" + k, v);
    std::ostringstream name;
    name << "ratio=" << ratio;
    out.arms.push_back({name.str(), std::move(row)});
  }
  return out;
}

}  // namespace interdoc
