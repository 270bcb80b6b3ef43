#include <catch_amalgamated.hpp>

#include "interdoc/eval.hpp"
#include "support.hpp"

using namespace interdoc;

namespace {

/// One-hot on the "key<N>" token of the text, so every query lands exactly
/// on its own document.
class KeyBackend final : public EncoderBackend {
 public:
  explicit KeyBackend(std::size_t n) : n_(n) {}
  Embedding encode_query(const Query& q) const override { return one_hot(q.text); }
  std::vector<Embedding> encode_sections(std::span<const Section> sections) const override {
    std::vector<Embedding> out;
    for (const auto& s : sections) out.push_back(one_hot(s.segments.front().content));
    return out;
  }
  std::size_t dim() const override { return n_; }

 private:
  Embedding one_hot(const std::string& text) const {
    Embedding e{Role::query, std::vector<float>(n_, 0.0f)};
    e.values[std::stoul(text.substr(3))] = 1.0f;
    return e;
  }
  std::size_t n_;
};

SynthConfig small_synth(std::uint64_t seed = 0) {
  SynthConfig c;
  c.num_docs = 60;
  c.queries_per_split = 80;
  c.seed = seed;
  return c;
}

RunConfig small_run() {
  RunConfig cfg;
  for (auto* h : {&cfg.retriever, &cfg.reranker}) {
    h->features = 1024;
    h->d_emb = 32;
    h->epochs = 2;
    h->batch_size = 16;
  }
  cfg.retriever.lr = 1e-3;
  cfg.reranker.lr = 1e-2;
  cfg.pool = 5;
  return cfg;
}

}  // namespace

TEST_CASE("a perfect retriever scores one everywhere") {
  const auto s = support::separable(30, 3);
  KeyBackend backend(30);
  const auto index = build_index(s.corpus, backend);
  const auto r = run_document_eval(index, backend, s.queries, document_level(s.qrels));
  for (const auto& [k, v] : r.metrics) CHECK(v == 1.0);
  CHECK(r.per_query.size() == 30);
  CHECK(report_invariants_hold(r));
}

TEST_CASE("queries without relevant documents are rejected") {
  const auto s = support::separable(4, 2);
  KeyBackend backend(4);
  const auto index = build_index(s.corpus, backend);
  std::vector<QRel> partial(s.qrels.begin(), s.qrels.begin() + 2);
  CHECK_THROWS_AS(run_document_eval(index, backend, s.queries, partial), Error);
}

TEST_CASE("document eval is deterministic on a 200-document corpus") {
  SynthConfig c = small_synth(4);
  c.num_docs = 200;
  const auto data = gen_synthetic(c);
  ReferenceEncoder backend(EncoderParams::init(32, 1024, 9));
  const auto a = run_document_eval(build_index(data.corpus, backend), backend, data.test_queries, data.test_qrels);
  const auto b = run_document_eval(build_index(data.corpus, backend, std::nullopt, 0, 4), backend, data.test_queries,
                                   data.test_qrels);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(report_invariants_hold(a));
}

TEST_CASE("single-section documents make section recall equal document recall") {
  const auto s = support::separable(20, 1);
  const auto params = EncoderParams::init(16, 256, 0);
  const auto reranker = RerankerParams::init(256, 0, 1.0);
  SectionPipeline pipe{&s.corpus, &params, &reranker, nullptr, Granularity::document, 20, 1};
  const auto sec = run_section_eval(pipe, s.queries, s.qrels);
  // Pool covers the corpus, so every gold section is among the candidates and
  // is the only section of its document.
  CHECK(sec.metric("R@20") == 1.0);
  ReferenceEncoder backend(params);
  const auto doc = run_document_eval(build_index(s.corpus, backend), backend, s.queries, document_level(s.qrels), {1, 10, 20});
  CHECK(sec.metric("R@20") == doc.metric("R@20"));
}

TEST_CASE("a trained reranker finds the only-matching section") {
  const auto s = support::separable(40, 3);
  Hyperparams hp;
  hp.features = 1024;
  hp.lr = 1e-2;
  hp.epochs = 20;
  hp.batch_size = 8;
  const auto reranker = train_reranker(s.corpus, s.queries, s.qrels, hp);
  CHECK(run_classify_eval(s.corpus, reranker.params, s.queries, s.qrels).metric("Acc@1") == 1.0);
}

TEST_CASE("pool size one reranks a single document") {
  const auto s = support::separable(10, 3);
  const auto params = EncoderParams::init(16, 256, 0);
  const auto reranker = RerankerParams::init(256, 0, 1.0);
  SectionPipeline pipe{&s.corpus, &params, &reranker, nullptr, Granularity::document, 1, 1};
  const auto r = run_section_eval(pipe, s.queries, s.qrels);
  // Only 3 candidates exist, so recall cannot grow past rank 3.
  CHECK(r.metric("R@10") == r.metric("R@20"));
  pipe.pool = 0;
  CHECK_THROWS_AS(run_section_eval(pipe, s.queries, s.qrels), Error);
}

TEST_CASE("passage views key sections by doc and section") {
  const auto s = support::separable(3, 2);
  const auto p = to_passage_corpus(s.corpus);
  REQUIRE(p.size() == 6);
  CHECK(p[0].doc_id == "d0#s0");
  CHECK(p[5].doc_id == "d2#s1");
  CHECK(p[5].sections.size() == 1);
  const auto rel = to_passage_qrels(s.qrels);
  CHECK(rel[1].doc_id == "d1#s1");
  CHECK_FALSE(rel[1].section_id);
}

TEST_CASE("format ablation over one format yields one row") {
  const auto data = gen_synthetic(small_synth());
  const DocFormat fmt[] = {DocFormat::entity};
  const auto r = run_format_ablation(data, fmt, small_run());
  REQUIRE(r.arms.size() == 1);
  CHECK(r.arms[0].name == "entity");
  CHECK(report_invariants_hold(r.arms[0].report));
}

TEST_CASE("format ablation rows are sorted by MRR") {
  const auto data = gen_synthetic(small_synth());
  const auto r = run_format_ablation(data, kAllFormats, small_run());
  REQUIRE(r.arms.size() == 5);
  for (std::size_t i = 1; i < r.arms.size(); ++i) {
    CHECK(r.arms[i - 1].report.metric("MRR@10") >= r.arms[i].report.metric("MRR@10"));
  }
}

TEST_CASE("learning curve at full ratio equals a plain run") {
  const auto data = gen_synthetic(small_synth(1));
  const auto cfg = small_run();
  const double full[] = {1.0};
  const auto curve = learning_curve(data, full, cfg);
  REQUIRE(curve.arms.size() == 1);
  const auto plain = train_and_eval_documents(data.corpus, data.train_queries, data.train_qrels, data.test_queries,
                                              data.test_qrels, cfg);
  for (const auto& [k, v] : plain.metrics) CHECK(curve.arms[0].report.metric("doc/" + k) == v);

  const double two[] = {0.1, 1.0};
  const auto rows = learning_curve(data, two, cfg);
  REQUIRE(rows.arms.size() == 2);
  CHECK(rows.arms[0].report.config["train_queries"] == 8);
  const double bad[] = {0.0};
  CHECK_THROWS_AS(learning_curve(data, bad, cfg), Error);
}

TEST_CASE("granularity arms satisfy the report invariants") {
  const auto data = gen_synthetic(small_synth(2));
  const auto r = run_granularity(data, small_run());
  REQUIRE(r.arms.size() == 3);
  CHECK(r.arms[0].name == "passage_star");
  CHECK(r.arms[1].name == "passage");
  CHECK(r.arms[2].name == "document");
  for (const auto& a : r.arms) CHECK(report_invariants_hold(a.report));
}

TEST_CASE("JSON and text reports carry the same numbers") {
  EvalReport r;
  r.metrics = {{"R@1", 0.25}, {"R@10", 0.5}, {"MRR@10", 0.375}};
  r.seed = 3;
  const auto j = r.to_json();
  CHECK(j["metrics"]["R@1"] == 0.25);
  CHECK(j["seed"] == 3);
  const auto text = r.to_text();
  CHECK(text.find("R@1          0.2500") != std::string::npos);
  CHECK(text.find("MRR@10       0.3750") != std::string::npos);

  ComparisonReport c;
  c.arms.push_back({"a", r});
  CHECK(c.to_json()["metrics"]["a/R@10"] == 0.5);
  CHECK(c.to_text().find("0.5000") != std::string::npos);
  CHECK_THROWS_AS(c.arm("missing"), Error);
}
