#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "interdoc/interdoc.hpp"
#include "interdoc/remote.hpp"

namespace fs = std::filesystem;
using namespace interdoc;

namespace {

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

/// Defaults, then the config file, then command-line flags.
Config load_config(const Common& common) {
  Config c = common.config_path.empty() ? Config{} : Config::load(common.config_path);
  if (common.seed) c.set("seed", std::to_string(*common.seed));
  return c;
}

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "key = value settings file")->check(CLI::ExistingFile);
  sub->add_option("--seed", common.seed, "seed for every random choice");
  sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
}

Hyperparams retriever_hp(const Config& c) {
  Hyperparams h;
  apply_config(c, h);
  return h;
}

Hyperparams reranker_hp(const Config& c) {
  Hyperparams h;
  apply_config(c, h, "reranker.");
  return h;
}

RunConfig run_config(const Config& c, unsigned threads) {
  RunConfig cfg;
  cfg.retriever = retriever_hp(c);
  cfg.reranker = reranker_hp(c);
  c.read("pool", cfg.pool);
  cfg.threads = threads;
  return cfg;
}

DocFormat parse_format(const std::string& s) {
  auto f = doc_format_from(s);
  if (!f) throw Error(ErrorKind::InvalidArgument, s, "unknown format");
  return *f;
}

EncoderParams load_retriever(const std::string& path) {
  auto ck = load_checkpoint(path);
  if (ck.role() != CheckpointRole::retriever) throw Error(ErrorKind::SchemaError, path, "expected a retriever checkpoint");
  return std::get<EncoderParams>(std::move(ck.params));
}

std::unique_ptr<EncoderBackend> make_backend(const std::string& checkpoint, const std::string& endpoint) {
  if (!endpoint.empty()) return std::make_unique<RemoteEncoder>(endpoint);
  if (checkpoint.empty()) throw Error(ErrorKind::InvalidArgument, "--checkpoint", "need --checkpoint or --endpoint");
  return std::make_unique<ReferenceEncoder>(load_retriever(checkpoint));
}

void print_losses(const std::vector<double>& losses) {
  std::cout << std::fixed << std::setprecision(6);
  for (std::size_t e = 0; e < losses.size(); ++e) std::cout << "epoch " << e + 1 << " loss " << losses[e] << '\n';
}

/// Writes JSON to `out` when given, otherwise the text table to stdout.
void emit(const ojson& json, const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, out, "cannot open for writing");
  f << json.dump(2) << '\n';
}

/// Loads the files written by `synth`.
SynthData load_synth_dir(const fs::path& dir) {
  SynthData d;
  d.corpus = read_corpus(dir / "corpus.jsonl");
  d.train_queries = read_queries(dir / "train_queries.jsonl");
  d.test_queries = read_queries(dir / "test_queries.jsonl");
  d.train_qrels = read_qrels(dir / "train_qrels.tsv", d.corpus, d.train_queries);
  d.test_qrels = read_qrels(dir / "test_qrels.tsv", d.corpus, d.test_queries);
  return d;
}

int cmd_ingest(const std::string& in_dir, const std::string& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".html" || ext == ".htm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Corpus corpus;
  std::size_t skipped = 0;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, f.string(), "cannot open");
    const std::string html((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      corpus.push_back(parse_html(html, f.stem().string()));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoContent) throw;
      std::cerr << "skipped " << f.filename().string() << ": no content\n";
      ++skipped;
    }
  }
  write_corpus(corpus, out);
  std::cout << "ingested " << corpus.size() << " documents, skipped " << skipped << '\n';
  return 0;
}

int cmd_synth(const Common& common, const std::string& out_dir) {
  const Config c = load_config(common);
  SynthConfig cfg;
  apply_config(c, cfg);
  const auto data = gen_synthetic(cfg);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_corpus(data.corpus, dir / "corpus.jsonl");
  write_queries(data.train_queries, dir / "train_queries.jsonl");
  write_qrels(data.train_qrels, dir / "train_qrels.tsv");
  write_queries(data.test_queries, dir / "test_queries.jsonl");
  write_qrels(data.test_qrels, dir / "test_qrels.tsv");
  std::cout << "wrote " << data.corpus.size() << " documents, " << data.train_queries.size() << " train and "
            << data.test_queries.size() << " test queries to " << out_dir << '\n';
  return 0;
}

struct TrainArgs {
  std::string corpus, queries, qrels, out, format = "interleaved";
  std::string objective, negatives, retriever;
};

int cmd_train_retriever(const Common& common, const TrainArgs& a) {
  const Config c = load_config(common);
  const Corpus corpus = read_corpus(a.corpus).with_format(parse_format(a.format));
  const auto queries = read_queries(a.queries);
  const auto qrels = read_qrels(a.qrels, corpus, queries);
  const auto trained = train_retriever(corpus, queries, document_level(qrels), retriever_hp(c));
  save_checkpoint(Checkpoint{trained.params, trained.steps}, a.out);
  print_losses(trained.epoch_loss);
  return 0;
}

int cmd_train_reranker(const Common& common, const TrainArgs& a) {
  Config c = load_config(common);
  if (!a.objective.empty()) c.set("reranker.objective", a.objective);
  if (!a.negatives.empty()) c.set("reranker.negatives", a.negatives);
  const Corpus corpus = read_corpus(a.corpus);
  const auto queries = read_queries(a.queries);
  const auto qrels = read_qrels(a.qrels, corpus, queries);
  const Hyperparams hp = reranker_hp(c);
  if (hp.objective == RerankObjective::contrastive) {
    // The contrastive reranker is a section-level dual encoder.
    const auto trained = train_section_encoder(corpus, queries, qrels, hp);
    save_checkpoint(Checkpoint{trained.params, trained.steps}, a.out);
    print_losses(trained.epoch_loss);
    return 0;
  }
  std::optional<ReferenceEncoder> backend;
  std::optional<Index> index;
  RetrievalContext ctx;
  if (hp.negative_strategy == NegativeStrategy::top_k) {
    if (a.retriever.empty()) throw Error(ErrorKind::InvalidArgument, "--retriever", "top_k negatives need a retriever checkpoint");
    backend.emplace(load_retriever(a.retriever));
    index = build_index(corpus, *backend, std::nullopt, 0, common.threads);
    ctx = RetrievalContext{&*index, &*backend};
  }
  const auto trained = train_reranker(corpus, queries, qrels, hp, index ? &ctx : nullptr);
  save_checkpoint(Checkpoint{trained.params, trained.steps}, a.out);
  print_losses(trained.epoch_loss);
  return 0;
}

struct IndexArgs {
  std::string corpus, checkpoint, endpoint, out, format = "interleaved";
  std::optional<std::size_t> section_limit;
};

int cmd_index(const Common& common, const IndexArgs& a) {
  const Config c = load_config(common);
  std::uint64_t seed = 0;
  c.read("seed", seed);
  const Corpus corpus = read_corpus(a.corpus).with_format(parse_format(a.format));
  const auto backend = make_backend(a.checkpoint, a.endpoint);
  BuildReport report;
  const Index index = build_index(corpus, *backend, a.section_limit, seed, common.threads, &report);
  index.save(a.out);
  for (const auto& id : report.zero_norm_docs) std::cerr << "zero-norm embedding: " << id << '\n';
  std::cout << "indexed " << index.size() << " documents, dim " << index.dim() << '\n';
  return 0;
}

struct SearchArgs {
  std::string index, checkpoint, endpoint, query;
  std::vector<std::string> image_refs;
  std::size_t k = 10;
};

int cmd_search(const SearchArgs& a) {
  const Index index = Index::load(a.index);
  const auto backend = make_backend(a.checkpoint, a.endpoint);
  const Query q{"cli", a.query, a.image_refs};
  validate_query(q);
  const auto hits = index.search(backend->encode_query(q), a.k);
  std::cout << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < hits.size(); ++i) std::cout << i + 1 << '\t' << hits[i].doc_id << '\t' << hits[i].score << '\n';
  return 0;
}

struct EvalArgs {
  std::string mode = "document";
  std::string index, checkpoint, endpoint, reranker, corpus, queries, qrels, data_dir, out;
  std::string granularity = "document";
  std::vector<std::string> formats;
  std::vector<double> ratios{0.1, 0.25, 0.5, 1.0};
};

int cmd_eval(const Common& common, const EvalArgs& a) {
  const Config c = load_config(common);
  auto need = [](const std::string& v, const char* flag) {
    if (v.empty()) throw CLI::RequiredError(flag);
  };
  if (a.mode == "document") {
    need(a.index, "--index");
    need(a.queries, "--queries");
    need(a.qrels, "--qrels");
    const Index index = Index::load(a.index);
    const auto backend = make_backend(a.checkpoint, a.endpoint);
    const auto queries = read_queries(a.queries);
    auto r = run_document_eval(index, *backend, queries, document_level(read_qrels(a.qrels)));
    // The report carries the seed the model was trained with.
    if (a.endpoint.empty()) r.seed = load_retriever(a.checkpoint).seed;
    else c.read("seed", r.seed);
    emit(r.to_json(), r.to_text(), a.out);
    return 0;
  }
  if (a.mode == "section" || a.mode == "classify") {
    need(a.corpus, "--corpus");
    need(a.reranker, "--reranker");
    need(a.queries, "--queries");
    need(a.qrels, "--qrels");
    const Corpus corpus = read_corpus(a.corpus);
    const auto queries = read_queries(a.queries);
    const auto qrels = read_qrels(a.qrels, corpus, queries);
    auto ck = load_checkpoint(a.reranker);
    EvalReport r;
    if (a.mode == "classify") {
      if (ck.role() != CheckpointRole::reranker) throw Error(ErrorKind::SchemaError, a.reranker, "classify needs a BCE reranker");
      r = run_classify_eval(corpus, std::get<RerankerParams>(ck.params), queries, qrels);
    } else {
      need(a.checkpoint, "--checkpoint");
      const EncoderParams retriever = load_retriever(a.checkpoint);
      SectionPipeline pipe{&corpus, &retriever, nullptr, nullptr, Granularity::document, 25, common.threads};
      c.read("pool", pipe.pool);
      if (a.granularity == "passage") pipe.mode = Granularity::passage;
      else if (a.granularity == "passage_star") pipe.mode = Granularity::passage_star;
      else if (a.granularity != "document") throw Error(ErrorKind::InvalidArgument, a.granularity, "unknown granularity");
      if (const auto* e = std::get_if<EncoderParams>(&ck.params)) pipe.section_encoder = e;
      else pipe.reranker = &std::get<RerankerParams>(ck.params);
      r = run_section_eval(pipe, queries, qrels);
    }
    r.seed = ck.role() == CheckpointRole::reranker ? std::get<RerankerParams>(ck.params).seed
                                                    : std::get<EncoderParams>(ck.params).seed;
    emit(r.to_json(), r.to_text(), a.out);
    return 0;
  }
  need(a.data_dir, "--data");
  const SynthData data = load_synth_dir(a.data_dir);
  const RunConfig cfg = run_config(c, common.threads);
  ComparisonReport r;
  if (a.mode == "ablate-formats") {
    std::vector<DocFormat> formats;
    for (const auto& f : a.formats) formats.push_back(parse_format(f));
    if (formats.empty()) formats.assign(std::begin(kAllFormats), std::end(kAllFormats));
    r = run_format_ablation(data, formats, cfg);
  } else if (a.mode == "granularity") {
    r = run_granularity(data, cfg);
  } else if (a.mode == "negatives") {
    r = run_reranker_variants(data, cfg, negative_arms(cfg));
  } else if (a.mode == "objectives") {
    r = run_reranker_variants(data, cfg, objective_arms(cfg));
  } else if (a.mode == "learning-curve") {
    r = learning_curve(data, a.ratios, cfg);
  } else {
    throw CLI::ValidationError("--mode", "unknown mode " + a.mode);
  }
  emit(r.to_json(), r.to_text(), a.out);
  return 0;
}

int cmd_sidecar_check(const std::string& endpoint, int timeout) {
  bool ok = true;
  for (const auto& r : sidecar_check(RemoteClient(endpoint, timeout))) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.pass;
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval over interleaved text, image and table documents"};
  app.require_subcommand(1);
  Common common;

  std::string in_dir, out;
  auto* ingest = app.add_subcommand("ingest", "parse a directory of HTML files into a corpus");
  ingest->add_option("--in", in_dir, "directory of .html files")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", out, "corpus JSONL")->required();

  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "generate a synthetic planted-answer corpus");
  add_common(synth, common);
  synth->add_option("--out-dir", out_dir, "output directory")->required();

  TrainArgs ta;
  auto* train_ret = app.add_subcommand("train-retriever", "train the document dual encoder");
  auto* train_rer = app.add_subcommand("train-reranker", "train the section reranker");
  for (auto* sub : {train_ret, train_rer}) {
    add_common(sub, common);
    sub->add_option("--corpus", ta.corpus)->required()->check(CLI::ExistingFile);
    sub->add_option("--queries", ta.queries)->required()->check(CLI::ExistingFile);
    sub->add_option("--qrels", ta.qrels)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", ta.out, "checkpoint path")->required();
  }
  train_ret->add_option("--format", ta.format, "document view to train on");
  train_rer->add_option("--objective", ta.objective)->check(CLI::IsMember({"section_bce", "contrastive", "document_bce"}));
  train_rer->add_option("--negatives", ta.negatives)->check(CLI::IsMember({"in_document", "in_batch", "top_k"}));
  train_rer->add_option("--retriever", ta.retriever, "retriever checkpoint for top_k negatives");

  IndexArgs ia;
  auto* index = app.add_subcommand("index", "embed a corpus into a search index");
  add_common(index, common);
  index->add_option("--corpus", ia.corpus)->required()->check(CLI::ExistingFile);
  index->add_option("--checkpoint", ia.checkpoint, "retriever checkpoint");
  index->add_option("--endpoint", ia.endpoint, "remote embedding service instead of a checkpoint");
  index->add_option("--format", ia.format, "document view to index");
  index->add_option("--section-limit", ia.section_limit, "average at most this many sampled sections");
  index->add_option("--out", ia.out, "index path")->required();

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "top-k documents for one query");
  add_common(search, common);
  search->add_option("--index", sa.index)->required()->check(CLI::ExistingFile);
  search->add_option("--checkpoint", sa.checkpoint, "retriever checkpoint");
  search->add_option("--endpoint", sa.endpoint, "remote embedding service instead of a checkpoint");
  search->add_option("--query", sa.query)->required();
  search->add_option("--image-ref", sa.image_refs, "query image reference (repeatable)");
  search->add_option("-k", sa.k, "number of hits")->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints or run an experiment");
  add_common(eval, common);
  eval->add_option("--mode", ea.mode)
      ->check(CLI::IsMember({"document", "section", "classify", "ablate-formats", "granularity", "negatives",
                             "objectives", "learning-curve"}));
  eval->add_option("--index", ea.index);
  eval->add_option("--checkpoint", ea.checkpoint, "retriever checkpoint");
  eval->add_option("--endpoint", ea.endpoint, "remote embedding service instead of a checkpoint");
  eval->add_option("--reranker", ea.reranker, "reranker checkpoint");
  eval->add_option("--corpus", ea.corpus);
  eval->add_option("--queries", ea.queries);
  eval->add_option("--qrels", ea.qrels);
  eval->add_option("--granularity", ea.granularity, "section mode: document, passage or passage_star");
  eval->add_option("--data", ea.data_dir, "directory written by synth");
  eval->add_option("--formats", ea.formats, "formats for ablate-formats")->delimiter(',');
  eval->add_option("--ratios", ea.ratios, "ratios for learning-curve")->delimiter(',');
  eval->add_option("--out", ea.out, "write the JSON report here instead of a table to stdout");

  std::string endpoint;
  int timeout = 30;
  auto* check = app.add_subcommand("sidecar-check", "probe an embedding service for protocol conformance");
  check->add_option("--endpoint", endpoint)->required();
  check->add_option("--timeout", timeout, "seconds per request")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (*ingest) return cmd_ingest(in_dir, out);
    if (*synth) return cmd_synth(common, out_dir);
    if (*train_ret) return cmd_train_retriever(common, ta);
    if (*train_rer) return cmd_train_reranker(common, ta);
    if (*index) return cmd_index(common, ia);
    if (*search) return cmd_search(sa);
    if (*eval) return cmd_eval(common, ea);
    if (*check) return cmd_sidecar_check(endpoint, timeout);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;
    std::cerr << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_data_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
