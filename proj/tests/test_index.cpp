#include <catch_amalgamated.hpp>

#include <map>
#include <random>

#include "interdoc/index.hpp"
#include "interdoc/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace interdoc;

namespace {

/// Returns a fixed vector per section id.
class TableBackend final : public EncoderBackend {
 public:
  explicit TableBackend(std::map<std::string, std::vector<float>> table) : table_(std::move(table)) {}
  Embedding encode_query(const Query& q) const override { return {Role::query, table_.at(q.text)}; }
  std::vector<Embedding> encode_sections(std::span<const Section> sections) const override {
    std::vector<Embedding> out;
    for (const auto& s : sections) out.push_back({Role::section, table_.at(s.section_id)});
    return out;
  }
  std::size_t dim() const override { return table_.begin()->second.size(); }

 private:
  std::map<std::string, std::vector<float>> table_;
};

Document doc_with(std::string id, std::size_t sections) {
  Document d{std::move(id), "", {}};
  for (std::size_t s = 0; s < sections; ++s) d.sections.push_back(support::text_section("s" + std::to_string(s), "", "x"));
  return d;
}

std::vector<float> random_vec(std::mt19937& gen, std::size_t d) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(d);
  for (auto& x : v) x = n(gen);
  return v;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("document embedding is the section mean") {
  TableBackend b({{"s0", {2, 0}}, {"s1", {0, 2}}});
  Rng rng(0);
  CHECK(embed_document(b, doc_with("d", 2), std::nullopt, rng).values == std::vector<float>{1, 1});
  CHECK(embed_document(b, doc_with("d", 1), std::nullopt, rng).values == std::vector<float>{2, 0});
}

TEST_CASE("section_limit averages the seeded picks") {
  std::mt19937 gen(3);
  std::map<std::string, std::vector<float>> table;
  for (int s = 0; s < 10; ++s) table["s" + std::to_string(s)] = random_vec(gen, 6);
  TableBackend b(table);
  const auto doc = doc_with("d", 10);
  Rng rng(42);
  const auto got = embed_document(b, doc, 4, rng);

  Rng replay(42);
  const auto picks = replay.sample(10, 4);
  REQUIRE(picks.size() == 4);
  for (std::size_t i = 0; i < 6; ++i) {
    double sum = 0;
    for (auto p : picks) sum += table["s" + std::to_string(p)][i];
    CHECK(got.values[i] == Catch::Approx(sum / 4).epsilon(1e-6));
  }
  CHECK_THROWS_AS(embed_document(b, doc, 0, rng), Error);
}

TEST_CASE("mean embedding is bit-identical under section permutation") {
  std::mt19937 gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Embedding> parts;
    const std::size_t n = 2 + gen() % 12;
    for (std::size_t i = 0; i < n; ++i) parts.push_back({Role::section, random_vec(gen, 16)});
    const auto base = mean_embedding(parts, Role::document);
    std::shuffle(parts.begin(), parts.end(), gen);
    CHECK(mean_embedding(parts, Role::document).values == base.values);
  }
}

TEST_CASE("index rows follow corpus order and rebuild identically") {
  Corpus c;
  for (const char* id : {"b", "a", "c"}) c.push_back(doc_with(id, 2));
  ReferenceEncoder enc(EncoderParams::init(8, 64, 1));
  const auto idx = build_index(c, enc);
  CHECK(idx.size() == 3);
  CHECK(idx.doc_ids() == std::vector<std::string>{"b", "a", "c"});
  CHECK(build_index(c, enc) == idx);
  CHECK(build_index(c, enc, 1, 5, 3) == build_index(c, enc, 1, 5, 1));
}

TEST_CASE("empty text view yields a flagged zero-norm row") {
  Corpus c;
  c.push_back(doc_with("a", 1));
  c.push_back(Document{"b", "", {Section{"s0", "", {{SegmentKind::image, "p.jpg"}}}}});
  // The text-only view of "b" falls back to its doc id, so zero the encoder
  // column that token lands in to force a zero row.
  const auto view = c.with_format(DocFormat::text_only);
  auto p = EncoderParams::init(4, 64, 1);
  for (const auto& t : tokenize_section(view[1].sections[0]).tokens) {
    const auto b = token_bucket(t, 64);
    std::fill_n(p.w_section.begin() + b * 4, 4, 0.0f);
  }
  BuildReport report;
  const auto idx = build_index(view, ReferenceEncoder(p), std::nullopt, 0, 1, &report);
  CHECK(report.zero_norm_docs == std::vector<std::string>{"b"});
  const auto hits = idx.search(std::vector<float>{1, 0, 0, 0}, 2);
  CHECK(hits.back().doc_id == "b");
  CHECK(hits.back().score == -std::numeric_limits<double>::infinity());
}

TEST_CASE("single-row search returns the cosine") {
  const Index idx(2, {"only"}, {3, 4});
  const auto hits = idx.search(std::vector<float>{1, 0}, 5);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].doc_id == "only");
  CHECK(hits[0].score == Catch::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("hand-computed cosine ranking") {
  const Index idx(2, {"d1", "d2", "d3"}, {1, 0, 0, 1, -1, 0});
  const auto hits = idx.search(std::vector<float>{1, 0}, 2);
  CHECK(hits == std::vector<Hit>{{"d1", 1.0}, {"d2", 0.0}});
}

TEST_CASE("ties break on ascending doc id") {
  const Index idx(2, {"z", "m", "a"}, {1, 1, 2, 2, 0, 1});
  const auto hits = idx.search(std::vector<float>{1, 1}, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].doc_id == "m");
  CHECK(hits[1].doc_id == "z");
}

TEST_CASE("search agrees with a brute-force argsort") {
  std::mt19937 gen(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + gen() % 1000, d = 1 + gen() % 64, k = 1 + gen() % 20;
    std::vector<std::vector<float>> rows;
    std::vector<std::string> ids;
    std::vector<float> flat;
    for (std::size_t r = 0; r < n; ++r) {
      // Duplicate some rows to exercise the tie rule.
      rows.push_back(r > 0 && gen() % 8 == 0 ? rows[gen() % r] : random_vec(gen, d));
      ids.push_back("doc" + std::to_string(gen()));
      flat.insert(flat.end(), rows.back().begin(), rows.back().end());
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() != n) continue;
    std::shuffle(ids.begin(), ids.end(), gen);
    const Index idx(static_cast<std::uint32_t>(d), ids, flat);
    const auto q = random_vec(gen, d);
    const auto want = oracle::brute_force_search(rows, ids, q, k);
    const auto got = idx.search(q, k);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].doc_id == want[i].first);
      CHECK(got[i].score == Catch::Approx(want[i].second).margin(1e-12));
    }
  }
}

TEST_CASE("rankings ignore positive query scaling") {
  std::mt19937 gen(77);
  std::vector<float> flat;
  std::vector<std::string> ids;
  for (int r = 0; r < 300; ++r) {
    auto v = random_vec(gen, 12);
    flat.insert(flat.end(), v.begin(), v.end());
    ids.push_back("d" + std::to_string(r));
  }
  const Index idx(12, ids, flat);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = random_vec(gen, 12);
    auto scaled = q;
    const float c = std::uniform_real_distribution<float>(0.01f, 100.0f)(gen);
    for (auto& x : scaled) x *= c;
    auto ids_of = [](const std::vector<Hit>& h) {
      std::vector<std::string> out;
      for (const auto& x : h) out.push_back(x.doc_id);
      return out;
    };
    CHECK(ids_of(idx.search(q, 50)) == ids_of(idx.search(scaled, 50)));
  }
}

TEST_CASE("search rejects bad arguments") {
  const Index idx(2, {"a"}, {1, 0});
  CHECK(kind_of([&] { idx.search(std::vector<float>{1, 0, 0}, 1); }) == ErrorKind::DimMismatch);
  CHECK(kind_of([&] { idx.search(std::vector<float>{1, 0}, 0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("IDIX round-trip is bit-exact") {
  support::TempDir dir("idx");
  SynthConfig cfg;
  cfg.num_docs = 60;
  cfg.queries_per_split = 10;
  const auto data = gen_synthetic(cfg);
  const auto idx = build_index(data.corpus, ReferenceEncoder(EncoderParams::init(16, 256, 3)));
  idx.save(dir / "a.idix");
  const auto back = Index::load(dir / "a.idix");
  CHECK(back == idx);
  back.save(dir / "b.idix");
  CHECK(support::slurp(dir / "a.idix") == support::slurp(dir / "b.idix"));
}

TEST_CASE("corrupt IDIX files are rejected") {
  support::TempDir dir("idx");
  Index(2, {"a", "b"}, {1, 0, 0, 1}).save(dir / "ok.idix");
  auto bytes = support::slurp(dir / "ok.idix");
  support::spit(dir / "short.idix", bytes.substr(0, bytes.size() - 2));
  CHECK(kind_of([&] { Index::load(dir / "short.idix"); }) == ErrorKind::Truncated);
  auto version = bytes;
  version[4] = 9;
  support::spit(dir / "version.idix", version);
  CHECK(kind_of([&] { Index::load(dir / "version.idix"); }) == ErrorKind::VersionMismatch);
  bytes[0] = 'Q';
  support::spit(dir / "magic.idix", bytes);
  CHECK(kind_of([&] { Index::load(dir / "magic.idix"); }) == ErrorKind::BadMagic);
}
