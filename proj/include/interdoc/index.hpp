#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "interdoc/binary.hpp"
#include "interdoc/corpus.hpp"
#include "interdoc/encoder.hpp"
#include "interdoc/error.hpp"
#include "interdoc/rng.hpp"

namespace interdoc {

/// Mean of the given embeddings. Summation runs over a canonical
/// (lexicographic) ordering, so the result does not depend on input order.
inline Embedding mean_embedding(std::vector<Embedding> parts, Role role) {
  if (parts.empty()) throw Error(ErrorKind::InvalidArgument, "mean_embedding", "no parts");
  const std::size_t d = parts.front().dim();
  std::sort(parts.begin(), parts.end(),
            [](const Embedding& a, const Embedding& b) { return a.values < b.values; });
  std::vector<double> acc(d, 0.0);
  for (const auto& p : parts) {
    if (p.dim() != d) throw Error(ErrorKind::DimMismatch, "section embedding");
    for (std::size_t i = 0; i < d; ++i) acc[i] += p.values[i];
  }
  Embedding out{role, std::vector<float>(d)};
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (std::size_t i = 0; i < d; ++i) out.values[i] = static_cast<float>(acc[i] * inv);
  return out;
}

/// Section indices averaged into a document embedding: all of them, or
/// `limit` drawn uniformly without replacement.
inline std::vector<std::size_t> pick_sections(std::size_t count, std::optional<std::size_t> limit, Rng& rng) {
  if (!limit || *limit >= count) {
    std::vector<std::size_t> all(count);
    for (std::size_t i = 0; i < count; ++i) all[i] = i;
    return all;
  }
  return rng.sample(count, *limit);
}

inline Embedding embed_document(const EncoderBackend& backend, const Document& doc,
                                std::optional<std::size_t> section_limit, Rng& rng) {
  if (section_limit && *section_limit == 0) {
    throw Error(ErrorKind::InvalidArgument, "section_limit", "must be >= 1");
  }
  auto picks = pick_sections(doc.sections.size(), section_limit, rng);
  std::vector<Section> chosen;
  chosen.reserve(picks.size());
  for (auto i : picks) chosen.push_back(doc.sections[i]);
  return mean_embedding(backend.encode_sections(chosen), Role::document);
}

struct Hit {
  std::string doc_id;
  double score;

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Dense document matrix searched exactly by cosine.
class Index {
 public:
  Index() = default;
  Index(std::uint32_t dim, std::vector<std::string> doc_ids, std::vector<float> rows)
      : dim_(dim), doc_ids_(std::move(doc_ids)), rows_(std::move(rows)) {
    if (rows_.size() != doc_ids_.size() * dim_) throw Error(ErrorKind::ShapeMismatch, "index rows");
    std::unordered_set<std::string_view> seen;
    for (const auto& id : doc_ids_) {
      if (!seen.insert(id).second) throw Error(ErrorKind::InvalidArgument, id, "duplicate doc_id in index");
    }
    norms_.resize(doc_ids_.size());
    for (std::size_t r = 0; r < doc_ids_.size(); ++r) {
      double s = 0.0;
      for (float v : row(r)) s += static_cast<double>(v) * v;
      norms_[r] = std::sqrt(s);
    }
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return doc_ids_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<double>& norms() const { return norms_; }
  std::span<const float> row(std::size_t r) const { return {rows_.data() + r * dim_, dim_}; }
  const std::vector<float>& data() const { return rows_; }

  friend bool operator==(const Index& a, const Index& b) {
    return a.dim_ == b.dim_ && a.doc_ids_ == b.doc_ids_ && a.rows_ == b.rows_;
  }

  /// Top-min(k, N) rows by cosine, descending; zero-norm rows score -inf and
  /// ties break on ascending doc_id.
  std::vector<Hit> search(std::span<const float> query, std::size_t k) const {
    if (query.size() != dim_) {
      throw Error(ErrorKind::DimMismatch, std::to_string(query.size()) + "!=" + std::to_string(dim_));
    }
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k", "must be >= 1");
    double qn = 0.0;
    for (float v : query) qn += static_cast<double>(v) * v;
    qn = std::sqrt(qn);

    std::vector<std::pair<double, std::size_t>> scored(size());
    for (std::size_t r = 0; r < size(); ++r) scored[r] = {cosine_to_row(query, qn, r), r};
    auto before = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return doc_ids_[a.second] < doc_ids_[b.second];
    };
    const std::size_t take = std::min(k, size());
    if (take < scored.size()) {
      std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), before);
      scored.resize(take);
    }
    std::sort(scored.begin(), scored.end(), before);
    std::vector<Hit> hits;
    hits.reserve(take);
    for (const auto& [s, r] : scored) hits.push_back({doc_ids_[r], s});
    return hits;
  }

  std::vector<Hit> search(const Embedding& q, std::size_t k) const { return search(q.values, k); }

  double cosine_to_row(std::span<const float> query, double query_norm, std::size_t r) const {
    if (norms_[r] == 0.0 || query_norm == 0.0) return -std::numeric_limits<double>::infinity();
    double dot = 0.0;
    auto v = row(r);
    for (std::size_t i = 0; i < dim_; ++i) dot += static_cast<double>(query[i]) * v[i];
    return std::clamp(dot / (query_norm * norms_[r]), -1.0, 1.0);
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, path.string(), "cannot open for writing");
    out.write("IDIX", 4);
    binary::put<std::uint32_t>(out, kVersion);
    binary::put<std::uint32_t>(out, dim_);
    binary::put<std::uint64_t>(out, doc_ids_.size());
    for (std::size_t r = 0; r < size(); ++r) {
      binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(doc_ids_[r].size()));
      out.write(doc_ids_[r].data(), static_cast<std::streamsize>(doc_ids_[r].size()));
      for (float v : row(r)) binary::put_f32(out, v);
    }
    if (!out) throw Error(ErrorKind::Io, path.string(), "write failed");
  }

  static Index load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, path.string(), "cannot open for reading");
    binary::expect_magic(in, "IDIX");
    const auto version = binary::get<std::uint32_t>(in, "version");
    if (version != kVersion) throw Error(ErrorKind::VersionMismatch, std::to_string(version));
    const auto dim = binary::get<std::uint32_t>(in, "dim");
    const auto n = binary::get<std::uint64_t>(in, "count");
    if (n * (4 + static_cast<std::uint64_t>(dim) * sizeof(float)) > std::filesystem::file_size(path)) {
      throw Error(ErrorKind::Truncated, "rows");
    }
    std::vector<std::string> ids;
    std::vector<float> rows;
    for (std::uint64_t r = 0; r < n; ++r) {
      const auto len = binary::get<std::uint32_t>(in, "id length");
      ids.push_back(binary::get_bytes(in, len, "doc id"));
      for (std::uint32_t i = 0; i < dim; ++i) rows.push_back(binary::get_f32(in, "row"));
    }
    return Index(dim, std::move(ids), std::move(rows));
  }

  static constexpr std::uint32_t kVersion = 1;

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> doc_ids_;
  std::vector<float> rows_;
  std::vector<double> norms_;
};

struct BuildReport {
  std::vector<std::string> zero_norm_docs;
};

/// Runs `fn(i)` for i in [0, n) over `threads` workers. Each index is handled
/// exactly once; callers write results into pre-sized slots.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::jthread> pool;
  std::exception_ptr failure;
  std::mutex m;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// One row per document in corpus order. Sampling (when `section_limit` is
/// set) uses a per-document stream derived from `seed`, so results do not
/// depend on `threads`.
inline Index build_index(const Corpus& corpus, const EncoderBackend& backend,
                         std::optional<std::size_t> section_limit = std::nullopt, std::uint64_t seed = 0,
                         unsigned threads = 1, BuildReport* report = nullptr) {
  if (corpus.empty()) throw Error(ErrorKind::InvalidArgument, "corpus", "cannot index an empty corpus");
  const std::size_t d = backend.dim();
  std::vector<float> rows(corpus.size() * d);
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    Rng rng(Rng::mix(seed ^ Rng::mix(i)));
    Embedding e;
    try {
      e = embed_document(backend, corpus[i], section_limit, rng);
    } catch (const Error& err) {
      throw Error(err.kind(), corpus[i].doc_id, err.what());
    }
    if (e.dim() != d) throw Error(ErrorKind::DimMismatch, corpus[i].doc_id);
    std::copy(e.values.begin(), e.values.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * d));
  });
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& doc : corpus.documents()) ids.push_back(doc.doc_id);
  Index index(static_cast<std::uint32_t>(d), std::move(ids), std::move(rows));
  if (report) {
    report->zero_norm_docs.clear();
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index.norms()[r] == 0.0) report->zero_norm_docs.push_back(index.doc_ids()[r]);
    }
  }
  return index;
}

}  // namespace interdoc
