#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "interdoc/corpus.hpp"
#include "interdoc/error.hpp"
#include "interdoc/features.hpp"
#include "interdoc/rng.hpp"
#include "interdoc/tokenize.hpp"

namespace interdoc {

enum class Role { query, section, document };

constexpr std::string_view to_string(Role r) {
  switch (r) {
    case Role::query: return "query";
    case Role::section: return "section";
    case Role::document: return "document";
  }
  return "query";
}

struct Embedding {
  Role role = Role::query;
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Linear dual encoder. Both projections are d_emb x F, stored bucket-major:
/// column `b` of W occupies [b * d_emb, (b + 1) * d_emb).
struct EncoderParams {
  std::uint32_t d_emb = 256;
  std::uint32_t features = 65536;
  std::vector<float> w_query;
  std::vector<float> w_section;
  std::uint64_t seed = 0;

  /// Entries uniform in [-1/sqrt(F), 1/sqrt(F)]. With `tied` the section
  /// projection starts as a copy of the query projection, mirroring two
  /// encoders fine-tuned from one shared backbone.
  static EncoderParams init(std::uint32_t d_emb, std::uint32_t features, std::uint64_t seed, bool tied = true) {
    if (d_emb < 2) throw Error(ErrorKind::InvalidArgument, std::to_string(d_emb), "d_emb must be >= 2");
    if (!is_power_of_two(features)) {
      throw Error(ErrorKind::InvalidArgument, std::to_string(features), "F must be a power of two");
    }
    EncoderParams p;
    p.d_emb = d_emb;
    p.features = features;
    p.seed = seed;
    const std::size_t n = static_cast<std::size_t>(d_emb) * features;
    const double a = 1.0 / std::sqrt(static_cast<double>(features));
    Rng rng(seed);
    p.w_query.resize(n);
    for (auto& w : p.w_query) w = static_cast<float>(rng.uniform(-a, a));
    if (tied) {
      p.w_section = p.w_query;
    } else {
      p.w_section.resize(n);
      for (auto& w : p.w_section) w = static_cast<float>(rng.uniform(-a, a));
    }
    return p;
  }

  std::span<const float> matrix(Role r) const { return r == Role::query ? w_query : w_section; }

  void check() const {
    const std::size_t n = static_cast<std::size_t>(d_emb) * features;
    if (w_query.size() != n || w_section.size() != n) {
      throw Error(ErrorKind::ShapeMismatch, "encoder", "matrix size does not match d_emb x F");
    }
    for (float w : w_query) {
      if (!std::isfinite(w)) throw Error(ErrorKind::InvalidArgument, "w_query", "non-finite weight");
    }
    for (float w : w_section) {
      if (!std::isfinite(w)) throw Error(ErrorKind::InvalidArgument, "w_section", "non-finite weight");
    }
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Sparse matrix-vector product with W_Q (role=query) or W_S (role=section).
inline Embedding encode(const EncoderParams& params, const FeatureVector& fv, Role role) {
  if (fv.dim != params.features) {
    throw Error(ErrorKind::DimMismatch, std::to_string(fv.dim) + "!=" + std::to_string(params.features));
  }
  const std::size_t d = params.d_emb;
  auto w = params.matrix(role == Role::query ? Role::query : Role::section);
  std::vector<double> acc(d, 0.0);
  for (const auto& e : fv.entries) {
    const float* col = w.data() + static_cast<std::size_t>(e.bucket) * d;
    const double v = e.value;
    for (std::size_t i = 0; i < d; ++i) acc[i] += v * col[i];
  }
  Embedding out{role, std::vector<float>(d)};
  for (std::size_t i = 0; i < d; ++i) out.values[i] = static_cast<float>(acc[i]);
  return out;
}

/// Anything that can turn queries and sections into fixed-width vectors.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual Embedding encode_query(const Query& q) const = 0;
  virtual std::vector<Embedding> encode_sections(std::span<const Section> sections) const = 0;
  virtual std::size_t dim() const = 0;
};

/// Hashing tokenizer + linear projection.
class ReferenceEncoder final : public EncoderBackend {
 public:
  explicit ReferenceEncoder(std::shared_ptr<const EncoderParams> params) : params_(std::move(params)) {}
  explicit ReferenceEncoder(EncoderParams params)
      : params_(std::make_shared<const EncoderParams>(std::move(params))) {}

  Embedding encode_query(const Query& q) const override {
    return encode(*params_, hash_features(tokenize_query(q), params_->features), Role::query);
  }

  std::vector<Embedding> encode_sections(std::span<const Section> sections) const override {
    std::vector<Embedding> out;
    out.reserve(sections.size());
    for (const auto& s : sections) {
      out.push_back(encode(*params_, hash_features(tokenize_section(s), params_->features), Role::section));
    }
    return out;
  }

  std::size_t dim() const override { return params_->d_emb; }

  const EncoderParams& params() const { return *params_; }

 private:
  std::shared_ptr<const EncoderParams> params_;
};

}  // namespace interdoc
