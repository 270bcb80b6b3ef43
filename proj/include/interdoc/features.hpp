#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "interdoc/error.hpp"
#include "interdoc/tokenize.hpp"

namespace interdoc {

/// Platform-independent 64-bit string hash: seeded FNV-1a followed by a
/// splitmix64 finalizer so low bits are usable as bucket indices.
inline std::uint64_t hash64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

inline constexpr std::uint64_t kBucketSeed = 0x51ed270b27a3c9e1ULL;
inline constexpr std::uint64_t kSignSeed = 0x2545f4914f6cdd1dULL;

/// Sparse signed counts over F buckets, sorted by bucket, no zero entries.
struct FeatureVector {
  struct Entry {
    std::uint32_t bucket;
    std::int32_t value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  std::uint32_t dim = 0;
  std::vector<Entry> entries;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

  std::int32_t at(std::uint32_t bucket) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), bucket,
                               [](const Entry& e, std::uint32_t b) { return e.bucket < b; });
    return (it != entries.end() && it->bucket == bucket) ? it->value : 0;
  }

  bool empty() const { return entries.empty(); }

  /// Sorts and merges raw (bucket, value) pairs.
  static FeatureVector from_pairs(std::uint32_t dim, std::vector<Entry> raw) {
    std::sort(raw.begin(), raw.end(), [](const Entry& a, const Entry& b) { return a.bucket < b.bucket; });
    FeatureVector fv{dim, {}};
    for (const auto& e : raw) {
      if (!fv.entries.empty() && fv.entries.back().bucket == e.bucket) {
        fv.entries.back().value += e.value;
      } else {
        fv.entries.push_back(e);
      }
    }
    std::erase_if(fv.entries, [](const Entry& e) { return e.value == 0; });
    return fv;
  }
};

inline FeatureVector operator*(std::int32_t c, const FeatureVector& fv) {
  FeatureVector out{fv.dim, {}};
  if (c == 0) return out;
  out.entries = fv.entries;
  for (auto& e : out.entries) e.value *= c;
  return out;
}

inline FeatureVector operator+(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim != b.dim) throw Error(ErrorKind::DimMismatch, std::to_string(a.dim) + "!=" + std::to_string(b.dim));
  std::vector<FeatureVector::Entry> raw(a.entries);
  raw.insert(raw.end(), b.entries.begin(), b.entries.end());
  return FeatureVector::from_pairs(a.dim, std::move(raw));
}

inline bool is_power_of_two(std::uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

inline std::uint32_t token_bucket(std::string_view token, std::uint32_t dim) {
  return static_cast<std::uint32_t>(hash64(token, kBucketSeed) & (dim - 1));
}

inline std::int32_t token_sign(std::string_view token) {
  return (hash64(token, kSignSeed) & 1U) == 0 ? 1 : -1;
}

/// Signed hashing trick. Different modality prefixes may collide in a bucket;
/// string equality across prefixes never happens.
inline FeatureVector hash_features(const TokenStream& ts, std::uint32_t dim) {
  if (dim < 2 || !is_power_of_two(dim)) {
    throw Error(ErrorKind::InvalidArgument, std::to_string(dim), "feature dim must be a power of two >= 2");
  }
  std::vector<FeatureVector::Entry> raw;
  raw.reserve(ts.tokens.size());
  for (const auto& t : ts.tokens) raw.push_back({token_bucket(t, dim), token_sign(t)});
  return FeatureVector::from_pairs(dim, std::move(raw));
}

}  // namespace interdoc
