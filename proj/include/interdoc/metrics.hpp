#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>

namespace interdoc {

using RelevantSet = std::unordered_set<std::string>;

/// 1-based rank of the first relevant id, 0 when none is present.
inline std::size_t first_relevant_rank(std::span<const std::string> ranked, const RelevantSet& relevant) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.contains(ranked[i])) return i + 1;
  }
  return 0;
}

inline double recall_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k) {
  const auto r = first_relevant_rank(ranked, relevant);
  return (r != 0 && r <= k) ? 1.0 : 0.0;
}

inline double mrr_at_k(std::span<const std::string> ranked, const RelevantSet& relevant, std::size_t k) {
  const auto r = first_relevant_rank(ranked, relevant);
  return (r != 0 && r <= k) ? 1.0 / static_cast<double>(r) : 0.0;
}

}  // namespace interdoc
