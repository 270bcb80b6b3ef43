#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "interdoc/error.hpp"
#include "interdoc/rng.hpp"

namespace interdoc {

using Vec = std::vector<double>;

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<Vec> d_query;
  std::vector<Vec> d_doc;
  std::vector<double> per_query;  // -log p_i for each row
};

/// In-batch contrastive loss over cosine similarities at temperature 1:
///   L = -(1/B) sum_i log( exp(cos(q_i, d_i)) / sum_j exp(cos(q_i, d_j)) )
/// with exact gradients for every query and document vector.
inline ContrastiveResult contrastive_loss(std::span<const Vec> zq, std::span<const Vec> zd) {
  const std::size_t b = zq.size();
  if (b == 0 || zd.size() != b) throw Error(ErrorKind::ShapeMismatch, "contrastive batch");
  const std::size_t d = zq[0].size();
  auto unit = [&](std::span<const Vec> z, std::size_t offset) {
    std::vector<Vec> u(b, Vec(d));
    Vec norms(b);
    for (std::size_t i = 0; i < b; ++i) {
      if (z[i].size() != d) throw Error(ErrorKind::ShapeMismatch, "embedding " + std::to_string(i));
      double s = 0.0;
      for (double v : z[i]) s += v * v;
      norms[i] = std::sqrt(s);
      if (norms[i] == 0.0) throw Error(ErrorKind::ZeroNormEmbedding, std::to_string(offset + i));
      for (std::size_t k = 0; k < d; ++k) u[i][k] = z[i][k] / norms[i];
    }
    return std::pair{std::move(u), std::move(norms)};
  };
  auto [qh, qn] = unit(zq, 0);
  auto [dh, dn] = unit(zd, b);

  std::vector<Vec> cos(b, Vec(b));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += qh[i][k] * dh[j][k];
      cos[i][j] = s;
    }
  }

  ContrastiveResult r;
  r.per_query.resize(b);
  // g[i][j] = dL/dcos_ij = (p_ij - [i==j]) / B
  std::vector<Vec> g(b, Vec(b));
  for (std::size_t i = 0; i < b; ++i) {
    const double m = *std::max_element(cos[i].begin(), cos[i].end());
    double z = 0.0;
    for (double c : cos[i]) z += std::exp(c - m);
    const double lse = m + std::log(z);
    r.per_query[i] = lse - cos[i][i];
    r.loss += r.per_query[i];
    for (std::size_t j = 0; j < b; ++j) {
      g[i][j] = (std::exp(cos[i][j] - lse) - (i == j ? 1.0 : 0.0)) / static_cast<double>(b);
    }
  }
  r.loss /= static_cast<double>(b);

  // dcos_ij/dq_i = (dh_j - cos_ij qh_i) / |q_i|, symmetric for d_j.
  r.d_query.assign(b, Vec(d, 0.0));
  r.d_doc.assign(b, Vec(d, 0.0));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      const double gij = g[i][j];
      if (gij == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        r.d_query[i][k] += gij * (dh[j][k] - cos[i][j] * qh[i][k]) / qn[i];
        r.d_doc[j][k] += gij * (qh[i][k] - cos[i][j] * dh[j][k]) / dn[j];
      }
    }
  }
  return r;
}

inline constexpr double kDefaultBceEps = 1e-7;

/// l(y, p) = -[y log p + (1 - y) log(1 - p)], p clipped to [eps, 1 - eps].
inline double binary_cross_entropy(int y, double p, double eps = kDefaultBceEps) {
  p = std::clamp(p, eps, 1.0 - eps);
  return -(y * std::log(p) + (1 - y) * std::log1p(-p));
}

struct BceResult {
  double loss = 0.0;
  std::vector<Vec> d_scores;
};

/// Document-grouped BCE: each entry of group i is weighted 1/(B * S_i).
/// Gradients are zero for scores held at a clipping bound.
inline BceResult bce_reranker_loss(std::span<const Vec> scores, std::span<const std::vector<int>> labels,
                                   double eps = kDefaultBceEps) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "groups");
  const double b = static_cast<double>(scores.size());
  BceResult r;
  r.d_scores.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != labels[i].size()) throw Error(ErrorKind::ShapeMismatch, "group " + std::to_string(i));
    if (scores[i].empty()) throw Error(ErrorKind::ShapeMismatch, "empty group " + std::to_string(i));
    const double w = 1.0 / (b * static_cast<double>(scores[i].size()));
    r.d_scores[i].resize(scores[i].size());
    for (std::size_t j = 0; j < scores[i].size(); ++j) {
      const int y = labels[i][j];
      const double raw = scores[i][j];
      const double p = std::clamp(raw, eps, 1.0 - eps);
      r.loss += w * binary_cross_entropy(y, p, eps);
      r.d_scores[i][j] = (raw < eps || raw > 1.0 - eps) ? 0.0 : w * (p - y) / (p * (1.0 - p));
    }
  }
  return r;
}

/// Loss and analytic gradient evaluated at a parameter vector.
using LossWithGradient = std::function<std::pair<double, Vec>(std::span<const double>)>;

/// Central differences on up to `coords` randomly chosen coordinates.
/// Returns max |analytic - numeric| / max(1, |numeric|).
inline double finite_diff_check(const LossWithGradient& fn, std::span<const double> params, double eps,
                                std::uint64_t seed = 0, std::size_t coords = 64) {
  if (eps < 1e-6 || eps > 1e-3) throw Error(ErrorKind::InvalidArgument, "eps", "must lie in [1e-6, 1e-3]");
  Vec x(params.begin(), params.end());
  const Vec analytic = fn(x).second;
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c : rng.sample(x.size(), coords)) {
    const double orig = x[c];
    x[c] = orig + eps;
    const double up = fn(x).first;
    x[c] = orig - eps;
    const double down = fn(x).first;
    x[c] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[c] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace interdoc
