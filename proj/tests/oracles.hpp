#pragma once

// Deliberately naive reference computations. They share no code with the
// library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

/// Full argsort by cosine, descending, ties on ascending id, zero rows last.
inline std::vector<std::pair<std::string, double>> brute_force_search(const std::vector<std::vector<float>>& rows,
                                                                      const std::vector<std::string>& ids,
                                                                      const std::vector<float>& q, std::size_t k) {
  long double qq = 0;
  for (float v : q) qq += static_cast<long double>(v) * v;
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    long double dot = 0, rr = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      dot += static_cast<long double>(q[i]) * rows[r][i];
      rr += static_cast<long double>(rows[r][i]) * rows[r][i];
    }
    double c = (rr == 0 || qq == 0) ? -std::numeric_limits<double>::infinity()
                                    : static_cast<double>(dot / std::sqrt(qq * rr));
    if (std::isfinite(c)) c = std::clamp(c, -1.0, 1.0);
    all.emplace_back(ids[r], c);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

inline double cosine(const Vec& a, const Vec& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

/// -(1/B) sum_i log softmax_j(cos(q_i, d_j))[i], computed directly.
inline double contrastive(const std::vector<Vec>& zq, const std::vector<Vec>& zd) {
  long double total = 0;
  for (std::size_t i = 0; i < zq.size(); ++i) {
    long double denom = 0;
    for (std::size_t j = 0; j < zd.size(); ++j) denom += std::exp(static_cast<long double>(cosine(zq[i], zd[j])));
    total -= std::log(std::exp(static_cast<long double>(cosine(zq[i], zd[i]))) / denom);
  }
  return static_cast<double>(total / zq.size());
}

/// Document-grouped BCE with each entry weighted 1/(B * S_i).
inline double grouped_bce(const std::vector<Vec>& p, const std::vector<std::vector<int>>& y) {
  long double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p[i].size(); ++j) {
      const long double l = y[i][j] == 1 ? -std::log(static_cast<long double>(p[i][j]))
                                         : -std::log(1.0L - p[i][j]);
      total += l / (static_cast<long double>(p.size()) * p[i].size());
    }
  }
  return static_cast<double>(total);
}

/// Central differences on every coordinate.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& f, Vec x, double eps) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = f(x);
    x[i] = orig - eps;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

/// max_i |a_i - n_i| / max(1, |n_i|)
inline double max_rel_error(const Vec& analytic, const Vec& numeric) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(numeric[i])));
  }
  return worst;
}

}  // namespace oracle
