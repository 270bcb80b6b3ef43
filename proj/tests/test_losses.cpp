#include <catch_amalgamated.hpp>

#include <random>

#include "interdoc/losses.hpp"
#include "oracles.hpp"

using namespace interdoc;

namespace {

std::vector<Vec> random_batch(std::mt19937& gen, std::size_t b, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec> out(b, Vec(d));
  for (auto& v : out) {
    for (auto& x : v) x = n(gen);
  }
  return out;
}

Vec flatten(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  Vec out;
  for (const auto& v : a) out.insert(out.end(), v.begin(), v.end());
  for (const auto& v : b) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::pair<std::vector<Vec>, std::vector<Vec>> unflatten(std::span<const double> x, std::size_t b, std::size_t d) {
  std::vector<Vec> q(b, Vec(d)), s(b, Vec(d));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      q[i][k] = x[i * d + k];
      s[i][k] = x[(b + i) * d + k];
    }
  }
  return {q, s};
}

}  // namespace

TEST_CASE("a batch of one has zero loss and gradient") {
  const std::vector<Vec> q{{1.0, 2.0, -1.0}}, d{{0.5, -3.0, 2.0}};
  const auto r = contrastive_loss(q, d);
  CHECK(std::abs(r.loss) <= 1e-12);
  for (double g : r.d_query[0]) CHECK(std::abs(g) <= 1e-12);
  for (double g : r.d_doc[0]) CHECK(std::abs(g) <= 1e-12);
}

TEST_CASE("identical pairs give ln 2") {
  const std::vector<Vec> q{{1.0, 2.0}, {1.0, 2.0}}, d{{3.0, -1.0}, {3.0, -1.0}};
  CHECK(std::abs(contrastive_loss(q, d).loss - std::log(2.0)) <= 1e-9);
}

TEST_CASE("contrastive loss matches the direct formula") {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + gen() % 8, d = 2 + gen() % 15;
    const auto q = random_batch(gen, b, d), s = random_batch(gen, b, d);
    CHECK(contrastive_loss(q, s).loss == Catch::Approx(oracle::contrastive(q, s)).epsilon(1e-10));
  }
}

TEST_CASE("contrastive gradients match central differences") {
  std::mt19937 gen(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + gen() % 8, d = 2 + gen() % 15;
    const auto q = random_batch(gen, b, d), s = random_batch(gen, b, d);
    const auto r = contrastive_loss(q, s);
    const auto numeric = oracle::numeric_gradient(
        [&](const Vec& x) {
          auto [qq, ss] = unflatten(x, b, d);
          return oracle::contrastive(qq, ss);
        },
        flatten(q, s), 1e-5);
    CHECK(oracle::max_rel_error(flatten(r.d_query, r.d_doc), numeric) < 1e-4);
  }
}

TEST_CASE("contrastive loss rejects bad batches") {
  const std::vector<Vec> q{{0.0, 0.0}}, d{{1.0, 0.0}};
  CHECK_THROWS_AS(contrastive_loss(q, d), Error);
  const std::vector<Vec> two{{1.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(contrastive_loss(two, d), Error);
}

TEST_CASE("binary cross entropy exact values") {
  CHECK(std::abs(binary_cross_entropy(1, 0.5) - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(binary_cross_entropy(0, 0.5) - std::log(2.0)) <= 1e-12);
  CHECK(binary_cross_entropy(1, 1.0) <= -std::log1p(-1e-7) + 1e-15);
  CHECK(binary_cross_entropy(0, 0.0) <= -std::log1p(-1e-7) + 1e-15);
  CHECK(std::isfinite(binary_cross_entropy(1, 0.0)));
}

TEST_CASE("grouped BCE matches the direct formula and its gradients") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + gen() % 4;
    std::vector<Vec> p(b);
    std::vector<std::vector<int>> y(b);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t s = 1 + gen() % 5;
      for (std::size_t j = 0; j < s; ++j) {
        p[i].push_back(u(gen));
        y[i].push_back(j == 0 ? 1 : 0);
      }
    }
    const auto r = bce_reranker_loss(p, y);
    CHECK(r.loss == Catch::Approx(oracle::grouped_bce(p, y)).epsilon(1e-10));
    Vec flat, grad;
    for (std::size_t i = 0; i < b; ++i) {
      flat.insert(flat.end(), p[i].begin(), p[i].end());
      grad.insert(grad.end(), r.d_scores[i].begin(), r.d_scores[i].end());
    }
    const auto numeric = oracle::numeric_gradient(
        [&](const Vec& x) {
          auto pp = p;
          std::size_t k = 0;
          for (auto& g : pp) {
            for (auto& v : g) v = x[k++];
          }
          return oracle::grouped_bce(pp, y);
        },
        flat, 1e-6);
    CHECK(oracle::max_rel_error(grad, numeric) < 1e-4);
  }
}

TEST_CASE("two documents with two and three sections") {
  const std::vector<Vec> p{{0.7, 0.2}, {0.1, 0.6, 0.3}};
  const std::vector<std::vector<int>> y{{1, 0}, {0, 1, 0}};
  const auto r = bce_reranker_loss(p, y);
  const double want = (-std::log(0.7) - std::log(0.8)) / 4 + (-std::log(0.9) - std::log(0.6) - std::log(0.7)) / 6;
  CHECK(r.loss == Catch::Approx(want).epsilon(1e-12));
  CHECK(r.d_scores[0][0] == Catch::Approx(-1.0 / (4 * 0.7)).epsilon(1e-12));
  CHECK(r.d_scores[1][2] == Catch::Approx(1.0 / (6 * 0.7)).epsilon(1e-12));
}

TEST_CASE("clipped scores have zero gradient") {
  const std::vector<Vec> p{{1.0, 0.0}};
  const std::vector<std::vector<int>> y{{1, 0}};
  const auto r = bce_reranker_loss(p, y);
  CHECK(r.loss <= 1e-6);
  CHECK(r.d_scores[0] == Vec{0.0, 0.0});
}

TEST_CASE("finite_diff_check is exact on linear functions") {
  const Vec w{1.5, -2.0, 0.25, 4.0};
  LossWithGradient fn = [&](std::span<const double> x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
    return std::pair{s, w};
  };
  CHECK(finite_diff_check(fn, Vec{0.3, 0.1, -0.7, 2.0}, 1e-4) < 1e-8);
}

TEST_CASE("finite_diff_check on both losses") {
  std::mt19937 gen(4);
  const std::size_t b = 4, d = 8;
  const auto q = random_batch(gen, b, d), s = random_batch(gen, b, d);
  LossWithGradient contrastive = [&](std::span<const double> x) {
    auto [qq, ss] = unflatten(x, b, d);
    const auto r = contrastive_loss(qq, ss);
    return std::pair{r.loss, flatten(r.d_query, r.d_doc)};
  };
  CHECK(finite_diff_check(contrastive, flatten(q, s), 1e-4) < 1e-4);

  const std::vector<std::vector<int>> y{{1, 0}, {0, 0, 1}};
  LossWithGradient bce = [&](std::span<const double> x) {
    const std::vector<Vec> p{{x[0], x[1]}, {x[2], x[3], x[4]}};
    const auto r = bce_reranker_loss(p, y);
    Vec g;
    for (const auto& v : r.d_scores) g.insert(g.end(), v.begin(), v.end());
    return std::pair{r.loss, g};
  };
  CHECK(finite_diff_check(bce, Vec{0.6, 0.3, 0.2, 0.45, 0.8}, 1e-5) < 1e-4);
}

TEST_CASE("finite_diff_check bounds eps") {
  LossWithGradient fn = [](std::span<const double> x) { return std::pair{x[0], Vec{1.0}}; };
  CHECK_THROWS_AS(finite_diff_check(fn, Vec{1.0}, 1e-2), Error);
  CHECK_THROWS_AS(finite_diff_check(fn, Vec{1.0}, 1e-8), Error);
}
