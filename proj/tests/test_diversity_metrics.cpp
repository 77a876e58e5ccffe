#include <cmath>
#include <numbers>
#include <random>

#include "divrec/div/divergence.hpp"
#include "divrec/errors.hpp"
#include "divrec/nn/ops.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace divrec;
using namespace divrec::div;

namespace {

std::vector<double> random_dist(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution zero(0.15);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) s += v = zero(rng) ? 0.0 : e(rng);
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& v : p) v /= s;
  return p;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

nn::Tensor row(const std::vector<double>& v) { return nn::Tensor({1, v.size()}, v, true); }

}  // namespace

TEST_CASE("cosine closed forms") {
  std::vector<double> x{1, 1}, y{1, 0}, z{0, 1};
  CHECK(cosine(x, x) == doctest::Approx(1.0));
  CHECK(cosine(y, z) == 0.0);
  CHECK(cosine(x, y) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(cosine(std::vector<double>{0, 0}, x), DivergenceError);
  CHECK_THROWS_AS(cosine(std::vector<double>{1}, x), DivergenceError);
}

TEST_CASE("kl, js, tv closed forms") {
  std::vector<double> p{0.9, 0.1}, q{0.5, 0.5}, a{1, 0}, b{0, 1};
  CHECK(kl(p, p) == 0.0);
  CHECK(kl(p, q) == doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2)).epsilon(1e-12));
  CHECK(kl(p, q) == doctest::Approx(0.36800).epsilon(1e-4));
  CHECK(kl(p, q) != doctest::Approx(kl(q, p)));
  CHECK(js(p, p) == 0.0);
  CHECK(js(a, b) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  CHECK(tv(p, p) == 0.0);
  CHECK(tv(a, b) == 1.0);
  CHECK(tv(p, q) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_THROWS_AS(kl(std::vector<double>{0.5, 0.6}, q), DivergenceError);
  CHECK_THROWS_AS(js(std::vector<double>{-0.1, 1.1}, q), DivergenceError);
  CHECK_THROWS_AS(tv(p, std::vector<double>{1.0}), DivergenceError);
  // Zero q entries are clamped inside the log.
  CHECK(std::isfinite(kl(p, a)));
}

TEST_CASE("divergence properties on 1000 random pairs and triples") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> dim(2, 16);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = dim(rng);
    auto p = random_dist(rng, n), q = random_dist(rng, n), r = random_dist(rng, n);
    CHECK(js(p, q) == js(q, p));
    CHECK(js(p, q) >= -1e-12);
    CHECK(js(p, q) <= std::numbers::ln2 + 1e-12);
    CHECK(kl(p, q) >= -1e-12);
    CHECK(kl(p, p) == 0.0);
    CHECK(tv(p, q) == tv(q, p));
    CHECK(tv(p, p) == 0.0);
    CHECK(tv(p, r) <= tv(p, q) + tv(q, r) + 1e-12);

    auto x = random_vec(rng, n), y = random_vec(rng, n);
    const double s = scale(rng);
    auto sx = x;
    for (auto& v : sx) v *= s;
    CHECK(std::abs(cosine(sx, y) - cosine(x, y)) <= 1e-12);
    CHECK(std::abs(cosine(x, sx) - 1.0) <= 1e-12);
  }
}

TEST_CASE("js matches the mean-distribution definition") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    auto p = random_dist(rng, 7), q = random_dist(rng, 7);
    std::vector<double> m(7);
    for (int i = 0; i < 7; ++i) m[i] = 0.5 * (p[i] + q[i]);
    CHECK(js(p, q) == doctest::Approx(0.5 * kl(p, m) + 0.5 * kl(q, m)).epsilon(1e-12));
  }
}

TEST_CASE("d_total composition and weights") {
  std::vector<double> x{0.3, -1.2, 2.0};
  DivergenceConfig cfg;
  cfg.alpha = cfg.beta = 0.5;
  CHECK(d_total(x, x, cfg) == doctest::Approx(0.5));
  cfg.alpha = cfg.beta = 0.0;
  CHECK(d_total(x, std::vector<double>{1, 2, 3}, cfg) == 0.0);
  cfg.alpha = -1;
  CHECK_THROWS_AS(d_total(x, x, cfg), ContractError);

  std::vector<double> y{1.0, 0.5, -0.5};
  DivergenceConfig c2;
  const double cs = cosine(x, y), j = js(softmax(x), softmax(y));
  CHECK(constraint(x, y, c2) == doctest::Approx(0.5 * cs - 0.5 * j));
  c2.paper_literal_sign = true;
  CHECK(constraint(x, y, c2) == doctest::Approx(d_total(x, y, c2)));
}

TEST_CASE("tensor versions agree with the double versions") {
  std::mt19937_64 rng(9);
  DivergenceConfig cfg{0.7, 0.3, 1.0, false};
  for (int t = 0; t < 20; ++t) {
    auto x = random_vec(rng, 8, 2.0), y = random_vec(rng, 8, 2.0);
    nn::NoGradGuard g;
    CHECK(cosine_rows(row(x), row(y)).item() == doctest::Approx(cosine(x, y)).epsilon(1e-12));
    CHECK(js_rows(row(x), row(y)).item() == doctest::Approx(js(softmax(x), softmax(y))).epsilon(1e-10));
    CHECK(d_total_rows(row(x), row(y), cfg).item() == doctest::Approx(d_total(x, y, cfg)).epsilon(1e-10));
    CHECK(constraint_rows(row(x), row(y), cfg).item() == doctest::Approx(constraint(x, y, cfg)).epsilon(1e-10));
  }
}

TEST_CASE("d_total gradient matches finite differences and reaches both arguments") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    nn::Tensor a({3, 6}, random_vec(rng, 18), true);
    nn::Tensor b({3, 6}, random_vec(rng, 18), true);
    DivergenceConfig cfg{0.6, 0.4, 1.0, false};
    nn::ParamList params{{"a", a}, {"b", b}};
    auto r = testing::grad_check([&] { return d_total_rows(a, b, cfg); }, params);
    CHECK_MESSAGE(r.max_rel_error < 1e-4, "seed " << seed << " worst " << r.worst_param);
    auto r2 = testing::grad_check([&] { return constraint_rows(a, b, cfg); }, params);
    CHECK(r2.max_rel_error < 1e-4);

    nn::zero_grads(params);
    nn::backward(d_total_rows(a, b, cfg));
    double ga = 0, gb = 0;
    for (double g : a.grad()) ga += std::abs(g);
    for (double g : b.grad()) gb += std::abs(g);
    CHECK(ga > 0.0);
    CHECK(gb > 0.0);
  }
}

TEST_CASE("batch diversity report") {
  EmbeddingBatch same{{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}, {0, 1, 1}, {}};
  auto r = batch_diversity_report(same);
  CHECK(r.mean("cos") == doctest::Approx(1.0));
  CHECK(r.mean("js") == doctest::Approx(0.0));
  CHECK(r.mean("kl") == doctest::Approx(0.0));
  CHECK(r.mean("tv") == doctest::Approx(0.0));
  CHECK(r.overall.at("cos").n_pairs == 2);

  EmbeddingBatch ortho{{{1, 0}, {1, 0}, {0, 1}}, {0, 0, 1}, {}};
  CHECK(batch_diversity_report(ortho).mean("cos") == doctest::Approx(0.0));

  EmbeddingBatch single{{{1, 0}, {0, 1}}, {3, 3}, {}};
  CHECK_THROWS_AS(batch_diversity_report(single), ReportError);
}

TEST_CASE("batch report matches a brute-force double loop") {
  std::mt19937_64 rng(77);
  EmbeddingBatch b;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 2; ++k) {
      b.vectors.push_back(random_vec(rng, 5));
      b.class_ids.push_back(c);
    }
  }
  std::map<std::string, double> sum;
  int pairs = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (b.class_ids[i] == b.class_ids[j]) continue;
      // Ordered pairs: each unordered pair counted twice, means unchanged.
      auto p = softmax(b.vectors[i]), q = softmax(b.vectors[j]);
      sum["cos"] += cosine(b.vectors[i], b.vectors[j]);
      sum["kl"] += kl(p, q);
      sum["js"] += js(p, q);
      sum["tv"] += tv(p, q);
      ++pairs;
    }
  }
  CHECK(pairs == 24);
  auto r = batch_diversity_report(b);
  CHECK(r.overall.at("js").n_pairs == 12);
  for (const auto& [m, s] : sum) CHECK(r.mean(m) == doctest::Approx(s / pairs).epsilon(1e-12));
  CHECK(r.by_class_pair.size() == 3);
  CHECK(r.to_json()["pairs"].contains("0-2"));
}
