#include <doctest.h>

#include <cmath>
#include <random>

#include "mtlfault/errors.hpp"
#include "mtlfault/glcm_features.hpp"

using namespace mtlfault;

namespace {

LevelMatrix matrix(int w, int h, int levels, std::vector<std::uint8_t> data) {
  return {w, h, levels, std::move(data)};
}

// Direct enumeration of every ordered pixel pair, independent of the
// library's counting loops.
Glcm naive_glcm(const LevelMatrix& lm, const std::vector<GlcmOffset>& offsets, bool symmetric) {
  const int L = lm.levels;
  Glcm g{L, std::vector<double>(static_cast<std::size_t>(L * L), 0.0)};
  for (const auto& o : offsets) {
    std::vector<double> c(static_cast<std::size_t>(L * L), 0.0);
    double total = 0.0;
    for (int r = 0; r < lm.height; ++r) {
      for (int col = 0; col < lm.width; ++col) {
        const int r2 = r + o.drow;
        const int c2 = col + o.dcol;
        if (r2 < 0 || r2 >= lm.height || c2 < 0 || c2 >= lm.width) continue;
        const int i = lm.at(col, r);
        const int j = lm.at(c2, r2);
        c[static_cast<std::size_t>(i * L + j)] += 1.0;
        total += 1.0;
        if (symmetric) {
          c[static_cast<std::size_t>(j * L + i)] += 1.0;
          total += 1.0;
        }
      }
    }
    for (std::size_t k = 0; k < c.size(); ++k) g.p[k] += c[k] / total;
  }
  for (auto& v : g.p) v /= static_cast<double>(offsets.size());
  return g;
}

double sum(const Glcm& g) {
  double s = 0.0;
  for (double v : g.p) s += v;
  return s;
}

}  // namespace

TEST_CASE("quantize") {
  GrayImage img(4, 1, 0);
  img.set(1, 0, 255);
  img.set(2, 0, 128);
  img.set(3, 0, 31);
  const LevelMatrix lm = quantize(img, 8);
  CHECK(lm.levels == 8);
  CHECK(lm.at(0, 0) == 0);
  CHECK(lm.at(1, 0) == 7);
  CHECK(lm.at(2, 0) == 4);
  CHECK(lm.at(3, 0) == 0);
  const LevelMatrix full = quantize(img, 256);
  CHECK(full.at(1, 0) == 255);
  CHECK_THROWS_AS(quantize(img, 1), ValidationError);
  CHECK_THROWS_AS(quantize(img, 257), ValidationError);
}

TEST_CASE("constant image degeneracies") {
  const LevelMatrix lm = matrix(6, 5, 8, std::vector<std::uint8_t>(30, 3));
  const Glcm g = compute_glcm(lm, default_offsets(), true);
  CHECK(g(3, 3) == 1.0);
  CHECK(sum(g) == doctest::Approx(1.0).epsilon(1e-12));
  const FeatureVector f = features20(g);
  CHECK(f[0] == 3.0);   // mean
  CHECK(f[1] == 0.0);   // variance
  CHECK(f[2] == 0.0);   // entropy
  CHECK(f[3] == 1.0);   // energy
  CHECK(f[4] == 0.0);   // contrast
  CHECK(f[5] == 0.0);   // correlation, defined for zero spread
  CHECK(f[7] == 0.0);   // dissimilarity
  CHECK(f[9] == 1.0);   // max probability
  CHECK(f[19] == 0.0);  // IMC1, defined for zero marginal entropy
  for (double v : f) CHECK(std::isfinite(v));
}

TEST_CASE("checkerboard hand values") {
  const LevelMatrix lm = matrix(2, 2, 2, {0, 1, 1, 0});
  const Glcm g = compute_glcm(lm, {{0, 1}}, true);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 0.5);
  CHECK(g(1, 0) == 0.5);
  CHECK(g(1, 1) == 0.0);
  const FeatureVector f = features20(g);
  CHECK(f[4] == doctest::Approx(1.0));   // contrast
  CHECK(f[7] == doctest::Approx(1.0));   // dissimilarity
  CHECK(f[3] == doctest::Approx(0.5));   // energy
  CHECK(f[2] == doctest::Approx(1.0));   // entropy, two cells of 1/2
  CHECK(f[0] == doctest::Approx(0.5));   // mean
  CHECK(f[5] == doctest::Approx(-1.0));  // perfectly anti-correlated
  CHECK(f[10] == doctest::Approx(0.0));  // autocorrelation
  CHECK(f[13] == doctest::Approx(1.0));  // sum mean
  CHECK(f[16] == doctest::Approx(1.0));  // difference mean
}

TEST_CASE("insufficient pixels") {
  const LevelMatrix lm = matrix(1, 3, 8, {0, 1, 2});
  CHECK_THROWS_AS(compute_glcm(lm, {{0, 1}}, true), InsufficientPixelsError);
  CHECK_NOTHROW(compute_glcm(lm, {{-1, 0}}, true));
  CHECK_THROWS_AS(compute_glcm(lm, {}, true), ValidationError);
}

TEST_CASE("matches naive pair enumeration on random matrices") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int L = 2 + static_cast<int>(rng() % 7);
    std::vector<std::uint8_t> data(64);
    for (auto& v : data) v = static_cast<std::uint8_t>(rng() % static_cast<unsigned>(L));
    const LevelMatrix lm = matrix(8, 8, L, data);
    for (bool symmetric : {true, false}) {
      const Glcm g = compute_glcm(lm, default_offsets(), symmetric);
      const Glcm n = naive_glcm(lm, default_offsets(), symmetric);
      CHECK(g.p == n.p);
      CHECK(std::abs(sum(g) - 1.0) <= 1e-12);
      if (symmetric) CHECK(g.p == g.transposed().p);
    }
  }
}

TEST_CASE("feature invariants on random matrices") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int L = 8;
    std::vector<std::uint8_t> data(100);
    for (auto& v : data) v = static_cast<std::uint8_t>(rng() % 8);
    const Glcm g = compute_glcm(matrix(10, 10, L, data), default_offsets(), true);
    const FeatureVector f = features20(g);
    const FeatureVector ft = features20(g.transposed());
    CHECK(f == ft);
    for (double v : f) CHECK(std::isfinite(v));
    CHECK(f[3] > 0.0);
    CHECK(f[3] <= 1.0);
    CHECK(f[2] >= 0.0);
    CHECK(f[2] <= std::log2(static_cast<double>(L * L)) + 1e-12);
    CHECK(std::abs(f[13] - 2.0 * f[0]) <= 1e-12);  // sum mean = 2 mu_x
    // Contrast through the difference distribution.
    double c = 0.0;
    for (int i = 0; i < L; ++i) {
      for (int j = 0; j < L; ++j) c += (i - j) * (i - j) * g(i, j);
    }
    CHECK(std::abs(f[4] - c) <= 1e-12);
    CHECK(f[15] >= 0.0);
    CHECK(f[18] >= 0.0);
  }
}

TEST_CASE("feature names") {
  const auto n = feature_names();
  REQUIRE(n.size() == kFeatureCount);
  CHECK(n.front() == "f01");
  CHECK(n.back() == "f20");
}
