#include "mtlfault/glcm_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mtlfault/errors.hpp"
#include "mtlfault/simd/kernels.hpp"

namespace mtlfault {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

Glcm Glcm::transposed() const {
  Glcm t{levels, std::vector<double>(p.size())};
  for (int i = 0; i < levels; ++i) {
    for (int j = 0; j < levels; ++j) {
      t.p[static_cast<std::size_t>(j * levels + i)] = (*this)(i, j);
    }
  }
  return t;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= kFeatureCount; ++k) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "f%02zu", k);
    names.emplace_back(buf);
  }
  return names;
}

std::vector<GlcmOffset> default_offsets() { return {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}}; }

LevelMatrix quantize(const GrayImage& img, int levels) {
  if (levels < 2 || levels > 256) throw ValidationError("levels must be in [2, 256]");
  LevelMatrix lm{img.width, img.height, levels, std::vector<std::uint8_t>(img.pixels.size())};
  simd::kernels().quantize_u8(img.pixels.data(), lm.data.data(), img.pixels.size(),
                              static_cast<unsigned>(levels));
  return lm;
}

std::vector<std::uint64_t> glcm_counts(const LevelMatrix& lm, GlcmOffset offset, bool symmetric) {
  const int n_rows = lm.height - std::abs(offset.drow);
  const int n_cols = lm.width - std::abs(offset.dcol);
  if (n_rows <= 0 || n_cols <= 0) {
    throw InsufficientPixelsError("offset (" + std::to_string(offset.drow) + "," +
                                  std::to_string(offset.dcol) + ") does not fit a " +
                                  std::to_string(lm.width) + "x" + std::to_string(lm.height) +
                                  " image");
  }
  const auto levels = static_cast<std::size_t>(lm.levels);
  std::vector<std::uint64_t> counts(levels * levels, 0);
  const int r0 = std::max(0, -offset.drow);
  const int c0 = std::max(0, -offset.dcol);
  for (int r = r0; r < r0 + n_rows; ++r) {
    for (int c = c0; c < c0 + n_cols; ++c) {
      const auto i = static_cast<std::size_t>(lm.at(c, r));
      const auto j = static_cast<std::size_t>(lm.at(c + offset.dcol, r + offset.drow));
      ++counts[i * levels + j];
      if (symmetric) ++counts[j * levels + i];
    }
  }
  return counts;
}

Glcm compute_glcm(const LevelMatrix& lm, const std::vector<GlcmOffset>& offsets, bool symmetric) {
  if (offsets.empty()) throw ValidationError("at least one GLCM offset is required");
  const auto cells = static_cast<std::size_t>(lm.levels) * static_cast<std::size_t>(lm.levels);
  Glcm g{lm.levels, std::vector<double>(cells, 0.0)};
  for (const auto& off : offsets) {
    const auto counts = glcm_counts(lm, off, symmetric);
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    const double denom = static_cast<double>(total);
    for (std::size_t k = 0; k < cells; ++k) g.p[k] += static_cast<double>(counts[k]) / denom;
  }
  const double n = static_cast<double>(offsets.size());
  for (auto& v : g.p) v /= n;
  return g;
}

FeatureVector features20(const Glcm& g) {
  const int L = g.levels;
  std::vector<double> px(static_cast<std::size_t>(L), 0.0);
  std::vector<double> py(static_cast<std::size_t>(L), 0.0);
  std::vector<double> psum(static_cast<std::size_t>(2 * L - 1), 0.0);
  std::vector<double> pdiff(static_cast<std::size_t>(L), 0.0);
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      const double p = g(i, j);
      px[static_cast<std::size_t>(i)] += p;
      py[static_cast<std::size_t>(j)] += p;
      psum[static_cast<std::size_t>(i + j)] += p;
      pdiff[static_cast<std::size_t>(std::abs(i - j))] += p;
    }
  }

  double mu_x = 0.0, mu_y = 0.0;
  for (int i = 0; i < L; ++i) {
    mu_x += i * px[static_cast<std::size_t>(i)];
    mu_y += i * py[static_cast<std::size_t>(i)];
  }
  double var_x = 0.0, var_y = 0.0, hx = 0.0, hy = 0.0;
  for (int i = 0; i < L; ++i) {
    var_x += (i - mu_x) * (i - mu_x) * px[static_cast<std::size_t>(i)];
    var_y += (i - mu_y) * (i - mu_y) * py[static_cast<std::size_t>(i)];
    hx -= plogp(px[static_cast<std::size_t>(i)]);
    hy -= plogp(py[static_cast<std::size_t>(i)]);
  }

  double entropy = 0.0, energy = 0.0, contrast = 0.0, idm = 0.0, dissimilarity = 0.0;
  double homogeneity = 0.0, max_p = 0.0, autocorr = 0.0, shade = 0.0, prominence = 0.0;
  double hxy1 = 0.0;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      const double p = g(i, j);
      const double d = i - j;
      const double ad = std::abs(d);
      const double s = i + j - mu_x - mu_y;
      entropy -= plogp(p);
      energy += p * p;
      contrast += d * d * p;
      idm += p / (1.0 + d * d);
      dissimilarity += ad * p;
      homogeneity += p / (1.0 + ad);
      max_p = std::max(max_p, p);
      autocorr += static_cast<double>(i) * j * p;
      shade += s * s * s * p;
      prominence += s * s * s * s * p;
      const double marg = px[static_cast<std::size_t>(i)] * py[static_cast<std::size_t>(j)];
      if (p > 0.0 && marg > 0.0) hxy1 -= p * std::log2(marg);
    }
  }

  const double sd = std::sqrt(var_x) * std::sqrt(var_y);
  const double correlation = sd > 0.0 ? (autocorr - mu_x * mu_y) / sd : 0.0;

  double sum_mean = 0.0, sum_entropy = 0.0;
  for (std::size_t k = 0; k < psum.size(); ++k) {
    sum_mean += static_cast<double>(k) * psum[k];
    sum_entropy -= plogp(psum[k]);
  }
  double sum_var = 0.0;
  for (std::size_t k = 0; k < psum.size(); ++k) {
    const double dk = static_cast<double>(k) - sum_mean;
    sum_var += dk * dk * psum[k];
  }

  double diff_mean = 0.0, diff_entropy = 0.0;
  for (std::size_t k = 0; k < pdiff.size(); ++k) {
    diff_mean += static_cast<double>(k) * pdiff[k];
    diff_entropy -= plogp(pdiff[k]);
  }
  double diff_var = 0.0;
  for (std::size_t k = 0; k < pdiff.size(); ++k) {
    const double dk = static_cast<double>(k) - diff_mean;
    diff_var += dk * dk * pdiff[k];
  }

  const double hmax = std::max(hx, hy);
  const double imc1 = hmax > 0.0 ? (entropy - hxy1) / hmax : 0.0;

  // -0.0 would print differently from 0.0 in CSV output.
  auto clean = [](double v) { return v == 0.0 ? 0.0 : v; };
  return {clean(mu_x),        clean(var_x),      clean(entropy),     clean(energy),
          clean(contrast),    clean(correlation), clean(idm),        clean(dissimilarity),
          clean(homogeneity), clean(max_p),       clean(autocorr),   clean(shade),
          clean(prominence),  clean(sum_mean),    clean(sum_var),    clean(sum_entropy),
          clean(diff_mean),   clean(diff_var),    clean(diff_entropy), clean(imc1)};
}

}  // namespace mtlfault
