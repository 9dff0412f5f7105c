#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pairsr/image.hpp"
#include "pairsr/library.hpp"
#include "pairsr/metrics.hpp"
#include "pairsr/random.hpp"

namespace testing {

using pairsr::GrayImage;
using pairsr::PairedLibrary;

inline GrayImage random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 255.0) {
  pairsr::Rng rng(seed);
  GrayImage img(w, h);
  for (double& v : img.pixels()) v = lo + (hi - lo) * rng.uniform01();
  return img;
}

/// Band-limited texture with a standard deviation of roughly `amplitude`
/// around `mean`.
inline GrayImage texture(int w, int h, std::uint64_t seed, double sigma = 1.5, double mean = 128.0,
                         double amplitude = 40.0) {
  pairsr::Rng rng(seed);
  GrayImage noise(w, h);
  for (double& v : noise.pixels()) v = rng.normal();
  noise = pairsr::gaussian_blur(noise, sigma);
  double var = 0.0;
  for (double v : noise.pixels()) var += v * v;
  const double scale = amplitude / std::sqrt(var / static_cast<double>(noise.size()));
  for (double& v : noise.pixels()) v = std::clamp(mean + scale * v, 0.0, 255.0);
  return noise;
}

/// Library with `count` random entries spread over `k` categories.
inline PairedLibrary random_library(int side, int k, std::size_t count, std::uint64_t seed,
                                    double lo = 0.0, double hi = 255.0) {
  pairsr::Rng rng(seed);
  std::vector<PairedLibrary::Entry> entries(count);
  const std::size_t len = static_cast<std::size_t>(side) * side;
  for (std::size_t i = 0; i < count; ++i) {
    auto& e = entries[i];
    e.category = static_cast<std::uint32_t>(i % static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < len; ++j) {
      e.hr.push_back(static_cast<float>(lo + (hi - lo) * rng.uniform01()));
      e.lr_up.push_back(static_cast<float>(lo + (hi - lo) * rng.uniform01()));
    }
  }
  return PairedLibrary(side, k, seed, std::move(entries));
}

/// Straightforward per-pixel NLM over the full library: for each output
/// pixel, every covering window position rebuilds its query by clamped
/// indexing, weights all entries, and contributes its estimate for that
/// pixel. No sharing between pixels.
inline GrayImage naive_nlm(const GrayImage& up, const PairedLibrary& lib, double sigma_n) {
  const int n = lib.side(), half = n / 2;
  const int w = up.width(), h = up.height();
  const double scale = 2.0 * n * n * sigma_n * sigma_n;
  auto px = [&](int r, int c) {
    return up.at(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
  };
  // Per center: the weighted HR estimate (reused across the pixels it
  // covers only to keep the oracle affordable; computed independently).
  std::vector<std::vector<double>> est(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      std::vector<double> d(lib.size());
      for (std::size_t l = 0; l < lib.size(); ++l) {
        double s = 0.0;
        const auto cand = lib.lr_up(l);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const double diff = px(r + a - half, c + b - half) - cand[a * n + b];
            s += diff * diff;
          }
        d[l] = s;
      }
      const double dmin = *std::min_element(d.begin(), d.end());
      double total = 0.0;
      for (double& v : d) {
        v = std::exp(-(v - dmin) / scale);
        total += v;
      }
      std::vector<double> q(static_cast<std::size_t>(n) * n, 0.0);
      for (std::size_t l = 0; l < lib.size(); ++l) {
        const auto hr = lib.hr(l);
        for (std::size_t e = 0; e < q.size(); ++e) q[e] += d[l] / total * hr[e];
      }
      est[static_cast<std::size_t>(r) * w + c] = std::move(q);
    }
  GrayImage out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      int cnt = 0;
      for (int qr = r - half; qr <= r + half; ++qr)
        for (int qc = c - half; qc <= c + half; ++qc) {
          if (qr < 0 || qr >= h || qc < 0 || qc >= w) continue;
          s += est[static_cast<std::size_t>(qr) * w + qc][(r - qr + half) * n + (c - qc + half)];
          ++cnt;
        }
      out.at(r, c) = s / cnt;
    }
  return out;
}

/// Patch pairs drawn around well-separated intensity levels; group g gets
/// counts[g] members. HR and lr-up differ by a small offset.
inline std::vector<pairsr::PatchPair> grouped_pairs(const std::vector<std::size_t>& counts,
                                                    std::uint64_t seed, int side = 5) {
  pairsr::Rng rng(seed);
  const std::size_t len = static_cast<std::size_t>(side) * side;
  std::vector<pairsr::PatchPair> out;
  for (std::size_t g = 0; g < counts.size(); ++g)
    for (std::size_t i = 0; i < counts[g]; ++i) {
      pairsr::PatchPair p;
      p.hr = pairsr::Patch{side, {side / 2, side / 2}, std::vector<double>(len)};
      p.lr_up = p.hr;
      for (std::size_t e = 0; e < len; ++e) {
        p.hr.data[e] = 10.0 + 25.0 * static_cast<double>(g) + 2.0 * rng.normal();
        p.lr_up.data[e] = p.hr.data[e] + 3.0;
      }
      out.push_back(std::move(p));
    }
  // Interleave groups so sampling order does not follow group order.
  std::vector<pairsr::PatchPair> shuffled;
  for (std::size_t i : pairsr::sample_without_replacement(out.size(), out.size(), rng)) {
    shuffled.push_back(out[i]);
  }
  return shuffled;
}

/// Exhaustive between-class variance scan; ties keep the smallest t.
inline int otsu_oracle(const pairsr::Histogram& h) {
  double total = 0.0, sum = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += h[i];
    sum += i * static_cast<double>(h[i]);
  }
  int best_t = 255;
  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    double w0 = 0.0, s0 = 0.0;
    for (int i = 0; i <= t; ++i) {
      w0 += h[i];
      s0 += i * static_cast<double>(h[i]);
    }
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = s0 / w0, m1 = (sum - s0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1) / (total * total);
    if (between > best * (1 + 1e-12)) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

inline double max_abs_diff(const GrayImage& a, const GrayImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  return m;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pairsr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
