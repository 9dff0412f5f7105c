#include "pairsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "pairsr/error.hpp"
#include "pairsr/records.hpp"

namespace pairsr {

namespace {

void require_same_dims(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidArgument("image dimensions differ");
  }
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double cap(double v) { return std::min(v, kPsnrCapDb); }

}  // namespace

double mean_squared_error(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const GrayImage& a, const GrayImage& b) { return psnr_from_mse(mean_squared_error(a, b)); }

// --- SSIM -------------------------------------------------------------------------

namespace {

constexpr int kSsimWindow = 11;

// Valid-mode separable correlation with a normalized Gaussian.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::array<double, kSsimWindow>& g) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += g[i] * src[static_cast<std::size_t>(r) * w + c + i];
      tmp[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += g[i] * tmp[static_cast<std::size_t>(r + i) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  return out;
}

}  // namespace

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b);
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw InvalidArgument("image smaller than the 11x11 SSIM window");
  }
  std::array<double, kSsimWindow> g{};
  double gsum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    g[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const int w = a.width(), h = a.height();
  const std::size_t n = a.size();
  std::vector<double> va(a.pixels().begin(), a.pixels().end());
  std::vector<double> vb(b.pixels().begin(), b.pixels().end());
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = filter_valid(va, w, h, g);
  const auto mu_b = filter_valid(vb, w, h, g);
  const auto s_aa = filter_valid(aa, w, h, g);
  const auto s_bb = filter_valid(bb, w, h, g);
  const auto s_ab = filter_valid(ab, w, h, g);

  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double var_a = s_aa[i] - ma * ma;
    const double var_b = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

// --- Otsu -------------------------------------------------------------------------

Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (double v : img.pixels()) ++h[quantize(v)];
  return h;
}

int otsu_threshold(const Histogram& hist) {
  double total = 0.0, total_mass = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += static_cast<double>(hist[i]);
    total_mass += i * static_cast<double>(hist[i]);
  }
  if (total <= 0.0) return 255;
  int best_t = 255;
  double best = 0.0;
  double w0 = 0.0, mass0 = 0.0;
  for (int t = 0; t < 255; ++t) {
    w0 += static_cast<double>(hist[t]);
    mass0 += t * static_cast<double>(hist[t]);
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = mass0 / w0;
    const double mu1 = (total_mass - mass0) / w1;
    const double between = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

Mask remove_small_components(const Mask& mask, std::size_t min_size) {
  Mask out = mask;
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<int> stack, component;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (!mask.bits()[start] || seen[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int r = p / w, c = p % w;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          const int q = nr * w + nc;
          if (mask.bits()[q] && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
    }
    if (component.size() < min_size)
      for (int p : component) out.bits()[p] = 0;
  }
  return out;
}

Mask otsu_mask(const GrayImage& img, const OtsuOptions& opts) {
  const int t = otsu_threshold(histogram(img));
  Mask fg(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) fg.bits()[i] = quantize(img.pixels()[i]) > t ? 1 : 0;
  return remove_small_components(fg, opts.min_component);
}

double masked_mse(const GrayImage& a, const GrayImage& b, const Mask& mask) {
  require_same_dims(a, b);
  if (mask.width() != a.width() || mask.height() != a.height()) {
    throw InvalidArgument("mask dimensions differ from the images");
  }
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask.bits()[i]) continue;
    const double d = a.pixels()[i] - b.pixels()[i];
    s += d * d;
    ++count;
  }
  if (count == 0) throw InvalidArgument("empty mask");
  return s / static_cast<double>(count);
}

double masked_psnr(const GrayImage& a, const GrayImage& b, const Mask& mask) {
  return psnr_from_mse(masked_mse(a, b, mask));
}

// --- Canny ------------------------------------------------------------------------

EdgeMap canny(const GrayImage& img, const CannyOptions& opts) {
  if (!(opts.high > 0.0 && opts.high < 1.0)) {
    throw InvalidArgument("canny threshold must lie in (0, 1)");
  }
  if (!(opts.low_ratio > 0.0 && opts.low_ratio <= 1.0)) {
    throw InvalidArgument("canny low ratio must lie in (0, 1]");
  }
  const int w = img.width(), h = img.height();
  const GrayImage s = gaussian_blur(img, opts.sigma);
  std::vector<double> mag(img.size()), gx(img.size()), gy(img.size());
  double max_mag = 0.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double x = (s.clamped(r - 1, c + 1) + 2 * s.clamped(r, c + 1) + s.clamped(r + 1, c + 1)) -
                       (s.clamped(r - 1, c - 1) + 2 * s.clamped(r, c - 1) + s.clamped(r + 1, c - 1));
      const double y = (s.clamped(r + 1, c - 1) + 2 * s.clamped(r + 1, c) + s.clamped(r + 1, c + 1)) -
                       (s.clamped(r - 1, c - 1) + 2 * s.clamped(r - 1, c) + s.clamped(r - 1, c + 1));
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      gx[i] = x;
      gy[i] = y;
      mag[i] = std::hypot(x, y);
      max_mag = std::max(max_mag, mag[i]);
    }
  EdgeMap edges(w, h);
  if (max_mag <= 0.0 || w < 3 || h < 3) return edges;

  // Non-maximum suppression along the quantized gradient direction. The
  // asymmetric comparison keeps exactly one pixel of a symmetric ridge.
  std::vector<double> thin(img.size(), 0.0);
  for (int r = 1; r + 1 < h; ++r)
    for (int c = 1; c + 1 < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (mag[i] <= 0.0) continue;
      double angle = std::atan2(gy[i], gx[i]) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      int dr = 0, dc = 0;
      if (angle < 22.5 || angle >= 157.5) {
        dc = 1;
      } else if (angle < 67.5) {
        dr = 1;
        dc = 1;
      } else if (angle < 112.5) {
        dr = 1;
      } else {
        dr = 1;
        dc = -1;
      }
      const double before = mag[static_cast<std::size_t>(r - dr) * w + (c - dc)];
      const double after = mag[static_cast<std::size_t>(r + dr) * w + (c + dc)];
      if (mag[i] > before && mag[i] >= after) thin[i] = mag[i];
    }

  const double high = opts.high * max_mag;
  const double low = opts.low_ratio * high;
  std::vector<int> stack;
  for (std::size_t i = 0; i < thin.size(); ++i) {
    if (thin[i] >= high && !edges.bits()[i]) {
      edges.bits()[i] = 1;
      stack.push_back(static_cast<int>(i));
    }
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int r = p / w, c = p % w;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          const std::size_t q = static_cast<std::size_t>(nr) * w + nc;
          if (!edges.bits()[q] && thin[q] >= low && thin[q] > 0.0) {
            edges.bits()[q] = 1;
            stack.push_back(static_cast<int>(q));
          }
        }
    }
  }
  return edges;
}

double edge_similarity(const EdgeMap& b_hr, const EdgeMap& b_sr) {
  if (b_hr.width() != b_sr.width() || b_hr.height() != b_sr.height()) {
    throw InvalidArgument("edge map dimensions differ");
  }
  std::size_t diff = 0, n_hr = 0, n_sr = 0;
  for (std::size_t i = 0; i < b_hr.size(); ++i) {
    const bool x = b_hr.bits()[i] != 0, y = b_sr.bits()[i] != 0;
    diff += x != y;
    n_hr += x;
    n_sr += y;
  }
  if (n_hr + n_sr == 0) return 1.0;
  return 1.0 - static_cast<double>(diff) / static_cast<double>(n_hr + n_sr);
}

// --- evaluation -------------------------------------------------------------------

EvaluationReport evaluate(const GrayImage& hr, const GrayImage& sr, const GrayImage& bicubic,
                          const EvaluateOptions& opts) {
  require_same_dims(hr, sr);
  require_same_dims(hr, bicubic);
  if (opts.border < 0) throw InvalidArgument("border must be >= 0");
  const int b = opts.border;
  const int w = hr.width() - 2 * b, h = hr.height() - 2 * b;
  if (w < 11 || h < 11) throw InvalidArgument("images too small for evaluation after border removal");
  const GrayImage t = crop(hr, b, b, h, w);
  const GrayImage s = crop(sr, b, b, h, w);
  const GrayImage q = crop(bicubic, b, b, h, w);

  EvaluationReport r;
  r.psnr_sr = cap(psnr(t, s));
  r.psnr_bicubic = cap(psnr(t, q));
  r.delta_psnr = r.psnr_sr - r.psnr_bicubic;
  r.ssim_sr = ssim(t, s);
  r.ssim_bicubic = ssim(t, q);
  r.delta_ssim = r.ssim_sr - r.ssim_bicubic;

  const Mask fg = otsu_mask(t);
  const Mask bg = fg.complement();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.fg_delta_psnr = fg.count() ? cap(masked_psnr(t, s, fg)) - cap(masked_psnr(t, q, fg)) : nan;
  r.bg_delta_psnr = bg.count() ? cap(masked_psnr(t, s, bg)) - cap(masked_psnr(t, q, bg)) : nan;

  const CannyOptions co{opts.canny_param};
  const EdgeMap e_hr = canny(t, co);
  r.sim_sr = edge_similarity(e_hr, canny(s, co));
  r.sim_bicubic = edge_similarity(e_hr, canny(q, co));
  r.failure = r.delta_psnr < 0.0;
  return r;
}

void write_report(std::ostream& out, const EvaluationReport& r) {
  out << "psnr_sr = " << format_double(r.psnr_sr) << '\n'
      << "psnr_bicubic = " << format_double(r.psnr_bicubic) << '\n'
      << "delta_psnr = " << format_double(r.delta_psnr) << '\n'
      << "ssim_sr = " << format_double(r.ssim_sr) << '\n'
      << "ssim_bicubic = " << format_double(r.ssim_bicubic) << '\n'
      << "delta_ssim = " << format_double(r.delta_ssim) << '\n'
      << "fg_delta_psnr = " << format_double(r.fg_delta_psnr) << '\n'
      << "bg_delta_psnr = " << format_double(r.bg_delta_psnr) << '\n'
      << "sim_sr = " << format_double(r.sim_sr) << '\n'
      << "sim_bicubic = " << format_double(r.sim_bicubic) << '\n'
      << "failure = " << (r.failure ? "true" : "false") << '\n';
}

EvaluationReport read_report(std::istream& in) {
  const auto kvs = parse_key_values(in);
  auto num = [&](const char* key) { return parse_double(require_key(kvs, key), key); };
  EvaluationReport r;
  r.psnr_sr = num("psnr_sr");
  r.psnr_bicubic = num("psnr_bicubic");
  r.delta_psnr = num("delta_psnr");
  r.ssim_sr = num("ssim_sr");
  r.ssim_bicubic = num("ssim_bicubic");
  r.delta_ssim = num("delta_ssim");
  r.fg_delta_psnr = num("fg_delta_psnr");
  r.bg_delta_psnr = num("bg_delta_psnr");
  r.sim_sr = num("sim_sr");
  r.sim_bicubic = num("sim_bicubic");
  r.failure = parse_bool(require_key(kvs, "failure"), "failure");
  return r;
}

}  // namespace pairsr
