#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "pairsr/error.hpp"
#include "pairsr/harness.hpp"
#include "pairsr/random.hpp"
#include "pairsr/records.hpp"

namespace pairsr {

void DegradationSpec::validate() const {
  const bool ok = blur_sigma >= 0 && noise_sigma_hr >= 0 && noise_sigma_lr >= 0 &&
                  contrast_gain > 0 && warp_amplitude >= 0 && warp_scale > 0 &&
                  std::isfinite(contrast_offset) && std::isfinite(shift_x) &&
                  std::isfinite(shift_y) && std::isfinite(rotation);
  if (!ok) throw InvalidArgument("degradation parameters out of range");
}

std::pair<double, double> WarpField::at(double x, double y) const {
  if (amplitude == 0.0) return {0.0, 0.0};
  auto sum = [&](const std::vector<Wave>& waves) {
    double s = 0.0;
    for (const Wave& w : waves) s += std::sin(2.0 * std::numbers::pi * (w.kx * x + w.ky * y) + w.phase);
    return waves.empty() ? 0.0 : amplitude * s / static_cast<double>(waves.size());
  };
  return {sum(x_waves), sum(y_waves)};
}

WarpField WarpField::random(double amplitude, double scale, std::uint64_t seed) {
  WarpField f;
  f.amplitude = amplitude;
  if (amplitude == 0.0) return f;
  Rng rng(seed);
  auto make = [&](std::vector<Wave>& waves) {
    for (int i = 0; i < 3; ++i) {
      const double angle = 2.0 * std::numbers::pi * rng.uniform01();
      const double freq = (0.7 + 0.6 * rng.uniform01()) / scale;
      waves.push_back({freq * std::cos(angle), freq * std::sin(angle),
                       2.0 * std::numbers::pi * rng.uniform01()});
    }
  };
  make(f.x_waves);
  make(f.y_waves);
  return f;
}

namespace {

GrayImage add_noise_and_clamp(GrayImage img, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  for (double& v : img.pixels()) {
    if (sigma > 0.0) v += sigma * rng.normal();
    v = std::clamp(v, 0.0, 255.0);
  }
  return img;
}

}  // namespace

SyntheticPair synthesize_pair(const GrayImage& truth, const DegradationSpec& spec, std::string id) {
  spec.validate();
  if (truth.width() % 2 != 0 || truth.height() % 2 != 0) {
    throw InvalidArgument("synthetic truth image must have even dimensions");
  }
  SyntheticPair out;
  out.transform = {spec.shift_x, spec.shift_y, spec.rotation, 0.0};
  out.warp = WarpField::random(spec.warp_amplitude, spec.warp_scale, derive_seed(spec.seed, 3));

  // content(p) = truth(w(fwd(p))): registering its upsample with `transform`
  // yields truth(p + d(p)).
  const int w = truth.width(), h = truth.height();
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rad = spec.rotation * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  GrayImage content(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double dx = c - cx, dy = r - cy;
      double qx = cs * dx - sn * dy + cx + spec.shift_x;
      double qy = sn * dx + cs * dy + cy + spec.shift_y;
      const auto [ddx, ddy] = out.warp.at(qx, qy);
      qx += ddx;
      qy += ddy;
      content.at(r, c) = spec.contrast_gain * sample_bicubic(truth, qx, qy) + spec.contrast_offset;
    }
  const GrayImage lr = downsample(gaussian_blur(content, spec.blur_sigma), 2);

  out.pair.id = std::move(id);
  out.pair.hr = add_noise_and_clamp(truth, spec.noise_sigma_hr, derive_seed(spec.seed, 1));
  out.pair.lr = add_noise_and_clamp(lr, spec.noise_sigma_lr, derive_seed(spec.seed, 2));
  return out;
}

void write_ground_truth(std::ostream& out, const SyntheticPair& s) {
  out << "shift_x = " << format_double(s.transform.shift_x) << '\n'
      << "shift_y = " << format_double(s.transform.shift_y) << '\n'
      << "theta = " << format_double(s.transform.theta) << '\n'
      << "mse = 0\n"
      << "warp_amplitude = " << format_double(s.warp.amplitude) << '\n';
  for (const auto& w : s.warp.x_waves) {
    out << "warp_x_wave = " << format_double(w.kx) << ' ' << format_double(w.ky) << ' '
        << format_double(w.phase) << '\n';
  }
  for (const auto& w : s.warp.y_waves) {
    out << "warp_y_wave = " << format_double(w.kx) << ' ' << format_double(w.ky) << ' '
        << format_double(w.phase) << '\n';
  }
}

Specimen generate_specimen(int width, int height, std::uint64_t seed, double texture_std) {
  if (width < 8 || height < 8) throw InvalidArgument("specimen must be at least 8x8");
  if (texture_std < 0) throw InvalidArgument("texture_std must be >= 0");
  Rng rng(seed);

  // Fine texture: blurred white noise scaled to texture_std.
  GrayImage noise(width, height);
  for (double& v : noise.pixels()) v = rng.normal();
  noise = gaussian_blur(noise, 1.2);
  double var = 0.0;
  for (double v : noise.pixels()) var += v * v;
  const double texture_scale = texture_std / std::sqrt(var / static_cast<double>(noise.size()) + 1e-12);

  struct Blob {
    double x, y, rx, ry, angle, level;
  };
  const int count = std::max(1, width * height / 1100);
  std::vector<Blob> blobs;
  for (int i = 0; i < count; ++i) {
    const double r = 4.0 + 9.0 * rng.uniform01();
    blobs.push_back({width * rng.uniform01(), height * rng.uniform01(), r,
                     r * (0.6 + 0.4 * rng.uniform01()), std::numbers::pi * rng.uniform01(),
                     175.0 + 45.0 * rng.uniform01()});
  }
  const double phase = 2.0 * std::numbers::pi * rng.uniform01();

  Specimen s{GrayImage(width, height), Mask(width, height)};
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double background =
          62.0 + 12.0 * std::sin(2.0 * std::numbers::pi * (c + 0.6 * r) / (1.7 * width) + phase);
      double cover = 0.0, level = 0.0;
      for (const Blob& b : blobs) {
        const double dx = c - b.x, dy = r - b.y;
        const double u = (std::cos(b.angle) * dx + std::sin(b.angle) * dy) / b.rx;
        const double v = (-std::sin(b.angle) * dx + std::cos(b.angle) * dy) / b.ry;
        const double dist = std::sqrt(u * u + v * v);
        // Soft boundary roughly 1.5 px wide.
        const double cov = std::clamp((1.0 - dist) * std::min(b.rx, b.ry) / 1.5 + 0.5, 0.0, 1.0);
        if (cov > cover) {
          cover = cov;
          level = b.level;
        }
      }
      const double value =
          background * (1.0 - cover) + level * cover + texture_scale * noise.at(r, c);
      s.image.at(r, c) = std::clamp(value, 0.0, 255.0);
      s.blobs.set(r, c, cover >= 0.5);
    }
  return s;
}

}  // namespace pairsr
