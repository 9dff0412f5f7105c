#include <doctest.h>

#include <sstream>

#include "pairsr/error.hpp"
#include "pairsr/harness.hpp"
#include "pairsr/registration.hpp"
#include "support.hpp"

using namespace pairsr;

namespace {

// Integer translation: out(r, c) = img(r - dy, c - dx) with replicated borders.
GrayImage translate(const GrayImage& img, int dx, int dy) {
  GrayImage out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) out.at(r, c) = img.clamped(r - dy, c - dx);
  return out;
}

}  // namespace

TEST_CASE("global registration recovers known shifts") {
  const GrayImage hr = generate_specimen(160, 128, 11).image;

  SUBCASE("identity") {
    const GlobalTransform t = global_register(hr, hr);
    CHECK(t.shift_x == 0.0);
    CHECK(t.shift_y == 0.0);
    CHECK(t.theta == 0.0);
    CHECK(t.mse == 0.0);
  }
  SUBCASE("shift (3, -2)") {
    // up is hr moved by (-3, +2), so mapping it back needs (+3, -2).
    const GrayImage up = translate(hr, -3, 2);
    const GlobalTransform t = global_register(hr, up);
    CHECK(t.shift_x == 3.0);
    CHECK(t.shift_y == -2.0);
    CHECK(t.theta == 0.0);
    CHECK(t.mse == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("rotation by 1 degree") {
    // up is hr rotated by -1 degree; registration must undo it.
    const GlobalTransform t = global_register(hr, apply_transform(hr, {0, 0, -1.0, 0}).image);
    CHECK(std::abs(t.theta - 1.0) <= 0.1 + 1e-9);
    CHECK(std::abs(t.shift_x) <= 1.0);
    CHECK(std::abs(t.shift_y) <= 1.0);
  }
}

TEST_CASE("global registration on synthetic pairs matches generator ground truth") {
  const GrayImage truth = generate_specimen(192, 160, 5).image;
  DegradationSpec spec;
  spec.shift_x = 3;
  spec.shift_y = -2;
  const SyntheticPair s = synthesize_pair(truth, spec);
  const GlobalTransform t = global_register(s.pair.hr, bicubic_upsample(s.pair.lr, 2));
  CHECK(t.shift_x == 3.0);
  CHECK(t.shift_y == -2.0);
  CHECK(t.theta == 0.0);
}

TEST_CASE("global registration is deterministic and validates its search space") {
  const GrayImage hr = testing::texture(96, 96, 4);
  const GrayImage up = translate(hr, 5, -7);
  const GlobalTransform a = global_register(hr, up), b = global_register(hr, up);
  CHECK(a.shift_x == b.shift_x);
  CHECK(a.shift_y == b.shift_y);
  CHECK(a.theta == b.theta);
  CHECK(a.mse == b.mse);

  RigidSearch bad;
  bad.coarse_shift_step = 3;  // not a multiple of the coarse factor
  CHECK_THROWS_AS(global_register(hr, up, bad), InvalidArgument);
  RigidSearch tiny;
  tiny.min_overlap = 1.5;
  CHECK_THROWS_AS(global_register(hr, up, tiny), std::exception);
}

TEST_CASE("apply_transform") {
  const GrayImage img = testing::texture(64, 48, 8);
  CHECK(apply_transform(img, {}).image == img);

  const WarpedImage shifted = apply_transform(GrayImage(20, 20, 50.0), {1, 0, 0, 0});
  for (double v : shifted.image.pixels()) CHECK(v == doctest::Approx(50.0));

  // Forward then inverse on a smooth image; interior error bounded by the
  // double-resampling loss.
  const GrayImage smooth = gaussian_blur(testing::texture(96, 96, 12, 3.0), 1.0);
  const GlobalTransform t{4, -3, 2.5, 0};
  const WarpedImage fwd = apply_transform(smooth, t);
  const WarpedImage back = apply_transform(fwd.image, t.inverse());
  double worst = 0.0;
  for (int r = 16; r < 80; ++r)
    for (int c = 16; c < 80; ++c) worst = std::max(worst, std::abs(back.image.at(r, c) - smooth.at(r, c)));
  CHECK(worst <= 1.0);
}

TEST_CASE("local registration") {
  const GrayImage hr = testing::texture(48, 48, 21);
  const PixelPos center{24, 24};

  CHECK(local_register(hr, hr, center, 9, 5) == center);

  GrayImage doubled = hr;
  for (double& v : doubled.pixels()) v *= 2.0;
  CHECK(local_register(doubled, hr, center, 9, 5) == center);

  // reg(p) = hr(p - (2, 1)): the HR match sits at center - (2, 1).
  const GrayImage reg = translate(hr, 1, 2);
  const PixelPos got = local_register(hr, reg, center, 9, 5);
  CHECK(got.row - center.row == -2);
  CHECK(got.col - center.col == -1);

  // Exhaustive oracle: the best normalized inner product over the window.
  double best = -2.0;
  PixelPos arg{};
  const Patch q = extract_patch(reg, center, 9);
  for (int di = -5; di <= 5; ++di)
    for (int dj = -5; dj <= 5; ++dj) {
      const Patch h = extract_patch(hr, {center.row + di, center.col + dj}, 9);
      double dot = 0.0, nq = 0.0, nh = 0.0;
      for (std::size_t e = 0; e < q.data.size(); ++e) {
        dot += q.data[e] * h.data[e];
        nq += q.data[e] * q.data[e];
        nh += h.data[e] * h.data[e];
      }
      const double s = dot / std::sqrt(nq * nh);
      if (s > best) {
        best = s;
        arg = {center.row + di, center.col + dj};
      }
    }
  CHECK(arg == got);

  CHECK_THROWS_AS(local_register(hr, hr, {3, 3}, 9, 5), InvalidArgument);
  CHECK_THROWS_AS(local_register(hr, GrayImage(48, 48, 0.0), center, 9, 5), ComputeError);
}

TEST_CASE("constant nonzero patches are valid for local registration") {
  const GrayImage flat(32, 32, 80.0);
  CHECK_NOTHROW(local_register(flat, flat, {16, 16}, 9, 3));
}

TEST_CASE("match_patches") {
  SUBCASE("constant images pair in place") {
    const GrayImage c(30, 30, 90.0);
    const auto pairs = match_patches(c, c);
    CHECK(!pairs.empty());
    for (const auto& p : pairs) {
      CHECK(p.di == 0);
      CHECK(p.dj == 0);
      CHECK(!p.textured);
    }
  }
  SUBCASE("displacements stay within the radius and runs are deterministic") {
    const GrayImage hr = testing::texture(60, 50, 3);
    const GrayImage reg = testing::texture(60, 50, 4);
    MatchOptions opts;
    opts.stride = 2;
    const auto a = match_patches(hr, reg, opts);
    const auto b = match_patches(hr, reg, opts);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i].di) <= opts.radius);
      CHECK(std::abs(a[i].dj) <= opts.radius);
      CHECK(a[i].di == b[i].di);
      CHECK(a[i].dj == b[i].dj);
      CHECK(a[i].hr.data == b[i].hr.data);
    }
  }
  SUBCASE("recovers a known smooth distortion field") {
    // Isotropic texture: blob edges alone leave the along-edge offset unconstrained.
    const GrayImage truth = testing::texture(192, 192, 17, 2.0);
    DegradationSpec spec;
    spec.warp_amplitude = 3.0;
    spec.warp_scale = 48;
    spec.seed = 9;
    const SyntheticPair s = synthesize_pair(truth, spec);
    const GrayImage reg = bicubic_upsample(s.pair.lr, 2);
    MatchOptions opts;
    opts.stride = 3;
    const auto pairs = match_patches(s.pair.hr, reg, opts);
    std::size_t textured = 0, good = 0;
    for (const auto& p : pairs) {
      if (!p.textured) continue;
      ++textured;
      const auto [dcol, drow] = s.warp.at(p.lr_up.center.col, p.lr_up.center.row);
      if (std::abs(p.di - drow) <= 1.0 && std::abs(p.dj - dcol) <= 1.0) ++good;
    }
    REQUIRE(textured > 100);
    CHECK(static_cast<double>(good) / textured >= 0.9);
  }
  CHECK_THROWS_AS(match_patches(GrayImage(20, 20), GrayImage(21, 20)), InvalidArgument);
}

TEST_CASE("transform and displacement records") {
  const GlobalTransform t{3, -2, 0.7, 12.25};
  std::stringstream s;
  write_transform(s, t);
  const GlobalTransform back = read_transform(s);
  CHECK(back.shift_x == t.shift_x);
  CHECK(back.shift_y == t.shift_y);
  CHECK(back.theta == t.theta);
  CHECK(back.mse == t.mse);

  std::stringstream broken("shift_x = 1\n");
  CHECK_THROWS(read_transform(broken));

  std::vector<PatchPair> pairs(2);
  pairs[0].lr_up.center = {5, 6};
  pairs[0].di = 1;
  pairs[0].dj = -2;
  pairs[0].textured = true;
  std::ostringstream d;
  write_displacements(d, pairs);
  CHECK(d.str() == "# i j di dj\n5 6 1 -2\n");
}
