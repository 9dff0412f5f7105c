#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pairsr/error.hpp"
#include "pairsr/harness.hpp"
#include "pairsr/metrics.hpp"
#include "support.hpp"

using namespace pairsr;

namespace {

constexpr double kC1 = (0.01 * 255) * (0.01 * 255);

}  // namespace

TEST_CASE("psnr") {
  const GrayImage a = testing::random_image(16, 16, 1, 20, 200);
  CHECK(std::isinf(psnr(a, a)));
  GrayImage b = a;
  for (double& v : b.pixels()) v += 10.0;
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(255.0 * 255.0 / 100.0)));
  CHECK(std::abs(psnr(a, b) - 28.131) <= 0.001);
  CHECK(psnr(a, b) == psnr(b, a));

  GrayImage c(8, 8), d(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int k = 0; k < 8; ++k) {
      c.at(r, k) = (r + k) % 2 ? 255.0 : 0.0;
      d.at(r, k) = 255.0 - c.at(r, k);
    }
  CHECK(psnr(c, d) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr(c, a), InvalidArgument);
}

TEST_CASE("ssim") {
  const GrayImage a = testing::texture(32, 32, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0));

  const double closed = (2 * 100.0 * 150.0 + kC1) / (100.0 * 100.0 + 150.0 * 150.0 + kC1);
  CHECK(std::abs(ssim(GrayImage(20, 20, 100.0), GrayImage(20, 20, 150.0)) - closed) <= 1e-6);

  double prev = 1.0;
  for (double amp : {5.0, 20.0, 60.0}) {
    GrayImage n = a;
    Rng rng(4);
    for (double& v : n.pixels()) v += amp * rng.normal();
    const double s = ssim(a, n);
    CHECK(s < prev);
    CHECK(s == doctest::Approx(ssim(n, a)).epsilon(1e-12));
    prev = s;
  }
  CHECK_THROWS_AS(ssim(GrayImage(8, 8), GrayImage(8, 8)), InvalidArgument);
}

TEST_CASE("otsu threshold") {
  SUBCASE("matches an exhaustive scan on random histograms") {
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
      Histogram h{};
      const int bins = 2 + static_cast<int>(rng.uniform_index(60));
      for (int i = 0; i < bins; ++i) h[rng.uniform_index(256)] += 1 + rng.uniform_index(500);
      CHECK(otsu_threshold(h) == testing::otsu_oracle(h));
    }
  }
  SUBCASE("bimodal image") {
    GrayImage img(20, 10);
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 20; ++c) img.at(r, c) = c < 10 ? 0.0 : 255.0;
    const Mask m = otsu_mask(img);
    for (int r = 0; r < 10; ++r)
      for (int c = 0; c < 20; ++c) CHECK(m.at(r, c) == (c >= 10));
  }
  SUBCASE("constant image has no foreground") {
    CHECK(otsu_mask(GrayImage(12, 12, 90.0)).count() == 0);
  }
  SUBCASE("generated blobs") {
    const Specimen s = generate_specimen(256, 256, 31);
    GrayImage noisy = s.image;
    Rng rng(2);
    for (double& v : noisy.pixels()) v = std::clamp(v + 5.0 * rng.normal(), 0.0, 255.0);
    const double truth = static_cast<double>(s.blobs.count());
    const double got = static_cast<double>(otsu_mask(noisy).count());
    CHECK(std::abs(got - truth) <= 0.1 * truth);
  }
}

TEST_CASE("small components are removed") {
  Mask m(20, 20);
  m.set(1, 1, true);  // isolated pixel
  for (int r = 5; r < 10; ++r)
    for (int c = 5; c < 10; ++c) m.set(r, c, true);
  // Diagonal chain of 16 pixels: connected only under 8-connectivity.
  for (int i = 0; i < 16; ++i) m.set(i + 2, 19 - i % 2, true);
  const Mask out = remove_small_components(m, 16);
  CHECK(!out.at(1, 1));
  CHECK(out.at(7, 7));
  CHECK(out.at(2, 19));
}

TEST_CASE("masked psnr") {
  const GrayImage a = testing::random_image(20, 20, 5);
  const GrayImage b = testing::random_image(20, 20, 6);
  CHECK(masked_psnr(a, b, Mask(20, 20, true)) == doctest::Approx(psnr(a, b)));

  GrayImage c = a;
  c.at(0, 0) += 50;
  Mask same(20, 20, true);
  same.set(0, 0, false);
  CHECK(std::isinf(masked_psnr(a, c, same)));

  const Mask fg = otsu_mask(a), bg = fg.complement();
  const double n = 400.0;
  const double mixed = (static_cast<double>(fg.count()) * masked_mse(a, b, fg) +
                        static_cast<double>(bg.count()) * masked_mse(a, b, bg)) / n;
  CHECK(std::abs(mixed - mean_squared_error(a, b)) <= 1e-9);
  CHECK_THROWS_WITH(masked_psnr(a, b, Mask(20, 20)), doctest::Contains("empty mask"));
}

TEST_CASE("canny") {
  CHECK(canny(GrayImage(30, 30, 70.0)).count() == 0);

  SUBCASE("vertical step gives a single-pixel line") {
    GrayImage step(40, 30);
    for (int r = 0; r < 30; ++r)
      for (int c = 0; c < 40; ++c) step.at(r, c) = c < 20 ? 40.0 : 200.0;
    const EdgeMap e = canny(step);
    for (int r = 5; r < 25; ++r) {
      int count = 0, col = -1;
      for (int c = 0; c < 40; ++c)
        if (e.at(r, c)) {
          ++count;
          col = c;
        }
      CHECK(count == 1);
      CHECK((col == 19 || col == 20));
    }
  }
  SUBCASE("disk gives a closed ring near the circle") {
    GrayImage disk(64, 64);
    const double cx = 31.5, cy = 31.5, rad = 18.0;
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c) disk.at(r, c) = std::hypot(c - cx, r - cy) <= rad ? 220.0 : 30.0;
    const EdgeMap e = canny(disk);
    REQUIRE(e.count() > 0);
    for (int r = 0; r < 64; ++r)
      for (int c = 0; c < 64; ++c)
        if (e.at(r, c)) CHECK(std::abs(std::hypot(c - cx, r - cy) - rad) <= 2.0);
    // Closed: every ray from the center crosses an edge pixel (8-neighborhood).
    for (int k = 0; k < 360; k += 3) {
      const double a = k * M_PI / 180.0;
      bool hit = false;
      for (double s = rad - 2.5; s <= rad + 2.5 && !hit; s += 0.25) {
        const int r = static_cast<int>(std::lround(cy + s * std::sin(a)));
        const int c = static_cast<int>(std::lround(cx + s * std::cos(a)));
        hit = e.at(r, c);
      }
      CHECK(hit);
    }
  }
}

TEST_CASE("edge similarity") {
  Mask a(10, 10), b(10, 10);
  for (int i = 0; i < 10; ++i) {
    a.set(i, 2, true);
    b.set(i, 7, true);
  }
  CHECK(edge_similarity(a, a) == 1.0);
  CHECK(edge_similarity(a, b) == 0.0);
  CHECK(edge_similarity(a, Mask(10, 10)) == 0.0);
  CHECK(edge_similarity(Mask(10, 10), Mask(10, 10)) == 1.0);
  Mask c = a;
  c.set(0, 7, true);
  const double s = edge_similarity(a, c);
  CHECK(s > 0.0);
  CHECK(s < 1.0);
}

TEST_CASE("evaluate") {
  const GrayImage hr = generate_specimen(64, 64, 4).image;
  const GrayImage bic = gaussian_blur(hr, 1.0);

  const EvaluationReport perfect = evaluate(hr, hr, bic);
  CHECK(perfect.psnr_sr == kPsnrCapDb);
  CHECK(perfect.sim_sr == 1.0);
  CHECK(perfect.delta_psnr == doctest::Approx(kPsnrCapDb - perfect.psnr_bicubic));

  const EvaluationReport same = evaluate(hr, bic, bic);
  CHECK(same.delta_psnr == 0.0);
  CHECK(same.delta_ssim == 0.0);
  CHECK(!same.failure);

  const EvaluationReport again = evaluate(hr, bic, bic);
  CHECK(again.psnr_sr == same.psnr_sr);
  CHECK(again.sim_sr == same.sim_sr);

  std::stringstream s;
  write_report(s, perfect);
  const EvaluationReport back = read_report(s);
  CHECK(back.psnr_sr == perfect.psnr_sr);
  CHECK(back.delta_ssim == perfect.delta_ssim);
  CHECK(back.failure == perfect.failure);
}
