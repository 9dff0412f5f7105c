#include <doctest.h>

#include <cmath>
#include <mutex>

#include "pairsr/error.hpp"
#include "pairsr/lbnlm.hpp"
#include "pairsr/parallel.hpp"
#include "support.hpp"

using namespace pairsr;

namespace {

Patch make_patch(int side, std::vector<double> v) { return Patch{side, {side / 2, side / 2}, std::move(v)}; }

}  // namespace

TEST_CASE("weights") {
  const Patch q = make_patch(3, std::vector<double>(9, 10.0));

  SUBCASE("sole identical candidate") {
    const std::vector<Patch> c{q};
    CHECK(compute_weights(q, c, 1.0) == std::vector<double>{1.0});
  }
  SUBCASE("equidistant candidates share equally") {
    const std::vector<Patch> c{make_patch(3, std::vector<double>(9, 12.0)),
                               make_patch(3, std::vector<double>(9, 8.0))};
    const auto w = compute_weights(q, c, 1.0);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
  }
  SUBCASE("raw weight at squared distance 162 with n = 9") {
    const Patch q9 = make_patch(9, std::vector<double>(81, 0.0));
    std::vector<double> v(81, 0.0);
    v[0] = std::sqrt(162.0);
    const std::vector<Patch> c{make_patch(9, v)};
    CHECK(raw_weights(q9, c, 1.0)[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(raw_weights(q9, c, 1.0)[0] == doctest::Approx(0.3679).epsilon(1e-4));
  }
  SUBCASE("far candidates do not underflow the normalization") {
    const std::vector<Patch> c{make_patch(3, std::vector<double>(9, 250.0)),
                               make_patch(3, std::vector<double>(9, 240.0))};
    const auto w = compute_weights(q, c, 0.01);
    CHECK(raw_weights(q, c, 0.01)[0] == 0.0);
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w[1] == 1.0);
  }
  SUBCASE("entropy grows with sigma_n") {
    const GrayImage img = testing::texture(30, 30, 2);
    const Patch query = extract_patch(img, {15, 15}, 5);
    std::vector<Patch> cands;
    for (int r = 3; r < 27; r += 4)
      for (int c = 3; c < 27; c += 4) cands.push_back(extract_patch(img, {r, c}, 5));
    double prev = -1.0;
    for (double s : {0.5, 2.0, 8.0, 32.0, 128.0}) {
      double h = 0.0;
      for (double w : compute_weights(query, cands, s))
        if (w > 0) h -= w * std::log(w);
      CHECK(h >= prev - 1e-12);
      prev = h;
    }
  }
  CHECK_THROWS_AS(compute_weights(q, std::vector<Patch>{}, 1.0), InvalidArgument);
}

TEST_CASE("patch reconstruction") {
  const Patch a = make_patch(3, std::vector<double>(9, 0.0));
  const Patch b = make_patch(3, std::vector<double>(9, 200.0));
  const std::vector<Patch> hr{a, b};
  const std::vector<double> w1{1.0};
  CHECK(reconstruct_patch(w1, std::vector<Patch>{b}).data == b.data);
  const std::vector<double> half{0.5, 0.5};
  for (double v : reconstruct_patch(half, hr).data) CHECK(v == 100.0);

  // Naive double loop oracle on random weights.
  Rng rng(3);
  std::vector<Patch> five;
  std::vector<double> w;
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v(9);
    for (double& x : v) x = 255 * rng.uniform01();
    five.push_back(make_patch(3, v));
    w.push_back(rng.uniform01());
    total += w.back();
  }
  for (double& x : w) x /= total;
  const Patch got = reconstruct_patch(w, five);
  for (int e = 0; e < 9; ++e) {
    double s = 0.0;
    for (int l = 0; l < 5; ++l) s += w[l] * five[l].data[e];
    CHECK(got.data[e] == doctest::Approx(s).epsilon(1e-12));
  }
  const std::vector<double> unnormalized{0.5, 0.6};
  CHECK_THROWS_AS(reconstruct_patch(unnormalized, hr), InvalidArgument);
  CHECK_THROWS_AS(reconstruct_patch(w1, hr), InvalidArgument);
}

TEST_CASE("filter equals the naive oracle with the full library") {
  const GrayImage up = testing::random_image(24, 20, 1);
  const PairedLibrary lib = testing::random_library(5, 4, 120, 2);
  for (double s : {1.0, 20.0}) {
    const GrayImage got = lbnlm_filter(up, lib, {s, false, 5});
    CHECK(testing::max_abs_diff(got, testing::naive_nlm(up, lib, s)) <= 1e-9);
  }
}

TEST_CASE("filter contracts") {
  const GrayImage up = testing::texture(40, 36, 5);
  const PairedLibrary lib = testing::random_library(5, 6, 300, 7, 40, 220);

  SUBCASE("weights normalize and acceleration restricts the support") {
    std::mutex m;
    std::size_t queries = 0;
    bool sums_ok = true, support_ok = true;
    lbnlm_filter(up, lib, {4.0, true, 5}, [&](const QueryTrace& t) {
      double s = 0.0;
      for (double w : t.weights) s += w;
      const Patch q = extract_patch(up, t.center, 5, BorderMode::kReplicate);
      const int expected = nearest_category(lib, q);
      const auto range = lib.category_range(expected);
      std::lock_guard lock(m);
      ++queries;
      sums_ok = sums_ok && std::abs(s - 1.0) <= 1e-9;
      support_ok = support_ok && t.category == expected && t.first == range.first &&
                   t.last == range.second && t.weights.size() == range.second - range.first;
    });
    CHECK(queries == up.size());
    CHECK(sums_ok);
    CHECK(support_ok);
  }
  SUBCASE("outputs stay within the HR intensity range") {
    float lo = 1e9f, hi = -1e9f;
    for (std::size_t i = 0; i < lib.size(); ++i)
      for (float v : lib.hr(i)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    for (bool accel : {false, true}) {
      const GrayImage out = lbnlm_filter(up, lib, {1.0, accel, 5});
      for (double v : out.pixels()) {
        CHECK(v >= lo - 1e-9);
        CHECK(v <= hi + 1e-9);
      }
    }
  }
  SUBCASE("a single-category library matches the full search") {
    const PairedLibrary one = testing::random_library(5, 1, 150, 9);
    CHECK(lbnlm_filter(up, one, {2.0, true, 5}) == lbnlm_filter(up, one, {2.0, false, 5}));
  }
  SUBCASE("thread count does not change the output") {
    const int before = thread_count();
    set_thread_count(1);
    const GrayImage a = lbnlm_filter(up, lib, {3.0, true, 5});
    set_thread_count(4);
    const GrayImage b = lbnlm_filter(up, lib, {3.0, true, 5});
    set_thread_count(before);
    CHECK(a == b);
  }
  CHECK_THROWS_AS(lbnlm_filter(up, lib, {1.0, true, 9}), InvalidArgument);
  CHECK_THROWS_AS(lbnlm_filter(up, lib, {0.0, true, 5}), InvalidArgument);
}

TEST_CASE("self-paired library reproduces its source") {
  // lr-up patches equal the HR patches and come from the query image itself.
  const GrayImage img = testing::texture(20, 20, 13);
  std::vector<PairedLibrary::Entry> entries;
  GrayImage f(20, 20);
  for (std::size_t i = 0; i < img.size(); ++i) f.pixels()[i] = static_cast<float>(img.pixels()[i]);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) {
      const Patch p = extract_patch(f, {r, c}, 3, BorderMode::kReplicate);
      std::vector<float> v(p.data.begin(), p.data.end());
      entries.push_back({v, v, 0});
    }
  const PairedLibrary lib(3, 1, 0, entries);
  const GrayImage out = lbnlm_filter(f, lib, {0.01, false, 3});
  CHECK(testing::max_abs_diff(out, f) <= 1e-6);
}

TEST_CASE("super_resolve") {
  std::vector<PairedLibrary::Entry> entries(4, {std::vector<float>(9, 90.f), std::vector<float>(9, 90.f), 0});
  const PairedLibrary lib(3, 1, 0, entries);
  const GrayImage out = super_resolve(GrayImage(157, 160, 90.0), lib, {1.0, true, 3});
  CHECK(out.width() == 314);
  CHECK(out.height() == 320);
  for (double v : out.pixels()) CHECK(v == doctest::Approx(90.0));
}
