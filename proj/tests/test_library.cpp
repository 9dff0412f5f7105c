#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "pairsr/error.hpp"
#include "pairsr/library.hpp"
#include "pairsr/random.hpp"
#include "support.hpp"

using namespace pairsr;

namespace {

Patch constant_patch(int side, double v) {
  return Patch{side, {side / 2, side / 2}, std::vector<double>(static_cast<std::size_t>(side) * side, v)};
}

using EntryKey = std::pair<std::vector<float>, std::vector<float>>;

std::multiset<EntryKey> entry_multiset(const PairedLibrary& lib) {
  std::multiset<EntryKey> s;
  for (std::size_t i = 0; i < lib.size(); ++i) {
    s.insert({std::vector<float>(lib.hr(i).begin(), lib.hr(i).end()),
              std::vector<float>(lib.lr_up(i).begin(), lib.lr_up(i).end())});
  }
  return s;
}

}  // namespace

TEST_CASE("kmeans separates two constant groups") {
  std::vector<Patch> patches;
  for (int i = 0; i < 20; ++i) patches.push_back(constant_patch(3, i % 2 ? 255.0 : 0.0));
  const KMeansResult r = kmeans_patches(patches, {2, 1, 100, 1e-4});
  for (int i = 0; i < 20; ++i) CHECK(r.assignments[i] == r.assignments[i % 2]);
  CHECK(r.assignments[0] != r.assignments[1]);
  std::vector<double> c{r.centroid(0)[0], r.centroid(1)[0]};
  std::sort(c.begin(), c.end());
  CHECK(c[0] == doctest::Approx(0.0));
  CHECK(c[1] == doctest::Approx(255.0));
}

TEST_CASE("kmeans with k equal to the point count has zero distortion") {
  std::vector<Patch> patches;
  for (int i = 0; i < 7; ++i) patches.push_back(constant_patch(3, 30.0 * i));
  const KMeansResult r = kmeans_patches(patches, {7, 3, 100, 1e-4});
  CHECK(r.objective.back() == doctest::Approx(0.0));
  std::set<int> distinct(r.assignments.begin(), r.assignments.end());
  CHECK(distinct.size() == 7);
}

TEST_CASE("kmeans recovers Gaussian blob labels") {
  // 300 points from 3 blobs in 9 dimensions.
  Rng rng(77);
  const int dim = 9;
  std::vector<double> pts;
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) {
    const int g = i % 3;
    labels.push_back(g);
    for (int d = 0; d < dim; ++d) pts.push_back(60.0 * g + (d % 2 ? 20.0 * g : 0.0) + 8.0 * rng.normal());
  }
  const KMeansResult r = kmeans(pts, dim, {3, 5, 100, 1e-4});
  // Best agreement over the 6 label permutations.
  std::vector<int> perm{0, 1, 2};
  std::size_t best = 0;
  do {
    std::size_t agree = 0;
    for (int i = 0; i < 300; ++i) agree += perm[r.assignments[i]] == labels[i];
    best = std::max(best, agree);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(best >= 285);
}

TEST_CASE("kmeans objective is non-increasing and ends at a fixed point") {
  const GrayImage img = testing::texture(40, 40, 6);
  std::vector<Patch> patches;
  for (int r = 2; r < 38; r += 2)
    for (int c = 2; c < 38; c += 2) patches.push_back(extract_patch(img, {r, c}, 5));
  const KMeansResult res = kmeans_patches(patches, {8, 2, 100, 0.0});
  for (std::size_t i = 1; i < res.objective.size(); ++i) {
    CHECK(res.objective[i] <= res.objective[i - 1] * (1 + 1e-12));
  }
  // Reassigning to the final centroids changes nothing.
  for (std::size_t i = 0; i < patches.size(); ++i) {
    int best = -1;
    double bd = 0.0;
    for (int c = 0; c < res.k(); ++c) {
      double d = 0.0;
      for (int e = 0; e < res.dim; ++e) {
        const double x = patches[i].data[e] - res.centroid(c)[e];
        d += x * x;
      }
      if (best < 0 || d < bd) {
        best = c;
        bd = d;
      }
    }
    CHECK(best == res.assignments[i]);
  }
}

TEST_CASE("kmeans rejects bad input") {
  CHECK_THROWS_AS(kmeans_patches({}, {}), InvalidArgument);
  std::vector<Patch> two{constant_patch(3, 1), constant_patch(3, 2)};
  CHECK_THROWS_AS(kmeans_patches(two, {3, 0, 10, 1e-4}), InvalidArgument);
}

TEST_CASE("library stratification") {
  SUBCASE("abundant categories give floor(L/k) each") {
    const auto pairs = testing::grouped_pairs(std::vector<std::size_t>(10, 900), 1);
    const PairedLibrary lib = build_library(pairs, {800, 10, 10, 3});
    CHECK(lib.size() == 800);
    for (int c = 0; c < 10; ++c) CHECK(lib.category_count(c) == 80);
  }
  SUBCASE("a starved category keeps all of its members") {
    std::vector<std::size_t> counts(10, 300);
    counts[4] = 30;
    const auto pairs = testing::grouped_pairs(counts, 2);
    const PairedLibrary lib = build_library(pairs, {800, 10, 10, 3});
    const auto c = lib.category_counts();
    CHECK(std::count(c.begin(), c.end(), 80u) == 9);
    CHECK(std::count(c.begin(), c.end(), 30u) == 1);
    CHECK(lib.size() == 750);
  }
  CHECK_THROWS_AS(build_library({}, {}), InvalidArgument);
  CHECK_THROWS_AS(build_library(testing::grouped_pairs({5}, 1), {5, 10, 2, 0}), InvalidArgument);
}

TEST_CASE("category means are the means of member lr-up patches") {
  const auto pairs = testing::grouped_pairs({200, 200, 200}, 5);
  const PairedLibrary lib = build_library(pairs, {90, 3, 10, 8});
  for (int c = 0; c < lib.k(); ++c) {
    const auto [first, last] = lib.category_range(c);
    for (std::size_t e = 0; e < lib.patch_len(); ++e) {
      double s = 0.0;
      for (std::size_t i = first; i < last; ++i) s += lib.lr_up(i)[e];
      CHECK(std::abs(s / static_cast<double>(last - first) - lib.category_mean(c)[e]) <= 1e-9);
    }
    for (std::size_t i = first; i < last; ++i) CHECK(lib.category(i) == static_cast<std::uint32_t>(c));
  }
}

TEST_CASE("library serialization is deterministic and bit-exact") {
  const auto pairs = testing::grouped_pairs({100, 100, 100, 100}, 9, 9);
  const PairedLibrary a = build_library(pairs, {120, 4, 3, 21});
  const PairedLibrary b = build_library(pairs, {120, 4, 3, 21});
  CHECK(a.serialize() == b.serialize());

  const auto dir = testing::scratch_dir("lib");
  a.save(dir / "lib.bin");
  const PairedLibrary back = PairedLibrary::load(dir / "lib.bin");
  CHECK(back.serialize() == a.serialize());
  CHECK(back.seed() == 21);

  auto bytes = a.serialize();
  bytes[0] = 'X';
  CHECK_THROWS_AS(PairedLibrary::deserialize(bytes), IoError);
  auto truncated = a.serialize();
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(PairedLibrary::deserialize(truncated), IoError);
  CHECK_THROWS_AS(PairedLibrary::load(dir / "nope.bin"), IoError);
}

TEST_CASE("nearest category") {
  const PairedLibrary lib = testing::random_library(3, 10, 200, 4);
  SUBCASE("a category mean maps to itself") {
    for (int c = 0; c < 10; ++c) CHECK(nearest_category(lib, lib.category_mean(c)) == c);
  }
  SUBCASE("agrees with a brute-force scan") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> q(9);
      for (double& v : q) v = 255.0 * rng.uniform01();
      int best = 0;
      double bd = 1e300;
      for (int c = 0; c < 10; ++c) {
        double d = 0.0;
        for (int e = 0; e < 9; ++e) d += (q[e] - lib.category_mean(c)[e]) * (q[e] - lib.category_mean(c)[e]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      CHECK(nearest_category(lib, q) == best);
    }
  }
  SUBCASE("equidistant queries go to the lower id") {
    std::vector<PairedLibrary::Entry> entries;
    entries.push_back({std::vector<float>(9, 0.f), std::vector<float>(9, 10.f), 0});
    entries.push_back({std::vector<float>(9, 0.f), std::vector<float>(9, 30.f), 1});
    const PairedLibrary two(3, 2, 0, entries);
    CHECK(nearest_category(two, std::vector<double>(9, 20.0)) == 0);
  }
}

TEST_CASE("merging libraries preserves entries") {
  const auto pa = testing::grouped_pairs({150, 150}, 11);
  const auto pb = testing::grouped_pairs({0, 0, 150, 150}, 12);
  const PairedLibrary a = build_library(pa, {100, 2, 10, 1});
  const PairedLibrary b = build_library(pb, {60, 2, 10, 2});

  const PairedLibrary one = merge_libraries({a}, {2, 5});
  CHECK(entry_multiset(one) == entry_multiset(a));

  const PairedLibrary both = merge_libraries({a, b}, {2, 5});
  CHECK(both.size() == a.size() + b.size());
  auto expected = entry_multiset(a);
  for (const auto& e : entry_multiset(b)) expected.insert(e);
  CHECK(entry_multiset(both) == expected);

  std::vector<PairedLibrary> many;
  std::size_t total = 0;
  for (int i = 0; i < 22; ++i) {
    many.push_back(testing::random_library(3, 2, 10 + i, 100 + i));
    total += many.back().size();
  }
  CHECK(merge_libraries(many, {5, 1}).size() == total);
  CHECK_THROWS_AS(merge_libraries({}, {}), InvalidArgument);
}
