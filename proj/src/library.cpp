#include "pairsr/library.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "pairsr/error.hpp"
#include "pairsr/parallel.hpp"
#include "pairsr/random.hpp"

namespace pairsr {

// --- k-means -------------------------------------------------------------------

namespace {

double sq_dist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid per point (ties -> lowest index) and the squared distance.
void assign_points(std::span<const double> points, int dim, const std::vector<double>& centroids,
                   std::vector<int>& assign, std::vector<double>& dist) {
  const std::size_t count = points.size() / dim;
  const int k = static_cast<int>(centroids.size() / dim);
  constexpr std::size_t kBlock = 256;
  parallel_for(0, (count + kBlock - 1) / kBlock, [&](std::size_t b) {
    const std::size_t end = std::min(count, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const double* p = points.data() + i * dim;
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = sq_dist(p, centroids.data() + static_cast<std::size_t>(c) * dim, dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      dist[i] = best_d;
    }
  });
}

std::vector<double> seed_plus_plus(std::span<const double> points, int dim, int k, Rng& rng) {
  const std::size_t count = points.size() / dim;
  std::vector<double> centroids;
  centroids.reserve(static_cast<std::size_t>(k) * dim);
  auto push = [&](std::size_t idx) {
    const auto p = points.subspan(idx * dim, dim);
    centroids.insert(centroids.end(), p.begin(), p.end());
  };
  push(static_cast<std::size_t>(rng.uniform_index(count)));
  std::vector<double> d2(count);
  for (std::size_t i = 0; i < count; ++i) d2[i] = sq_dist(points.data() + i * dim, centroids.data(), dim);

  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double run = 0.0;
      pick = count - 1;
      for (std::size_t i = 0; i < count; ++i) {
        run += d2[i];
        if (run > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.uniform_index(count));
    }
    push(pick);
    const double* newest = centroids.data() + static_cast<std::size_t>(c) * dim;
    for (std::size_t i = 0; i < count; ++i)
      d2[i] = std::min(d2[i], sq_dist(points.data() + i * dim, newest, dim));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, int dim, const KMeansOptions& opts) {
  if (dim <= 0 || points.size() % dim != 0) throw InvalidArgument("kmeans: malformed point set");
  const std::size_t count = points.size() / dim;
  if (count == 0) throw InvalidArgument("kmeans: no points");
  if (opts.k <= 0) throw InvalidArgument("kmeans: k must be positive");
  if (static_cast<std::size_t>(opts.k) > count) {
    throw InvalidArgument("kmeans: k (" + std::to_string(opts.k) + ") exceeds point count (" +
                          std::to_string(count) + ")");
  }
  const int k = opts.k;
  Rng rng(opts.seed);
  KMeansResult res;
  res.dim = dim;
  res.centroids = seed_plus_plus(points, dim, k, rng);
  res.assignments.assign(count, -1);

  std::vector<int> assign(count);
  std::vector<double> dist(count);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<std::size_t> members(k);

  for (int iter = 0; iter < std::max(1, opts.max_iter); ++iter) {
    assign_points(points, dim, res.centroids, assign, dist);
    const bool unchanged = assign == res.assignments;
    res.assignments = assign;
    res.iterations = iter + 1;
    if (unchanged) break;

    // Update step: sums accumulated in point order.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(members.begin(), members.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      double* s = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
      const double* p = points.data() + i * dim;
      for (int d = 0; d < dim; ++d) s[d] += p[d];
      ++members[assign[i]];
    }
    std::vector<double> next(res.centroids.size());
    std::vector<std::uint8_t> taken(count, 0);
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      double* dst = next.data() + static_cast<std::size_t>(c) * dim;
      if (members[c] > 0) {
        const double inv = 1.0 / static_cast<double>(members[c]);
        for (int d = 0; d < dim; ++d) dst[d] = sums[static_cast<std::size_t>(c) * dim + d] * inv;
      } else {
        // Re-seed from the farthest not-yet-used point.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < count; ++i) {
          if (!taken[i] && dist[i] > far_d) {
            far_d = dist[i];
            far = i;
          }
        }
        taken[far] = 1;
        std::copy_n(points.data() + far * dim, dim, dst);
      }
      movement = std::max(
          movement, std::sqrt(sq_dist(dst, res.centroids.data() + static_cast<std::size_t>(c) * dim, dim)));
    }
    res.centroids = std::move(next);

    double wcss = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      wcss += sq_dist(points.data() + i * dim,
                      res.centroids.data() + static_cast<std::size_t>(assign[i]) * dim, dim);
    res.objective.push_back(wcss);
    if (movement < opts.tol) break;
  }
  return res;
}

KMeansResult kmeans_patches(const std::vector<Patch>& patches, const KMeansOptions& opts) {
  if (patches.empty()) throw InvalidArgument("kmeans: no patches");
  const int side = patches.front().side;
  std::vector<double> flat;
  flat.reserve(patches.size() * patches.front().data.size());
  for (const Patch& p : patches) {
    if (p.side != side) throw InvalidArgument("kmeans: patches of different sizes");
    flat.insert(flat.end(), p.data.begin(), p.data.end());
  }
  return kmeans(flat, side * side, opts);
}

// --- PairedLibrary --------------------------------------------------------------

PairedLibrary::PairedLibrary(int side, int k, std::uint64_t seed, std::vector<Entry> entries)
    : PairedLibrary(side, k, seed, std::move(entries), {}) {}

PairedLibrary::PairedLibrary(int side, int k, std::uint64_t seed, std::vector<Entry> entries,
                             std::vector<double> means)
    : side_(side), k_(k), seed_(seed) {
  if (side < 3 || side % 2 == 0) throw InvalidArgument("library patch side must be odd and >= 3");
  if (k < 1) throw InvalidArgument("library needs at least one category");
  const std::size_t len = patch_len();
  for (const Entry& e : entries) {
    if (e.hr.size() != len || e.lr_up.size() != len) {
      throw InvalidArgument("library entry does not match patch side");
    }
    if (e.category >= static_cast<std::uint32_t>(k)) {
      throw InvalidArgument("library entry category out of range");
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.category < b.category; });
  offsets_.assign(static_cast<std::size_t>(k) + 1, 0);
  hr_.reserve(entries.size() * len);
  lr_.reserve(entries.size() * len);
  category_.reserve(entries.size());
  for (const Entry& e : entries) {
    hr_.insert(hr_.end(), e.hr.begin(), e.hr.end());
    lr_.insert(lr_.end(), e.lr_up.begin(), e.lr_up.end());
    category_.push_back(e.category);
    ++offsets_[e.category + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());

  if (!means.empty()) {
    if (means.size() != static_cast<std::size_t>(k) * len) {
      throw InvalidArgument("library means do not match k and patch side");
    }
    means_ = std::move(means);
    return;
  }
  means_.assign(static_cast<std::size_t>(k) * len, 0.0);
  for (int c = 0; c < k; ++c) {
    const auto [first, last] = category_range(c);
    if (first == last) continue;
    double* m = means_.data() + static_cast<std::size_t>(c) * len;
    for (std::size_t i = first; i < last; ++i) {
      const auto p = lr_up(i);
      for (std::size_t e = 0; e < len; ++e) m[e] += p[e];
    }
    const double inv = 1.0 / static_cast<double>(last - first);
    for (std::size_t e = 0; e < len; ++e) m[e] *= inv;
  }
}

std::vector<std::size_t> PairedLibrary::category_counts() const {
  std::vector<std::size_t> out(k_);
  for (int c = 0; c < k_; ++c) out[c] = category_count(c);
  return out;
}

std::vector<PairedLibrary::Entry> PairedLibrary::entries() const {
  std::vector<Entry> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto h = hr(i);
    const auto l = lr_up(i);
    out[i] = {std::vector<float>(h.begin(), h.end()), std::vector<float>(l.begin(), l.end()),
              category_[i]};
  }
  return out;
}

// Layout (all little-endian):
//   "PLIB" | u32 version=1 | u32 side | u32 k | u64 entries | u64 seed
//   k * side^2 f64 category means
//   per entry: u32 category | side^2 f32 hr | side^2 f32 lr_up
namespace {

constexpr char kMagic[4] = {'P', 'L', 'I', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    if (pos_ + sizeof(U) > bytes_.size()) throw IoError("library file truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("library file truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> PairedLibrary::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  const std::size_t len = patch_len();
  out.reserve(64 + means_.size() * 8 + size() * (4 + 8 * len));
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint32_t>(side_));
  put_le(out, static_cast<std::uint32_t>(k_));
  put_le(out, static_cast<std::uint64_t>(size()));
  put_le(out, seed_);
  for (double m : means_) put_le(out, m);
  for (std::size_t i = 0; i < size(); ++i) {
    put_le(out, category_[i]);
    for (float v : hr(i)) put_le(out, v);
    for (float v : lr_up(i)) put_le(out, v);
  }
  return out;
}

PairedLibrary PairedLibrary::deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw IoError("not a paired library file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) throw IoError("unsupported library version " + std::to_string(version));
  const auto side = in.get<std::uint32_t>();
  const auto k = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();
  const auto seed = in.get<std::uint64_t>();
  if (side < 3 || side % 2 == 0 || side > 255 || k < 1 || k > (1u << 20)) {
    throw IoError("library header out of range");
  }
  const std::size_t len = static_cast<std::size_t>(side) * side;
  if (count > bytes.size() / (4 + 8 * len) + 1) throw IoError("library entry count exceeds file size");
  std::vector<double> means(static_cast<std::size_t>(k) * len);
  for (double& m : means) m = in.get<double>();
  std::vector<Entry> entries(count);
  for (Entry& e : entries) {
    e.category = in.get<std::uint32_t>();
    if (e.category >= k) throw IoError("library entry category out of range");
    e.hr.resize(len);
    e.lr_up.resize(len);
    for (float& v : e.hr) v = in.get<float>();
    for (float& v : e.lr_up) v = in.get<float>();
  }
  if (!in.done()) throw IoError("trailing bytes after library entries");
  return PairedLibrary(static_cast<int>(side), static_cast<int>(k), seed, std::move(entries),
                       std::move(means));
}

void PairedLibrary::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

PairedLibrary PairedLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

// --- building -------------------------------------------------------------------

namespace {

std::vector<float> to_float(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace

PairedLibrary build_library(const std::vector<PatchPair>& pairs, const LibraryOptions& opts) {
  if (pairs.empty()) throw InvalidArgument("build_library: no patch pairs");
  if (opts.size < 1 || opts.categories < 1 || opts.oversample < 1) {
    throw InvalidArgument("build_library: L, k and K must be positive");
  }
  if (opts.categories > opts.size) throw InvalidArgument("build_library: k exceeds L");
  const int side = pairs.front().hr.side;
  for (const PatchPair& p : pairs) {
    if (p.hr.side != side || p.lr_up.side != side) {
      throw InvalidArgument("build_library: patch pairs of mixed sizes");
    }
  }

  Rng rng(opts.seed);
  const std::size_t target =
      static_cast<std::size_t>(opts.size) * static_cast<std::size_t>(opts.oversample);
  const std::vector<std::size_t> pool = sample_without_replacement(pairs.size(), target, rng);

  // Cluster on HR intensities; patches are rounded to the stored precision
  // first so clustering sees exactly what the library keeps.
  const std::size_t len = static_cast<std::size_t>(side) * side;
  std::vector<double> flat;
  flat.reserve(pool.size() * len);
  for (std::size_t idx : pool)
    for (double v : pairs[idx].hr.data) flat.push_back(static_cast<float>(v));
  const KMeansResult km =
      kmeans(flat, static_cast<int>(len),
             {opts.categories, derive_seed(opts.seed, 1), opts.max_iter, opts.tol});

  std::vector<std::vector<std::size_t>> members(opts.categories);
  for (std::size_t i = 0; i < pool.size(); ++i) members[km.assignments[i]].push_back(pool[i]);

  const std::size_t per_category = static_cast<std::size_t>(opts.size / opts.categories);
  std::vector<PairedLibrary::Entry> entries;
  for (int c = 0; c < opts.categories; ++c) {
    const auto& m = members[c];
    const auto chosen = sample_without_replacement(m.size(), per_category, rng);
    for (std::size_t j : chosen) {
      const PatchPair& p = pairs[m[j]];
      entries.push_back({to_float(p.hr.data), to_float(p.lr_up.data), static_cast<std::uint32_t>(c)});
    }
  }
  return PairedLibrary(side, opts.categories, opts.seed, std::move(entries));
}

int nearest_category(const PairedLibrary& lib, std::span<const double> query) {
  if (query.size() != lib.patch_len()) throw InvalidArgument("query patch side does not match library");
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < lib.k(); ++c) {
    if (lib.category_count(c) == 0) continue;
    const double d = sq_dist(query.data(), lib.category_mean(c).data(), static_cast<int>(query.size()));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best < 0) throw InvalidArgument("library has no populated category");
  return best;
}

int nearest_category(const PairedLibrary& lib, const Patch& query) {
  if (query.side != lib.side()) throw InvalidArgument("query patch side does not match library");
  return nearest_category(lib, std::span<const double>(query.data));
}

PairedLibrary merge_libraries(const std::vector<PairedLibrary>& libs, const MergeOptions& opts) {
  if (libs.empty()) throw InvalidArgument("merge_libraries: no libraries");
  const int side = libs.front().side();
  std::vector<PairedLibrary::Entry> entries;
  for (const PairedLibrary& lib : libs) {
    if (lib.side() != side) throw InvalidArgument("merge_libraries: mismatched patch side");
    auto e = lib.entries();
    std::move(e.begin(), e.end(), std::back_inserter(entries));
  }
  if (entries.empty()) throw InvalidArgument("merge_libraries: libraries are empty");
  const std::size_t len = static_cast<std::size_t>(side) * side;
  std::vector<double> flat;
  flat.reserve(entries.size() * len);
  for (const auto& e : entries) flat.insert(flat.end(), e.hr.begin(), e.hr.end());
  const KMeansResult km = kmeans(flat, static_cast<int>(len),
                                 {opts.categories, derive_seed(opts.seed, 1), opts.max_iter, opts.tol});
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].category = static_cast<std::uint32_t>(km.assignments[i]);
  }
  return PairedLibrary(side, opts.categories, opts.seed, std::move(entries));
}

}  // namespace pairsr
