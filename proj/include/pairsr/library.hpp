#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pairsr/image.hpp"
#include "pairsr/registration.hpp"

namespace pairsr {

// --- k-means -------------------------------------------------------------------

struct KMeansOptions {
  int k = 50;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-4;  // max centroid movement, intensity units
};

struct KMeansResult {
  int dim = 0;
  std::vector<double> centroids;  // k x dim, row-major
  std::vector<int> assignments;
  std::vector<double> objective;  // within-cluster sum of squares per iteration
  int iterations = 0;

  int k() const { return dim ? static_cast<int>(centroids.size() / dim) : 0; }
  std::span<const double> centroid(int c) const {
    return std::span<const double>(centroids).subspan(static_cast<std::size_t>(c) * dim, dim);
  }
};

/// Lloyd iterations with k-means++ seeding over `points` (count x dim,
/// row-major). Empty clusters are re-seeded from the point farthest from its
/// centroid. Deterministic for a fixed seed and independent of thread count.
KMeansResult kmeans(std::span<const double> points, int dim, const KMeansOptions& opts);

KMeansResult kmeans_patches(const std::vector<Patch>& patches, const KMeansOptions& opts);

// --- library -------------------------------------------------------------------

/// Paired HR / registered-upsampled patches grouped into k categories.
/// Entries are stored contiguously per category; patch intensities are kept
/// in single precision (the on-disk representation), category means in
/// double precision.
class PairedLibrary {
 public:
  struct Entry {
    std::vector<float> hr;
    std::vector<float> lr_up;
    std::uint32_t category = 0;
  };

  PairedLibrary() = default;
  /// Orders entries by category (stable) and computes per-category means of
  /// the lr-up patches. Throws InvalidArgument on inconsistent input.
  PairedLibrary(int side, int k, std::uint64_t seed, std::vector<Entry> entries);

  int side() const { return side_; }
  int k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return category_.size(); }
  bool empty() const { return category_.empty(); }
  std::size_t patch_len() const { return static_cast<std::size_t>(side_) * side_; }

  std::span<const float> hr(std::size_t i) const {
    return std::span<const float>(hr_).subspan(i * patch_len(), patch_len());
  }
  std::span<const float> lr_up(std::size_t i) const {
    return std::span<const float>(lr_).subspan(i * patch_len(), patch_len());
  }
  std::uint32_t category(std::size_t i) const { return category_[i]; }

  std::span<const double> category_mean(int c) const {
    return std::span<const double>(means_).subspan(static_cast<std::size_t>(c) * patch_len(),
                                                   patch_len());
  }
  /// Entry index range [first, last) of category c.
  std::pair<std::size_t, std::size_t> category_range(int c) const {
    return {offsets_[c], offsets_[c + 1]};
  }
  std::size_t category_count(int c) const { return offsets_[c + 1] - offsets_[c]; }
  std::vector<std::size_t> category_counts() const;

  std::vector<Entry> entries() const;

  /// Versioned little-endian binary form (see README for the layout).
  std::vector<std::uint8_t> serialize() const;
  static PairedLibrary deserialize(std::span<const std::uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static PairedLibrary load(const std::filesystem::path& path);

 private:
  // Used by deserialize to restore stored means bit-exactly.
  PairedLibrary(int side, int k, std::uint64_t seed, std::vector<Entry> entries,
                std::vector<double> means);

  int side_ = 0;
  int k_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<float> hr_;
  std::vector<float> lr_;
  std::vector<std::uint32_t> category_;
  std::vector<std::size_t> offsets_;  // k + 1
  std::vector<double> means_;
};

struct LibraryOptions {
  int size = 5000;        // target L
  int categories = 50;    // k
  int oversample = 10;    // K
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-4;
};

/// Samples min(K*L, |pairs|) pairs, clusters their HR patches into k
/// categories and keeps floor(L/k) random members per category (all of them
/// when a category is smaller).
PairedLibrary build_library(const std::vector<PatchPair>& pairs, const LibraryOptions& opts);

/// Closest category mean (Euclidean) to the query; ties go to the lower id.
int nearest_category(const PairedLibrary& lib, const Patch& query);
int nearest_category(const PairedLibrary& lib, std::span<const double> query);

struct MergeOptions {
  int categories = 50;
  std::uint64_t seed = 0;
  int max_iter = 100;
  double tol = 1e-4;
};

/// Concatenates all entries and re-clusters the HR patches into
/// opts.categories categories.
PairedLibrary merge_libraries(const std::vector<PairedLibrary>& libs, const MergeOptions& opts);

}  // namespace pairsr
