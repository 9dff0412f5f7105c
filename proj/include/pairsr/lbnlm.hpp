#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pairsr/image.hpp"
#include "pairsr/library.hpp"

namespace pairsr {

struct NlmConfig {
  double sigma_n = 1.0;
  bool accelerate = true;  // restrict candidates to the nearest category
  int side = 9;

  void validate() const;
};

/// Unnormalized weights exp(-||q - c||^2 / (2 n^2 sigma^2)).
std::vector<double> raw_weights(const Patch& query, std::span<const Patch> candidates,
                                double sigma_n);

/// Normalized weights. The exponent is shifted by the minimum distance before
/// exponentiation, so the closest candidate always keeps a nonzero weight.
std::vector<double> compute_weights(const Patch& query, std::span<const Patch> candidates,
                                    double sigma_n);

/// Same as compute_weights, from precomputed squared distances. Writes into
/// `weights` (resized to match).
void weights_from_distances(std::span<const double> sq_distances, int side, double sigma_n,
                            std::vector<double>& weights);

/// Element-wise weighted sum of HR patches. Weights must sum to 1 within 1e-9.
Patch reconstruct_patch(std::span<const double> weights, std::span<const Patch> hr_patches);

/// Per-query details handed to an optional observer of lbnlm_filter.
struct QueryTrace {
  PixelPos center;
  int category = -1;                        // -1 when accelerate is off
  std::size_t first = 0;                    // candidate entry range [first, last)
  std::size_t last = 0;
  std::span<const double> weights;          // normalized, one per candidate
  std::span<const double> reconstruction;   // Q_h, side^2 values
};

/// Called once per pixel center. May be invoked from worker threads.
using QueryObserver = std::function<void(const QueryTrace&)>;

/// Library-based non-local-means filter over an upsampled image. Every pixel
/// yields a reconstructed patch; overlapping estimates are averaged
/// uniformly. Border queries use replicate padding.
GrayImage lbnlm_filter(const GrayImage& up, const PairedLibrary& lib, const NlmConfig& cfg,
                       const QueryObserver& observer = {});

/// Bicubic x2 upsampling followed by lbnlm_filter.
GrayImage super_resolve(const GrayImage& lr, const PairedLibrary& lib, const NlmConfig& cfg);

}  // namespace pairsr
