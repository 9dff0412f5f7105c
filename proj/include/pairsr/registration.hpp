#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pairsr/image.hpp"

namespace pairsr {

/// Rigid alignment: rotate by theta degrees about the source image center,
/// then shift by (shift_x, shift_y) pixels (x = column, y = row).
struct GlobalTransform {
  double shift_x = 0.0;
  double shift_y = 0.0;
  double theta = 0.0;
  double mse = 0.0;  // alignment residual over the overlap

  GlobalTransform inverse() const;
};

/// Coarse-to-fine grid for global_register. Shifts are in full-resolution
/// pixels; the coarse shift step must be a multiple of coarse_factor so every
/// candidate stays on the integer pixel grid.
struct RigidSearch {
  int coarse_factor = 4;
  int coarse_shift_range = 64;
  int coarse_shift_step = 4;
  double theta_min = -5.0;
  double theta_max = 5.0;
  double coarse_theta_step = 0.5;
  int fine_shift_radius = 4;
  double fine_theta_radius = 0.5;
  double fine_theta_step = 0.1;
  double min_overlap = 0.5;  // fraction of the HR area
  int refine_seeds = 4;      // best per-angle coarse results refined at full resolution

  void validate() const;
};

struct WarpedImage {
  GrayImage image;
  Mask valid;  // false where the source coordinate fell outside the source
};

/// Samples the transformed source on a canvas of the given size.
WarpedImage warp_to_canvas(const GrayImage& src, const GlobalTransform& t, int width, int height);

/// Transforms an image on its own canvas with bicubic resampling.
WarpedImage apply_transform(const GrayImage& img, const GlobalTransform& t);

/// Grid search for the rigid transform of `up` minimizing the MSE against
/// `hr` over their overlap. Throws ComputeError when no candidate reaches
/// the overlap requirement.
GlobalTransform global_register(const GrayImage& hr, const GrayImage& up,
                                const RigidSearch& search = {});

/// Mean squared error between hr and t(up) over the valid overlap; returns
/// the overlap pixel count through `overlap` when non-null.
double transform_mse(const GrayImage& hr, const GrayImage& up, const GlobalTransform& t,
                     std::size_t* overlap = nullptr);

/// Finds the HR patch center in the (2*radius+1)^2 neighborhood of `center`
/// maximizing the normalized inner product with the registered patch.
PixelPos local_register(const GrayImage& hr, const GrayImage& reg, PixelPos center, int side,
                        int radius);

struct PatchPair {
  Patch hr;       // taken from the HR image at center + displacement
  Patch lr_up;    // taken from the registered upsampled image at center
  int di = 0;
  int dj = 0;
  bool textured = false;  // true when local registration ran for this center
};

struct MatchOptions {
  int side = 9;
  double variance_threshold = 100.0;
  int radius = 5;
  int stride = 1;
};

/// Harvests patch pairs on a regular grid of centers; textured centers are
/// locally registered, the rest are paired in place.
std::vector<PatchPair> match_patches(const GrayImage& hr, const GrayImage& reg,
                                     const MatchOptions& opts = {});

// Text records: "key = value" lines.
void write_transform(std::ostream& out, const GlobalTransform& t);
GlobalTransform read_transform(std::istream& in);
void save_transform(const GlobalTransform& t, const std::filesystem::path& path);
GlobalTransform load_transform(const std::filesystem::path& path);

/// One "i j di dj" line per textured pair.
void write_displacements(std::ostream& out, const std::vector<PatchPair>& pairs);

}  // namespace pairsr
