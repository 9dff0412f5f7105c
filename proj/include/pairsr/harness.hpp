#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pairsr/image.hpp"
#include "pairsr/lbnlm.hpp"
#include "pairsr/library.hpp"
#include "pairsr/metrics.hpp"
#include "pairsr/registration.hpp"

namespace pairsr {

/// A physically captured HR/LR pair. Once aligned, `registration` holds the
/// global transform and hr is exactly twice the size of lr.
struct ImagePair {
  std::string id;
  GrayImage hr;
  GrayImage lr;
  std::optional<GlobalTransform> registration;
};

// --- partitioning ----------------------------------------------------------------

/// Subimage grid; tile index = grid_row * grid_cols + grid_col.
struct PartitionPlan {
  int grid_rows = 3;
  int grid_cols = 4;
  std::vector<int> train_ids;
  std::vector<int> test_ids;

  /// Holds out the rightmost `test_cols` columns (the default 3x4 grid with
  /// one test column gives the 9 train / 3 test split).
  static PartitionPlan columns_split(int grid_rows, int grid_cols, int test_cols = 1);
  void validate() const;
};

struct SubPair {
  int tile = 0;
  int grid_row = 0;
  int grid_col = 0;
  int lr_row0 = 0;  // tile origin in the LR frame; HR origin is twice this
  int lr_col0 = 0;
  GrayImage hr;
  GrayImage lr;
};

struct Partition {
  std::vector<SubPair> train;
  std::vector<SubPair> test;
};

/// Tiles an aligned pair. Remainder pixels of non-divisible grids go to the
/// last row / column.
Partition partition_pair(const ImagePair& pair, const PartitionPlan& plan);

// --- alignment -------------------------------------------------------------------

/// Registers the bicubic x2 upsample of lr against hr, then crops both to the
/// largest axis-aligned rectangle of valid overlap. The returned lr is
/// resampled into the HR frame at half resolution (exact when the shift is
/// even and theta is zero).
ImagePair align_pair(const ImagePair& raw, const RigidSearch& search = {});
ImagePair align_pair(const ImagePair& raw, const GlobalTransform& transform);

// --- synthetic pairs --------------------------------------------------------------

struct DegradationSpec {
  double blur_sigma = 0.0;
  double noise_sigma_hr = 0.0;
  double noise_sigma_lr = 0.0;
  double contrast_gain = 1.0;
  double contrast_offset = 0.0;
  double shift_x = 0.0;
  double shift_y = 0.0;
  double rotation = 0.0;  // degrees
  double warp_amplitude = 0.0;
  double warp_scale = 48.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Smooth displacement field: a normalized mixture of plane sinusoids.
struct WarpField {
  struct Wave {
    double kx = 0.0;  // spatial frequency (cycles / px) along columns
    double ky = 0.0;  // along rows
    double phase = 0.0;
  };
  double amplitude = 0.0;
  std::vector<Wave> x_waves;
  std::vector<Wave> y_waves;

  /// Displacement (d_col, d_row) at HR-frame position (x = col, y = row).
  std::pair<double, double> at(double x, double y) const;
  static WarpField random(double amplitude, double scale, std::uint64_t seed);
};

struct SyntheticPair {
  ImagePair pair;
  GlobalTransform transform;  // what global_register should recover
  WarpField warp;             // local displacement of the registered LR content
};

/// HR = truth + noise; LR = 2x block-downsample of the blurred, contrast
/// mapped, warped and rigidly moved truth, plus noise. Output is clamped to
/// [0, 255].
SyntheticPair synthesize_pair(const GrayImage& truth, const DegradationSpec& spec,
                              std::string id = "synthetic");

void write_ground_truth(std::ostream& out, const SyntheticPair& s);

struct Specimen {
  GrayImage image;
  Mask blobs;  // generator ground truth for the bright clusters
};

/// Bright soft-edged clusters on a textured darker background, loosely
/// resembling nanomaterial SEM micrographs.
Specimen generate_specimen(int width, int height, std::uint64_t seed, double texture_std = 6.0);

// --- experiment protocol ------------------------------------------------------------

struct PipelineConfig {
  MatchOptions match;  // n, variance threshold, radius, stride
  int library_size = 5000;
  int categories = 50;
  int oversample = 10;
  double sigma_n = 1.0;
  bool accelerate = true;
  int grid_rows = 3;
  int grid_cols = 4;
  int test_cols = 1;
  std::uint64_t seed = 0;
  EvaluateOptions eval;
  RigidSearch search;
  bool evaluate_in_sample = true;
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
  PartitionPlan plan() const { return PartitionPlan::columns_split(grid_rows, grid_cols, test_cols); }
  NlmConfig nlm() const { return {sigma_n, accelerate, match.side}; }
};

enum class Strategy { kSelf, kPooled };

struct SubimageReport {
  std::string strategy;  // "self" or "pooled"
  std::string pair_id;
  int tile = 0;
  int grid_row = 0;
  int grid_col = 0;
  bool in_sample = false;
  EvaluationReport metrics;
};

/// Per pair: align, harvest pairs on the training tiles, build a library and
/// reconstruct the tiles. Pairs that fail are logged and skipped.
std::vector<SubimageReport> run_self_training(const std::vector<ImagePair>& pairs,
                                              const PipelineConfig& config);

/// One merged library from every pair's training tiles, applied to all tiles.
std::vector<SubimageReport> run_pooled_training(const std::vector<ImagePair>& pairs,
                                                const PipelineConfig& config);

/// Builds the per-pair library exactly as self-training does (exposed for
/// inspection and tests).
PairedLibrary train_pair_library(const ImagePair& aligned, const PipelineConfig& config);

struct GroupSummary {
  std::string strategy;
  std::string sample;  // "in-sample", "out-of-sample" or "all"
  std::size_t count = 0;
  double mean_delta_psnr = 0.0;
  double mean_delta_ssim = 0.0;
  double failure_pct = 0.0;
  double mean_fg_delta_psnr = 0.0;
  double mean_bg_delta_psnr = 0.0;
  double mean_sim_sr = 0.0;
  double mean_sim_bicubic = 0.0;
};

/// Groups by strategy, then in-sample / out-of-sample / all. Throws
/// InvalidArgument on empty input.
std::vector<GroupSummary> aggregate_reports(const std::vector<SubimageReport>& reports);

void write_reports_csv(std::ostream& out, const std::vector<SubimageReport>& reports);
void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& summary);
void write_summary_table(std::ostream& out, const std::vector<GroupSummary>& summary);

// --- manifest ------------------------------------------------------------------------

struct PairSource {
  std::string id;
  std::filesystem::path hr;
  std::filesystem::path lr;
};

struct Manifest {
  PipelineConfig config;
  std::vector<PairSource> pairs;
  std::filesystem::path output_dir;
  std::vector<Strategy> strategies{Strategy::kSelf};
};

/// Parses the key = value manifest; relative paths resolve against the
/// manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);

/// Loads the pairs, runs every strategy and writes reports.csv,
/// aggregate.csv and per-pair artifacts into the output directory.
std::vector<GroupSummary> run_manifest(const Manifest& manifest);

}  // namespace pairsr
