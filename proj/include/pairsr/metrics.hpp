#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>

#include "pairsr/image.hpp"

namespace pairsr {

/// PSNR values are capped here in reports so aggregates stay finite.
inline constexpr double kPsnrCapDb = 99.0;

double mean_squared_error(const GrayImage& a, const GrayImage& b);

/// 10 log10(255^2 / MSE); +infinity when the images are identical.
double psnr(const GrayImage& a, const GrayImage& b);

/// Mean SSIM over valid positions of an 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2.
double ssim(const GrayImage& a, const GrayImage& b);

using Histogram = std::array<std::size_t, 256>;

/// Histogram of intensities rounded to the nearest 8-bit code.
Histogram histogram(const GrayImage& img);

/// Threshold t maximizing the between-class variance of {<= t} vs {> t};
/// ties go to the smallest t. Returns 255 (nothing above) when every
/// threshold scores zero, i.e. a single occupied bin.
int otsu_threshold(const Histogram& hist);

/// Drops 8-connected set components smaller than min_size pixels.
Mask remove_small_components(const Mask& mask, std::size_t min_size);

struct OtsuOptions {
  std::size_t min_component = 16;
};

/// Foreground = pixels above the Otsu threshold, with isolated small
/// components removed.
Mask otsu_mask(const GrayImage& img, const OtsuOptions& opts = {});

/// PSNR with the MSE averaged over mask pixels only.
double masked_psnr(const GrayImage& a, const GrayImage& b, const Mask& mask);
double masked_mse(const GrayImage& a, const GrayImage& b, const Mask& mask);

using EdgeMap = Mask;

struct CannyOptions {
  double high = 0.2;       // fraction of the maximum gradient magnitude
  double low_ratio = 0.4;  // low threshold = low_ratio * high threshold
  double sigma = 1.4;
};

EdgeMap canny(const GrayImage& img, const CannyOptions& opts = {});

/// 1 - |B_hr != B_sr| / (|B_hr| + |B_sr|); 1 when both maps are empty.
double edge_similarity(const EdgeMap& b_hr, const EdgeMap& b_sr);

struct EvaluationReport {
  double psnr_sr = 0.0;
  double psnr_bicubic = 0.0;
  double delta_psnr = 0.0;
  double ssim_sr = 0.0;
  double ssim_bicubic = 0.0;
  double delta_ssim = 0.0;
  double fg_delta_psnr = 0.0;  // NaN when the foreground mask is empty
  double bg_delta_psnr = 0.0;  // NaN when the background mask is empty
  double sim_sr = 0.0;
  double sim_bicubic = 0.0;
  bool failure = false;        // delta_psnr < 0
};

struct EvaluateOptions {
  double canny_param = 0.2;
  int border = 4;  // frame excluded from every metric
};

/// Scores an SR result and the bicubic baseline against HR ground truth.
/// PSNR values are capped at kPsnrCapDb; masks come from the HR image.
EvaluationReport evaluate(const GrayImage& hr, const GrayImage& sr, const GrayImage& bicubic,
                          const EvaluateOptions& opts = {});

void write_report(std::ostream& out, const EvaluationReport& r);
EvaluationReport read_report(std::istream& in);

}  // namespace pairsr
