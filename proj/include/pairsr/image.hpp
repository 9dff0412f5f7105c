#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pairsr {

/// Row-major grayscale raster with real-valued intensities (nominally 0..255).
///
/// Intensities stay in double precision through the whole pipeline and are
/// quantized only by save_image().
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  /// Throws InvalidArgument if the buffer size does not match or a value is
  /// not finite.
  GrayImage(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(int row, int col) const { return data_[index(row, col)]; }
  double& at(int row, int col) { return data_[index(row, col)]; }

  std::span<const double> pixels() const { return data_; }
  std::span<double> pixels() { return data_; }
  std::span<const double> row(int r) const {
    return std::span<const double>(data_).subspan(index(r, 0), width_);
  }

  bool contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  double clamped(int row, int col) const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Binary raster (1 = set). Used for validity masks, foreground masks and
/// edge maps.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  void set(int row, int col, bool v) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = v ? 1 : 0;
  }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::size_t count() const;
  Mask complement() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct PixelPos {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

/// Square n x n window of intensities taken around a center pixel.
struct Patch {
  int side = 0;
  PixelPos center;
  std::vector<double> data;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * side + c]; }
};

enum class BorderMode { kInterior, kReplicate };

// --- I/O -------------------------------------------------------------------

/// Reads an 8-bit grayscale PGM (P5) or PNG. Color and non-8-bit inputs are
/// rejected with IoError.
GrayImage load_image(const std::filesystem::path& path);

/// Clamps to [0, 255], rounds half away from zero and writes PGM or PNG
/// according to the extension.
void save_image(const GrayImage& img, const std::filesystem::path& path);

std::uint8_t quantize(double v);

// --- resampling ------------------------------------------------------------

/// Keys cubic convolution kernel with a = -0.5.
double keys_kernel(double t);

/// Bicubic sample at real coordinates (x = column, y = row) with border
/// replication.
double sample_bicubic(const GrayImage& img, double x, double y);

/// Pixel-center aligned bicubic upsampling: output pixel u maps to source
/// coordinate (u + 0.5) / factor - 0.5.
GrayImage bicubic_upsample(const GrayImage& img, int factor);

/// Block-average decimation; trailing partial blocks are dropped.
GrayImage downsample(const GrayImage& img, int factor);

/// Separable Gaussian blur with replicated borders. sigma <= 0 is a no-op.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

GrayImage crop(const GrayImage& img, int row0, int col0, int height, int width);

// --- patches ---------------------------------------------------------------

Patch extract_patch(const GrayImage& img, PixelPos center, int side,
                    BorderMode mode = BorderMode::kInterior);

/// Writes a patch back into the image at its recorded center. Pixels falling
/// outside the image are ignored.
void paste_patch(GrayImage& img, const Patch& patch);

/// Population variance of the patch intensities.
double patch_variance(const Patch& p);

}  // namespace pairsr
