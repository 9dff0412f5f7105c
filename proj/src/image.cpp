#include "pairsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "pairsr/error.hpp"

namespace pairsr {

// --- GrayImage / Mask --------------------------------------------------------

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(width > 0 && height > 0
                                        ? static_cast<std::size_t>(width) * height
                                        : 0,
                                    fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be positive, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("image buffer size does not match dimensions");
  }
  if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
    throw InvalidArgument("image contains non-finite intensities");
  }
}

double GrayImage::clamped(int row, int col) const {
  row = std::clamp(row, 0, height_ - 1);
  col = std::clamp(col, 0, width_ - 1);
  return at(row, col);
}

Mask::Mask(int width, int height, bool fill)
    : width_(width),
      height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0),
            fill ? 1 : 0) {
  if (width < 1 || height < 1) throw InvalidArgument("mask dimensions must be positive");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask Mask::complement() const {
  Mask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

// --- I/O ---------------------------------------------------------------------

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Reads the next PNM header token, skipping whitespace and '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int pnm_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw IoError("malformed PGM header in " + path.string());
}

GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = pnm_token(in);
  if (magic == "P3" || magic == "P6") throw IoError("color input rejected: " + path.string());
  if (magic != "P5") throw IoError("unsupported PNM variant '" + magic + "' in " + path.string());
  const int width = pnm_int(in, path);
  const int height = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (width < 1 || height < 1) throw IoError("invalid PGM dimensions in " + path.string());
  if (maxval < 1 || maxval > 255) {
    throw IoError("unsupported bit depth (maxval " + std::to_string(maxval) + ") in " +
                  path.string());
  }
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError("truncated PGM data in " + path.string());
  }
  return GrayImage(width, height, std::vector<double>(raw.begin(), raw.end()));
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), raw.begin(), quantize);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

GrayImage load_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<unsigned char> raw;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::string failure;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG file " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY) {
    failure = "color input rejected: " + path.string();
  } else if (bit_depth != 8) {
    failure = "unsupported bit depth " + std::to_string(bit_depth) + " in " + path.string();
  } else {
    raw.resize(static_cast<std::size_t>(width) * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + static_cast<std::size_t>(r) * width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!failure.empty()) throw IoError(failure);
  return GrayImage(static_cast<int>(width), static_cast<int>(height),
                   std::vector<double>(raw.begin(), raw.end()));
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  std::vector<unsigned char> raw(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), raw.begin(), quantize);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, raw.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write " + path.string() + ": " + msg);
  }
}

}  // namespace

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::round(std::clamp(v, 0.0, 255.0)));
}

GrayImage load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IoError("file not found: " + path.string());
  }
  const std::string ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return load_pgm(path);
  if (ext == ".png") return load_png(path);
  throw IoError("unsupported image format '" + ext + "': " + path.string());
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  const std::string ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".pnm") return save_pgm(img, path);
  if (ext == ".png") return save_png(img, path);
  throw IoError("unsupported image format '" + ext + "': " + path.string());
}

// --- resampling --------------------------------------------------------------

double keys_kernel(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

struct CubicTaps {
  int base = 0;  // index of the first tap
  double w[4] = {0, 0, 0, 0};
};

CubicTaps cubic_taps(double x) {
  CubicTaps taps;
  const double fl = std::floor(x);
  const double t = x - fl;
  taps.base = static_cast<int>(fl) - 1;
  taps.w[0] = keys_kernel(1.0 + t);
  taps.w[1] = keys_kernel(t);
  taps.w[2] = keys_kernel(1.0 - t);
  taps.w[3] = keys_kernel(2.0 - t);
  return taps;
}

}  // namespace

double sample_bicubic(const GrayImage& img, double x, double y) {
  const CubicTaps tx = cubic_taps(x);
  const CubicTaps ty = cubic_taps(y);
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) {
    const int r = std::clamp(ty.base + j, 0, img.height() - 1);
    double row_acc = 0.0;
    for (int i = 0; i < 4; ++i) {
      const int c = std::clamp(tx.base + i, 0, img.width() - 1);
      row_acc += tx.w[i] * img.at(r, c);
    }
    acc += ty.w[j] * row_acc;
  }
  return acc;
}

GrayImage bicubic_upsample(const GrayImage& img, int factor) {
  if (factor < 2) throw InvalidArgument("upsampling factor must be >= 2");
  const int out_w = img.width() * factor;
  const int out_h = img.height() * factor;

  // Separable: horizontal pass into an intermediate of size (in_h x out_w).
  std::vector<CubicTaps> col_taps(out_w);
  for (int u = 0; u < out_w; ++u) col_taps[u] = cubic_taps((u + 0.5) / factor - 0.5);
  std::vector<CubicTaps> row_taps(out_h);
  for (int v = 0; v < out_h; ++v) row_taps[v] = cubic_taps((v + 0.5) / factor - 0.5);

  std::vector<double> horiz(static_cast<std::size_t>(img.height()) * out_w);
  for (int r = 0; r < img.height(); ++r) {
    for (int u = 0; u < out_w; ++u) {
      const CubicTaps& t = col_taps[u];
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) acc += t.w[i] * img.clamped(r, t.base + i);
      horiz[static_cast<std::size_t>(r) * out_w + u] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int v = 0; v < out_h; ++v) {
    const CubicTaps& t = row_taps[v];
    for (int u = 0; u < out_w; ++u) {
      double acc = 0.0;
      for (int j = 0; j < 4; ++j) {
        const int r = std::clamp(t.base + j, 0, img.height() - 1);
        acc += t.w[j] * horiz[static_cast<std::size_t>(r) * out_w + u];
      }
      out[static_cast<std::size_t>(v) * out_w + u] = acc;
    }
  }
  return GrayImage(out_w, out_h, std::move(out));
}

GrayImage downsample(const GrayImage& img, int factor) {
  if (factor < 2) throw InvalidArgument("downsampling factor must be >= 2");
  if (img.width() < factor || img.height() < factor) {
    throw InvalidArgument("image smaller than the downsampling factor");
  }
  const int out_w = img.width() / factor;
  const int out_h = img.height() / factor;
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      double acc = 0.0;
      for (int dr = 0; dr < factor; ++dr)
        for (int dc = 0; dc < factor; ++dc) acc += img.at(r * factor + dr, c * factor + dc);
      out[static_cast<std::size_t>(r) * out_w + c] = acc * inv;
    }
  }
  return GrayImage(out_w, out_h, std::move(out));
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.clamped(r, c + i);
      tmp.at(r, c) = acc;
    }
  GrayImage out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.clamped(r + i, c);
      out.at(r, c) = acc;
    }
  return out;
}

GrayImage crop(const GrayImage& img, int row0, int col0, int height, int width) {
  if (height < 1 || width < 1 || row0 < 0 || col0 < 0 || row0 + height > img.height() ||
      col0 + width > img.width()) {
    throw InvalidArgument("crop rectangle outside the image");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(width) * height);
  for (int r = row0; r < row0 + height; ++r) {
    const auto src = img.row(r).subspan(col0, width);
    out.insert(out.end(), src.begin(), src.end());
  }
  return GrayImage(width, height, std::move(out));
}

// --- patches -----------------------------------------------------------------

Patch extract_patch(const GrayImage& img, PixelPos center, int side, BorderMode mode) {
  if (side < 3 || side % 2 == 0) {
    throw InvalidArgument("patch side must be odd and >= 3, got " + std::to_string(side));
  }
  if (!img.contains(center.row, center.col)) throw InvalidArgument("patch center outside image");
  const int half = side / 2;
  const bool interior = center.row >= half && center.col >= half &&
                        center.row + half < img.height() && center.col + half < img.width();
  Patch p{side, center, std::vector<double>(static_cast<std::size_t>(side) * side)};
  if (interior) {
    for (int r = 0; r < side; ++r) {
      const auto src = img.row(center.row - half + r).subspan(center.col - half, side);
      std::copy(src.begin(), src.end(), p.data.begin() + static_cast<std::ptrdiff_t>(r) * side);
    }
    return p;
  }
  if (mode == BorderMode::kInterior) {
    throw InvalidArgument("patch center too close to the border for interior extraction");
  }
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      p.data[static_cast<std::size_t>(r) * side + c] =
          img.clamped(center.row - half + r, center.col - half + c);
  return p;
}

void paste_patch(GrayImage& img, const Patch& patch) {
  const int half = patch.side / 2;
  for (int r = 0; r < patch.side; ++r)
    for (int c = 0; c < patch.side; ++c) {
      const int ir = patch.center.row - half + r;
      const int ic = patch.center.col - half + c;
      if (img.contains(ir, ic)) img.at(ir, ic) = patch.at(r, c);
    }
}

double patch_variance(const Patch& p) {
  if (p.data.empty()) return 0.0;
  double mean = 0.0;
  for (double v : p.data) mean += v;
  mean /= static_cast<double>(p.data.size());
  double var = 0.0;
  for (double v : p.data) var += (v - mean) * (v - mean);
  return var / static_cast<double>(p.data.size());
}

}  // namespace pairsr
