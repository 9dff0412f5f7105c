#include "pairsr/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include "pairsr/error.hpp"
#include "pairsr/parallel.hpp"
#include "pairsr/records.hpp"

namespace pairsr {

GlobalTransform GlobalTransform::inverse() const {
  // p' = R(p - c) + c + s  =>  p = R^-1(p' - c) + c - R^-1 s
  const double rad = -theta * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  return {-(cs * shift_x - sn * shift_y), -(sn * shift_x + cs * shift_y), -theta, mse};
}

void RigidSearch::validate() const {
  const bool ok = coarse_factor >= 2 && coarse_shift_range >= 0 && coarse_shift_step > 0 &&
                  coarse_shift_step % coarse_factor == 0 && theta_min <= theta_max &&
                  coarse_theta_step > 0.0 && fine_shift_radius >= 0 && fine_theta_radius >= 0.0 &&
                  fine_theta_step > 0.0 && min_overlap > 0.0 && min_overlap <= 1.0 && refine_seeds >= 1;
  if (!ok) throw InvalidArgument("search space empty or malformed");
}

WarpedImage warp_to_canvas(const GrayImage& src, const GlobalTransform& t, int width,
                           int height) {
  const double cx = (src.width() - 1) / 2.0;
  const double cy = (src.height() - 1) / 2.0;
  const double rad = t.theta * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  constexpr double eps = 1e-9;
  const double max_x = src.width() - 1 + eps;
  const double max_y = src.height() - 1 + eps;

  WarpedImage out{GrayImage(width, height), Mask(width, height)};
  parallel_for(0, static_cast<std::size_t>(height), [&](std::size_t rr) {
    const int r = static_cast<int>(rr);
    for (int c = 0; c < width; ++c) {
      // Inverse rotation of (p - s - center).
      const double dx = c - t.shift_x - cx;
      const double dy = r - t.shift_y - cy;
      const double sx = cs * dx + sn * dy + cx;
      const double sy = -sn * dx + cs * dy + cy;
      out.image.at(r, c) = sample_bicubic(src, sx, sy);
      out.valid.set(r, c, sx >= -eps && sy >= -eps && sx <= max_x && sy <= max_y);
    }
  });
  return out;
}

WarpedImage apply_transform(const GrayImage& img, const GlobalTransform& t) {
  return warp_to_canvas(img, t, img.width(), img.height());
}

double transform_mse(const GrayImage& hr, const GrayImage& up, const GlobalTransform& t,
                     std::size_t* overlap) {
  const WarpedImage w = warp_to_canvas(up, t, hr.width(), hr.height());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < hr.size(); ++i) {
    if (!w.valid.bits()[i]) continue;
    const double d = hr.pixels()[i] - w.image.pixels()[i];
    sum += d * d;
    ++count;
  }
  if (overlap) *overlap = count;
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::infinity();
}

namespace {

struct Candidate {
  double mse = std::numeric_limits<double>::infinity();
  double theta = 0.0;
  int x = 0;
  int y = 0;
  bool found = false;
};

// Strict total order: lower MSE, then smaller |theta|, smaller |x|+|y|, then
// lexicographic (theta, x, y).
bool better(const Candidate& a, const Candidate& b) {
  if (a.found != b.found) return a.found;
  if (a.mse != b.mse) return a.mse < b.mse;
  const double ta = std::abs(a.theta), tb = std::abs(b.theta);
  if (ta != tb) return ta < tb;
  const int da = std::abs(a.x) + std::abs(a.y), db = std::abs(b.x) + std::abs(b.y);
  if (da != db) return da < db;
  if (a.theta != b.theta) return a.theta < b.theta;
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

double snap_angle(double theta) { return std::round(theta * 1e9) / 1e9; }

// MSE between `ref` and the rotated image shifted by integer (sx, sy), over
// pixels where the rotated source is valid.
bool shifted_mse(const GrayImage& ref, const WarpedImage& rot, int sx, int sy,
                 std::size_t min_count, double& mse) {
  const int r0 = std::max(0, sy);
  const int r1 = std::min(ref.height(), rot.image.height() + sy);
  const int c0 = std::max(0, sx);
  const int c1 = std::min(ref.width(), rot.image.width() + sx);
  if (r0 >= r1 || c0 >= c1) return false;
  if (static_cast<std::size_t>(r1 - r0) * static_cast<std::size_t>(c1 - c0) < min_count) {
    return false;
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = r0; r < r1; ++r) {
    const auto ref_row = ref.row(r);
    const auto rot_row = rot.image.row(r - sy);
    for (int c = c0; c < c1; ++c) {
      if (!rot.valid.at(r - sy, c - sx)) continue;
      const double d = ref_row[c] - rot_row[c - sx];
      sum += d * d;
      ++count;
    }
  }
  if (count < min_count || count == 0) return false;
  mse = sum / static_cast<double>(count);
  return true;
}

// Evaluates every (theta, shift) combination; `scale` converts grid shifts
// (in the images' own pixels) back to full-resolution units.
// Evaluates every (theta, shift) combination; `scale` converts grid shifts
// (in the images' own pixels) back to full-resolution units. Returns the best
// candidate per theta, in theta order.
std::vector<Candidate> grid_search(const GrayImage& ref, const GrayImage& mov,
                                   const std::vector<double>& thetas, const std::vector<int>& xs,
                                   const std::vector<int>& ys, int scale, double min_overlap) {
  const auto min_count = static_cast<std::size_t>(
      std::ceil(min_overlap * static_cast<double>(ref.size()) - 1e-9));
  std::vector<Candidate> per_theta(thetas.size());
  parallel_for(0, thetas.size(), [&](std::size_t ti) {
    const WarpedImage rot = warp_to_canvas(mov, {0.0, 0.0, thetas[ti], 0.0}, mov.width(),
                                           mov.height());
    Candidate best;
    for (int y : ys) {
      for (int x : xs) {
        double mse = 0.0;
        if (!shifted_mse(ref, rot, x, y, std::max<std::size_t>(min_count, 1), mse)) continue;
        const Candidate cand{mse, thetas[ti], x * scale, y * scale, true};
        if (better(cand, best)) best = cand;
      }
    }
    per_theta[ti] = best;
  });
  return per_theta;
}

Candidate best_of(const std::vector<Candidate>& cands) {
  Candidate best;
  for (const Candidate& c : cands)
    if (better(c, best)) best = c;
  return best;
}

}  // namespace

GlobalTransform global_register(const GrayImage& hr, const GrayImage& up,
                                const RigidSearch& search) {
  search.validate();
  const int f = search.coarse_factor;
  if (hr.width() < f || hr.height() < f || up.width() < f || up.height() < f) {
    throw InvalidArgument("images too small for the coarse registration stage");
  }

  // Coarse stage on block-averaged images; one coarse pixel = f full-res pixels.
  const GrayImage hr_coarse = downsample(hr, f);
  const GrayImage up_coarse = downsample(up, f);
  std::vector<double> thetas;
  for (int k = 0;; ++k) {
    const double th = snap_angle(search.theta_min + k * search.coarse_theta_step);
    if (th > search.theta_max + 1e-9) break;
    thetas.push_back(th);
  }
  std::vector<int> coarse_shifts;
  const int step = search.coarse_shift_step / f;
  const int range = search.coarse_shift_range / f;
  for (int s = -(range / step) * step; s <= range; s += step) coarse_shifts.push_back(s);

  std::vector<Candidate> coarse = grid_search(hr_coarse, up_coarse, thetas, coarse_shifts,
                                              coarse_shifts, f, search.min_overlap);
  std::erase_if(coarse, [](const Candidate& c) { return !c.found; });
  if (coarse.empty()) {
    throw ComputeError("overlap constraint unsatisfiable within the search space");
  }
  // Off-grid shifts blur the coarse MSE landscape across angles, so the
  // refinement starts from the best few per-angle winners.
  std::sort(coarse.begin(), coarse.end(), better);
  coarse.resize(std::min<std::size_t>(coarse.size(), static_cast<std::size_t>(search.refine_seeds)));

  const int theta_steps =
      static_cast<int>(std::floor(search.fine_theta_radius / search.fine_theta_step + 1e-9));
  Candidate fine;
  for (const Candidate& seed : coarse) {
    std::vector<double> fine_thetas;
    for (int k = -theta_steps; k <= theta_steps; ++k) {
      const double th = snap_angle(seed.theta + k * search.fine_theta_step);
      if (th < search.theta_min - 1e-9 || th > search.theta_max + 1e-9) continue;
      fine_thetas.push_back(th);
    }
    std::vector<int> xs, ys;
    for (int d = -search.fine_shift_radius; d <= search.fine_shift_radius; ++d) {
      xs.push_back(seed.x + d);
      ys.push_back(seed.y + d);
    }
    const Candidate c = best_of(grid_search(hr, up, fine_thetas, xs, ys, 1, search.min_overlap));
    if (better(c, fine)) fine = c;
  }
  if (!fine.found) {
    throw ComputeError("overlap constraint unsatisfiable in the refinement stage");
  }
  return {static_cast<double>(fine.x), static_cast<double>(fine.y), fine.theta, fine.mse};
}

// --- local registration -------------------------------------------------------

namespace {

double window_dot_norm(const GrayImage& img, int row, int col, int half,
                       std::span<const double> ref, double& norm_sq) {
  double dot = 0.0;
  norm_sq = 0.0;
  const int side = 2 * half + 1;
  for (int r = 0; r < side; ++r) {
    const auto src = img.row(row - half + r).subspan(col - half, side);
    const double* q = ref.data() + static_cast<std::size_t>(r) * side;
    for (int c = 0; c < side; ++c) {
      dot += src[c] * q[c];
      norm_sq += src[c] * src[c];
    }
  }
  return dot;
}

struct LocalMatch {
  int di = 0;
  int dj = 0;
  bool found = false;
};

// Best displacement by normalized inner product; zero-norm HR candidates are
// skipped. Near-equal scores (within 1e-12) are ties resolved by the smaller
// displacement, then lexicographically.
LocalMatch best_local_match(const GrayImage& hr, const Patch& reg_patch, int radius) {
  double ref_norm_sq = 0.0;
  for (double v : reg_patch.data) ref_norm_sq += v * v;
  const double ref_norm = std::sqrt(ref_norm_sq);
  const int half = reg_patch.side / 2;
  const int span = 2 * radius + 1;

  std::vector<double> scores(static_cast<std::size_t>(span) * span,
                             -std::numeric_limits<double>::infinity());
  double max_score = -std::numeric_limits<double>::infinity();
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) {
      double norm_sq = 0.0;
      const double dot = window_dot_norm(hr, reg_patch.center.row + di,
                                         reg_patch.center.col + dj, half, reg_patch.data, norm_sq);
      if (norm_sq <= 0.0) continue;
      const double score = dot / (std::sqrt(norm_sq) * ref_norm);
      scores[static_cast<std::size_t>(di + radius) * span + (dj + radius)] = score;
      max_score = std::max(max_score, score);
    }
  }
  LocalMatch best;
  if (!std::isfinite(max_score)) return best;
  const double cutoff = max_score - 1e-12 * std::max(1.0, std::abs(max_score));
  int best_mag = std::numeric_limits<int>::max();
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) {
      if (scores[static_cast<std::size_t>(di + radius) * span + (dj + radius)] < cutoff) continue;
      const int mag = di * di + dj * dj;
      // Iteration order is already lexicographic in (di, dj).
      if (mag < best_mag) {
        best_mag = mag;
        best = {di, dj, true};
      }
    }
  }
  return best;
}

void check_neighborhood(const GrayImage& hr, PixelPos center, int half, int radius) {
  const int m = half + radius;
  if (center.row - m < 0 || center.col - m < 0 || center.row + m >= hr.height() ||
      center.col + m >= hr.width()) {
    throw InvalidArgument("local search neighborhood leaves the HR image");
  }
}

}  // namespace

PixelPos local_register(const GrayImage& hr, const GrayImage& reg, PixelPos center, int side,
                        int radius) {
  if (radius < 0) throw InvalidArgument("search radius must be >= 0");
  const Patch reg_patch = extract_patch(reg, center, side);
  check_neighborhood(hr, center, side / 2, radius);
  if (std::all_of(reg_patch.data.begin(), reg_patch.data.end(), [](double v) { return v == 0.0; })) {
    throw ComputeError("degenerate patch: registered patch has zero norm");
  }
  for (int di = -radius; di <= radius; ++di)
    for (int dj = -radius; dj <= radius; ++dj) {
      double norm_sq = 0.0;
      window_dot_norm(hr, center.row + di, center.col + dj, side / 2, reg_patch.data, norm_sq);
      if (norm_sq <= 0.0) throw ComputeError("degenerate patch: HR candidate has zero norm");
    }
  const LocalMatch m = best_local_match(hr, reg_patch, radius);
  return {center.row + m.di, center.col + m.dj};
}

std::vector<PatchPair> match_patches(const GrayImage& hr, const GrayImage& reg,
                                     const MatchOptions& opts) {
  if (opts.side < 3 || opts.side % 2 == 0) throw InvalidArgument("patch side must be odd and >= 3");
  if (opts.radius < 0) throw InvalidArgument("search radius must be >= 0");
  if (opts.stride < 1) throw InvalidArgument("stride must be >= 1");
  if (hr.width() != reg.width() || hr.height() != reg.height()) {
    throw InvalidArgument("match_patches expects images cropped to a common frame");
  }
  const int margin = opts.side / 2 + opts.radius;
  std::vector<int> rows, cols;
  for (int r = margin; r + margin < hr.height(); r += opts.stride) rows.push_back(r);
  for (int c = margin; c + margin < hr.width(); c += opts.stride) cols.push_back(c);

  std::vector<std::vector<PatchPair>> by_row(rows.size());
  parallel_for(0, rows.size(), [&](std::size_t ri) {
    auto& out = by_row[ri];
    out.reserve(cols.size());
    for (int c : cols) {
      const PixelPos center{rows[ri], c};
      PatchPair pair;
      pair.lr_up = extract_patch(reg, center, opts.side);
      if (patch_variance(pair.lr_up) > opts.variance_threshold) {
        pair.textured = true;
        const LocalMatch m = best_local_match(hr, pair.lr_up, opts.radius);
        if (m.found) {
          pair.di = m.di;
          pair.dj = m.dj;
        }
      }
      pair.hr = extract_patch(hr, {center.row + pair.di, center.col + pair.dj}, opts.side);
      out.push_back(std::move(pair));
    }
  });
  std::vector<PatchPair> pairs;
  pairs.reserve(rows.size() * cols.size());
  for (auto& row : by_row)
    for (auto& p : row) pairs.push_back(std::move(p));
  return pairs;
}

// --- records ------------------------------------------------------------------

void write_transform(std::ostream& out, const GlobalTransform& t) {
  out << "shift_x = " << format_double(t.shift_x) << '\n'
      << "shift_y = " << format_double(t.shift_y) << '\n'
      << "theta = " << format_double(t.theta) << '\n'
      << "mse = " << format_double(t.mse) << '\n';
}

GlobalTransform read_transform(std::istream& in) {
  const auto kvs = parse_key_values(in);
  GlobalTransform t;
  t.shift_x = parse_double(require_key(kvs, "shift_x"), "shift_x");
  t.shift_y = parse_double(require_key(kvs, "shift_y"), "shift_y");
  t.theta = parse_double(require_key(kvs, "theta"), "theta");
  t.mse = parse_double(require_key(kvs, "mse"), "mse");
  return t;
}

void save_transform(const GlobalTransform& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_transform(out, t);
}

GlobalTransform load_transform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("file not found: " + path.string());
  return read_transform(in);
}

void write_displacements(std::ostream& out, const std::vector<PatchPair>& pairs) {
  out << "# i j di dj\n";
  for (const PatchPair& p : pairs) {
    if (!p.textured) continue;
    out << p.lr_up.center.row << ' ' << p.lr_up.center.col << ' ' << p.di << ' ' << p.dj << '\n';
  }
}

}  // namespace pairsr
