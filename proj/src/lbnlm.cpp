#include "pairsr/lbnlm.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pairsr/error.hpp"
#include "pairsr/parallel.hpp"

namespace pairsr {

void NlmConfig::validate() const {
  if (!(sigma_n > 0.0) || !std::isfinite(sigma_n)) throw InvalidArgument("sigma_n must be > 0");
  if (side < 3 || side % 2 == 0) throw InvalidArgument("patch side must be odd and >= 3");
}

namespace {

double patch_sq_dist(const Patch& a, const Patch& b) {
  if (a.side != b.side) throw InvalidArgument("candidate patch side does not match the query");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<double> raw_weights(const Patch& query, std::span<const Patch> candidates,
                                double sigma_n) {
  if (candidates.empty()) throw InvalidArgument("no candidate patches");
  if (!(sigma_n > 0.0)) throw InvalidArgument("sigma_n must be > 0");
  const double scale = 2.0 * query.side * query.side * sigma_n * sigma_n;
  std::vector<double> w;
  w.reserve(candidates.size());
  for (const Patch& c : candidates) w.push_back(std::exp(-patch_sq_dist(query, c) / scale));
  return w;
}

void weights_from_distances(std::span<const double> sq_distances, int side, double sigma_n,
                            std::vector<double>& weights) {
  if (sq_distances.empty()) throw InvalidArgument("no candidate patches");
  if (!(sigma_n > 0.0)) throw InvalidArgument("sigma_n must be > 0");
  const double scale = 2.0 * side * side * sigma_n * sigma_n;
  const auto min_it = std::min_element(sq_distances.begin(), sq_distances.end());
  const double dmin = *min_it;
  weights.resize(sq_distances.size());
  double sum = 0.0;
  for (std::size_t l = 0; l < sq_distances.size(); ++l) {
    weights[l] = std::exp(-(sq_distances[l] - dmin) / scale);
    sum += weights[l];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    // Nearest-neighbor limit.
    std::fill(weights.begin(), weights.end(), 0.0);
    weights[static_cast<std::size_t>(min_it - sq_distances.begin())] = 1.0;
    return;
  }
  const double inv = 1.0 / sum;
  for (double& w : weights) w *= inv;
}

std::vector<double> compute_weights(const Patch& query, std::span<const Patch> candidates,
                                    double sigma_n) {
  if (candidates.empty()) throw InvalidArgument("no candidate patches");
  std::vector<double> d;
  d.reserve(candidates.size());
  for (const Patch& c : candidates) d.push_back(patch_sq_dist(query, c));
  std::vector<double> w;
  weights_from_distances(d, query.side, sigma_n, w);
  return w;
}

Patch reconstruct_patch(std::span<const double> weights, std::span<const Patch> hr_patches) {
  if (weights.size() != hr_patches.size() || weights.empty()) {
    throw InvalidArgument("weights and HR patches differ in length");
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("weights are not normalized");
  const int side = hr_patches.front().side;
  Patch out{side, hr_patches.front().center, std::vector<double>(hr_patches.front().data.size(), 0.0)};
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (hr_patches[l].side != side) throw InvalidArgument("HR patches of mixed sizes");
    for (std::size_t e = 0; e < out.data.size(); ++e) out.data[e] += weights[l] * hr_patches[l].data[e];
  }
  return out;
}

namespace {

// Reconstructed patches for one row of centers: width * side^2 values.
std::vector<double> reconstruct_row(const GrayImage& up, const PairedLibrary& lib,
                                    const NlmConfig& cfg, int row, const QueryObserver& observer) {
  const int w = up.width();
  const std::size_t len = lib.patch_len();
  std::vector<double> out(static_cast<std::size_t>(w) * len, 0.0);
  std::vector<double> dist;
  std::vector<double> weights;
  for (int c = 0; c < w; ++c) {
    const Patch query = extract_patch(up, {row, c}, cfg.side, BorderMode::kReplicate);
    std::size_t first = 0, last = lib.size();
    int category = -1;
    if (cfg.accelerate) {
      category = nearest_category(lib, std::span<const double>(query.data));
      std::tie(first, last) = lib.category_range(category);
    }
    dist.resize(last - first);
    for (std::size_t l = first; l < last; ++l) {
      const auto cand = lib.lr_up(l);
      double s = 0.0;
      for (std::size_t e = 0; e < len; ++e) {
        const double d = query.data[e] - static_cast<double>(cand[e]);
        s += d * d;
      }
      dist[l - first] = s;
    }
    weights_from_distances(dist, cfg.side, cfg.sigma_n, weights);

    double* qh = out.data() + static_cast<std::size_t>(c) * len;
    for (std::size_t l = first; l < last; ++l) {
      const double wl = weights[l - first];
      if (wl == 0.0) continue;
      const auto hr = lib.hr(l);
      for (std::size_t e = 0; e < len; ++e) qh[e] += wl * static_cast<double>(hr[e]);
    }
    if (observer) {
      observer(QueryTrace{{row, c}, category, first, last, weights,
                          std::span<const double>(qh, len)});
    }
  }
  return out;
}

}  // namespace

GrayImage lbnlm_filter(const GrayImage& up, const PairedLibrary& lib, const NlmConfig& cfg,
                       const QueryObserver& observer) {
  cfg.validate();
  if (lib.side() != cfg.side) throw InvalidArgument("library/config patch side mismatch");
  if (lib.empty()) throw InvalidArgument("library is empty");

  const int h = up.height();
  const int w = up.width();
  const int half = cfg.side / 2;
  const int n = cfg.side;
  constexpr int kBand = 32;

  GrayImage out(w, h);
  std::map<int, std::vector<double>> cache;  // center row -> reconstructed patches
  for (int start = 0; start < h; start += kBand) {
    const int end = std::min(h, start + kBand);
    std::vector<int> missing;
    for (int r = std::max(0, start - half); r < std::min(h, end + half); ++r)
      if (!cache.contains(r)) missing.push_back(r);
    std::vector<std::vector<double>> computed(missing.size());
    parallel_for(0, missing.size(), [&](std::size_t i) {
      computed[i] = reconstruct_row(up, lib, cfg, missing[i], observer);
    });
    for (std::size_t i = 0; i < missing.size(); ++i) cache.emplace(missing[i], std::move(computed[i]));

    // Gather: each output pixel averages every patch estimate covering it,
    // summed in a fixed (a, b) order.
    parallel_for(static_cast<std::size_t>(start), static_cast<std::size_t>(end), [&](std::size_t rr) {
      const int r = static_cast<int>(rr);
      for (int c = 0; c < w; ++c) {
        double sum = 0.0;
        int count = 0;
        for (int a = -half; a <= half; ++a) {
          const int cr = r - a;
          if (cr < 0 || cr >= h) continue;
          const std::vector<double>& qrow = cache.at(cr);
          for (int b = -half; b <= half; ++b) {
            const int cc = c - b;
            if (cc < 0 || cc >= w) continue;
            sum += qrow[static_cast<std::size_t>(cc) * n * n +
                        static_cast<std::size_t>(a + half) * n + (b + half)];
            ++count;
          }
        }
        out.at(r, c) = sum / count;
      }
    });
    cache.erase(cache.begin(), cache.lower_bound(end - half));
  }
  return out;
}

GrayImage super_resolve(const GrayImage& lr, const PairedLibrary& lib, const NlmConfig& cfg) {
  return lbnlm_filter(bicubic_upsample(lr, 2), lib, cfg);
}

}  // namespace pairsr
