#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>

#include "pairsr/error.hpp"
#include "pairsr/harness.hpp"
#include "pairsr/random.hpp"
#include "pairsr/records.hpp"

namespace pairsr {

// --- partitioning ----------------------------------------------------------------

PartitionPlan PartitionPlan::columns_split(int grid_rows, int grid_cols, int test_cols) {
  PartitionPlan plan;
  plan.grid_rows = grid_rows;
  plan.grid_cols = grid_cols;
  for (int r = 0; r < grid_rows; ++r)
    for (int c = 0; c < grid_cols; ++c) {
      const int id = r * grid_cols + c;
      (c >= grid_cols - test_cols ? plan.test_ids : plan.train_ids).push_back(id);
    }
  return plan;
}

void PartitionPlan::validate() const {
  if (grid_rows < 1 || grid_cols < 1) throw InvalidArgument("partition grid must be at least 1x1");
  const int tiles = grid_rows * grid_cols;
  std::set<int> seen;
  for (const auto* ids : {&train_ids, &test_ids})
    for (int id : *ids) {
      if (id < 0 || id >= tiles) throw InvalidArgument("partition tile id out of range");
      if (!seen.insert(id).second) throw InvalidArgument("partition tile assigned twice");
    }
  if (static_cast<int>(seen.size()) != tiles) throw InvalidArgument("partition leaves tiles unassigned");
  if (train_ids.empty()) throw InvalidArgument("partition has no training tiles");
}

Partition partition_pair(const ImagePair& pair, const PartitionPlan& plan) {
  plan.validate();
  if (!pair.registration) throw InvalidArgument("pair '" + pair.id + "' is not registered");
  const int lh = pair.lr.height(), lw = pair.lr.width();
  if (pair.hr.width() != 2 * lw || pair.hr.height() != 2 * lh) {
    throw InvalidArgument("aligned HR must be exactly twice the LR size");
  }
  const int th = lh / plan.grid_rows, tw = lw / plan.grid_cols;
  if (th < 1 || tw < 1) throw InvalidArgument("image too small for the partition grid");

  Partition out;
  auto make = [&](int id) {
    SubPair s;
    s.tile = id;
    s.grid_row = id / plan.grid_cols;
    s.grid_col = id % plan.grid_cols;
    s.lr_row0 = s.grid_row * th;
    s.lr_col0 = s.grid_col * tw;
    const int h = s.grid_row == plan.grid_rows - 1 ? lh - s.lr_row0 : th;
    const int w = s.grid_col == plan.grid_cols - 1 ? lw - s.lr_col0 : tw;
    s.lr = crop(pair.lr, s.lr_row0, s.lr_col0, h, w);
    s.hr = crop(pair.hr, 2 * s.lr_row0, 2 * s.lr_col0, 2 * h, 2 * w);
    return s;
  };
  for (int id : plan.train_ids) out.train.push_back(make(id));
  for (int id : plan.test_ids) out.test.push_back(make(id));
  return out;
}

// --- alignment -------------------------------------------------------------------

ImagePair align_pair(const ImagePair& raw, const RigidSearch& search) {
  const GrayImage up = bicubic_upsample(raw.lr, 2);
  return align_pair(raw, global_register(raw.hr, up, search));
}

ImagePair align_pair(const ImagePair& raw, const GlobalTransform& t) {
  const int H = raw.hr.height(), W = raw.hr.width();
  const int up_w = 2 * raw.lr.width(), up_h = 2 * raw.lr.height();
  const double cx = (up_w - 1) / 2.0, cy = (up_h - 1) / 2.0;
  const double rad = t.theta * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  auto to_up = [&](double x, double y) {
    const double dx = x - t.shift_x - cx, dy = y - t.shift_y - cy;
    return std::pair{cs * dx + sn * dy + cx, -sn * dx + cs * dy + cy};
  };
  constexpr double eps = 1e-9;
  auto valid = [&](int r, int c) {
    const auto [x, y] = to_up(c, r);
    return x >= -eps && y >= -eps && x <= up_w - 1 + eps && y <= up_h - 1 + eps;
  };

  // Greedy edge shrinking; the valid region is convex, so a rectangle whose
  // border is valid lies inside it.
  int r0 = 0, r1 = H, c0 = 0, c1 = W;
  for (;;) {
    if (r0 >= r1 || c0 >= c1) throw ComputeError("pair '" + raw.id + "' has no valid overlap");
    int bad[4] = {0, 0, 0, 0};
    for (int c = c0; c < c1; ++c) {
      bad[0] += !valid(r0, c);
      bad[1] += !valid(r1 - 1, c);
    }
    for (int r = r0; r < r1; ++r) {
      bad[2] += !valid(r, c0);
      bad[3] += !valid(r, c1 - 1);
    }
    const int worst = static_cast<int>(std::max_element(bad, bad + 4) - bad);
    if (bad[worst] == 0) break;
    switch (worst) {
      case 0: ++r0; break;
      case 1: --r1; break;
      case 2: ++c0; break;
      default: --c1; break;
    }
  }
  // Snap so LR samples land on integer LR coordinates for integer shifts.
  auto parity = [](int v, double shift) {
    return (((v - static_cast<long long>(std::llround(shift))) % 2) + 2) % 2;
  };
  if (parity(r0, t.shift_y)) ++r0;
  if (parity(c0, t.shift_x)) ++c0;
  const int lh = (r1 - r0) / 2, lw = (c1 - c0) / 2;
  if (lh < 8 || lw < 8) throw ComputeError("pair '" + raw.id + "' overlap too small after alignment");

  ImagePair out;
  out.id = raw.id;
  out.registration = t;
  out.hr = crop(raw.hr, r0, c0, 2 * lh, 2 * lw);
  out.lr = GrayImage(lw, lh);
  for (int i = 0; i < lh; ++i)
    for (int j = 0; j < lw; ++j) {
      const auto [xu, yu] = to_up(c0 + 2 * j + 0.5, r0 + 2 * i + 0.5);
      out.lr.at(i, j) = sample_bicubic(raw.lr, (xu + 0.5) / 2.0 - 0.5, (yu + 0.5) / 2.0 - 0.5);
    }
  return out;
}

// --- protocol ----------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (match.side < 3 || match.side % 2 == 0) throw InvalidArgument("patch size must be odd and >= 3");
  if (match.radius < 0 || match.stride < 1) throw InvalidArgument("radius must be >= 0 and stride >= 1");
  if (library_size < 1 || categories < 1 || oversample < 1) {
    throw InvalidArgument("library size, categories and oversample must be positive");
  }
  if (categories > library_size) throw InvalidArgument("categories exceed library size");
  if (test_cols < 0 || test_cols >= grid_cols) throw InvalidArgument("test columns must leave a training column");
  if (eval.border < 0) throw InvalidArgument("border must be >= 0");
  search.validate();
  plan().validate();
  nlm().validate();
}

namespace {

std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t pair_seed(const PipelineConfig& config, const std::string& id) {
  return derive_seed(config.seed, id_hash(id));
}

// Library artifacts are named after the pair id; keep file names tame.
std::string file_stem(const std::string& id) {
  std::string s = id;
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  return s;
}

struct Prepared {
  const ImagePair* source = nullptr;
  ImagePair aligned;
  Partition parts;
  std::vector<PatchPair> pairs;  // harvested on the training tiles
};

Prepared prepare(const ImagePair& pair, const PipelineConfig& config) {
  Prepared p;
  p.source = &pair;
  p.aligned = pair.registration ? pair : align_pair(pair, config.search);
  p.parts = partition_pair(p.aligned, config.plan());
  std::vector<PatchPair> dump;
  for (const SubPair& s : p.parts.train) {
    std::vector<PatchPair> got = match_patches(s.hr, bicubic_upsample(s.lr, 2), config.match);
    for (PatchPair& pp : got) {
      if (config.output_dir && pp.textured) {
        PatchPair g = pp;
        g.lr_up.center.row += 2 * s.lr_row0;
        g.lr_up.center.col += 2 * s.lr_col0;
        dump.push_back(std::move(g));
      }
      p.pairs.push_back(std::move(pp));
    }
  }
  if (config.output_dir) {
    const std::string stem = file_stem(pair.id);
    save_transform(*p.aligned.registration, *config.output_dir / (stem + "_registration.txt"));
    std::ofstream out(*config.output_dir / (stem + "_displacements.txt"));
    if (!out) throw IoError("cannot write displacement dump for '" + pair.id + "'");
    write_displacements(out, dump);
  }
  return p;
}

PairedLibrary library_from(const Prepared& p, const PipelineConfig& config) {
  if (p.pairs.empty()) throw ComputeError("no patch pairs harvested for '" + p.aligned.id + "'");
  LibraryOptions lo;
  lo.size = config.library_size;
  lo.categories = config.categories;
  lo.oversample = config.oversample;
  lo.seed = pair_seed(config, p.aligned.id);
  return build_library(p.pairs, lo);
}

std::vector<SubimageReport> evaluate_pair(const Prepared& p, const PairedLibrary& lib,
                                          const PipelineConfig& config, const std::string& strategy) {
  std::vector<std::pair<const SubPair*, bool>> tiles;
  if (config.evaluate_in_sample)
    for (const SubPair& s : p.parts.train) tiles.emplace_back(&s, true);
  for (const SubPair& s : p.parts.test) tiles.emplace_back(&s, false);

  std::vector<SubimageReport> out;
  for (const auto& [s, in_sample] : tiles) {
    const GrayImage bic = bicubic_upsample(s->lr, 2);
    const GrayImage sr = lbnlm_filter(bic, lib, config.nlm());
    SubimageReport r;
    r.strategy = strategy;
    r.pair_id = p.aligned.id;
    r.tile = s->tile;
    r.grid_row = s->grid_row;
    r.grid_col = s->grid_col;
    r.in_sample = in_sample;
    r.metrics = evaluate(s->hr, sr, bic, config.eval);
    if (config.output_dir) {
      save_image(sr, *config.output_dir /
                         (strategy + "_" + file_stem(p.aligned.id) + "_tile" + std::to_string(s->tile) + "_sr.png"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void sort_reports(std::vector<SubimageReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const SubimageReport& a, const SubimageReport& b) {
    if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
    return a.tile < b.tile;
  });
}

void ensure_output_dir(const PipelineConfig& config) {
  if (!config.output_dir) return;
  std::error_code ec;
  std::filesystem::create_directories(*config.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + config.output_dir->string() + ": " + ec.message());
}

}  // namespace

PairedLibrary train_pair_library(const ImagePair& aligned, const PipelineConfig& config) {
  config.validate();
  PipelineConfig quiet = config;
  quiet.output_dir.reset();
  return library_from(prepare(aligned, quiet), quiet);
}

std::vector<SubimageReport> run_self_training(const std::vector<ImagePair>& pairs,
                                              const PipelineConfig& config) {
  config.validate();
  ensure_output_dir(config);
  std::vector<SubimageReport> reports;
  for (const ImagePair& pair : pairs) {
    try {
      const Prepared p = prepare(pair, config);
      const PairedLibrary lib = library_from(p, config);
      if (config.output_dir) lib.save(*config.output_dir / ("self_" + file_stem(pair.id) + ".plib"));
      auto r = evaluate_pair(p, lib, config, "self");
      reports.insert(reports.end(), r.begin(), r.end());
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      std::clog << "skipping pair '" << pair.id << "': " << e.what() << '\n';
    }
  }
  sort_reports(reports);
  return reports;
}

std::vector<SubimageReport> run_pooled_training(const std::vector<ImagePair>& pairs,
                                                const PipelineConfig& config) {
  config.validate();
  ensure_output_dir(config);
  std::vector<Prepared> prepared;
  std::vector<PairedLibrary> libs;
  for (const ImagePair& pair : pairs) {
    try {
      Prepared p = prepare(pair, config);
      libs.push_back(library_from(p, config));
      prepared.push_back(std::move(p));
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      std::clog << "skipping pair '" << pair.id << "': " << e.what() << '\n';
    }
  }
  if (libs.empty()) return {};
  const PairedLibrary merged = merge_libraries(libs, {config.categories, derive_seed(config.seed, 7)});
  if (config.output_dir) merged.save(*config.output_dir / "pooled.plib");

  std::vector<SubimageReport> reports;
  for (const Prepared& p : prepared) {
    auto r = evaluate_pair(p, merged, config, "pooled");
    reports.insert(reports.end(), r.begin(), r.end());
  }
  sort_reports(reports);
  return reports;
}

// --- aggregation -------------------------------------------------------------------

namespace {

double mean_finite(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

GroupSummary summarize(const std::string& strategy, const std::string& sample,
                       const std::vector<const SubimageReport*>& group) {
  GroupSummary g;
  g.strategy = strategy;
  g.sample = sample;
  g.count = group.size();
  std::vector<double> dp, ds, fg, bg, ssr, sbic;
  std::size_t failures = 0;
  for (const SubimageReport* r : group) {
    dp.push_back(r->metrics.delta_psnr);
    ds.push_back(r->metrics.delta_ssim);
    fg.push_back(r->metrics.fg_delta_psnr);
    bg.push_back(r->metrics.bg_delta_psnr);
    ssr.push_back(r->metrics.sim_sr);
    sbic.push_back(r->metrics.sim_bicubic);
    failures += r->metrics.failure;
  }
  g.mean_delta_psnr = mean_finite(dp);
  g.mean_delta_ssim = mean_finite(ds);
  g.failure_pct = 100.0 * static_cast<double>(failures) / static_cast<double>(group.size());
  g.mean_fg_delta_psnr = mean_finite(fg);
  g.mean_bg_delta_psnr = mean_finite(bg);
  g.mean_sim_sr = mean_finite(ssr);
  g.mean_sim_bicubic = mean_finite(sbic);
  return g;
}

std::string fixed(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::vector<GroupSummary> aggregate_reports(const std::vector<SubimageReport>& reports) {
  if (reports.empty()) throw InvalidArgument("no subimage reports to aggregate");
  std::vector<std::string> strategies;
  for (const auto& r : reports)
    if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end())
      strategies.push_back(r.strategy);

  std::vector<GroupSummary> out;
  for (const std::string& s : strategies) {
    std::vector<const SubimageReport*> in, held, all;
    for (const auto& r : reports) {
      if (r.strategy != s) continue;
      (r.in_sample ? in : held).push_back(&r);
      all.push_back(&r);
    }
    if (!in.empty()) out.push_back(summarize(s, "in-sample", in));
    if (!held.empty()) out.push_back(summarize(s, "out-of-sample", held));
    out.push_back(summarize(s, "all", all));
  }
  return out;
}

void write_reports_csv(std::ostream& out, const std::vector<SubimageReport>& reports) {
  out << "strategy,pair_id,tile,grid_row,grid_col,in_sample,psnr_sr,psnr_bicubic,delta_psnr,"
         "ssim_sr,ssim_bicubic,delta_ssim,fg_delta_psnr,bg_delta_psnr,sim_sr,sim_bicubic,failure\n";
  for (const auto& r : reports) {
    const auto& m = r.metrics;
    out << r.strategy << ',' << r.pair_id << ',' << r.tile << ',' << r.grid_row << ',' << r.grid_col
        << ',' << (r.in_sample ? 1 : 0) << ',' << format_double(m.psnr_sr) << ','
        << format_double(m.psnr_bicubic) << ',' << format_double(m.delta_psnr) << ','
        << format_double(m.ssim_sr) << ',' << format_double(m.ssim_bicubic) << ','
        << format_double(m.delta_ssim) << ',' << format_double(m.fg_delta_psnr) << ','
        << format_double(m.bg_delta_psnr) << ',' << format_double(m.sim_sr) << ','
        << format_double(m.sim_bicubic) << ',' << (m.failure ? 1 : 0) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& summary) {
  out << "strategy,sample,count,mean_delta_psnr,mean_delta_ssim,failure_pct,mean_fg_delta_psnr,"
         "mean_bg_delta_psnr,mean_sim_sr,mean_sim_bicubic\n";
  for (const auto& g : summary) {
    out << g.strategy << ',' << g.sample << ',' << g.count << ',' << format_double(g.mean_delta_psnr)
        << ',' << format_double(g.mean_delta_ssim) << ',' << format_double(g.failure_pct) << ','
        << format_double(g.mean_fg_delta_psnr) << ',' << format_double(g.mean_bg_delta_psnr) << ','
        << format_double(g.mean_sim_sr) << ',' << format_double(g.mean_sim_bicubic) << '\n';
  }
}

void write_summary_table(std::ostream& out, const std::vector<GroupSummary>& summary) {
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-14s %5s %9s %9s %7s %9s %9s %7s %7s\n", "strategy",
                "sample", "n", "dPSNR", "dSSIM", "fail%", "fg dPSNR", "bg dPSNR", "simSR", "simBic");
  out << line;
  for (const auto& g : summary) {
    std::snprintf(line, sizeof line, "%-8s %-14s %5zu %9s %9s %7s %9s %9s %7s %7s\n",
                  g.strategy.c_str(), g.sample.c_str(), g.count, fixed(g.mean_delta_psnr).c_str(),
                  fixed(g.mean_delta_ssim).c_str(), fixed(g.failure_pct).c_str(),
                  fixed(g.mean_fg_delta_psnr).c_str(), fixed(g.mean_bg_delta_psnr).c_str(),
                  fixed(g.mean_sim_sr).c_str(), fixed(g.mean_sim_bicubic).c_str());
    out << line;
  }
}

// --- manifest ------------------------------------------------------------------------

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("file not found: " + path.string());
  return parse_manifest(in, path.parent_path());
}

Manifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  Manifest m;
  PipelineConfig& c = m.config;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };
  auto as_int = [](const KeyValue& kv) { return static_cast<int>(parse_int(kv.value, kv.key)); };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  bool have_output = false;

  for (const KeyValue& kv : parse_key_values(in)) {
    const std::string& k = kv.key;
    const std::string at = " (line " + std::to_string(kv.line) + ")";
    if (k == "pair") {
      std::vector<std::string> parts;
      std::size_t pos = 0;
      for (;;) {
        const auto comma = kv.value.find(',', pos);
        parts.push_back(trim(kv.value.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (parts.size() != 3 || parts[0].empty()) {
        throw InvalidArgument("pair expects 'id, hr_path, lr_path'" + at);
      }
      for (const auto& existing : m.pairs)
        if (existing.id == parts[0]) throw InvalidArgument("duplicate pair id '" + parts[0] + "'" + at);
      m.pairs.push_back({parts[0], resolve(parts[1]), resolve(parts[2])});
    } else if (k == "output_dir") {
      m.output_dir = resolve(kv.value);
      have_output = true;
    } else if (k == "strategy") {
      if (kv.value == "self") m.strategies = {Strategy::kSelf};
      else if (kv.value == "pooled") m.strategies = {Strategy::kPooled};
      else if (kv.value == "both") m.strategies = {Strategy::kSelf, Strategy::kPooled};
      else throw InvalidArgument("strategy must be self, pooled or both" + at);
    } else if (k == "patch_size") c.match.side = as_int(kv);
    else if (k == "variance_threshold") c.match.variance_threshold = parse_double(kv.value, k);
    else if (k == "local_radius") c.match.radius = as_int(kv);
    else if (k == "match_stride") c.match.stride = as_int(kv);
    else if (k == "library_size") c.library_size = as_int(kv);
    else if (k == "categories") c.categories = as_int(kv);
    else if (k == "oversample") c.oversample = as_int(kv);
    else if (k == "sigma_n") c.sigma_n = parse_double(kv.value, k);
    else if (k == "accelerate") c.accelerate = parse_bool(kv.value, k);
    else if (k == "grid_rows") c.grid_rows = as_int(kv);
    else if (k == "grid_cols") c.grid_cols = as_int(kv);
    else if (k == "test_cols") c.test_cols = as_int(kv);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(parse_int(kv.value, k));
    else if (k == "canny") c.eval.canny_param = parse_double(kv.value, k);
    else if (k == "border") c.eval.border = as_int(kv);
    else if (k == "in_sample") c.evaluate_in_sample = parse_bool(kv.value, k);
    else if (k == "coarse_factor") c.search.coarse_factor = as_int(kv);
    else if (k == "coarse_shift_range") c.search.coarse_shift_range = as_int(kv);
    else if (k == "coarse_shift_step") c.search.coarse_shift_step = as_int(kv);
    else if (k == "theta_min") c.search.theta_min = parse_double(kv.value, k);
    else if (k == "theta_max") c.search.theta_max = parse_double(kv.value, k);
    else if (k == "coarse_theta_step") c.search.coarse_theta_step = parse_double(kv.value, k);
    else if (k == "fine_shift_radius") c.search.fine_shift_radius = as_int(kv);
    else if (k == "fine_theta_radius") c.search.fine_theta_radius = parse_double(kv.value, k);
    else if (k == "fine_theta_step") c.search.fine_theta_step = parse_double(kv.value, k);
    else if (k == "min_overlap") c.search.min_overlap = parse_double(kv.value, k);
    else throw InvalidArgument("unknown manifest key '" + k + "'" + at);
  }
  if (m.pairs.empty()) throw InvalidArgument("manifest lists no pairs");
  if (!have_output) throw InvalidArgument("manifest needs output_dir");
  c.output_dir = m.output_dir;
  c.validate();
  return m;
}

std::vector<GroupSummary> run_manifest(const Manifest& manifest) {
  PipelineConfig config = manifest.config;
  config.output_dir = manifest.output_dir;
  config.validate();
  for (const PairSource& src : manifest.pairs)
    for (const auto& f : {src.hr, src.lr})
      if (!std::filesystem::is_regular_file(f)) {
        throw InvalidArgument("pair '" + src.id + "': file not found: " + f.string());
      }
  ensure_output_dir(config);

  // Align once and share the result between strategies.
  std::vector<ImagePair> aligned;
  for (const PairSource& src : manifest.pairs) {
    ImagePair raw{src.id, load_image(src.hr), load_image(src.lr), std::nullopt};
    try {
      aligned.push_back(align_pair(raw, config.search));
    } catch (const ComputeError& e) {
      std::clog << "skipping pair '" << src.id << "': " << e.what() << '\n';
    }
  }
  std::vector<SubimageReport> reports;
  for (Strategy s : manifest.strategies) {
    auto r = s == Strategy::kSelf ? run_self_training(aligned, config)
                                  : run_pooled_training(aligned, config);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  if (reports.empty()) throw ComputeError("every pair failed; no reports produced");
  const auto summary = aggregate_reports(reports);

  std::ofstream rep(*config.output_dir / "reports.csv");
  std::ofstream agg(*config.output_dir / "aggregate.csv");
  if (!rep || !agg) throw IoError("cannot write reports into " + config.output_dir->string());
  write_reports_csv(rep, reports);
  write_summary_csv(agg, summary);
  return summary;
}

}  // namespace pairsr
