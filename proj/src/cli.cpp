#include "pairsr/cli.hpp"

#include <CLI11.hpp>

#include <bit>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pairsr/error.hpp"
#include "pairsr/harness.hpp"
#include "pairsr/lbnlm.hpp"
#include "pairsr/library.hpp"
#include "pairsr/metrics.hpp"
#include "pairsr/parallel.hpp"

namespace pairsr {

// --- patch-pair files ------------------------------------------------------------

namespace {

constexpr char kPairMagic[4] = {'P', 'P', 'A', 'R'};
constexpr std::uint32_t kPairVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int ch = in.get();
    if (ch == EOF) throw IoError("truncated patch-pair file: " + path.string());
    bits |= static_cast<U>(static_cast<U>(ch) << (8 * i));
  }
  return std::bit_cast<T>(bits);
}

}  // namespace

void save_patch_pairs(const std::vector<PatchPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const int side = pairs.empty() ? 0 : pairs.front().hr.side;
  out.write(kPairMagic, 4);
  put(out, kPairVersion);
  put(out, static_cast<std::uint32_t>(side));
  put(out, static_cast<std::uint64_t>(pairs.size()));
  for (const PatchPair& p : pairs) {
    if (p.hr.side != side || p.lr_up.side != side) throw InvalidArgument("patch pairs of mixed sizes");
    put(out, static_cast<std::int32_t>(p.lr_up.center.row));
    put(out, static_cast<std::int32_t>(p.lr_up.center.col));
    put(out, static_cast<std::int32_t>(p.di));
    put(out, static_cast<std::int32_t>(p.dj));
    put(out, static_cast<std::uint8_t>(p.textured));
    for (double v : p.hr.data) put(out, v);
    for (double v : p.lr_up.data) put(out, v);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<PatchPair> load_patch_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file not found: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kPairMagic, 4) != 0) throw IoError("not a patch-pair file: " + path.string());
  if (get<std::uint32_t>(in, path) != kPairVersion) throw IoError("unsupported patch-pair version: " + path.string());
  const auto side = static_cast<int>(get<std::uint32_t>(in, path));
  const auto count = get<std::uint64_t>(in, path);
  if (count > 0 && (side < 3 || side % 2 == 0 || side > 255)) throw IoError("patch-pair header out of range");
  const std::size_t len = static_cast<std::size_t>(side) * side;
  std::vector<PatchPair> pairs;
  for (std::uint64_t n = 0; n < count; ++n) {
    PatchPair p;
    const int row = get<std::int32_t>(in, path);
    const int col = get<std::int32_t>(in, path);
    p.di = get<std::int32_t>(in, path);
    p.dj = get<std::int32_t>(in, path);
    p.textured = get<std::uint8_t>(in, path) != 0;
    p.lr_up = {side, {row, col}, std::vector<double>(len)};
    p.hr = {side, {row + p.di, col + p.dj}, std::vector<double>(len)};
    for (double& v : p.hr.data) v = get<double>(in, path);
    for (double& v : p.lr_up.data) v = get<double>(in, path);
    pairs.push_back(std::move(p));
  }
  if (in.peek() != EOF) throw IoError("trailing bytes in patch-pair file: " + path.string());
  return pairs;
}

// --- dispatch --------------------------------------------------------------------

namespace {

int default_threads() {
  if (const char* env = std::getenv("PAIRSR_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return thread_count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Paired-image super-resolution for electron micrographs"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  int threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default: PAIRSR_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  const auto existing = CLI::ExistingFile;

  // register
  auto* reg = app.add_subcommand("register", "Globally register an HR/LR pair");
  std::string reg_hr, reg_lr, reg_out, reg_aligned;
  RigidSearch search;
  reg->add_option("--hr", reg_hr, "HR image")->required()->check(existing);
  reg->add_option("--lr", reg_lr, "LR image")->required()->check(existing);
  reg->add_option("--out", reg_out, "Registration record to write")->required();
  reg->add_option("--aligned-dir", reg_aligned, "Also write the cropped aligned pair here");
  reg->add_option("--shift-range", search.coarse_shift_range, "Max |shift| in HR px")->capture_default_str();
  reg->add_option("--theta-min", search.theta_min, "Min rotation, degrees")->capture_default_str();
  reg->add_option("--theta-max", search.theta_max, "Max rotation, degrees")->capture_default_str();
  reg->add_option("--min-overlap", search.min_overlap, "Min overlap fraction")->capture_default_str();

  // match
  auto* mat = app.add_subcommand("match", "Harvest HR / upsampled-LR patch pairs from an aligned pair");
  std::string mat_hr, mat_lr, mat_out, mat_disp;
  MatchOptions match;
  mat->add_option("--hr", mat_hr, "Aligned HR image")->required()->check(existing);
  mat->add_option("--lr", mat_lr, "Aligned LR image (half the HR size)")->required()->check(existing);
  mat->add_option("--out", mat_out, "Patch-pair file to write")->required();
  mat->add_option("--displacements", mat_disp, "Displacement dump (i j di dj)");
  mat->add_option("--patch-size", match.side, "Patch side n")->capture_default_str();
  mat->add_option("--variance-threshold", match.variance_threshold, "Texture variance threshold")
      ->capture_default_str();
  mat->add_option("--radius", match.radius, "Local search radius, px")->capture_default_str();
  mat->add_option("--stride", match.stride, "Center grid stride, px")->capture_default_str();

  // build-lib
  auto* bld = app.add_subcommand("build-lib", "Build a paired library from patch-pair files");
  std::vector<std::string> bld_pairs;
  std::string bld_out;
  LibraryOptions lib_opts;
  bld->add_option("--pairs", bld_pairs, "Patch-pair files (repeatable)")->required()->check(existing);
  bld->add_option("--out", bld_out, "Library file to write")->required();
  bld->add_option("--size", lib_opts.size, "Library size L")->capture_default_str();
  bld->add_option("--categories", lib_opts.categories, "Categories k")->capture_default_str();
  bld->add_option("--oversample", lib_opts.oversample, "Oversampling factor K")->capture_default_str();
  bld->add_option("--seed", lib_opts.seed, "Random seed")->capture_default_str();

  // sr
  auto* sr = app.add_subcommand("sr", "Super-resolve an LR image 2x with a paired library");
  std::string sr_lr, sr_lib, sr_out;
  double sigma_n = 1.0;
  bool no_accel = false;
  sr->add_option("--lr", sr_lr, "LR image")->required()->check(existing);
  sr->add_option("--lib", sr_lib, "Library file")->required()->check(existing);
  sr->add_option("--out", sr_out, "Reconstruction to write")->required();
  sr->add_option("--sigma", sigma_n, "NLM weight scale sigma_n")->capture_default_str();
  sr->add_flag("--no-accelerate", no_accel, "Search the whole library instead of the nearest category");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a reconstruction and the bicubic baseline against HR");
  std::string ev_hr, ev_sr, ev_lr, ev_out;
  EvaluateOptions eval_opts;
  ev->add_option("--hr", ev_hr, "HR ground truth")->required()->check(existing);
  ev->add_option("--sr", ev_sr, "Reconstruction")->required()->check(existing);
  ev->add_option("--lr", ev_lr, "LR input (bicubic baseline source)")->required()->check(existing);
  ev->add_option("--out", ev_out, "Report record to write (default: stdout)");
  ev->add_option("--canny", eval_opts.canny_param, "Canny high threshold fraction")->capture_default_str();
  ev->add_option("--border", eval_opts.border, "Excluded frame width, px")->capture_default_str();

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic degraded pair with ground truth");
  std::string syn_truth, syn_specimen, syn_dir;
  DegradationSpec deg;
  auto* truth_opt = syn->add_option("--truth", syn_truth, "Ground-truth image (even dims)")->check(existing);
  syn->add_option("--specimen", syn_specimen, "Generate a WxH specimen instead of --truth")
      ->excludes(truth_opt);
  syn->add_option("--out-dir", syn_dir, "Output directory")->required();
  syn->add_option("--seed", deg.seed, "Random seed")->capture_default_str();
  syn->add_option("--blur", deg.blur_sigma, "LR blur sigma, px")->capture_default_str();
  syn->add_option("--noise-hr", deg.noise_sigma_hr, "HR noise sigma")->capture_default_str();
  syn->add_option("--noise-lr", deg.noise_sigma_lr, "LR noise sigma")->capture_default_str();
  syn->add_option("--gain", deg.contrast_gain, "LR contrast gain")->capture_default_str();
  syn->add_option("--offset", deg.contrast_offset, "LR contrast offset")->capture_default_str();
  syn->add_option("--shift-x", deg.shift_x, "Global shift x, HR px")->capture_default_str();
  syn->add_option("--shift-y", deg.shift_y, "Global shift y, HR px")->capture_default_str();
  syn->add_option("--rotation", deg.rotation, "Global rotation, degrees")->capture_default_str();
  syn->add_option("--warp", deg.warp_amplitude, "Local warp amplitude, px")->capture_default_str();
  syn->add_option("--warp-scale", deg.warp_scale, "Local warp wavelength scale, px")->capture_default_str();

  // pipeline
  auto* pip = app.add_subcommand(
      "pipeline",
      "Run the full experiment from a manifest.\nDefaults: n=9, k=50, K=10, L=5000, sigma_n=1.0, "
      "variance threshold 100, canny 0.2, grid 3x4, split 9/3");
  std::string pip_manifest, pip_strategy, pip_out;
  pip->add_option("--manifest", pip_manifest, "Manifest file")->required()->check(existing);
  pip->add_option("--strategy", pip_strategy, "Override the manifest strategy")
      ->check(CLI::IsMember({"self", "pooled", "both"}));
  pip->add_option("--out-dir", pip_out, "Override the manifest output directory");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << " (see --help)\n";
    return 1;
  }

  try {
    set_thread_count(threads);
    if (reg->parsed()) {
      ImagePair raw{"pair", load_image(reg_hr), load_image(reg_lr), std::nullopt};
      const GlobalTransform t = global_register(raw.hr, bicubic_upsample(raw.lr, 2), search);
      save_transform(t, reg_out);
      write_transform(out, t);
      if (!reg_aligned.empty()) {
        ensure_dir(reg_aligned);
        const ImagePair a = align_pair(raw, t);
        save_image(a.hr, std::filesystem::path(reg_aligned) / "hr.png");
        save_image(a.lr, std::filesystem::path(reg_aligned) / "lr.png");
      }
    } else if (mat->parsed()) {
      const GrayImage hr = load_image(mat_hr), lr = load_image(mat_lr);
      if (hr.width() != 2 * lr.width() || hr.height() != 2 * lr.height()) {
        throw InvalidArgument("--hr must be exactly twice the size of --lr; run `register --aligned-dir` first");
      }
      const auto pairs = match_patches(hr, bicubic_upsample(lr, 2), match);
      save_patch_pairs(pairs, mat_out);
      if (!mat_disp.empty()) {
        std::ostringstream s;
        write_displacements(s, pairs);
        write_text(mat_disp, s.str());
      }
      out << pairs.size() << " patch pairs\n";
    } else if (bld->parsed()) {
      std::vector<PatchPair> pairs;
      for (const auto& f : bld_pairs) {
        auto got = load_patch_pairs(f);
        pairs.insert(pairs.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
      }
      const PairedLibrary lib = build_library(pairs, lib_opts);
      lib.save(bld_out);
      out << lib.size() << " entries in " << lib.k() << " categories\n";
    } else if (sr->parsed()) {
      const PairedLibrary lib = PairedLibrary::load(sr_lib);
      const GrayImage result = super_resolve(load_image(sr_lr), lib, {sigma_n, !no_accel, lib.side()});
      save_image(result, sr_out);
    } else if (ev->parsed()) {
      const GrayImage hr = load_image(ev_hr), srimg = load_image(ev_sr), lr = load_image(ev_lr);
      const EvaluationReport r = evaluate(hr, srimg, bicubic_upsample(lr, 2), eval_opts);
      std::ostringstream s;
      write_report(s, r);
      if (ev_out.empty()) out << s.str();
      else write_text(ev_out, s.str());
    } else if (syn->parsed()) {
      GrayImage truth;
      const std::filesystem::path dir(syn_dir);
      if (!syn_specimen.empty()) {
        int w = 0, h = 0;
        char x = 0;
        std::istringstream s(syn_specimen);
        if (!(s >> w >> x >> h) || (x != 'x' && x != 'X') || !s.eof()) {
          throw InvalidArgument("--specimen expects WxH, e.g. 256x192");
        }
        const Specimen sp = generate_specimen(w, h, deg.seed);
        ensure_dir(dir);
        truth = sp.image;
        save_image(truth, dir / "truth.png");
        GrayImage blobs(w, h);
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < w; ++c) blobs.at(r, c) = sp.blobs.at(r, c) ? 255.0 : 0.0;
        save_image(blobs, dir / "blobs.png");
      } else if (!syn_truth.empty()) {
        truth = load_image(syn_truth);
        ensure_dir(dir);
      } else {
        throw InvalidArgument("synth needs --truth FILE or --specimen WxH");
      }
      const SyntheticPair sp = synthesize_pair(truth, deg);
      save_image(sp.pair.hr, dir / "hr.png");
      save_image(sp.pair.lr, dir / "lr.png");
      std::ostringstream s;
      write_ground_truth(s, sp);
      write_text(dir / "truth.txt", s.str());
    } else if (pip->parsed()) {
      Manifest m = load_manifest(pip_manifest);
      if (pip_strategy == "self") m.strategies = {Strategy::kSelf};
      else if (pip_strategy == "pooled") m.strategies = {Strategy::kPooled};
      else if (pip_strategy == "both") m.strategies = {Strategy::kSelf, Strategy::kPooled};
      if (!pip_out.empty()) m.output_dir = pip_out;
      const auto summary = run_manifest(m);
      write_summary_table(out, summary);
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace pairsr
