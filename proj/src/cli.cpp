#include "slicedict/cli.hpp"

#include "slicedict/engine.hpp"
#include "slicedict/io.hpp"
#include "slicedict/parallel.hpp"
#include "slicedict/separation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>

namespace slicedict::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  int threads = 0;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void apply_threads(const CommonOptions& common) {
  int threads = common.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("SLICEDICT_THREADS")) threads = std::atoi(env);
  }
  set_num_threads(std::max(0, threads));
}

fs::path sibling(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

void write_manifest(const fs::path& output, const std::string& command, json config,
                    const std::vector<std::string>& inputs, std::uint64_t seed, const std::string& started) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = std::move(config);
  manifest["inputs"] = inputs;
  manifest["seed"] = seed;
  manifest["start_timestamp"] = started;
  manifest["library_version"] = kVersion;
  manifest["threads"] = num_threads();
  const fs::path path = sibling(output, ".manifest.json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

json pursuit_json(const PursuitConfig& p) {
  json j;
  j["max_sweeps"] = p.max_sweeps;
  j["tolerance"] = p.tolerance;
  j["max_nonzeros"] = p.max_nonzeros ? json(*p.max_nonzeros) : json(nullptr);
  return j;
}

void add_pursuit_options(CLI::App* cmd, PursuitConfig& p, int& cap) {
  cmd->add_option("--pursuit-sweeps", p.max_sweeps, "Coordinate-descent sweep limit per needle")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--pursuit-tol", p.tolerance, "Coordinate-descent tolerance")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-nonzeros", cap, "Cap on needle nonzeros (0 = no cap)")->capture_default_str()->check(
      CLI::NonNegativeNumber);
}

void finish_pursuit(PursuitConfig& p, int cap) {
  if (cap > 0) p.max_nonzeros = cap;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string input;
  std::string out;
  std::string log;
  std::string mosaic;
  int filters = 100;
  int filter_size = 11;
  int cap = 0;
  TrainConfig cfg;
};

int cmd_train(const TrainArgs& a) {
  const std::string started = utc_timestamp();
  TrainConfig cfg = a.cfg;
  finish_pursuit(cfg.pursuit, a.cap);

  std::vector<fs::path> files;
  if (fs::is_directory(a.input)) {
    for (const auto& entry : fs::directory_iterator(a.input)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
  } else {
    files.emplace_back(a.input);
  }
  std::sort(files.begin(), files.end());

  std::vector<Image> images;
  std::vector<std::string> loaded;
  for (const fs::path& file : files) {
    try {
      const PreprocessResult pre = preprocess_with_status(to_luma(read_pnm(file)));
      if (pre.status == PreprocessStatus::constant_image) {
        std::cerr << "warning: " << file.string() << " is constant; mean-subtracted only\n";
      }
      if (pre.image.height() < a.filter_size || pre.image.width() < a.filter_size) {
        std::cerr << "warning: skipping " << file.string() << ": smaller than the filter\n";
        continue;
      }
      images.push_back(pre.image);
      loaded.push_back(file.string());
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file.string() << ": " << e.what() << '\n';
    }
  }
  if (images.empty()) {
    std::cerr << "error: no usable images in " << a.input << '\n';
    return kRuntimeFailure;
  }

  const LocalDictionary d0 = init_dictionary(a.filter_size * a.filter_size, a.filters, cfg.seed);
  std::optional<MetricsCsvWriter> csv;
  if (!a.log.empty()) csv.emplace(a.log);
  const TrainResult res = train(images, cfg, d0, [&](const MetricsRow& row) {
    if (csv) csv->write(row);
  });

  write_dictionary(a.out, res.dictionary);
  write_pgm(a.mosaic.empty() ? sibling(a.out, ".mosaic.pgm") : fs::path(a.mosaic), dictionary_mosaic(res.dictionary));

  json config;
  config["filters"] = a.filters;
  config["filter_size"] = a.filter_size;
  config["lambda"] = cfg.lambda;
  config["rho"] = cfg.rho;
  config["iterations"] = cfg.iterations;
  config["subsample"] = cfg.subsample;
  config["dictionary_sweeps"] = cfg.dictionary_sweeps;
  config["refit_coefficients"] = cfg.refit_coefficients;
  config["pursuit"] = pursuit_json(cfg.pursuit);
  config["preprocessing"] = "BT.601 luma, samples scaled to [0,1], mean subtracted, divided by population std";
  config["log"] = a.log;
  write_manifest(a.out, "train", config, loaded, cfg.seed, started);

  if (!res.metrics.empty()) {
    std::cout << "final objective " << format_double(res.metrics.back().objective) << " after "
              << res.metrics.size() << " iterations on " << images.size() << " image(s)\n";
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// inpaint
// ---------------------------------------------------------------------------

struct InpaintArgs {
  std::string dict;
  std::string input;
  std::string mask;
  std::string reference;
  std::string out;
  std::string out_dict;
  std::string out_mask;
  double drop_fraction = -1.0;
  bool learn_on_input = false;
  int filters = 100;
  int filter_size = 11;
  int cap = 0;
  TrainConfig cfg;
};

Image random_mask(int h, int w, double drop, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image mask(h, w, 1.0);
  for (double& v : mask.pixels()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = u < drop ? 0.0 : 1.0;
  }
  return mask;
}

int cmd_inpaint(const InpaintArgs& a) {
  const std::string started = utc_timestamp();
  TrainConfig cfg = a.cfg;
  finish_pursuit(cfg.pursuit, a.cap);

  const Image raw = to_luma(read_pnm(a.input));
  Image mask;
  if (!a.mask.empty()) {
    const Image m = to_luma(read_pnm(a.mask));
    if (!m.same_shape(raw)) {
      std::cerr << "error: mask size does not match the input image\n";
      return kRuntimeFailure;
    }
    mask = Image(m.height(), m.width());
    for (std::size_t k = 0; k < m.size(); ++k) mask.pixels()[k] = m.pixels()[k] * 255.0 > 127.0 ? 1.0 : 0.0;
  } else {
    mask = random_mask(raw.height(), raw.width(), std::max(0.0, a.drop_fraction), cfg.seed);
  }

  LocalDictionary d;
  if (!a.dict.empty()) {
    d = read_dictionary(a.dict);
  } else {
    d = init_dictionary(a.filter_size * a.filter_size, a.filters, cfg.seed);
  }

  // normalize with statistics of the observed pixels only
  double count = 0.0, sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (mask.pixels()[k] != 0.0) {
      count += 1.0;
      sum += raw.pixels()[k];
    }
  }
  if (count == 0.0) {
    std::cerr << "error: mask observes no pixels\n";
    return kRuntimeFailure;
  }
  const double mu = sum / count;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (mask.pixels()[k] != 0.0) sq += (raw.pixels()[k] - mu) * (raw.pixels()[k] - mu);
  }
  double sd = std::sqrt(sq / count);
  if (!(sd > 1e-12)) sd = 1.0;

  Image y(raw.height(), raw.width());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    y.pixels()[k] = mask.pixels()[k] * (raw.pixels()[k] - mu) / sd;
  }

  const InpaintResult res = inpaint(y, mask, d, cfg, a.learn_on_input);
  Image restored = res.reconstruction;
  restored.vec() = restored.vec() * sd + Eigen::VectorXd::Constant(static_cast<Eigen::Index>(restored.size()), mu);
  write_pgm(a.out, restored);
  if (!a.out_dict.empty()) write_dictionary(a.out_dict, res.dictionary);
  if (!a.out_mask.empty()) write_pgm(a.out_mask, mask);

  const Image reference = a.reference.empty() ? raw : to_luma(read_pnm(a.reference));
  if (!reference.same_shape(restored)) {
    std::cerr << "error: reference size does not match the input image\n";
    return kRuntimeFailure;
  }
  Image corrupted = raw;
  corrupted.vec().array() *= mask.vec().array();
  std::cout << "psnr_restored " << format_double(psnr(reference, restored)) << '\n'
            << "psnr_corrupted " << format_double(psnr(reference, corrupted)) << '\n';

  json config;
  config["lambda"] = cfg.lambda;
  config["rho"] = cfg.rho;
  config["iterations"] = cfg.iterations;
  config["subsample"] = cfg.subsample;
  config["dictionary_sweeps"] = cfg.dictionary_sweeps;
  config["refit_coefficients"] = cfg.refit_coefficients;
  config["learn_on_input"] = a.learn_on_input;
  config["drop_fraction"] = a.mask.empty() ? json(std::max(0.0, a.drop_fraction)) : json(nullptr);
  config["mask"] = a.mask;
  config["dictionary"] = a.dict;
  config["pursuit"] = pursuit_json(cfg.pursuit);
  config["preprocessing"] = "BT.601 luma in [0,1], observed pixels standardized, result mapped back";
  config["psnr"] = "20 log10(sqrt(N) / ||reference - output||_2) on [0,1] intensities";
  std::vector<std::string> inputs{a.input};
  if (!a.reference.empty()) inputs.push_back(a.reference);
  write_manifest(a.out, "inpaint", config, inputs, cfg.seed, started);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// separate / enhance
// ---------------------------------------------------------------------------

struct SeparateArgs {
  std::string input;
  std::string dict;
  std::string out;
  std::string out_cartoon;
  std::string out_texture;
  std::string out_dict;
  double factor = 1.0;
  int cap = 0;
  SeparationConfig cfg;
};

void add_separation_options(CLI::App* cmd, SeparateArgs& a) {
  cmd->add_option("--input", a.input, "Input image (PGM/PPM)")->required();
  cmd->add_option("--dict", a.dict, "Initial texture dictionary (default: seeded random)");
  cmd->add_option("--lambda", a.cfg.lambda, "Texture sparsity weight")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  cmd->add_option("--xi", a.cfg.xi, "TV weight of the cartoon")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--eta", a.cfg.eta, "Cartoon split penalty")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--rho", a.cfg.rho, "Texture slice penalty")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--iters", a.cfg.iterations, "Outer iterations")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  cmd->add_option("--filters", a.cfg.atoms, "Texture atoms when no dictionary is given")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--filter-size", a.cfg.filter_side, "Filter side when no dictionary is given")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.cfg.seed, "Seed for the initial dictionary")->capture_default_str();
  cmd->add_flag("--anisotropic", [&a](std::int64_t) { a.cfg.tv.kind = TvKind::anisotropic; },
                "Use anisotropic TV for the cartoon");
  cmd->add_flag("!--fixed-dictionary", a.cfg.learn_dictionary, "Do not update the texture dictionary");
  cmd->add_flag("--refit-coefficients", a.cfg.refit_coefficients,
                "Refit needle values with each atom (rank-1 update) instead of holding them");
  cmd->add_option("--out-dict", a.out_dict, "Write the learned texture dictionary");
  add_pursuit_options(cmd, a.cfg.pursuit, a.cap);
}

json separation_json(const SeparationConfig& cfg) {
  json config;
  config["lambda"] = cfg.lambda;
  config["xi"] = cfg.xi;
  config["eta"] = cfg.eta;
  config["rho"] = cfg.rho;
  config["iterations"] = cfg.iterations;
  config["filters"] = cfg.atoms;
  config["filter_size"] = cfg.filter_side;
  config["learn_dictionary"] = cfg.learn_dictionary;
  config["refit_coefficients"] = cfg.refit_coefficients;
  config["tv"] = cfg.tv.kind == TvKind::isotropic ? "isotropic" : "anisotropic";
  config["pursuit"] = pursuit_json(cfg.pursuit);
  config["color"] = "sRGB inputs separated on CIELAB L (D65) scaled to [0,1]; gray inputs used directly";
  return config;
}

SeparationResult run_separation(const SeparateArgs& a, const RasterImage& img, SeparationConfig& cfg) {
  finish_pursuit(cfg.pursuit, a.cap);
  LocalDictionary d0 = a.dict.empty() ? init_dictionary(cfg.filter_side * cfg.filter_side, cfg.atoms, cfg.seed)
                                      : read_dictionary(a.dict);
  cfg.filter_side = d0.filter_side();
  cfg.atoms = d0.atom_count();
  SeparationResult res = separate(lightness(img), d0, cfg);
  if (!a.out_dict.empty()) write_dictionary(a.out_dict, res.dictionary);
  return res;
}

int cmd_separate(const SeparateArgs& a) {
  const std::string started = utc_timestamp();
  if (a.out_cartoon.empty() && a.out_texture.empty()) {
    std::cerr << "error: give --out-cartoon and/or --out-texture\n";
    return kUsageError;
  }
  const RasterImage img = read_pnm(a.input);
  SeparationConfig cfg = a.cfg;
  const SeparationResult res = run_separation(a, img, cfg);

  if (!a.out_cartoon.empty()) write_pnm(a.out_cartoon, with_lightness(img, res.cartoon));
  if (!a.out_texture.empty()) {
    Image shown = res.texture;
    shown.vec().array() += 0.5;
    write_pgm(a.out_texture, shown);
  }
  json config = separation_json(cfg);
  config["texture_display"] = "texture + 0.5 (mid-gray), clamped to [0,1]";
  write_manifest(a.out_cartoon.empty() ? fs::path(a.out_texture) : fs::path(a.out_cartoon), "separate", config,
                 {a.input}, cfg.seed, started);
  return kSuccess;
}

int cmd_enhance(const SeparateArgs& a) {
  const std::string started = utc_timestamp();
  const RasterImage img = read_pnm(a.input);
  SeparationConfig cfg = a.cfg;
  const SeparationResult res = run_separation(a, img, cfg);

  Image light = lightness(img);
  light.vec() += (a.factor - 1.0) * res.texture.vec();
  write_pnm(a.out, a.factor == 1.0 ? img : with_lightness(img, light));

  json config = separation_json(cfg);
  config["factor"] = a.factor;
  write_manifest(a.out, "enhance", config, {a.input}, cfg.seed, started);
  return kSuccess;
}

} // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Slice-based convolutional dictionary learning, inpainting and cartoon/texture separation",
               "slicedict"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", kVersion);
  CommonOptions common;
  app.add_option("--threads", common.threads, "Worker threads (0: $SLICEDICT_THREADS or all cores)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Learn a convolutional dictionary from a directory of images");
  train_cmd->add_option("--input", train_args.input, "Image directory (or single image)")->required();
  train_cmd->add_option("--out", train_args.out, "Output dictionary file")->required();
  train_cmd->add_option("--log", train_args.log, "Per-iteration metrics CSV");
  train_cmd->add_option("--mosaic", train_args.mosaic, "Dictionary mosaic PGM (default: <out>.mosaic.pgm)");
  train_cmd->add_option("--filters", train_args.filters, "Number of atoms")->capture_default_str()->check(
      CLI::PositiveNumber);
  train_cmd->add_option("--filter-size", train_args.filter_size, "Filter side in pixels")
      ->capture_default_str()
      ->check(CLI::Range(1, 0xFFFF));
  train_cmd->add_option("--lambda", train_args.cfg.lambda, "Sparsity weight")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  train_cmd->add_option("--rho", train_args.cfg.rho, "ADMM penalty")->capture_default_str()->check(
      CLI::PositiveNumber);
  train_cmd->add_option("--iters", train_args.cfg.iterations, "Outer iterations")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  train_cmd->add_option("--subsample", train_args.cfg.subsample, "Fraction of slices pursued per iteration")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0));
  train_cmd->add_option("--sweeps", train_args.cfg.dictionary_sweeps, "Dictionary update sweeps per iteration")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train_args.cfg.seed, "Seed for initialization and subsampling")
      ->capture_default_str();
  train_cmd->add_flag("--refit-coefficients", train_args.cfg.refit_coefficients,
                      "Refit needle values with each atom (rank-1 update) instead of holding them");
  add_pursuit_options(train_cmd, train_args.cfg.pursuit, train_args.cap);

  InpaintArgs inpaint_args;
  inpaint_args.cfg.lambda = 0.1;
  inpaint_args.cfg.iterations = 100;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "Fill in missing pixels with a convolutional sparse model");
  inpaint_cmd->add_option("--input", inpaint_args.input, "Observed image")->required();
  inpaint_cmd->add_option("--out", inpaint_args.out, "Restored image")->required();
  auto* dict_opt = inpaint_cmd->add_option("--dict", inpaint_args.dict, "Pretrained dictionary");
  auto* learn_opt =
      inpaint_cmd->add_flag("--learn-on-input", inpaint_args.learn_on_input, "Learn the dictionary on the input");
  auto* mask_opt = inpaint_cmd->add_option("--mask", inpaint_args.mask, "Mask PGM, pixel > 127 means observed");
  auto* drop_opt = inpaint_cmd->add_option("--drop-fraction", inpaint_args.drop_fraction,
                                           "Generate a random mask dropping this fraction of pixels")
                       ->check(CLI::Range(0.0, 1.0));
  mask_opt->excludes(drop_opt);
  inpaint_cmd->add_option("--reference", inpaint_args.reference, "Ground truth for PSNR");
  inpaint_cmd->add_option("--out-dict", inpaint_args.out_dict, "Write the final dictionary");
  inpaint_cmd->add_option("--out-mask", inpaint_args.out_mask, "Write the mask used");
  inpaint_cmd->add_option("--lambda", inpaint_args.cfg.lambda, "Sparsity weight")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  inpaint_cmd->add_option("--rho", inpaint_args.cfg.rho, "ADMM penalty")->capture_default_str()->check(
      CLI::PositiveNumber);
  inpaint_cmd->add_option("--iters", inpaint_args.cfg.iterations, "Outer iterations")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  inpaint_cmd->add_option("--sweeps", inpaint_args.cfg.dictionary_sweeps, "Dictionary update sweeps per iteration")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  inpaint_cmd->add_option("--seed", inpaint_args.cfg.seed, "Seed for the mask and dictionary init")
      ->capture_default_str();
  inpaint_cmd->add_option("--filters", inpaint_args.filters, "Atoms when learning from scratch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  inpaint_cmd->add_option("--filter-size", inpaint_args.filter_size, "Filter side when learning from scratch")
      ->capture_default_str()
      ->check(CLI::Range(1, 0xFFFF));
  inpaint_cmd->add_flag("--refit-coefficients", inpaint_args.cfg.refit_coefficients,
                        "Refit needle values with each atom (rank-1 update) instead of holding them");
  add_pursuit_options(inpaint_cmd, inpaint_args.cfg.pursuit, inpaint_args.cap);

  SeparateArgs separate_args;
  auto* separate_cmd = app.add_subcommand("separate", "Split an image into cartoon and texture");
  add_separation_options(separate_cmd, separate_args);
  separate_cmd->add_option("--out-cartoon", separate_args.out_cartoon, "Cartoon output image");
  separate_cmd->add_option("--out-texture", separate_args.out_texture, "Texture output (PGM, mid-gray offset)");

  SeparateArgs enhance_args;
  auto* enhance_cmd = app.add_subcommand("enhance", "Boost the texture component of an image");
  add_separation_options(enhance_cmd, enhance_args);
  enhance_cmd->add_option("--out", enhance_args.out, "Enhanced image")->required();
  enhance_cmd->add_option("--factor", enhance_args.factor, "Texture gain")->capture_default_str()->check(
      CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (inpaint_cmd->parsed()) {
      if (dict_opt->count() == 0 && learn_opt->count() == 0) {
        throw CLI::ValidationError("inpaint", "--dict is required unless --learn-on-input is given");
      }
      if (mask_opt->count() == 0 && drop_opt->count() == 0) {
        throw CLI::ValidationError("inpaint", "give --mask or --drop-fraction");
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    apply_threads(common);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (inpaint_cmd->parsed()) return cmd_inpaint(inpaint_args);
    if (separate_cmd->parsed()) return cmd_separate(separate_args);
    if (enhance_cmd->parsed()) return cmd_enhance(enhance_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

} // namespace slicedict::cli
