// uhred: command-line front end for phantom synthesis, training, denoising,
// segmentation and evaluation of hyperspectral cubes.
//
// Exit codes: 0 success, 2 argument/config error, 3 data or format error,
// 4 computation error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "uhred/config.hpp"
#include "uhred/uhred.hpp"

namespace {

using namespace uhred;
using json = nlohmann::json;

constexpr int kExitArgs = 2;
constexpr int kExitData = 3;
constexpr int kExitCompute = 4;

/// Flags that override a JSON config value only when given.
template <class T>
void apply(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out = "noisy.hsc";
  std::string gt = "gt.hsc";
  std::string phase_map = "phase.pgm";
  std::string config;
  std::string preset = "two-phase";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> width, height, bands;
  std::optional<double> sigma0, gain;
};

int run_synth(const SynthArgs& a) {
  RunConfig cfg = load_config(a.config);
  auto& spec = cfg.phantom;
  if (a.preset != "two-phase") {
    const auto preset = a.preset == "four-phase" ? four_phase_phantom_spec() : narrow_peak_phantom_spec();
    spec.phases = preset.phases;
    spec.droplet_count = preset.droplet_count;
  }
  apply(a.seed, spec.seed);
  apply(a.width, spec.width);
  apply(a.height, spec.height);
  apply(a.bands, spec.bands);
  apply(a.sigma0, spec.noise_sigma0);
  apply(a.gain, spec.noise_gain);
  validate_run_config(cfg);

  const auto ph = make_noisy_phantom(spec);
  save_cube(ph.clean.ground_truth, a.gt);
  save_cube(ph.noisy, a.out);
  save_pgm(ph.clean.phase_map, spec.phases.size(), a.phase_map);
  const auto in = spectral_psnr(ph.noisy, ph.clean.ground_truth);
  print_json({{"noisy", a.out},
              {"ground_truth", a.gt},
              {"phase_map", a.phase_map},
              {"phases", spec.phases.size()},
              {"input_psnr_db", {{"mean", in.mean}, {"std", in.std}}}});
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string mode = "uhred";
  std::string input;
  std::string target;
  std::string model = "model.hsm";
  std::string report = "train_report.json";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, patience;
  std::optional<double> lr;
  bool quiet = false;
};

json report_json(const TrainReport& r) {
  return {{"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"epochs_run", r.val_loss.size()},
          {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss},
          {"initial_val_loss", r.initial_val_loss},
          {"early_stopped", r.early_stopped}};
}

int run_train(const TrainArgs& a) {
  RunConfig cfg = load_config(a.config);
  auto& tc = cfg.train;
  tc.mode = parse_mode(a.mode);
  apply(a.seed, tc.seed);
  apply(a.epochs, tc.max_epochs);
  apply(a.batch_size, tc.batch_size);
  apply(a.patience, tc.patience);
  if (a.lr) tc.adam.learning_rate = *a.lr;
  validate_run_config(cfg);
  if (tc.mode == TrainMode::shred && a.target.empty()) throw ConfigError("train: --mode shred requires --target");
  if (tc.mode == TrainMode::uhred && !a.target.empty()) throw ConfigError("train: --target is only valid with --mode shred");

  const auto input = load_cube(a.input);
  std::optional<HyperCube> target;
  if (!a.target.empty()) target = load_cube(a.target);
  const auto model_cfg = cfg.model.for_input_length(input.bands);

  EpochCallback progress;
  if (!a.quiet)
    progress = [](std::size_t epoch, double tl, double vl) {
      std::fprintf(stderr, "epoch %3zu  train %.6e  val %.6e\n", epoch, tl, vl);
    };
  const auto result = train(input, target ? &*target : nullptr, model_cfg, tc, progress);
  save_model(result.params, model_cfg, result.meta, a.model);
  write_text(a.report, report_json(result.report).dump(2) + "\n");
  std::printf("best validation loss %.9g at epoch %zu (%zu epochs, %.1f s)\n", result.report.best_val_loss,
              result.report.best_epoch, result.report.val_loss.size(), result.report.wall_seconds);
  return 0;
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
  std::string model, input, out;
  std::size_t threads = 1;
};

int run_denoise(const DenoiseArgs& a) {
  const auto m = load_model(a.model);
  const auto cube = load_cube(a.input);
  save_cube(denoise_cube(m.params, m.config, m.meta, cube, a.threads), a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct SegmentArgs {
  std::string model, input;
  std::string k = "auto";
  std::string labels = "labels.pgm";
  std::string centroids = "clusters.json";
  std::string spectra = "cluster_spectra.csv";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k_max;
  std::size_t threads = 1;
};

int run_segment(const SegmentArgs& a) {
  RunConfig cfg = load_config(a.config);
  apply(a.seed, cfg.clustering.seed);
  apply(a.k_max, cfg.clustering.k_max);
  validate_run_config(cfg);
  std::size_t k = 0;
  if (a.k != "auto") {
    try {
      std::size_t used = 0;
      k = std::stoul(a.k, &used);
      if (used != a.k.size() || k == 0) throw std::invalid_argument(a.k);
    } catch (const std::exception&) {
      throw ConfigError("segment: --k must be 'auto' or a positive integer");
    }
  }
  const auto m = load_model(a.model);
  const auto cube = load_cube(a.input);
  SegmentationResult s;
  try {
    s = segment_cube(m.params, m.config, m.meta, cube, k, cfg.clustering.seed, cfg.clustering.k_max, a.threads);
  } catch (const ShapeError&) {
    throw;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCompute;
  }
  save_pgm(s.labels, s.k, a.labels);
  json centroids = json::array();
  for (std::size_t c = 0; c < s.k; ++c) {
    const auto row = s.centroids.row(c);
    centroids.push_back(std::vector<double>(row.begin(), row.end()));
  }
  json side{{"k", s.k}, {"inertia", s.inertia}, {"inertia_curve", s.inertia_curve}, {"centroids", centroids}};
  write_text(a.centroids, side.dump(2) + "\n");
  write_text(a.spectra, cluster_spectra_csv(s.cluster_mean_spectra, cube.axis));
  std::printf("k=%zu\n", s.k);
  if (!s.inertia_curve.empty()) {
    std::printf("inertia:");
    for (double w : s.inertia_curve) std::printf(" %.9g", w);
    std::printf("\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string input, test, reference, mask, out, per_pixel, config;
  std::optional<std::size_t> band;
  std::optional<std::size_t> radius, kernel;
  std::size_t row = 0, col_start = 0;
  std::optional<std::size_t> col_end;
};

std::size_t brightest_band(const HyperCube& cube) {
  std::size_t best = 0;
  double best_sum = -1e300;
  for (std::size_t b = 0; b < cube.bands; ++b) {
    double s = 0.0;
    for (std::size_t p = 0; p < cube.pixels(); ++p) s += cube.data[p * cube.bands + b];
    if (s > best_sum) {
      best_sum = s;
      best = b;
    }
  }
  return best;
}

int run_snr(const MetricsArgs& a) {
  RunConfig cfg = load_config(a.config);
  apply(a.radius, cfg.metrics.snr_radius);
  validate_run_config(cfg);
  const auto cube = load_cube(a.input);
  const std::size_t band = a.band.value_or(brightest_band(cube));
  if (band >= cube.bands) throw ConfigError("snr: --band out of range");
  const auto snr = local_snr_map(band_image(cube, band), cfg.metrics.snr_radius);
  PixelMask all(cube.height, cube.width);
  all.bits.assign(cube.pixels(), true);
  const auto whole = region_stats(snr, all);
  json out{{"band", band},
           {"radius", cfg.metrics.snr_radius},
           {"image", {{"mean_db", whole.mean_db}, {"std_db", whole.std_db}, {"pixels", whole.pixels}}}};
  if (!a.mask.empty()) {
    const auto map = load_pgm(a.mask);
    if (map.height != cube.height || map.width != cube.width) throw ShapeError("snr: mask dimensions differ from cube");
    json regions = json::array();
    for (int level = 0; level < 256; ++level) {
      const auto m = map.mask_of(level);
      if (m.empty()) continue;
      const auto r = region_stats(snr, m);
      regions.push_back({{"gray", level}, {"pixels", r.pixels}, {"mean_db", r.mean_db}, {"std_db", r.std_db}});
    }
    out["regions"] = regions;
  }
  if (!a.out.empty()) {
    std::vector<std::pair<double, double>> rows;
    for (std::size_t p = 0; p < snr.pixels.size(); ++p) rows.emplace_back(static_cast<double>(p), snr.pixels[p]);
    write_text(a.out, index_value_csv(rows));
  }
  print_json(out);
  return 0;
}

int run_compare(const MetricsArgs& a, bool want_psnr) {
  const auto test = load_cube(a.test);
  const auto ref = load_cube(a.reference);
  const auto c = want_psnr ? spectral_psnr(test, ref) : spectral_mse(test, ref);
  const auto [lo, hi] = std::minmax_element(c.per_pixel.begin(), c.per_pixel.end());
  const std::string unit = want_psnr ? "_db" : "";
  print_json({{"metric", want_psnr ? "psnr" : "mse"},
              {"pixels", c.per_pixel.size()},
              {"mean" + unit, c.mean},
              {"std" + unit, c.std},
              {"min" + unit, *lo},
              {"max" + unit, *hi}});
  if (!a.per_pixel.empty()) {
    std::vector<std::pair<double, double>> rows;
    for (std::size_t p = 0; p < c.per_pixel.size(); ++p) rows.emplace_back(static_cast<double>(p), c.per_pixel[p]);
    write_text(a.per_pixel, index_value_csv(rows));
  }
  return 0;
}

int run_profile(const MetricsArgs& a) {
  const auto cube = load_cube(a.input);
  const std::size_t band = a.band.value_or(brightest_band(cube));
  const std::size_t col_end = a.col_end.value_or(cube.width - 1);
  if (band >= cube.bands || a.row >= cube.height || a.col_start > col_end || col_end >= cube.width)
    throw ConfigError("profile: band/row/column range outside the cube");
  const auto csv = profile_csv(line_profile(band_image(cube, band), a.row, a.col_start, col_end));
  if (a.out.empty())
    std::cout << csv;
  else
    write_text(a.out, csv);
  return 0;
}

int run_baseline(const MetricsArgs& a) {
  RunConfig cfg = load_config(a.config);
  apply(a.kernel, cfg.metrics.baseline_kernel);
  validate_run_config(cfg);
  const auto cube = load_cube(a.input);
  if (a.out.empty()) throw ConfigError("baseline: --out is required");
  save_cube(moving_average_cube(cube, cfg.metrics.baseline_kernel), a.out);
  return 0;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitArgs;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e) || dynamic_cast<const ShapeError*>(&e))
    return kExitData;
  return kExitCompute;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral autoencoder denoising and latent-space segmentation"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(36);

  SynthArgs synth;
  auto* cs = app.add_subcommand("synth", "Render a synthetic droplet phantom (ground truth, noisy cube, phase map)");
  cs->add_option("--out", synth.out, "Noisy cube output (HSC1)")->capture_default_str();
  cs->add_option("--gt", synth.gt, "Ground-truth cube output (HSC1)")->capture_default_str();
  cs->add_option("--phase-map", synth.phase_map, "Phase map output (PGM P5)")->capture_default_str();
  cs->add_option("--preset", synth.preset, "Phantom preset")
      ->check(CLI::IsMember({"two-phase", "narrow-peak", "four-phase"}))
      ->capture_default_str();
  cs->add_option("--seed", synth.seed, "Phantom seed (default 1)");
  cs->add_option("--width", synth.width, "Image width in pixels (default 64)")->check(CLI::PositiveNumber);
  cs->add_option("--height", synth.height, "Image height in pixels (default 64)")->check(CLI::PositiveNumber);
  cs->add_option("--bands", synth.bands, "Spectral bands (default 92)")->check(CLI::PositiveNumber);
  cs->add_option("--noise-sigma0", synth.sigma0, "Additive noise floor (default 0.03)")->check(CLI::NonNegativeNumber);
  cs->add_option("--noise-gain", synth.gain, "Signal-proportional noise variance gain (default 0.012)")
      ->check(CLI::NonNegativeNumber);
  cs->add_option("--config", synth.config, "JSON run config; flags override it")->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* ct = app.add_subcommand("train", "Train a UHRED (self-supervised) or SHRED (supervised) autoencoder");
  ct->add_option("--mode", tr.mode, "uhred: target = input; shred: target = --target")
      ->check(CLI::IsMember({"uhred", "shred"}))
      ->capture_default_str();
  ct->add_option("--input", tr.input, "Noisy input cube (HSC1)")->required();
  ct->add_option("--target", tr.target, "Clean target cube (HSC1), shred only");
  ct->add_option("--model", tr.model, "Model output (HSM1)")->capture_default_str();
  ct->add_option("--report", tr.report, "Training report output (JSON)")->capture_default_str();
  ct->add_option("--config", tr.config, "JSON run config; flags override it")->check(CLI::ExistingFile);
  ct->add_option("--seed", tr.seed, "Training seed (default 0)");
  ct->add_option("--epochs", tr.epochs, "Maximum epochs (default 50)")->check(CLI::PositiveNumber);
  ct->add_option("--batch-size", tr.batch_size, "Mini-batch size (default 256)")->check(CLI::PositiveNumber);
  ct->add_option("--patience", tr.patience, "Early-stopping patience in epochs (default 5)");
  ct->add_option("--lr", tr.lr, "Adam learning rate (default 1e-3)")->check(CLI::PositiveNumber);
  ct->add_flag("--quiet", tr.quiet, "Do not print per-epoch losses");

  DenoiseArgs dn;
  auto* cd = app.add_subcommand("denoise", "Reconstruct every spectrum of a cube through a trained model");
  cd->add_option("--model", dn.model, "Model (HSM1)")->required();
  cd->add_option("--input", dn.input, "Input cube (HSC1)")->required();
  cd->add_option("--out", dn.out, "Denoised cube output (HSC1)")->required();
  cd->add_option("--threads", dn.threads, "Worker threads; output does not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SegmentArgs sg;
  auto* cg = app.add_subcommand("segment", "Cluster latent vectors into a label map");
  cg->add_option("--model", sg.model, "Model (HSM1)")->required();
  cg->add_option("--input", sg.input, "Input cube (HSC1)")->required();
  cg->add_option("--k", sg.k, "Cluster count, or 'auto' for elbow selection")->capture_default_str();
  cg->add_option("--k-max", sg.k_max, "Largest k tried by the elbow rule (default 8)");
  cg->add_option("--seed", sg.seed, "Clustering seed (default 0)");
  cg->add_option("--labels", sg.labels, "Label map output (PGM P5)")->capture_default_str();
  cg->add_option("--centroids", sg.centroids, "k, inertia curve and centroids (JSON)")->capture_default_str();
  cg->add_option("--spectra", sg.spectra, "Cluster mean denoised spectra (CSV)")->capture_default_str();
  cg->add_option("--config", sg.config, "JSON run config; flags override it")->check(CLI::ExistingFile);
  cg->add_option("--threads", sg.threads, "Worker threads; output does not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  MetricsArgs mt;
  auto* cm = app.add_subcommand("metrics", "Evaluation measures");
  cm->require_subcommand(1);
  auto* m_snr = cm->add_subcommand("snr", "Local-neighborhood SNR of one band, optionally per PGM gray level");
  m_snr->add_option("--input", mt.input, "Cube (HSC1)")->required();
  m_snr->add_option("--band", mt.band, "Band index (default: brightest band)");
  m_snr->add_option("--mask", mt.mask, "PGM whose gray levels define regions");
  m_snr->add_option("--radius", mt.radius, "Neighborhood disk radius (default 5)")->check(CLI::PositiveNumber);
  m_snr->add_option("--out", mt.out, "SNR map output (CSV index,value)");
  m_snr->add_option("--config", mt.config, "JSON run config")->check(CLI::ExistingFile);
  auto* m_psnr = cm->add_subcommand("psnr", "Per-pixel spectral PSNR of --test against --reference");
  auto* m_mse = cm->add_subcommand("mse", "Per-pixel spectral MSE of --test against --reference");
  for (auto* c : {m_psnr, m_mse}) {
    c->add_option("--test", mt.test, "Test cube (HSC1)")->required();
    c->add_option("--reference", mt.reference, "Reference cube (HSC1)")->required();
    c->add_option("--per-pixel", mt.per_pixel, "Per-pixel values output (CSV index,value)");
  }
  auto* m_prof = cm->add_subcommand("profile", "Line profile along one row of one band");
  m_prof->add_option("--input", mt.input, "Cube (HSC1)")->required();
  m_prof->add_option("--band", mt.band, "Band index (default: brightest band)");
  m_prof->add_option("--row", mt.row, "Row index")->required();
  m_prof->add_option("--col-start", mt.col_start, "First column")->capture_default_str();
  m_prof->add_option("--col-end", mt.col_end, "Last column, inclusive (default: last)");
  m_prof->add_option("--out", mt.out, "CSV output (default: stdout)");
  auto* m_base = cm->add_subcommand("baseline", "Moving-average filter applied to every spectrum");
  m_base->add_option("--input", mt.input, "Cube (HSC1)")->required();
  m_base->add_option("--out", mt.out, "Filtered cube output (HSC1)")->required();
  m_base->add_option("--kernel", mt.kernel, "Boxcar width (default 10)")->check(CLI::PositiveNumber);
  m_base->add_option("--config", mt.config, "JSON run config")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitArgs;
  }

  try {
    if (cs->parsed()) return run_synth(synth);
    if (ct->parsed()) return run_train(tr);
    if (cd->parsed()) return run_denoise(dn);
    if (cg->parsed()) return run_segment(sg);
    if (m_snr->parsed()) return run_snr(mt);
    if (m_psnr->parsed()) return run_compare(mt, true);
    if (m_mse->parsed()) return run_compare(mt, false);
    if (m_prof->parsed()) return run_profile(mt);
    if (m_base->parsed()) return run_baseline(mt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return kExitArgs;
}
