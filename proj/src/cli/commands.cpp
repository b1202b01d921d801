// Copyright 2026 The specfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "specfuse/checkpoint.hpp"
#include "specfuse/cube_io.hpp"

namespace specfuse::cli {
namespace {

std::string dims(const HyperCube<double> &c) {
  return std::to_string(c.width) + "x" + std::to_string(c.height) + "x" + std::to_string(c.bands());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

void ensure_dir(const RunConfig &config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + config.out_dir + ": " + ec.message());
}

/// 8-bit binary PGM of |a - b| for one band, min-max scaled; returns (min, max).
std::pair<double, double> write_diff_pgm(const HyperCube<double> &a, const HyperCube<double> &b,
                                         Index band, const std::filesystem::path &path) {
  const Eigen::ArrayXd d = (a.planes.row(band) - b.planes.row(band)).array().abs().transpose();
  const double lo = d.minCoeff();
  const double hi = d.maxCoeff();
  std::string bytes = "P5\n" + std::to_string(a.width) + " " + std::to_string(a.height) + "\n255\n";
  for (Index p = 0; p < d.size(); ++p) {
    const double t = hi > lo ? (d(p) - lo) / (hi - lo) : 0.0;
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
  write_text(path, bytes);
  return {lo, hi};
}

}  // namespace

SpectralResponse<double> resolve_srf(const RunConfig &config, Index hsi_bands) {
  if (!config.srf_path.empty()) return load_srf(config.srf_path);
  return gaussian_srf<double>(hsi_bands, config.msi_bands);
}

DegradedPair degrade(const HyperCube<double> &truth, const RunConfig &config) {
  DegradedPair pair{block_downsample(truth, config.sr), {}, resolve_srf(config, truth.bands())};
  if (config.rotate_deg != 0.0 || config.crop_frac != 0.0) {
    pair.lr_hsi = rotate_crop(pair.lr_hsi, config.rotate_deg, config.crop_frac,
                              RotateCropOptions{config.interpolation});
  }
  pair.hr_msi = apply_srf(truth, pair.srf);
  return pair;
}

FusionRun run_fusion(const DegradedPair &pair, const train::TrainConfig &config) {
  FusionRun run;
  run.result = train::train(pair.lr_hsi, pair.hr_msi, pair.srf, config);
  run.fused = train::fuse_cube(run.result.model, run.result.data, config.modes());
  return run;
}

int cmd_synth(const RunConfig &config, std::ostream &out) {
  SceneSpec spec;
  spec.width = config.width;
  spec.height = config.height;
  spec.blur_radius = config.blur_radius;
  spec.contrast = config.contrast;
  spec.seed = config.train.seed;
  spec.endmembers = random_endmembers(config.endmembers, config.bands, config.train.seed,
                                      config.min_angle_deg);
  const Scene scene = synth_scene(spec);
  ensure_dir(config);
  store_cube(scene.cube, config.truth_path());
  store_cube(fold(scene.abundances), config.abundances_path());
  out << "synth: " << dims(scene.cube) << " cube, " << config.endmembers << " endmembers, seed "
      << config.train.seed << " -> " << config.truth_path().string() << "\n";
  return kExitOk;
}

int cmd_degrade(const RunConfig &config, std::ostream &out) {
  const HyperCube<double> truth = load_cube(config.truth_path());
  const DegradedPair pair = degrade(truth, config);
  ensure_dir(config);
  store_cube(pair.lr_hsi, config.lr_hsi_path());
  store_cube(pair.hr_msi, config.hr_msi_path());
  if (config.srf_path.empty()) store_srf(pair.srf, config.srf_file());
  out << "degrade: LR HSI " << dims(pair.lr_hsi) << ", HR MSI " << dims(pair.hr_msi) << "\n";
  return kExitOk;
}

int cmd_fuse(const RunConfig &config, std::ostream &out) {
  const HyperCube<double> lr = load_cube(config.lr_hsi_path());
  const HyperCube<double> msi = load_cube(config.hr_msi_path());
  const SpectralResponse<double> srf = load_srf(config.srf_file());
  ensure_dir(config);
  FusionRun run;
  try {
    run = run_fusion(DegradedPair{lr, msi, srf}, config.train);
  } catch (const train::TrainingAborted &e) {
    write_text(config.trace_path(), train::trace_csv(e.trace()));
    out << "fuse: " << e.what() << "\n";
    if (!e.trace().steps.empty()) {
      out << "last trace row: " << train::trace_csv_row(e.trace().steps.back()) << "\n";
    }
    return kExitNumericalAbort;
  }
  store_cube(run.fused, config.fused_path());
  mdn::save_model(run.result.model, config.checkpoint_path());
  train::write_trace_csv(run.result.trace, config.trace_path());
  const train::TrainTrace &t = run.result.trace;
  out << "fuse: " << t.steps.size() << " iterations, stop " << train::stop_reason_name(t.stop_reason)
      << ", best iteration " << t.best_step << ", fused " << dims(run.fused) << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig &config, std::ostream &out) {
  const HyperCube<double> truth = load_cube(config.truth_path());
  const HyperCube<double> fused = load_cube(config.fused_path());
  const metrics::MetricReport report = metrics::evaluate(truth, fused, double(config.sr));
  ensure_dir(config);
  const std::string row = metrics::report_csv_row(report);
  write_text(config.output("metrics.csv"), metrics::report_csv_header() + "\n" + row + "\n");
  std::string bands = "band,psnr\n";
  for (std::size_t b = 0; b < report.psnr.per_band.size(); ++b) {
    bands += std::to_string(b) + "," + fmt(report.psnr.per_band[b]) + "\n";
  }
  write_text(config.output("psnr_bands.csv"), bands);
  HyperCube<double> sam_map(truth.width, truth.height, 1);
  sam_map.planes = Eigen::Map<const Eigen::RowVectorXd>(report.sam.map.data(), report.sam.map.size());
  store_cube(sam_map, config.output("sam_map.hsrc"));
  if (config.diff_images) {
    std::string scale = "band,min,max\n";
    for (Index b = 0; b < truth.bands(); ++b) {
      char name[32];
      std::snprintf(name, sizeof(name), "diff_b%02ld.pgm", static_cast<long>(b));
      const auto [lo, hi] = write_diff_pgm(truth, fused, b, config.output(name));
      scale += std::to_string(b) + "," + fmt(lo) + "," + fmt(hi) + "\n";
    }
    write_text(config.output("diff_scale.txt"), scale);
  }
  out << metrics::report_csv_header() << "\n" << row << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig &config, bool corrupt_gradient, std::ostream &out) {
  constexpr double kTolerance = 1e-4;
  const train::GradCheckInstance instance = train::gradcheck_instance(config.train.seed);
  numgrad::GradCheckOptions<double> options;
  options.step = config.gradcheck_step;
  if (corrupt_gradient) {
    options.tamper = [](std::vector<Tensor<double>> &g) { g.front().array() += 1.0; };
  }
  bool ok = true;
  for (mdn::StickMode stick : {mdn::StickMode::kPaper, mdn::StickMode::kRemainder}) {
    for (mdn::KumaraswamyMode kuma : {mdn::KumaraswamyMode::kStandard, mdn::KumaraswamyMode::kAsPrinted}) {
      RunConfig c = config;
      set_value(c, "stick-mode", stick == mdn::StickMode::kPaper ? "paper" : "remainder");
      set_value(c, "kumaraswamy-mode", kuma == mdn::KumaraswamyMode::kStandard ? "standard" : "as-printed");
      const train::ObjectiveGradCheck r = train::check_objective_gradients(instance, c.train, options);
      const bool pass = r.report.max_rel_error < kTolerance;
      ok = ok && pass;
      out << (pass ? "PASS" : "FAIL") << " stick-mode=" << get_value(c, "stick-mode")
          << " kumaraswamy-mode=" << get_value(c, "kumaraswamy-mode")
          << " max_rel_error=" << fmt(r.report.max_rel_error) << " worst="
          << r.block_names[r.report.worst_block] << "[" << r.report.worst_index << "]\n";
      for (std::size_t b = 0; b < r.block_names.size(); ++b) {
        out << "  " << r.block_names[b] << " " << fmt(r.report.block_max_rel_error[b]) << "\n";
      }
    }
  }
  out << "gradcheck: " << (ok ? "pass" : "fail") << " (tolerance " << kTolerance << ", step "
      << fmt(config.gradcheck_step) << ", seed " << config.train.seed << ")\n";
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_sweep(const RunConfig &config, SweepKind kind, std::ostream &out) {
  const HyperCube<double> truth = load_cube(config.truth_path());
  const std::vector<double> &settings = kind == SweepKind::kLambda ? kSweepLambdas : kSweepAngles;
  std::string csv = "setting,seed,sam,psnr,ergas,status\n";
  bool ok = true;
  for (std::size_t i = 0; i < settings.size(); ++i) {
    RunConfig c = config;
    c.train.seed = config.train.seed + i;
    if (kind == SweepKind::kLambda) {
      c.train.lambda_mi = settings[i];
    } else {
      c.rotate_deg = settings[i];
      c.crop_frac = c.sweep_crops[i];
    }
    std::string row = fmt(settings[i]) + "," + std::to_string(c.train.seed) + ",";
    try {
      const FusionRun run = run_fusion(degrade(truth, c), c.train);
      const metrics::MetricReport m = metrics::evaluate(truth, run.fused, double(c.sr));
      row += fmt(m.sam.global) + "," + fmt(m.psnr.mean) + "," + fmt(m.ergas) + ",ok";
    } catch (const NumericalError &e) {
      row += ",,,numerical-abort";
      out << "sweep: setting " << fmt(settings[i]) << ": " << e.what() << "\n";
      ok = false;
    } catch (const Error &e) {
      row += ",,,error";
      out << "sweep: setting " << fmt(settings[i]) << ": " << e.what() << "\n";
      ok = false;
    }
    out << row << "\n";
    csv += row + "\n";
  }
  ensure_dir(config);
  const char *name = kind == SweepKind::kLambda ? "sweep_lambda.csv" : "sweep_rotation.csv";
  write_text(config.output(name), csv);
  return ok ? kExitOk : kExitCheckFailed;
}

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Unsupervised hyperspectral / multispectral image fusion", "specfuse"};
  app.require_subcommand(1);

  struct Verb {
    CLI::App *app = nullptr;
    std::string config_file;
    bool dump = false;
  };
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<Verb> verbs;
  const std::vector<std::pair<std::string, std::string>> names{
      {"synth", "Generate a synthetic linear-mixing HR HSI"},
      {"degrade", "Produce the LR HSI / HR MSI pair from a truth cube"},
      {"fuse", "Train on a LR HSI / HR MSI pair and write the fused HR HSI"},
      {"eval", "Compare a fused cube with the truth"},
      {"gradcheck", "Compare analytic and finite-difference gradients of the objective"},
      {"sweep", "Run fuse and eval over a lambda or rotation sweep"}};
  verbs.reserve(names.size());
  for (const auto &[name, help] : names) {
    Verb v;
    v.app = app.add_subcommand(name, help);
    verbs.push_back(v);
  }
  for (Verb &v : verbs) {
    v.app->add_option("--config", v.config_file, "key = value configuration file");
    v.app->add_flag("--dump-config", v.dump, "Print the effective configuration and exit");
    for (const std::string &key : config_keys()) {
      v.app->add_option_function<std::string>(
          "--" + key, [&overrides, key](const std::string &value) { overrides.emplace_back(key, value); },
          "Override '" + key + "'");
    }
  }
  bool corrupt = false;
  verbs[4].app->add_flag("--corrupt-gradient", corrupt, "Perturb the analytic gradient (self-test)");
  std::string sweep_kind;
  verbs[5].app->add_option("kind", sweep_kind, "lambda or rotation")
      ->required()
      ->check(CLI::IsMember({"lambda", "rotation"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  const Verb *active = nullptr;
  for (const Verb &v : verbs) {
    if (v.app->parsed()) active = &v;
  }
  const std::string verb = active->app->get_name();
  try {
    RunConfig config;
    if (!active->config_file.empty()) load_config_file(config, active->config_file);
    for (const auto &[key, value] : overrides) set_value(config, key, value);
    apply_seed_fallback(config);
    config.validate();
    if (active->dump) {
      out << dump_config(config);
      return kExitOk;
    }
    if (verb == "synth") return cmd_synth(config, out);
    if (verb == "degrade") return cmd_degrade(config, out);
    if (verb == "fuse") return cmd_fuse(config, out);
    if (verb == "eval") return cmd_eval(config, out);
    if (verb == "gradcheck") return cmd_gradcheck(config, corrupt, out);
    return cmd_sweep(config, sweep_kind == "lambda" ? SweepKind::kLambda : SweepKind::kRotation, out);
  } catch (const NumericalError &e) {
    err << verb << ": numerical error: " << e.what() << "\n";
    return kExitNumericalAbort;
  } catch (const std::exception &e) {
    err << verb << ": " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace specfuse::cli
