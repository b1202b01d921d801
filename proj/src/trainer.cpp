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

#include "specfuse/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace specfuse::train {

using numgrad::shape_string;

void TrainConfig::validate() const {
  if (!(lambda_mi >= 0.0)) throw ContractError("lambda_mi must be >= 0");
  if (!(mu_decay >= 0.0)) throw ContractError("mu_decay must be >= 0");
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be > 0");
  if (max_steps < 0) throw ContractError("max_steps must be >= 0");
  if (patience < 1) throw ContractError("patience must be >= 1");
  if (!(l21_epsilon > 0.0)) throw ContractError("l21 epsilon must be > 0");
  if (!(min_rel_improvement >= 0.0)) throw ContractError("min_rel_improvement must be >= 0");
  if (batch_size < 0) throw ContractError("batch_size must be >= 0");
  if (!(noise_level >= 0.0 && noise_level < 1.0)) throw ContractError("noise_level must lie in [0, 1)");
}

V loss_l21(V pred, V target, double eps) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("loss_l21: prediction " + shape_string(pred.rows(), pred.cols()) +
                         " vs target " + shape_string(target.rows(), target.cols()));
  }
  if (!(eps > 0.0)) throw ContractError("loss_l21: epsilon must be positive");
  V row_sq = numgrad::row_sum(numgrad::square(numgrad::sub(pred, target)));
  V norms = numgrad::sqrt(numgrad::affine(row_sq, 1.0, eps));
  return numgrad::affine(numgrad::sum(norms), 1.0, -double(pred.rows()) * std::sqrt(eps));
}

double loss_l21(const Tensor2 &pred, const Tensor2 &target, double eps) {
  Tape tape;
  return loss_l21(tape.constant(pred), tape.constant(target), eps).value()(0, 0);
}

V loss_mi(const mdn::MINetT<V> &critic, V input_hsi, V s_hsi, V input_msi, V s_msi) {
  return numgrad::add(mdn::mi_estimate(mdn::mi_score(critic, input_hsi, s_hsi)),
                      mdn::mi_estimate(mdn::mi_score(critic, input_msi, s_msi)));
}

V weight_decay(const mdn::DecoderT<V> &decoder, DecayTarget target) {
  if (target == DecayTarget::kProduct) {
    return numgrad::frobenius_sq(numgrad::matmul(decoder.w1, decoder.w2));
  }
  return numgrad::add(numgrad::frobenius_sq(decoder.w1), numgrad::frobenius_sq(decoder.w2));
}

V total_loss(const LossParts &p, const TrainConfig &config) {
  V recon = numgrad::add(p.l21_hsi, p.l21_msi);
  V mi = numgrad::add(p.mi_hsi, p.mi_msi);
  return numgrad::add(numgrad::sub(recon, numgrad::affine(mi, config.lambda_mi, 0.0)),
                      numgrad::affine(p.decay, config.mu_decay, 0.0));
}

double total_loss(const LossValues &p, const TrainConfig &config) {
  return (p.l21_hsi + p.l21_msi) - config.lambda_mi * (p.mi_hsi + p.mi_msi) +
         config.mu_decay * p.decay;
}

FusionData prepare(const HyperCube<double> &lr_hsi, const HyperCube<double> &hr_msi,
                   const SpectralResponse<double> &srf) {
  if (lr_hsi.bands() != srf.hsi_bands()) {
    throw DimensionError("LR HSI has " + std::to_string(lr_hsi.bands()) +
                         " bands but the spectral response expects " +
                         std::to_string(srf.hsi_bands()));
  }
  if (hr_msi.bands() != srf.msi_bands()) {
    throw DimensionError("HR MSI has " + std::to_string(hr_msi.bands()) +
                         " bands but the spectral response produces " +
                         std::to_string(srf.msi_bands()));
  }
  if (lr_hsi.pixels() < 1 || hr_msi.pixels() < 1) throw ContractError("empty input image");
  Centered<double> hsi = zero_mean(unfold(lr_hsi));
  Centered<double> msi = zero_mean(unfold(hr_msi));
  FusionData d;
  d.hsi_input = hsi.centered.values * srf.matrix();
  d.hsi_target = std::move(hsi.centered.values);
  d.msi = std::move(msi.centered.values);
  d.hsi_mean = std::move(hsi.mean);
  d.msi_mean = std::move(msi.mean);
  d.srf = srf;
  d.msi_width = hr_msi.width;
  d.msi_height = hr_msi.height;
  return d;
}

LossParts build_objective(Tape &tape, const mdn::ModelVars &model, const FusionData &data,
                          const TrainConfig &config) {
  const mdn::NetworkModes modes = config.modes();
  V in_h = tape.constant(data.hsi_input);
  V in_m = tape.constant(data.msi);
  mdn::EncoderOutput enc_h = mdn::encode(model.encoder, in_h, modes);
  mdn::EncoderOutput enc_m = mdn::encode(model.encoder, in_m, modes);
  V recon_h = mdn::decode(model.decoder, enc_h.s);
  V recon_m = mdn::msi_tail(mdn::decode(model.decoder, enc_m.s), data.srf);
  LossParts p;
  p.l21_hsi = loss_l21(recon_h, tape.constant(data.hsi_target), config.l21_epsilon);
  p.l21_msi = loss_l21(recon_m, in_m, config.l21_epsilon);
  p.mi_hsi = mdn::mi_estimate(mdn::mi_score(model.mi, in_h, enc_h.s));
  p.mi_msi = mdn::mi_estimate(mdn::mi_score(model.mi, in_m, enc_m.s));
  p.decay = weight_decay(model.decoder, config.decay_target);
  return p;
}

HyperCube<double> fuse_cube(const mdn::ModelParams &params, const FusionData &data,
                            const mdn::NetworkModes &modes) {
  Tensor2 x = mdn::fuse(data.msi, params, modes);
  x.rowwise() += data.hsi_mean.row(0);
  return fold<double>(x, data.msi_width, data.msi_height);
}

void optimizer_update(std::span<Tensor2 *const> params, std::span<const Tensor2> grads,
                      OptimizerState &state, double lr, OptimizerKind kind) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer_update: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols()) {
      throw DimensionError("optimizer_update: parameter " + std::to_string(i) + " is " +
                           shape_string(*params[i]) + ", gradient is " + shape_string(grads[i]));
    }
  }
  if (kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= lr * grads[i];
    return;
  }
  if (state.first_moment.empty()) {
    for (const Tensor2 *p : params) {
      state.first_moment.push_back(Tensor2::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Tensor2::Zero(p->rows(), p->cols()));
      state.updates.push_back(0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("optimizer_update: state was built for a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor2 &m = state.first_moment[i];
    Tensor2 &v = state.second_moment[i];
    const long t = ++state.updates[i];
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grads[i];
    v.array() = kAdamBeta2 * v.array() + (1.0 - kAdamBeta2) * grads[i].array().square();
    const double c1 = 1.0 - std::pow(kAdamBeta1, double(t));
    const double c2 = 1.0 - std::pow(kAdamBeta2, double(t));
    params[i]->array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEpsilon);
  }
}

const char *stop_reason_name(StopReason r) {
  return r == StopReason::kMaxSteps ? "max-steps" : "patience-exhausted";
}

Trainer::Trainer(FusionData data, TrainConfig config, mdn::ModelParams initial)
    : data_(std::move(data)), config_(config), model_(std::move(initial)), batch_rng_(config.seed) {
  config_.validate();
  const mdn::Architecture arch = mdn::infer_architecture(model_);
  if (arch.msi_bands != data_.srf.msi_bands() || arch.hsi_bands != data_.srf.hsi_bands()) {
    throw DimensionError("model expects " + std::to_string(arch.msi_bands) + " -> " +
                         std::to_string(arch.hsi_bands) + " bands, data has " +
                         std::to_string(data_.srf.msi_bands()) + " -> " +
                         std::to_string(data_.srf.hsi_bands()));
  }
}

Tensor2 Trainer::pick_rows(const Tensor2 &m, const std::vector<Index> &rows) const {
  Tensor2 out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Index(i)) = m.row(rows[i]);
  return out;
}

BranchStep Trainer::step(Modality kind) {
  const bool hsi = kind == Modality::kHsi;
  const Tensor2 &input_all = hsi ? data_.hsi_input : data_.msi;
  const Tensor2 &target_all = hsi ? data_.hsi_target : data_.msi;

  Tensor2 input_rows;
  Tensor2 target_rows;
  const Tensor2 *input = &input_all;
  const Tensor2 *target = &target_all;
  if (config_.batch_size > 0 && config_.batch_size < input_all.rows()) {
    std::vector<Index> order(static_cast<std::size_t>(input_all.rows()));
    std::iota(order.begin(), order.end(), Index(0));
    for (Index i = 0; i < config_.batch_size; ++i) {
      std::uniform_int_distribution<Index> pick(i, input_all.rows() - 1);
      std::swap(order[std::size_t(i)], order[std::size_t(pick(batch_rng_))]);
    }
    order.resize(std::size_t(config_.batch_size));
    input_rows = pick_rows(input_all, order);
    target_rows = pick_rows(target_all, order);
    input = &input_rows;
    target = &target_rows;
  }

  Tape tape;
  const mdn::ModelVars vars = mdn::bind(tape, model_);
  mdn::NetworkModes modes = config_.modes();
  if (modes.noise_level > 0.0) modes.noise_seed = batch_rng_();
  V in = tape.constant(*input);
  const mdn::EncoderOutput enc = mdn::encode(vars.encoder, in, modes);
  V recon = mdn::decode(vars.decoder, enc.s);
  if (!hsi) recon = mdn::msi_tail(recon, data_.srf);
  V l21 = loss_l21(recon, tape.constant(*target), config_.l21_epsilon);
  V mi = mdn::mi_estimate(mdn::mi_score(vars.mi, in, enc.s));
  V decay = weight_decay(vars.decoder, config_.decay_target);
  V objective = numgrad::add(numgrad::sub(l21, numgrad::affine(mi, config_.lambda_mi, 0.0)),
                             numgrad::affine(decay, config_.mu_decay, 0.0));
  tape.backward(objective);

  std::vector<Tensor2 *> params;
  std::vector<mdn::Block> blocks;
  mdn::for_each_tensor(model_, [&](const std::string &, mdn::Block b, Tensor2 &t) {
    params.push_back(&t);
    blocks.push_back(b);
  });
  std::vector<V> leaves;
  mdn::for_each_tensor(vars, [&](const std::string &, mdn::Block, const V &v) { leaves.push_back(v); });

  std::vector<Tensor2 *> update;
  std::vector<Tensor2> grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!hsi && blocks[i] == mdn::Block::kDecoder) continue;
    const Tensor2 &g = leaves[i].grad();
    if (!g.allFinite()) throw NumericalError("non-finite gradient");
    update.push_back(params[i]);
    grads.push_back(g);
  }
  optimizer_update(update, grads, optimizers_[hsi ? 0 : 1], config_.learning_rate,
                   config_.optimizer);

  BranchStep out;
  out.l21 = l21.value()(0, 0);
  out.mi = mi.value()(0, 0);
  out.decay = decay.value()(0, 0);
  out.objective = objective.value()(0, 0);
  return out;
}

TrainResult train(const HyperCube<double> &lr_hsi, const HyperCube<double> &hr_msi,
                  const SpectralResponse<double> &srf, const TrainConfig &config,
                  const StepCallback &on_step) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  FusionData data = prepare(lr_hsi, hr_msi, srf);
  const mdn::Architecture arch = mdn::Architecture::for_bands(srf.msi_bands(), srf.hsi_bands());
  Trainer trainer(data, config, mdn::init_model(arch, config.seed));

  TrainResult result;
  result.model = trainer.model();
  TrainTrace &trace = result.trace;
  trace.stop_reason = StopReason::kMaxSteps;
  double best = std::numeric_limits<double>::infinity();
  long since_best = 0;

  for (long step = 0; step < config.max_steps; ++step) {
    mdn::ModelParams before = trainer.model();
    BranchStep h;
    BranchStep m;
    try {
      h = trainer.step(Modality::kHsi);
      m = trainer.step(Modality::kMsi);
    } catch (const NumericalError &e) {
      trace.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      throw TrainingAborted(std::string("training aborted at step ") + std::to_string(step) +
                                ": " + e.what(),
                            trace);
    }
    StepRecord rec;
    rec.step = step;
    rec.l21_hsi = h.l21;
    rec.l21_msi = m.l21;
    rec.mi_hsi = h.mi;
    rec.mi_msi = m.mi;
    rec.total = total_loss(LossValues{h.l21, m.l21, h.mi, m.mi, h.decay}, config);
    trace.steps.push_back(rec);
    if (on_step) on_step(rec);

    const double recon = h.l21 + m.l21;
    if (recon < best * (1.0 - config.min_rel_improvement) || !std::isfinite(best)) {
      best = recon;
      result.model = std::move(before);
      trace.best_step = step;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      trace.stop_reason = StopReason::kPatienceExhausted;
      break;
    }
  }
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.data = std::move(data);
  return result;
}

std::string trace_csv_row(const StepRecord &r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g", r.step, r.l21_hsi, r.l21_msi,
                r.mi_hsi, r.mi_msi, r.total);
  return buf;
}

std::string trace_csv(const TrainTrace &trace) {
  std::string out = "step,l21_hsi,l21_msi,mi_hsi,mi_msi,total\n";
  for (const StepRecord &r : trace.steps) {
    out += trace_csv_row(r);
    out += '\n';
  }
  return out;
}

void write_trace_csv(const TrainTrace &trace, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << trace_csv(trace);
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace specfuse::train

namespace specfuse::train {

GradCheckInstance gradcheck_instance(std::uint64_t seed, Index pixels) {
  if (pixels < 1) throw ContractError("gradcheck_instance: need at least one pixel");
  constexpr Index kHsiBands = 31;
  constexpr Index kMsiBands = 3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(0.05, 1.0);
  auto random_cube = [&](Index bands) {
    HyperCube<double> c(pixels, 1, bands);
    for (Index i = 0; i < c.planes.size(); ++i) c.planes.data()[i] = value(rng);
    return c;
  };
  const SpectralResponse<double> srf = gaussian_srf<double>(kHsiBands, kMsiBands);
  HyperCube<double> hsi = random_cube(kHsiBands);
  HyperCube<double> msi = random_cube(kMsiBands);
  GradCheckInstance out;
  out.data = prepare(hsi, msi, srf);
  out.model = mdn::init_model(mdn::Architecture::for_bands(kMsiBands, kHsiBands), seed + 1);
  return out;
}

ObjectiveGradCheck check_objective_gradients(const GradCheckInstance &instance,
                                             const TrainConfig &config,
                                             const numgrad::GradCheckOptions<double> &options) {
  config.validate();
  ObjectiveGradCheck out;
  std::vector<Tensor2> params;
  mdn::for_each_tensor(instance.model, [&](const std::string &name, mdn::Block, const Tensor2 &t) {
    out.block_names.push_back(name);
    params.push_back(t);
  });
  const mdn::ModelParams &shape = instance.model;
  auto objective = [&](Tape &tape, std::span<const V> leaves) {
    std::size_t next = 0;
    const mdn::ModelVars vars = mdn::map_model<V>(shape, [&](const Tensor2 &) { return leaves[next++]; });
    return total_loss(build_objective(tape, vars, instance.data, config), config);
  };
  out.report = numgrad::grad_check<double>(objective, std::move(params), options);
  return out;
}

}  // namespace specfuse::train
