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

#pragma once

// Objective terms, optimizer and the alternating two-modality training loop.
//
// One training iteration is an HSI step followed by an MSI step. Both steps
// update the encoder and the critic; only the HSI step updates the decoder.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "specfuse/hsicube.hpp"
#include "specfuse/mdnnet.hpp"

namespace specfuse::train {

using mdn::Tape;
using mdn::V;
using numgrad::Tensor2;

enum class OptimizerKind { kAdam, kSgd };
/// What the weight-decay term penalizes: the stored factors W1, W2 or their product.
enum class DecayTarget { kFactors, kProduct };
enum class Modality { kHsi, kMsi };

struct TrainConfig {
  double lambda_mi = 1e-5;
  double mu_decay = 1e-4;
  double learning_rate = 1e-3;
  long max_steps = 20000;
  long patience = 200;
  double min_rel_improvement = 1e-6;
  double l21_epsilon = 1e-8;
  std::uint64_t seed = 0;
  mdn::StickMode stick_mode = mdn::StickMode::kPaper;
  mdn::KumaraswamyMode kumaraswamy_mode = mdn::KumaraswamyMode::kStandard;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  DecayTarget decay_target = DecayTarget::kFactors;
  /// Pixels per step and modality; 0 uses every pixel.
  Index batch_size = 0;
  double noise_level = 0.0;

  void validate() const;
  mdn::NetworkModes modes() const { return {stick_mode, kumaraswamy_mode, noise_level, seed}; }
};

// --- losses -------------------------------------------------------------------

/// sum_i sqrt(sum_j (pred - target)_ij^2 + eps) - rows * sqrt(eps).
V loss_l21(V pred, V target, double eps);
double loss_l21(const Tensor2 &pred, const Tensor2 &target, double eps);

/// Jensen-Shannon estimate summed over both modalities with a shared critic.
V loss_mi(const mdn::MINetT<V> &critic, V input_hsi, V s_hsi, V input_msi, V s_msi);

V weight_decay(const mdn::DecoderT<V> &decoder, DecayTarget target);

struct LossParts {
  V l21_hsi;
  V l21_msi;
  V mi_hsi;
  V mi_msi;
  V decay;
};

struct LossValues {
  double l21_hsi = 0;
  double l21_msi = 0;
  double mi_hsi = 0;
  double mi_msi = 0;
  double decay = 0;
};

/// L21_hsi + L21_msi - lambda (MI_hsi + MI_msi) + mu * decay.
V total_loss(const LossParts &parts, const TrainConfig &config);
double total_loss(const LossValues &parts, const TrainConfig &config);

// --- data -------------------------------------------------------------------

/// Network-ready inputs: both modalities zero-meaned with their own band
/// means, and the HSI additionally projected through R.
struct FusionData {
  Tensor2 hsi_target;  // mn x L
  Tensor2 hsi_input;   // mn x l
  Tensor2 msi;         // MN x l
  Tensor2 hsi_mean;    // 1 x L
  Tensor2 msi_mean;    // 1 x l
  SpectralResponse<double> srf;
  Index msi_width = 0;
  Index msi_height = 0;
};

FusionData prepare(const HyperCube<double> &lr_hsi, const HyperCube<double> &hr_msi,
                   const SpectralResponse<double> &srf);

/// Every objective term for both modalities on the given model.
LossParts build_objective(Tape &tape, const mdn::ModelVars &model, const FusionData &data,
                          const TrainConfig &config);

/// Fused HR HSI with the LR HSI band mean restored.
HyperCube<double> fuse_cube(const mdn::ModelParams &params, const FusionData &data,
                            const mdn::NetworkModes &modes);

// --- optimizer ----------------------------------------------------------------

struct OptimizerState {
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
  std::vector<long> updates;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One bias-corrected adaptive-moment (or plain gradient-descent) update.
/// `state` is sized lazily on first use and must then always see the same
/// parameter list.
void optimizer_update(std::span<Tensor2 *const> params, std::span<const Tensor2> grads,
                      OptimizerState &state, double lr, OptimizerKind kind);

// --- training -------------------------------------------------------------------

struct StepRecord {
  long step = 0;
  double l21_hsi = 0;
  double l21_msi = 0;
  double mi_hsi = 0;
  double mi_msi = 0;
  double total = 0;
};

enum class StopReason { kMaxSteps, kPatienceExhausted };
const char *stop_reason_name(StopReason r);

struct TrainTrace {
  std::vector<StepRecord> steps;
  double wall_seconds = 0;
  StopReason stop_reason = StopReason::kMaxSteps;
  long best_step = -1;
};

/// Result of one single-modality update.
struct BranchStep {
  double l21 = 0;
  double mi = 0;
  double decay = 0;
  double objective = 0;
};

/// Training aborted because a loss or activation became non-finite.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string &what, TrainTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const TrainTrace &trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

/// Owns a model and its optimizer state for one LR-HSI / HR-MSI pair.
class Trainer {
 public:
  Trainer(FusionData data, TrainConfig config, mdn::ModelParams initial);

  /// Forward and backward on one modality, then an optimizer update. The
  /// decoder is only updated for Modality::kHsi.
  BranchStep step(Modality kind);

  const mdn::ModelParams &model() const { return model_; }
  mdn::ModelParams &model() { return model_; }
  const FusionData &data() const { return data_; }
  const TrainConfig &config() const { return config_; }

 private:
  Tensor2 pick_rows(const Tensor2 &m, const std::vector<Index> &rows) const;

  FusionData data_;
  TrainConfig config_;
  mdn::ModelParams model_;
  std::array<OptimizerState, 2> optimizers_;
  std::mt19937_64 batch_rng_;
};

struct TrainResult {
  mdn::ModelParams model;  // parameters at the best observed reconstruction error
  TrainTrace trace;
  FusionData data;
};

using StepCallback = std::function<void(const StepRecord &)>;

/// Alternates HSI and MSI steps until the summed reconstruction error stops
/// improving by `min_rel_improvement` for `patience` iterations, or
/// `max_steps` iterations have run.
TrainResult train(const HyperCube<double> &lr_hsi, const HyperCube<double> &hr_msi,
                  const SpectralResponse<double> &srf, const TrainConfig &config,
                  const StepCallback &on_step = {});

// --- gradient verification --------------------------------------------------------

/// A small random problem for checking the analytic gradient of the full objective.
struct GradCheckInstance {
  FusionData data;
  mdn::ModelParams model;
};

/// `pixels` random pixels per modality, l = 3, L = 31, 15 sticks.
GradCheckInstance gradcheck_instance(std::uint64_t seed, Index pixels = 4);

struct ObjectiveGradCheck {
  numgrad::GradCheckReport<double> report;
  std::vector<std::string> block_names;  // matches report.block_max_rel_error
};

/// Central finite differences of total_loss(build_objective(...)) against
/// the tape gradient, for every model tensor.
ObjectiveGradCheck check_objective_gradients(const GradCheckInstance &instance,
                                             const TrainConfig &config,
                                             const numgrad::GradCheckOptions<double> &options = {});

std::string trace_csv(const TrainTrace &trace);
std::string trace_csv_row(const StepRecord &r);
void write_trace_csv(const TrainTrace &trace, const std::filesystem::path &path);

}  // namespace specfuse::train
