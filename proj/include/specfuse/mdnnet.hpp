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

// Shared encoder/decoder with a stick-breaking representation layer and the
// critic network used for the Jensen-Shannon mutual-information term.
//
//   input (pixels x l) --dense u-branch--> sigmoid --> u (pixels x c)
//                      --dense beta-branch--> softplus --> beta (pixels x 1)
//   v = Kumaraswamy inverse CDF(u; beta),  S = stick_break(v)
//   decode(S) = S W1 W2,  with W1 W2 = D_h (c x L)
//   critic T(y, s) = sigmoid(dense(sigmoid(dense([y, s]))))

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "specfuse/hsicube.hpp"
#include "specfuse/numgrad.hpp"

namespace specfuse::mdn {

using numgrad::Tensor2;
using Tape = numgrad::Tape<double>;
using V = numgrad::Var<double>;

enum class StickMode { kPaper, kRemainder };
enum class KumaraswamyMode { kStandard, kAsPrinted };

/// Fractional-power bases are clamped into [kPowBaseMin, kPowBaseMax].
inline constexpr double kPowBaseMin = 1e-7;
inline constexpr double kPowBaseMax = 1.0 - 1e-7;
inline constexpr double kBetaMin = 1e-4;

template <typename T>
struct DenseLayerT {
  T weight;  // in x out
  T bias;    // 1 x out
};

template <typename T>
struct EncoderT {
  std::vector<DenseLayerT<T>> u_branch;
  std::vector<DenseLayerT<T>> beta_branch;
  DenseLayerT<T> u_head;
  DenseLayerT<T> beta_head;
};

template <typename T>
struct DecoderT {
  T w1;  // c x c
  T w2;  // c x L
};

template <typename T>
struct MINetT {
  DenseLayerT<T> hidden;
  DenseLayerT<T> output;
};

template <typename T>
struct ModelT {
  EncoderT<T> encoder;
  DecoderT<T> decoder;
  MINetT<T> mi;
};

using ModelParams = ModelT<Tensor2>;
using ModelVars = ModelT<V>;

/// Parameter groups updated under different rules during training.
enum class Block { kEncoder, kDecoder, kCritic };

const char *block_name(Block b);

/// Visits every tensor in a fixed order as f(name, block, tensor).
template <typename Model, typename F>
void for_each_tensor(Model &&m, F &&f) {
  auto layer = [&](const std::string &prefix, Block b, auto &l) {
    f(prefix + ".weight", b, l.weight);
    f(prefix + ".bias", b, l.bias);
  };
  for (std::size_t i = 0; i < m.encoder.u_branch.size(); ++i) {
    layer("encoder.u." + std::to_string(i), Block::kEncoder, m.encoder.u_branch[i]);
  }
  layer("encoder.u_head", Block::kEncoder, m.encoder.u_head);
  for (std::size_t i = 0; i < m.encoder.beta_branch.size(); ++i) {
    layer("encoder.beta." + std::to_string(i), Block::kEncoder, m.encoder.beta_branch[i]);
  }
  layer("encoder.beta_head", Block::kEncoder, m.encoder.beta_head);
  f(std::string("decoder.w1"), Block::kDecoder, m.decoder.w1);
  f(std::string("decoder.w2"), Block::kDecoder, m.decoder.w2);
  layer("mi.hidden", Block::kCritic, m.mi.hidden);
  layer("mi.output", Block::kCritic, m.mi.output);
}

/// Same-shaped model with every tensor transformed by f(from) -> To.
template <typename To, typename From, typename F>
ModelT<To> map_model(const ModelT<From> &m, F &&f) {
  auto layer = [&](const DenseLayerT<From> &l) { return DenseLayerT<To>{f(l.weight), f(l.bias)}; };
  ModelT<To> out;
  for (const auto &l : m.encoder.u_branch) out.encoder.u_branch.push_back(layer(l));
  out.encoder.u_head = layer(m.encoder.u_head);
  for (const auto &l : m.encoder.beta_branch) out.encoder.beta_branch.push_back(layer(l));
  out.encoder.beta_head = layer(m.encoder.beta_head);
  out.decoder.w1 = f(m.decoder.w1);
  out.decoder.w2 = f(m.decoder.w2);
  out.mi.hidden = layer(m.mi.hidden);
  out.mi.output = layer(m.mi.output);
  return out;
}

/// Layer sizes. The defaults for l = 3, L = 31 reproduce the reference
/// network: u-branch [3,3,3,3], beta-branch [3,3], 15 sticks, critic [18,1],
/// decoder [15, L]. Other l scale the branch widths to l.
struct Architecture {
  Index msi_bands = 3;
  Index hsi_bands = 31;
  Index sticks = 15;
  std::vector<Index> u_widths{3, 3, 3, 3};
  std::vector<Index> beta_widths{3, 3};

  static Architecture for_bands(Index msi_bands, Index hsi_bands, Index sticks = 15);
  Index critic_width() const { return msi_bands + sticks; }
  bool operator==(const Architecture &) const = default;
};

/// Glorot-uniform weights, zero biases, beta-head bias +1.
ModelParams init_model(const Architecture &arch, std::uint64_t seed);

/// Architecture a parameter set was built for; throws DimensionError if
/// the shapes are inconsistent.
Architecture infer_architecture(const ModelParams &params);

/// Every tensor becomes a learnable leaf on `tape`.
ModelVars bind(Tape &tape, const ModelParams &params);

struct NetworkModes {
  StickMode stick = StickMode::kPaper;
  KumaraswamyMode kumaraswamy = KumaraswamyMode::kStandard;
  /// Mixes u with uniform noise: u' = (1 - level) u + level * eps. 0 disables.
  double noise_level = 0.0;
  std::uint64_t noise_seed = 0;
};

V dense(const DenseLayerT<V> &layer, V x);

/// Kumaraswamy inverse CDF with alpha = 1. Standard: 1 - (1 - u)^(1/beta);
/// as-printed: u^(1/beta). beta is pixels x 1, one value per row of u.
V kumaraswamy_sample(V u, V beta, KumaraswamyMode mode);

/// s_1 = v_1, s_j = v_j prod_{k<j} (1 - v_k). Remainder mode replaces the
/// last piece by the leftover stick so rows sum to one.
V stick_break(V v, StickMode mode);

struct EncoderOutput {
  V u;
  V beta;
  V v;
  V s;
  /// Entries of u that had to be clamped into the fractional-power range.
  Index clamped = 0;
};

EncoderOutput encode(const EncoderT<V> &enc, V input, const NetworkModes &modes = {});
V decode(const DecoderT<V> &dec, V s);
/// X R with R held as a constant (never receives a gradient).
V msi_tail(V x, const SpectralResponse<double> &srf);
/// Per-pixel critic output t in (0, 1), pixels x 1.
V mi_score(const MINetT<V> &mi, V y, V s);
/// mean over pixels of -softplus(-t).
V mi_estimate(V t);

// --- value-level conveniences ---------------------------------------------------

Tensor2 kumaraswamy_sample(const Tensor2 &u, const Tensor2 &beta, KumaraswamyMode mode);
Tensor2 stick_break(const Tensor2 &v, StickMode mode);
Tensor2 encode(const ModelParams &params, const Tensor2 &input, const NetworkModes &modes = {});
Tensor2 decode(const ModelParams &params, const Tensor2 &s);
/// D_h = W1 W2.
Tensor2 extract_basis(const ModelParams &params);

/// X = decode(encode(Y_m)) on (zero-mean) MSI pixels.
Tensor2 fuse(const Tensor2 &msi_pixels, const ModelParams &params, const NetworkModes &modes = {});

}  // namespace specfuse::mdn
