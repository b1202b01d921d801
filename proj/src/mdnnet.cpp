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

#include "specfuse/mdnnet.hpp"

#include <random>

namespace specfuse::mdn {

using numgrad::shape_string;

const char *block_name(Block b) {
  switch (b) {
    case Block::kEncoder: return "encoder";
    case Block::kDecoder: return "decoder";
    case Block::kCritic: return "mi";
  }
  return "unknown";
}

Architecture Architecture::for_bands(Index msi_bands, Index hsi_bands, Index sticks) {
  if (msi_bands < 1 || hsi_bands <= msi_bands || sticks < 2) {
    throw ContractError("architecture needs hsi_bands > msi_bands >= 1 and at least 2 sticks");
  }
  Architecture a;
  a.msi_bands = msi_bands;
  a.hsi_bands = hsi_bands;
  a.sticks = sticks;
  a.u_widths.assign(4, msi_bands);
  a.beta_widths.assign(2, msi_bands);
  return a;
}

namespace {

DenseLayerT<Tensor2> glorot_layer(Index in, Index out, std::mt19937_64 &rng) {
  const double a = std::sqrt(6.0 / double(in + out));
  std::uniform_real_distribution<double> dist(-a, a);
  DenseLayerT<Tensor2> l{Tensor2(in, out), Tensor2::Zero(1, out)};
  for (Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = dist(rng);
  return l;
}

Tensor2 glorot_matrix(Index in, Index out, std::mt19937_64 &rng) {
  return glorot_layer(in, out, rng).weight;
}

void require_cols(const char *what, V x, Index cols) {
  if (x.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(cols) +
                         " columns, got " + shape_string(x.rows(), x.cols()));
  }
}

/// Densely connected stack: layer k sees [input, h_1, ..., h_{k-1}].
/// Returns the concatenation of the input and every layer output.
V dense_block(const std::vector<DenseLayerT<V>> &layers, V input) {
  std::vector<V> features{input};
  for (const DenseLayerT<V> &l : layers) {
    V x = features.size() == 1 ? input : numgrad::concat_cols<double>(features);
    features.push_back(dense(l, x));
  }
  return features.size() == 1 ? input : numgrad::concat_cols<double>(features);
}

}  // namespace

ModelParams init_model(const Architecture &arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams m;
  Index width = arch.msi_bands;
  for (Index w : arch.u_widths) {
    m.encoder.u_branch.push_back(glorot_layer(width, w, rng));
    width += w;
  }
  m.encoder.u_head = glorot_layer(width, arch.sticks, rng);
  width = arch.msi_bands;
  for (Index w : arch.beta_widths) {
    m.encoder.beta_branch.push_back(glorot_layer(width, w, rng));
    width += w;
  }
  m.encoder.beta_head = glorot_layer(width, 1, rng);
  m.encoder.beta_head.bias.setConstant(1.0);
  m.decoder.w1 = glorot_matrix(arch.sticks, arch.sticks, rng);
  m.decoder.w2 = glorot_matrix(arch.sticks, arch.hsi_bands, rng);
  m.mi.hidden = glorot_layer(arch.critic_width(), arch.critic_width(), rng);
  m.mi.output = glorot_layer(arch.critic_width(), 1, rng);
  return m;
}

Architecture infer_architecture(const ModelParams &m) {
  Architecture a;
  if (m.encoder.u_branch.empty() && m.encoder.u_head.weight.size() == 0) {
    throw DimensionError("model has no encoder");
  }
  a.msi_bands = m.encoder.u_branch.empty() ? m.encoder.u_head.weight.rows()
                                           : m.encoder.u_branch.front().weight.rows();
  a.sticks = m.encoder.u_head.weight.cols();
  a.hsi_bands = m.decoder.w2.cols();
  a.u_widths.clear();
  a.beta_widths.clear();

  auto check_layer = [](const std::string &name, const DenseLayerT<Tensor2> &l, Index in,
                        Index out) {
    if (l.weight.rows() != in || l.weight.cols() != out || l.bias.rows() != 1 ||
        l.bias.cols() != out) {
      throw DimensionError(name + ": expected weight " + shape_string(in, out) + " and bias " +
                           shape_string(1, out) + ", got " + shape_string(l.weight) + " and " +
                           shape_string(l.bias));
    }
  };
  Index width = a.msi_bands;
  for (std::size_t i = 0; i < m.encoder.u_branch.size(); ++i) {
    const Index w = m.encoder.u_branch[i].weight.cols();
    check_layer("encoder.u." + std::to_string(i), m.encoder.u_branch[i], width, w);
    a.u_widths.push_back(w);
    width += w;
  }
  check_layer("encoder.u_head", m.encoder.u_head, width, a.sticks);
  width = a.msi_bands;
  for (std::size_t i = 0; i < m.encoder.beta_branch.size(); ++i) {
    const Index w = m.encoder.beta_branch[i].weight.cols();
    check_layer("encoder.beta." + std::to_string(i), m.encoder.beta_branch[i], width, w);
    a.beta_widths.push_back(w);
    width += w;
  }
  check_layer("encoder.beta_head", m.encoder.beta_head, width, 1);
  if (m.decoder.w1.rows() != a.sticks || m.decoder.w1.cols() != a.sticks ||
      m.decoder.w2.rows() != a.sticks) {
    throw DimensionError("decoder: expected w1 " + shape_string(a.sticks, a.sticks) + " and w2 " +
                         shape_string(a.sticks, a.hsi_bands) + ", got " +
                         shape_string(m.decoder.w1) + " and " + shape_string(m.decoder.w2));
  }
  check_layer("mi.hidden", m.mi.hidden, a.critic_width(), m.mi.hidden.weight.cols());
  check_layer("mi.output", m.mi.output, m.mi.hidden.weight.cols(), 1);
  return a;
}

ModelVars bind(Tape &tape, const ModelParams &params) {
  return map_model<V>(params, [&](const Tensor2 &t) { return tape.parameter(t); });
}

V dense(const DenseLayerT<V> &layer, V x) {
  return numgrad::add_row(numgrad::matmul(x, layer.weight), layer.bias);
}

V kumaraswamy_sample(V u, V beta, KumaraswamyMode mode) {
  if (beta.cols() != 1 || beta.rows() != u.rows()) {
    throw DimensionError("kumaraswamy_sample: beta must be " + shape_string(u.rows(), 1) +
                         ", got " + shape_string(beta.rows(), beta.cols()));
  }
  V safe_u = numgrad::clamp(u, kPowBaseMin, kPowBaseMax);
  V inv_beta = numgrad::reciprocal(numgrad::clamp(beta, kBetaMin, std::numeric_limits<double>::max()));
  if (mode == KumaraswamyMode::kAsPrinted) {
    // 1 - (1 - u^(1/beta)) == u^(1/beta)
    return numgrad::exp(numgrad::mul_col(numgrad::log(safe_u), inv_beta));
  }
  V base = numgrad::affine(safe_u, -1.0, 1.0);
  V power = numgrad::exp(numgrad::mul_col(numgrad::log(base), inv_beta));
  return numgrad::affine(power, -1.0, 1.0);
}

V stick_break(V v, StickMode mode) {
  V remaining = numgrad::cumprod_exclusive(numgrad::affine(v, -1.0, 1.0));
  if (mode == StickMode::kPaper || v.cols() < 2) return numgrad::mul(v, remaining);
  Tape &tape = *v.tape;
  V head = numgrad::slice_cols(v, 0, v.cols() - 1);
  V last = tape.constant(Tensor2::Ones(v.rows(), 1));
  return numgrad::mul(numgrad::concat_cols({head, last}), remaining);
}

EncoderOutput encode(const EncoderT<V> &enc, V input, const NetworkModes &modes) {
  const Index bands = enc.u_branch.empty() ? enc.u_head.weight.rows() : enc.u_branch.front().weight.rows();
  require_cols("encode", input, bands);
  EncoderOutput out;
  out.u = numgrad::sigmoid(dense(enc.u_head, dense_block(enc.u_branch, input)));
  out.beta = numgrad::softplus(dense(enc.beta_head, dense_block(enc.beta_branch, input)));
  V u = out.u;
  if (modes.noise_level > 0.0) {
    std::mt19937_64 rng(modes.noise_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor2 eps(u.rows(), u.cols());
    for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = modes.noise_level * unit(rng);
    u = numgrad::add(numgrad::affine(u, 1.0 - modes.noise_level, 0.0), u.tape->constant(std::move(eps)));
  }
  const auto &uv = u.value().array();
  out.clamped = (uv < kPowBaseMin || uv > kPowBaseMax).count();
  out.v = kumaraswamy_sample(u, out.beta, modes.kumaraswamy);
  out.s = stick_break(out.v, modes.stick);
  return out;
}

V decode(const DecoderT<V> &dec, V s) {
  require_cols("decode", s, dec.w1.rows());
  return numgrad::matmul(numgrad::matmul(s, dec.w1), dec.w2);
}

V msi_tail(V x, const SpectralResponse<double> &srf) {
  if (x.cols() != srf.hsi_bands()) {
    throw DimensionError("msi_tail: input has " + std::to_string(x.cols()) +
                         " bands, response expects " + std::to_string(srf.hsi_bands()));
  }
  return numgrad::matmul(x, x.tape->constant(srf.matrix()));
}

V mi_score(const MINetT<V> &mi, V y, V s) {
  if (y.rows() != s.rows()) {
    throw DimensionError("mi_score: " + std::to_string(y.rows()) + " input pixels vs " +
                         std::to_string(s.rows()) + " representation rows");
  }
  V joint = numgrad::concat_cols({y, s});
  require_cols("mi_score", joint, mi.hidden.weight.rows());
  V hidden = numgrad::sigmoid(dense(mi.hidden, joint));
  return numgrad::sigmoid(dense(mi.output, hidden));
}

V mi_estimate(V t) {
  return numgrad::affine(numgrad::mean(numgrad::softplus(numgrad::affine(t, -1.0, 0.0))), -1.0, 0.0);
}

Tensor2 kumaraswamy_sample(const Tensor2 &u, const Tensor2 &beta, KumaraswamyMode mode) {
  Tape tape;
  return kumaraswamy_sample(tape.constant(u), tape.constant(beta), mode).value();
}

Tensor2 stick_break(const Tensor2 &v, StickMode mode) {
  Tape tape;
  return stick_break(tape.constant(v), mode).value();
}

Tensor2 encode(const ModelParams &params, const Tensor2 &input, const NetworkModes &modes) {
  Tape tape;
  const ModelVars vars = bind(tape, params);
  return encode(vars.encoder, tape.constant(input), modes).s.value();
}

Tensor2 decode(const ModelParams &params, const Tensor2 &s) {
  Tape tape;
  const ModelVars vars = bind(tape, params);
  return decode(vars.decoder, tape.constant(s)).value();
}

Tensor2 extract_basis(const ModelParams &params) { return params.decoder.w1 * params.decoder.w2; }

Tensor2 fuse(const Tensor2 &msi_pixels, const ModelParams &params, const NetworkModes &modes) {
  Tape tape;
  const ModelVars vars = bind(tape, params);
  const EncoderOutput enc = encode(vars.encoder, tape.constant(msi_pixels), modes);
  return decode(vars.decoder, enc.s).value();
}

}  // namespace specfuse::mdn
