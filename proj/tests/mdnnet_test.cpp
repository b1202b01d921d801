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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using namespace specfuse;
using namespace specfuse::mdn;
using numgrad::Tensor2;

Tensor2 uniform(std::mt19937_64 &rng, Index r, Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor2 t(r, c);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  return t;
}

ModelParams zero_model() {
  ModelParams m = init_model(Architecture{}, 0);
  for_each_tensor(m, [](const std::string &, Block, Tensor2 &t) { t.setZero(); });
  return m;
}

TEST(Kumaraswamy, ModesCoincideAtBetaOne) {
  std::mt19937_64 rng(1);
  const Tensor2 u = uniform(rng, 6, 15, 0.01, 0.99);
  const Tensor2 beta = Tensor2::Ones(6, 1);
  EXPECT_LE((kumaraswamy_sample(u, beta, KumaraswamyMode::kStandard) - u).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((kumaraswamy_sample(u, beta, KumaraswamyMode::kAsPrinted) - u).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Kumaraswamy, WorkedValues) {
  const Tensor2 u = Tensor2::Constant(1, 1, 0.75);
  const Tensor2 beta = Tensor2::Constant(1, 1, 2.0);
  EXPECT_NEAR(kumaraswamy_sample(u, beta, KumaraswamyMode::kStandard)(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(kumaraswamy_sample(u, beta, KumaraswamyMode::kAsPrinted)(0, 0), std::sqrt(0.75), 1e-15);
  EXPECT_NEAR(std::sqrt(0.75), 0.8660254, 1e-7);
}

TEST(Kumaraswamy, BoundaryInputsAreClampedNotErrors) {
  Tensor2 u(1, 3);
  u << 0.0, 1.0, 0.5;
  const Tensor2 v = kumaraswamy_sample(u, Tensor2::Constant(1, 1, 0.5), KumaraswamyMode::kStandard);
  EXPECT_TRUE(v.allFinite());
  EXPECT_GE(v.minCoeff(), 0.0);
  EXPECT_LE(v.maxCoeff(), 1.0);
  EXPECT_THROW(kumaraswamy_sample(u, Tensor2::Ones(2, 1), KumaraswamyMode::kStandard), DimensionError);
}

TEST(StickBreak, WorkedValues) {
  const Tensor2 v = Tensor2::Constant(1, 3, 0.5);
  Tensor2 paper(1, 3);
  paper << 0.5, 0.25, 0.125;
  Tensor2 remainder(1, 3);
  remainder << 0.5, 0.25, 0.25;
  EXPECT_EQ(stick_break(v, StickMode::kPaper), paper);
  EXPECT_EQ(stick_break(v, StickMode::kRemainder), remainder);

  Tensor2 first = Tensor2::Constant(1, 4, 0.3);
  first(0, 0) = 1.0 - 1e-12;
  const Tensor2 s = stick_break(first, StickMode::kPaper);
  EXPECT_NEAR(s(0, 0), 1.0, 1e-12);
  EXPECT_LE(s.rightCols(3).maxCoeff(), 1e-12);
}

TEST(StickBreak, InvariantsOverManyRandomRows) {
  std::mt19937_64 rng(2);
  const Tensor2 v = uniform(rng, 100000, 15, 1e-9, 1.0 - 1e-9);
  const Tensor2 paper = stick_break(v, StickMode::kPaper);
  const Tensor2 rem = stick_break(v, StickMode::kRemainder);
  EXPECT_GE(paper.minCoeff(), 0.0);
  EXPECT_LE(paper.maxCoeff(), 1.0);
  EXPECT_LE(paper.rowwise().sum().maxCoeff(), 1.0);
  EXPECT_GE(rem.minCoeff(), 0.0);
  EXPECT_LE(rem.maxCoeff(), 1.0);
  EXPECT_LE((rem.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Architecture, DefaultsAndScaling) {
  const Architecture a;
  EXPECT_EQ(a.u_widths, (std::vector<Index>{3, 3, 3, 3}));
  EXPECT_EQ(a.beta_widths, (std::vector<Index>{3, 3}));
  EXPECT_EQ(a.critic_width(), 18);
  const Architecture b = Architecture::for_bands(4, 31);
  EXPECT_EQ(b.u_widths, (std::vector<Index>{4, 4, 4, 4}));
  EXPECT_EQ(b.critic_width(), 19);
  EXPECT_THROW(Architecture::for_bands(31, 31), ContractError);
}

TEST(InitModel, ShapesAndInitialValues) {
  const ModelParams m = init_model(Architecture{}, 9);
  // Densely connected: layer k sees the input plus k previous outputs.
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(m.encoder.u_branch[k].weight.rows(), Index(3 + 3 * k));
    EXPECT_EQ(m.encoder.u_branch[k].weight.cols(), 3);
  }
  EXPECT_EQ(m.encoder.u_head.weight.rows(), 15);
  EXPECT_EQ(m.encoder.u_head.weight.cols(), 15);
  EXPECT_EQ(m.encoder.beta_head.weight.rows(), 9);
  EXPECT_EQ(m.encoder.beta_head.bias(0, 0), 1.0);
  EXPECT_EQ(m.decoder.w1.rows(), 15);
  EXPECT_EQ(m.decoder.w1.cols(), 15);
  EXPECT_EQ(m.decoder.w2.cols(), 31);
  EXPECT_EQ(m.mi.hidden.weight.rows(), 18);
  EXPECT_EQ(m.mi.hidden.weight.cols(), 18);
  EXPECT_EQ(m.mi.output.weight.cols(), 1);
  const double limit = std::sqrt(6.0 / (15 + 31));
  EXPECT_LE(m.decoder.w2.cwiseAbs().maxCoeff(), limit);
  EXPECT_TRUE(infer_architecture(m) == Architecture{});
  int count = 0;
  for_each_tensor(m, [&](const std::string &, Block, const Tensor2 &) { ++count; });
  EXPECT_EQ(count, 22);
}

TEST(Encode, ZeroWeightsGiveAnalyticRepresentation) {
  const ModelParams m = zero_model();
  Tape tape;
  const ModelVars vars = bind(tape, m);
  std::mt19937_64 rng(3);
  const EncoderOutput out = encode(vars.encoder, tape.constant(uniform(rng, 5, 3, -1, 1)));
  EXPECT_TRUE((out.u.value().array() == 0.5).all());
  EXPECT_LE((out.beta.value().array() - std::log(2.0)).abs().maxCoeff(), 1e-15);
  EXPECT_LE((out.v.value().array() - (1.0 - std::exp(-1.0))).abs().maxCoeff(), 1e-15);
  EXPECT_NEAR(1.0 - std::exp(-1.0), 0.6321206, 1e-7);
}

TEST(Encode, InvariantsHoldForArbitraryParameters) {
  std::normal_distribution<double> big(0.0, 5.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    ModelParams m = init_model(Architecture{}, seed);
    for_each_tensor(m, [&](const std::string &, Block, Tensor2 &t) {
      for (Index i = 0; i < t.size(); ++i) t.data()[i] = big(rng);
    });
    const Tensor2 y = uniform(rng, 50, 3, -3, 3);
    for (StickMode mode : {StickMode::kPaper, StickMode::kRemainder}) {
      const Tensor2 s = encode(m, y, NetworkModes{mode});
      EXPECT_GE(s.minCoeff(), 0.0);
      EXPECT_LE(s.maxCoeff(), 1.0);
      if (mode == StickMode::kPaper) {
        EXPECT_LE(s.rowwise().sum().maxCoeff(), 1.0 + 1e-15);
      } else {
        EXPECT_LE((s.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(Encode, BandMismatchAndDeterminism) {
  const ModelParams m = init_model(Architecture{}, 4);
  EXPECT_THROW(encode(m, Tensor2::Zero(3, 4)), DimensionError);
  std::mt19937_64 rng(4);
  const Tensor2 y = uniform(rng, 10, 3, -1, 1);
  EXPECT_EQ(encode(m, y), encode(m, y));
}

TEST(Encode, GradientsOfRepresentationMatchFiniteDifferences) {
  for (StickMode stick : {StickMode::kPaper, StickMode::kRemainder}) {
    for (KumaraswamyMode kuma : {KumaraswamyMode::kStandard, KumaraswamyMode::kAsPrinted}) {
      std::mt19937_64 rng(5);
      const ModelParams m = init_model(Architecture{}, 5);
      const Tensor2 y = uniform(rng, 4, 3, -1, 1);
      const Tensor2 w = uniform(rng, 4, 15, 0.5, 1.5);
      std::vector<Tensor2> phi;
      for_each_tensor(m, [&](const std::string &, Block b, const Tensor2 &t) {
        if (b == Block::kEncoder) phi.push_back(t);
      });
      const auto r = numgrad::grad_check<double>(
          [&](Tape &tape, std::span<const V> p) {
            std::size_t next = 0;
            ModelVars vars = bind(tape, m);
            for_each_tensor(vars, [&](const std::string &, Block b, V &v) {
              if (b == Block::kEncoder) v = p[next++];
            });
            const NetworkModes modes{stick, kuma};
            V s = encode(vars.encoder, tape.constant(y), modes).s;
            return numgrad::sum(numgrad::mul(s, tape.constant(w)));
          },
          phi, {.step = 1e-3});
      EXPECT_LT(r.max_rel_error, 1e-4) << int(stick) << "/" << int(kuma);
    }
  }
}

TEST(Decode, BasisReadoutLinearityAndFactorization) {
  std::mt19937_64 rng(6);
  ModelParams m = init_model(Architecture{}, 6);
  m.decoder.w1.setIdentity();
  Tensor2 onehot = Tensor2::Zero(1, 15);
  onehot(0, 7) = 1.0;
  EXPECT_EQ(decode(m, onehot), m.decoder.w2.row(7));

  m = init_model(Architecture{}, 7);
  const Tensor2 s1 = uniform(rng, 9, 15, 0, 1);
  const Tensor2 s2 = uniform(rng, 9, 15, 0, 1);
  const Tensor2 lhs = decode(m, 0.4 * s1 - 2.0 * s2);
  const Tensor2 rhs = 0.4 * decode(m, s1) - 2.0 * decode(m, s2);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((decode(m, s1) - s1 * extract_basis(m)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(decode(m, Tensor2::Zero(2, 14)), DimensionError);
}

TEST(Fuse, OneHotRepresentationReproducesEndmembers) {
  // A decoder holding the endmembers in D_h returns them for one-hot rows.
  std::mt19937_64 rng(8);
  ModelParams m = init_model(Architecture{}, 8);
  m.decoder.w1.setIdentity();
  m.decoder.w2 = uniform(rng, 15, 31, 0, 1);
  const Tensor2 s = Tensor2::Identity(15, 15);
  EXPECT_EQ(decode(m, s), m.decoder.w2);
  const Tensor2 x = fuse(uniform(rng, 12, 3, -1, 1), m);
  EXPECT_EQ(x.rows(), 12);
  EXPECT_EQ(x.cols(), 31);
}

TEST(MsiTail, SelectorAndCrossModuleOracle) {
  std::mt19937_64 rng(9);
  Tensor2 sel = Tensor2::Zero(6, 2);
  sel(2, 0) = 1;
  sel(4, 1) = 1;
  const SpectralResponse<double> r(sel);
  const Tensor2 x = uniform(rng, 5, 6, -1, 1);
  Tape tape;
  V xv = tape.parameter(x);
  V out = msi_tail(xv, r);
  EXPECT_EQ(out.value().col(0), x.col(2));
  EXPECT_EQ(out.value().col(1), x.col(4));

  const SpectralResponse<double> g = gaussian_srf<double>(6, 2);
  V gx = msi_tail(xv, g);
  EXPECT_LE((gx.value() - apply_srf(PixelMatrix<double>{x, 5, 1}, g).values).cwiseAbs().maxCoeff(), 1e-12);
  tape.backward(numgrad::sum(gx));
  // R enters as a constant: the only parameter on the tape is x.
  int parameters = 0;
  for (std::uint32_t id = 0; id < tape.size(); ++id) {
    if (tape.node(V{&tape, id}).kind == numgrad::OpKind::kParameter) ++parameters;
  }
  EXPECT_EQ(parameters, 1);
  EXPECT_THROW(msi_tail(tape.constant(Tensor2::Zero(2, 5)), g), DimensionError);
}

TEST(MiScore, ZeroWeightsAndRange) {
  const ModelParams zero = zero_model();
  Tape tape;
  ModelVars vars = bind(tape, zero);
  std::mt19937_64 rng(10);
  V y = tape.constant(uniform(rng, 7, 3, -1, 1));
  V s = tape.constant(uniform(rng, 7, 15, 0, 1));
  V t = mi_score(vars.mi, y, s);
  EXPECT_TRUE((t.value().array() == 0.5).all());
  EXPECT_NEAR(mi_estimate(t).value()(0, 0), -std::log1p(std::exp(-0.5)), 1e-12);
  EXPECT_NEAR(-std::log1p(std::exp(-0.5)), -0.4740770, 1e-7);
  EXPECT_THROW(mi_score(vars.mi, y, tape.constant(Tensor2::Zero(6, 15))), DimensionError);

  std::normal_distribution<double> big(0.0, 4.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelParams m = init_model(Architecture{}, seed);
    for_each_tensor(m, [&](const std::string &, Block, Tensor2 &w) {
      for (Index i = 0; i < w.size(); ++i) w.data()[i] = big(rng);
    });
    Tape tp;
    const ModelVars mv = bind(tp, m);
    const Tensor2 tv = mi_score(mv.mi, tp.constant(y.value()), tp.constant(s.value())).value();
    for (Index i = 0; i < tv.rows(); ++i) {
      const double term = -numgrad::softplus_scalar(-tv(i, 0));
      EXPECT_GT(term, -std::log(2.0));
      EXPECT_LT(term, -std::log1p(std::exp(-1.0)));
    }
  }
}

TEST(MiScore, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const ModelParams m = init_model(Architecture{}, 11);
  const Tensor2 y = uniform(rng, 4, 3, -1, 1);
  const Tensor2 s = uniform(rng, 4, 15, 0, 1);
  const auto r = numgrad::grad_check<double>(
      [&](Tape &tape, std::span<const V> p) {
        MINetT<V> mi{{p[0], p[1]}, {p[2], p[3]}};
        return mi_estimate(mi_score(mi, tape.constant(y), tape.constant(s)));
      },
      {m.mi.hidden.weight, m.mi.hidden.bias, m.mi.output.weight, m.mi.output.bias});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Noise, DisabledByDefaultAndDeterministicWhenEnabled) {
  const ModelParams m = init_model(Architecture{}, 12);
  std::mt19937_64 rng(12);
  const Tensor2 y = uniform(rng, 8, 3, -1, 1);
  NetworkModes noisy;
  noisy.noise_level = 0.2;
  noisy.noise_seed = 5;
  EXPECT_EQ(encode(m, y, noisy), encode(m, y, noisy));
  EXPECT_FALSE(encode(m, y, noisy) == encode(m, y));
}

}  // namespace
