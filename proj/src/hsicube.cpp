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

#include "specfuse/hsicube.hpp"

#include <algorithm>
#include <random>

namespace specfuse {

Tensor<double> random_endmembers(Index count, Index bands, std::uint64_t seed,
                                 double min_angle_deg) {
  if (count < 1 || bands < 2) throw ContractError("random_endmembers: need count >= 1, bands >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor<double> out(count, bands);
  constexpr int kMaxTries = 1000;
  for (Index k = 0; k < count; ++k) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxTries && !accepted; ++attempt) {
      Eigen::RowVectorXd spec = Eigen::RowVectorXd::Constant(bands, 0.05);
      for (int bump = 0; bump < 3; ++bump) {
        const double amp = 0.2 + 0.8 * unit(rng);
        const double center = unit(rng) * double(bands - 1);
        const double sigma = double(bands) * (1.0 / 12.0 + unit(rng) * (1.0 / 3.0 - 1.0 / 12.0));
        for (Index b = 0; b < bands; ++b) {
          const double d = (double(b) - center) / sigma;
          spec(b) += amp * std::exp(-0.5 * d * d);
        }
      }
      spec *= (0.5 + 0.5 * unit(rng)) / spec.maxCoeff();
      accepted = true;
      for (Index j = 0; j < k && accepted; ++j) {
        accepted = spectral_angle_deg(spec, out.row(j)) > min_angle_deg;
      }
      if (accepted) out.row(k) = spec;
    }
    if (!accepted) {
      throw GeneratorError("random_endmembers: could not draw " + std::to_string(count) +
                           " spectra separated by " + std::to_string(min_angle_deg) + " degrees");
    }
  }
  return out;
}

Tensor<double> box_blur(const Tensor<double> &field, Index radius) {
  if (radius <= 0) return field;
  const Index h = field.rows();
  const Index w = field.cols();
  Tensor<double> horiz(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Index lo = std::max<Index>(0, x - radius);
      const Index hi = std::min<Index>(w - 1, x + radius);
      horiz(y, x) = field.row(y).segment(lo, hi - lo + 1).mean();
    }
  }
  Tensor<double> out(h, w);
  for (Index y = 0; y < h; ++y) {
    const Index lo = std::max<Index>(0, y - radius);
    const Index hi = std::min<Index>(h - 1, y + radius);
    out.row(y) = horiz.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  return out;
}

Scene synth_scene(const SceneSpec &spec) {
  const Index c = spec.endmember_count();
  if (c < 2) throw ContractError("synth_scene: need at least 2 endmembers");
  if (spec.width < 4 || spec.height < 4) throw ContractError("synth_scene: width and height must be >= 4");
  if (spec.endmembers.cols() < 1 || !spec.endmembers.allFinite()) {
    throw ContractError("synth_scene: endmembers must be finite with at least one band");
  }
  if (spec.blur_radius < 0) throw ContractError("synth_scene: blur radius must be >= 0");
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < i; ++j) {
      if (!(spectral_angle_deg(spec.endmembers.row(i), spec.endmembers.row(j)) > 5.0)) {
        throw ContractError("synth_scene: endmembers " + std::to_string(j) + " and " +
                            std::to_string(i) + " are within 5 degrees of each other");
      }
    }
  }

  const Index n = spec.width * spec.height;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr int kMaxDraws = 100;

  for (int draw = 0; draw < kMaxDraws; ++draw) {
    Tensor<double> weights(n, c);
    for (Index k = 0; k < c; ++k) {
      Tensor<double> noise(spec.height, spec.width);
      for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = gauss(rng);
      Tensor<double> smooth = box_blur(noise, spec.blur_radius);
      const double mu = smooth.mean();
      const double sd = std::sqrt((smooth.array() - mu).square().mean());
      if (sd > 0.0) smooth = ((smooth.array() - mu) / sd).matrix();
      // Row-major height x width storage already matches the pixel scan order.
      weights.col(k) = Eigen::Map<const Eigen::VectorXd>(smooth.data(), n).unaryExpr(
          [&](double z) { return std::exp(spec.contrast * z); });
    }
    Tensor<double> abundances = weights.array().colwise() / weights.rowwise().sum().array();

    bool covered = true;
    for (Index k = 0; k < c && covered; ++k) covered = abundances.col(k).maxCoeff() > 0.5;
    if (!covered) continue;

    Scene scene;
    scene.cube = fold<double>(abundances * spec.endmembers, spec.width, spec.height);
    scene.abundances = PixelMatrix<double>{std::move(abundances), spec.width, spec.height};
    return scene;
  }
  throw GeneratorError("synth_scene: no draw gave every endmember an abundance above 0.5 after " +
                       std::to_string(kMaxDraws) + " attempts");
}

}  // namespace specfuse
