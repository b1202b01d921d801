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

// Fusion quality metrics on raw-scale cubes: ERGAS, per-band PSNR, SAM.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "specfuse/hsicube.hpp"

namespace specfuse::metrics {

/// Reported in place of +inf for a band reconstructed without error.
inline constexpr double kPsnrCap = 300.0;

struct PsnrResult {
  double mean = 0;
  std::vector<double> per_band;
};

struct SamResult {
  double global = 0;
  /// height x width, degrees; skipped pixels hold 0.
  Tensor<double> map;
  Index skipped = 0;
};

struct MetricReport {
  double ergas = 0;
  PsnrResult psnr;
  SamResult sam;
};

namespace detail {

template <typename Scalar>
void require_same_dims(const HyperCube<Scalar> &ref, const HyperCube<Scalar> &est, const char *op) {
  if (ref.width != est.width || ref.height != est.height || ref.bands() != est.bands()) {
    throw DimensionError(std::string(op) + ": reference is " + std::to_string(ref.width) + "x" +
                         std::to_string(ref.height) + "x" + std::to_string(ref.bands()) +
                         ", estimate is " + std::to_string(est.width) + "x" +
                         std::to_string(est.height) + "x" + std::to_string(est.bands()));
  }
  if (ref.pixels() == 0 || ref.bands() == 0) throw MetricError(std::string(op) + ": empty cube");
}

}  // namespace detail

/// (100 / sr) * sqrt(mean over bands of MSE_i / mean(X_i)^2).
template <typename Scalar>
double ergas(const HyperCube<Scalar> &ref, const HyperCube<Scalar> &est, double sr) {
  detail::require_same_dims(ref, est, "ergas");
  if (!(sr > 0)) throw ContractError("ergas: sr must be positive");
  double acc = 0;
  for (Index b = 0; b < ref.bands(); ++b) {
    const auto r = ref.planes.row(b).template cast<double>();
    const auto e = est.planes.row(b).template cast<double>();
    const double mu = r.mean();
    if (mu == 0.0) throw MetricError("ergas: band " + std::to_string(b) + " has zero mean");
    acc += (r - e).squaredNorm() / double(ref.pixels()) / (mu * mu);
  }
  return 100.0 / sr * std::sqrt(acc / double(ref.bands()));
}

/// Per band 10 log10(max(X_i)^2 / MSE_i), with kPsnrCap for zero error.
template <typename Scalar>
PsnrResult psnr(const HyperCube<Scalar> &ref, const HyperCube<Scalar> &est) {
  detail::require_same_dims(ref, est, "psnr");
  PsnrResult out;
  out.per_band.reserve(std::size_t(ref.bands()));
  for (Index b = 0; b < ref.bands(); ++b) {
    const auto r = ref.planes.row(b).template cast<double>();
    const auto e = est.planes.row(b).template cast<double>();
    const double mse = (r - e).squaredNorm() / double(ref.pixels());
    const double peak = r.maxCoeff();
    double db = mse == 0.0 ? kPsnrCap : 10.0 * std::log10(peak * peak / mse);
    if (!(db <= kPsnrCap)) db = std::isnan(db) ? -kPsnrCap : kPsnrCap;
    out.per_band.push_back(db);
    out.mean += db;
  }
  out.mean /= double(ref.bands());
  return out;
}

/// Spectral angle per pixel in degrees, averaged over pixels; pixels with a
/// zero spectrum in either cube are skipped.
template <typename Scalar>
SamResult sam(const HyperCube<Scalar> &ref, const HyperCube<Scalar> &est) {
  detail::require_same_dims(ref, est, "sam");
  SamResult out;
  out.map = Tensor<double>::Zero(ref.height, ref.width);
  double acc = 0;
  Index valid = 0;
  for (Index p = 0; p < ref.pixels(); ++p) {
    const auto r = ref.planes.col(p).template cast<double>();
    const auto e = est.planes.col(p).template cast<double>();
    const double nr = r.norm();
    const double ne = e.norm();
    if (nr == 0.0 || ne == 0.0) {
      ++out.skipped;
      continue;
    }
    // Half-angle form of arccos(<r, e> / (|r| |e|)): exact 0 for identical
    // directions and well conditioned near 0 and 180 degrees.
    const Eigen::VectorXd ur = r / nr;
    const Eigen::VectorXd ue = e / ne;
    const double deg = 2.0 * std::atan2((ur - ue).norm(), (ur + ue).norm()) * 180.0 / std::numbers::pi;
    out.map(p / ref.width, p % ref.width) = deg;
    acc += deg;
    ++valid;
  }
  if (valid == 0) throw MetricError("sam: every pixel has a zero spectrum");
  out.global = acc / double(valid);
  return out;
}

template <typename Scalar>
MetricReport evaluate(const HyperCube<Scalar> &ref, const HyperCube<Scalar> &est, double sr) {
  return {ergas(ref, est, sr), psnr(ref, est), sam(ref, est)};
}

inline std::string report_csv_header() { return "ergas,psnr_mean,sam_global"; }

inline std::string report_csv_row(const MetricReport &r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", r.ergas, r.psnr.mean, r.sam.global);
  return buf;
}

}  // namespace specfuse::metrics
