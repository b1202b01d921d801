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

// Hyperspectral cube data model and the degradation operators used to build
// LR-HSI / HR-MSI pairs from a high-resolution reference.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "specfuse/errors.hpp"
#include "specfuse/numgrad.hpp"

namespace specfuse {

using numgrad::Tensor;
using Index = Eigen::Index;

/// Reflectance volume stored band-sequentially: row b of `planes` is band b,
/// and within a band pixels are row-major (index y * width + x).
template <typename Scalar>
struct HyperCube {
  using Planes = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Index width = 0;
  Index height = 0;
  Planes planes;

  HyperCube() = default;
  HyperCube(Index w, Index h, Index bands) : width(w), height(h), planes(bands, w * h) {
    planes.setZero();
  }

  Index bands() const { return planes.rows(); }
  Index pixels() const { return width * height; }

  Scalar &operator()(Index x, Index y, Index band) { return planes(band, y * width + x); }
  Scalar operator()(Index x, Index y, Index band) const { return planes(band, y * width + x); }

  /// height x width view of one band.
  auto plane(Index band) const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        planes.row(band).data(), height, width);
  }

  bool operator==(const HyperCube &o) const {
    return width == o.width && height == o.height && planes.rows() == o.planes.rows() &&
           planes.cols() == o.planes.cols() && planes == o.planes;
  }

  template <typename To>
  HyperCube<To> cast() const {
    HyperCube<To> out;
    out.width = width;
    out.height = height;
    out.planes = planes.template cast<To>();
    return out;
  }
};

/// Unfolded cube: one spectral vector per row, pixels in row-major scan order.
template <typename Scalar>
struct PixelMatrix {
  Tensor<Scalar> values;
  Index width = 0;
  Index height = 0;

  Index pixels() const { return values.rows(); }
  Index bands() const { return values.cols(); }
};

/// L x l nonnegative matrix mapping an HSI spectrum (row) to MSI bands.
template <typename Scalar>
class SpectralResponse {
 public:
  using Matrix = Tensor<Scalar>;

  SpectralResponse() = default;
  explicit SpectralResponse(Matrix m) : matrix_(std::move(m)) { validate(); }

  Index hsi_bands() const { return matrix_.rows(); }
  Index msi_bands() const { return matrix_.cols(); }
  const Matrix &matrix() const { return matrix_; }

 private:
  void validate() const {
    if (matrix_.rows() <= matrix_.cols()) {
      throw ContractError("spectral response needs more HSI bands than MSI bands, got " +
                          numgrad::shape_string(matrix_));
    }
    if (!matrix_.allFinite() || (matrix_.array() < Scalar(0)).any()) {
      throw ContractError("spectral response entries must be finite and nonnegative");
    }
    for (Index c = 0; c < matrix_.cols(); ++c) {
      if (!(matrix_.col(c).array() > Scalar(0)).any()) {
        throw ContractError("spectral response column " + std::to_string(c) +
                            " has no positive entry");
      }
    }
  }

  Matrix matrix_;
};

/// Gaussian band-integration profiles: centers evenly spaced over [0, L-1],
/// sigma = L / (2 l), each column normalized to sum 1.
template <typename Scalar = double>
SpectralResponse<Scalar> gaussian_srf(Index hsi_bands, Index msi_bands) {
  if (msi_bands < 1 || hsi_bands <= msi_bands) {
    throw ContractError("gaussian_srf: need hsi_bands > msi_bands >= 1");
  }
  Tensor<Scalar> r(hsi_bands, msi_bands);
  const double sigma = double(hsi_bands) / (2.0 * double(msi_bands));
  for (Index c = 0; c < msi_bands; ++c) {
    const double center =
        msi_bands == 1 ? 0.5 * double(hsi_bands - 1)
                       : double(c) * double(hsi_bands - 1) / double(msi_bands - 1);
    for (Index b = 0; b < hsi_bands; ++b) {
      const double d = (double(b) - center) / sigma;
      r(b, c) = Scalar(std::exp(-0.5 * d * d));
    }
    r.col(c) /= r.col(c).sum();
  }
  return SpectralResponse<Scalar>(std::move(r));
}

// --- unfolding ----------------------------------------------------------------

template <typename Scalar>
PixelMatrix<Scalar> unfold(const HyperCube<Scalar> &cube) {
  return PixelMatrix<Scalar>{cube.planes.transpose(), cube.width, cube.height};
}

template <typename Scalar>
HyperCube<Scalar> fold(const Tensor<Scalar> &values, Index width, Index height) {
  if (width < 0 || height < 0 || values.rows() != width * height) {
    throw DimensionError("fold: " + std::to_string(values.rows()) + " pixels do not fill a " +
                         std::to_string(width) + "x" + std::to_string(height) + " grid");
  }
  HyperCube<Scalar> cube;
  cube.width = width;
  cube.height = height;
  cube.planes = values.transpose();
  return cube;
}

template <typename Scalar>
HyperCube<Scalar> fold(const PixelMatrix<Scalar> &m, Index width, Index height) {
  return fold(m.values, width, height);
}

template <typename Scalar>
HyperCube<Scalar> fold(const PixelMatrix<Scalar> &m) {
  return fold(m.values, m.width, m.height);
}

// --- degradation --------------------------------------------------------------

/// Mean over disjoint sr x sr blocks, per band.
template <typename Scalar>
HyperCube<Scalar> block_downsample(const HyperCube<Scalar> &cube, Index sr) {
  if (sr < 1) throw ContractError("block_downsample: factor must be >= 1");
  if (cube.width % sr != 0 || cube.height % sr != 0) {
    throw DimensionError("block_downsample: " + std::to_string(cube.width) + "x" +
                         std::to_string(cube.height) + " is not divisible by factor " +
                         std::to_string(sr));
  }
  const Index ow = cube.width / sr;
  const Index oh = cube.height / sr;
  HyperCube<Scalar> out(ow, oh, cube.bands());
  const Scalar inv = Scalar(1) / Scalar(sr * sr);
  for (Index b = 0; b < cube.bands(); ++b) {
    const auto p = cube.plane(b);
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        out(x, y, b) = p.block(y * sr, x * sr, sr, sr).sum() * inv;
      }
    }
  }
  return out;
}

/// Nearest-neighbour replication of every pixel into an sr x sr block.
template <typename Scalar>
HyperCube<Scalar> block_upsample(const HyperCube<Scalar> &cube, Index sr) {
  if (sr < 1) throw ContractError("block_upsample: factor must be >= 1");
  HyperCube<Scalar> out(cube.width * sr, cube.height * sr, cube.bands());
  for (Index b = 0; b < cube.bands(); ++b) {
    for (Index y = 0; y < out.height; ++y) {
      for (Index x = 0; x < out.width; ++x) out(x, y, b) = cube(x / sr, y / sr, b);
    }
  }
  return out;
}

template <typename Scalar>
PixelMatrix<Scalar> apply_srf(const PixelMatrix<Scalar> &m, const SpectralResponse<Scalar> &srf) {
  if (m.bands() != srf.hsi_bands()) {
    throw DimensionError("apply_srf: matrix has " + std::to_string(m.bands()) +
                         " bands, response expects " + std::to_string(srf.hsi_bands()));
  }
  return PixelMatrix<Scalar>{m.values * srf.matrix(), m.width, m.height};
}

template <typename Scalar>
HyperCube<Scalar> apply_srf(const HyperCube<Scalar> &cube, const SpectralResponse<Scalar> &srf) {
  return fold(apply_srf(unfold(cube), srf));
}

enum class Interpolation { kBilinear, kNearest };

struct RotateCropOptions {
  Interpolation interpolation = Interpolation::kBilinear;
};

namespace detail {

/// cos/sin with exact values on multiples of 90 degrees.
inline std::pair<double, double> exact_cos_sin(double degrees) {
  const double quarter = degrees / 90.0;
  if (quarter == std::floor(quarter) && std::abs(quarter) < 1e9) {
    const long long k = ((static_cast<long long>(quarter) % 4) + 4) % 4;
    constexpr double kCos[] = {1, 0, -1, 0};
    constexpr double kSin[] = {0, 1, 0, -1};
    return {kCos[k], kSin[k]};
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

inline Index crop_side(Index dim, double crop_area_frac) {
  return static_cast<Index>(std::floor(double(dim) * std::sqrt(1.0 - crop_area_frac) + 1e-12));
}

}  // namespace detail

/// Rotates every band by `degrees` about the cube center, applying the
/// standard rotation matrix in (x, y) pixel coordinates (clockwise on screen,
/// since y grows downwards), then keeps the centered window whose side is
/// floor(dim * sqrt(1 - crop_area_frac)), its center on the cube center even
/// when the parities differ. Output pixels are inverse-mapped.
/// Samples falling outside the source grid are invalid; a window containing
/// any invalid pixel is rejected.
template <typename Scalar>
HyperCube<Scalar> rotate_crop(const HyperCube<Scalar> &cube, double degrees, double crop_area_frac,
                               const RotateCropOptions &options = {}) {
  if (!(crop_area_frac >= 0.0 && crop_area_frac < 1.0)) {
    throw ContractError("rotate_crop: crop fraction must lie in [0, 1)");
  }
  const Index w = cube.width;
  const Index h = cube.height;
  const Index ow = detail::crop_side(w, crop_area_frac);
  const Index oh = detail::crop_side(h, crop_area_frac);
  if (ow < 1 || oh < 1) throw DegradationError("rotate_crop: crop leaves an empty window");
  const auto [c, s] = detail::exact_cos_sin(degrees);
  const double cx = 0.5 * double(w - 1);
  const double cy = 0.5 * double(h - 1);
  constexpr double kSnap = 1e-9;

  HyperCube<Scalar> out(ow, oh, cube.bands());
  for (Index oy = 0; oy < oh; ++oy) {
    for (Index ox = 0; ox < ow; ++ox) {
      const double dx = double(ox) - 0.5 * double(ow - 1);
      const double dy = double(oy) - 0.5 * double(oh - 1);
      // Inverse rotation maps the output location back onto the source grid.
      double sx = c * dx + s * dy + cx;
      double sy = -s * dx + c * dy + cy;
      if (std::abs(sx - std::round(sx)) < kSnap) sx = std::round(sx);
      if (std::abs(sy - std::round(sy)) < kSnap) sy = std::round(sy);
      if (sx < 0.0 || sy < 0.0 || sx > double(w - 1) || sy > double(h - 1)) {
        throw DegradationError("rotate_crop: output pixel (" + std::to_string(ox) + ", " +
                               std::to_string(oy) +
                               ") falls outside the rotated image; use a larger crop fraction");
      }
      if (options.interpolation == Interpolation::kNearest) {
        const Index nx = static_cast<Index>(std::lround(sx));
        const Index ny = static_cast<Index>(std::lround(sy));
        for (Index b = 0; b < cube.bands(); ++b) out(ox, oy, b) = cube(nx, ny, b);
        continue;
      }
      const Index ix = std::min(static_cast<Index>(std::floor(sx)), w - 1);
      const Index iy = std::min(static_cast<Index>(std::floor(sy)), h - 1);
      const double fx = sx - double(ix);
      const double fy = sy - double(iy);
      const Index jx = std::min(ix + 1, w - 1);
      const Index jy = std::min(iy + 1, h - 1);
      const Scalar w00 = Scalar((1 - fx) * (1 - fy));
      const Scalar w10 = Scalar(fx * (1 - fy));
      const Scalar w01 = Scalar((1 - fx) * fy);
      const Scalar w11 = Scalar(fx * fy);
      for (Index b = 0; b < cube.bands(); ++b) {
        Scalar v = w00 * cube(ix, iy, b);
        if (w10 != Scalar(0)) v += w10 * cube(jx, iy, b);
        if (w01 != Scalar(0)) v += w01 * cube(ix, jy, b);
        if (w11 != Scalar(0)) v += w11 * cube(jx, jy, b);
        out(ox, oy, b) = v;
      }
    }
  }
  return out;
}

// --- preprocessing --------------------------------------------------------------

template <typename Scalar>
struct Centered {
  PixelMatrix<Scalar> centered;
  /// 1 x bands per-band mean over all pixels.
  Tensor<Scalar> mean;
};

template <typename Scalar>
Centered<Scalar> zero_mean(const PixelMatrix<Scalar> &m) {
  if (m.pixels() < 1) throw ContractError("zero_mean: matrix has no pixels");
  Tensor<Scalar> mu = m.values.colwise().mean();
  PixelMatrix<Scalar> c{m.values.rowwise() - mu.row(0), m.width, m.height};
  return Centered<Scalar>{std::move(c), std::move(mu)};
}

template <typename Scalar>
PixelMatrix<Scalar> add_mean(const PixelMatrix<Scalar> &centered, const Tensor<Scalar> &mean) {
  if (mean.rows() != 1 || mean.cols() != centered.bands()) {
    throw DimensionError("add_mean: mean of shape " + numgrad::shape_string(mean) +
                         " does not match " + std::to_string(centered.bands()) + " bands");
  }
  return PixelMatrix<Scalar>{centered.values.rowwise() + mean.row(0), centered.width,
                             centered.height};
}

// --- synthetic scenes -------------------------------------------------------------

/// Parameters of a linear-mixing scene. Abundance fields are smoothed
/// Gaussian noise, standardized, exponentiated with `contrast` and normalized
/// per pixel, so each pixel is a convex combination of the endmember rows.
struct SceneSpec {
  Index width = 64;
  Index height = 64;
  /// c x L endmember spectra, one per row.
  Tensor<double> endmembers;
  Index blur_radius = 4;
  double contrast = 3.0;
  std::uint64_t seed = 0;

  Index endmember_count() const { return endmembers.rows(); }
};

struct Scene {
  HyperCube<double> cube;
  /// pixels x c abundance matrix; rows are nonnegative and sum to one.
  PixelMatrix<double> abundances;
};

/// Spectral angle in degrees between two rows.
template <typename DerivedA, typename DerivedB>
double spectral_angle_deg(const Eigen::MatrixBase<DerivedA> &a, const Eigen::MatrixBase<DerivedB> &b) {
  const double cosv = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(cosv, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

/// Smooth positive spectra (sums of Gaussian bumps over a floor) whose
/// pairwise spectral angles all exceed `min_angle_deg`.
Tensor<double> random_endmembers(Index count, Index bands, std::uint64_t seed,
                                 double min_angle_deg = 5.0);

/// Box blur with a (2r+1)^2 window, truncated at the borders.
Tensor<double> box_blur(const Tensor<double> &field, Index radius);

Scene synth_scene(const SceneSpec &spec);

}  // namespace specfuse
