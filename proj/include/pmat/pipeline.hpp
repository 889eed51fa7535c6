#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmat/calibration.hpp"
#include "pmat/error.hpp"
#include "pmat/geometry.hpp"

namespace pmat {

enum class Stage { raw = 0, averaged = 1, upsampled = 2, smoothed = 3 };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& s);

/// Calibrated pressure image on a uniform grid. Cell (r, c) is centred at
/// origin_cm + pitch_cm * (c, r); rows run along y.
template <typename Scalar>
struct BasicPressureField {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Array values;
  double pitch_cm = 0.5;
  Eigen::Vector2d origin_cm = Eigen::Vector2d::Zero();
  std::vector<Stage> provenance{Stage::raw};
  int frames_averaged = 1;
  /// Cells whose spline value went negative and were clamped to zero.
  Eigen::Index clamped_cells = 0;
  std::vector<std::string> notes;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  Stage stage() const { return provenance.back(); }
  Eigen::Vector2d cell_center(Eigen::Index r, Eigen::Index c) const {
    return origin_cm + pitch_cm * Eigen::Vector2d(static_cast<double>(c), static_cast<double>(r));
  }
};

using PressureField = BasicPressureField<double>;

template <typename Scalar>
BasicPressureField<Scalar> field_from_grid(const RawGrid& grid) {
  BasicPressureField<Scalar> f;
  f.values = grid.values.cast<Scalar>();
  f.pitch_cm = grid.pitch_cm;
  f.origin_cm = grid.origin_cm;
  return f;
}

namespace detail {

template <typename Scalar>
void require_stage_at_most(const BasicPressureField<Scalar>& f, Stage next, const char* op) {
  if (static_cast<int>(f.stage()) > static_cast<int>(next)) {
    throw StageOrderError(std::string(op) + ": input already went through the " + to_string(f.stage()) +
                          " stage");
  }
}

// Catmull-Rom weights for the four samples around fractional offset t in [0, 1).
template <typename Scalar>
std::array<Scalar, 4> catmull_rom_weights(Scalar t) {
  const Scalar t2 = t * t;
  const Scalar t3 = t2 * t;
  return {Scalar(0.5) * (-t3 + 2 * t2 - t), Scalar(0.5) * (3 * t3 - 5 * t2 + 2),
          Scalar(0.5) * (-3 * t3 + 4 * t2 + t), Scalar(0.5) * (t3 - t2)};
}

// Resamples one axis. Samples beyond the border are extended linearly so that
// constants and ramps survive all the way to the edge.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> resample_rows(
    const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& in, int factor, bool cubic) {
  const Eigen::Index n = in.rows();
  const Eigen::Index m = n * factor;
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(m, in.cols());
  auto sample = [&](Eigen::Index i, Eigen::Index col) -> Scalar {
    if (i < 0) return in(0, col) + Scalar(i) * (in(1, col) - in(0, col));
    if (i >= n) return in(n - 1, col) + Scalar(i - n + 1) * (in(n - 1, col) - in(n - 2, col));
    return in(i, col);
  };
  for (Eigen::Index j = 0; j < m; ++j) {
    const double x = (static_cast<double>(j) + 0.5) / factor - 0.5;
    const double fl = std::floor(x);
    const auto i0 = static_cast<Eigen::Index>(fl);
    const Scalar t = Scalar(x - fl);
    if (cubic) {
      const auto w = catmull_rom_weights<Scalar>(t);
      for (Eigen::Index col = 0; col < in.cols(); ++col) {
        out(j, col) = w[0] * sample(i0 - 1, col) + w[1] * sample(i0, col) + w[2] * sample(i0 + 1, col) +
                      w[3] * sample(i0 + 2, col);
      }
    } else {
      for (Eigen::Index col = 0; col < in.cols(); ++col) {
        out(j, col) = (Scalar(1) - t) * sample(i0, col) + t * sample(i0 + 1, col);
      }
    }
  }
  return out;
}

inline Eigen::Index reflect101(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace detail

/// Element-wise arithmetic mean of same-shaped fields.
template <typename Scalar>
BasicPressureField<Scalar> average_frames(std::span<const BasicPressureField<Scalar>> fields) {
  if (fields.empty()) throw DataError("average_frames: need at least one field");
  const auto& first = fields.front();
  BasicPressureField<Scalar> out;
  out.values = BasicPressureField<Scalar>::Array::Zero(first.rows(), first.cols());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    detail::require_stage_at_most(f, Stage::averaged, "average_frames");
    if (f.rows() != first.rows() || f.cols() != first.cols() || f.pitch_cm != first.pitch_cm ||
        f.origin_cm != first.origin_cm) {
      throw DataError("average_frames: field " + std::to_string(i) + " differs in shape, pitch or origin");
    }
    out.values += f.values;
  }
  out.values /= static_cast<Scalar>(fields.size());
  out.pitch_cm = first.pitch_cm;
  out.origin_cm = first.origin_cm;
  out.provenance = {Stage::raw, Stage::averaged};
  out.frames_averaged = static_cast<int>(fields.size());
  return out;
}

/// Separable Catmull-Rom upsampling onto a grid `factor` times finer in each
/// axis. Output cells subdivide input cells, so the output origin moves to the
/// centre of the first sub-cell. Falls back to bilinear below 4x4.
template <typename Scalar>
BasicPressureField<Scalar> upsample_spline(const BasicPressureField<Scalar>& field, int factor = 10) {
  if (factor < 1) throw DataError("upsample_spline: factor must be >= 1");
  detail::require_stage_at_most(field, Stage::upsampled, "upsample_spline");
  BasicPressureField<Scalar> out = field;
  out.provenance.push_back(Stage::upsampled);
  if (factor == 1) return out;
  if (field.rows() < 2 || field.cols() < 2) throw DataError("upsample_spline: field must be at least 2x2");
  const bool cubic = field.rows() >= 4 && field.cols() >= 4;
  if (!cubic) out.notes.push_back("upsample: field smaller than 4x4, used bilinear interpolation");

  auto tall = detail::resample_rows<Scalar>(field.values, factor, cubic);
  typename BasicPressureField<Scalar>::Array t = tall.transpose();
  out.values = detail::resample_rows<Scalar>(t, factor, cubic).transpose();

  Eigen::Index clamped = 0;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    if (out.values(i) < Scalar(0)) {
      out.values(i) = Scalar(0);
      ++clamped;
    }
  }
  out.clamped_cells += clamped;
  out.pitch_cm = field.pitch_cm / factor;
  out.origin_cm = field.origin_cm - Eigen::Vector2d::Constant(0.5 * field.pitch_cm - 0.5 * out.pitch_cm);
  return out;
}

struct SmoothingSpec {
  int kernel_size = 5;
  double sigma = 0.8;

  void validate() const {
    if (kernel_size < 1 || kernel_size % 2 == 0) throw DataError("smoothing: kernel_size must be odd and positive");
    if (!(sigma > 0.0)) throw DataError("smoothing: sigma must be > 0");
  }
};

/// Isotropic Gaussian sampled at integer offsets, before normalisation.
template <typename Scalar = double>
Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_kernel_raw(const SmoothingSpec& spec) {
  spec.validate();
  const int h = spec.kernel_size / 2;
  const Scalar s2 = Scalar(spec.sigma * spec.sigma);
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(spec.kernel_size, spec.kernel_size);
  for (int y = -h; y <= h; ++y) {
    for (int x = -h; x <= h; ++x) {
      k(y + h, x + h) =
          std::exp(-Scalar(x * x + y * y) / (2 * s2)) / (Scalar(2) * std::numbers::pi_v<Scalar> * s2);
    }
  }
  return k;
}

/// Unit-sum Gaussian kernel.
template <typename Scalar = double>
Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_kernel(const SmoothingSpec& spec) {
  auto k = gaussian_kernel_raw<Scalar>(spec);
  return k / k.sum();
}

/// 2-D correlation with the unit-sum Gaussian, reflect-101 at the borders.
template <typename Scalar>
BasicPressureField<Scalar> smooth(const BasicPressureField<Scalar>& field, const SmoothingSpec& spec = {}) {
  const auto k = gaussian_kernel<Scalar>(spec);
  const int h = spec.kernel_size / 2;
  if (field.rows() <= spec.kernel_size || field.cols() <= spec.kernel_size) {
    throw DataError("smooth: field must be larger than the kernel");
  }
  BasicPressureField<Scalar> out = field;
  out.provenance.push_back(Stage::smoothed);
  const Eigen::Index rows = field.rows();
  const Eigen::Index cols = field.cols();
  const auto& in = field.values;
  for (Eigen::Index c = 0; c < cols; ++c) {
    const bool interior_c = c >= h && c + h < cols;
    for (Eigen::Index r = 0; r < rows; ++r) {
      Scalar acc = 0;
      if (interior_c && r >= h && r + h < rows) {
        for (int dx = -h; dx <= h; ++dx) {
          for (int dy = -h; dy <= h; ++dy) acc += k(dy + h, dx + h) * in(r + dy, c + dx);
        }
      } else {
        for (int dx = -h; dx <= h; ++dx) {
          const auto cc = detail::reflect101(c + dx, cols);
          for (int dy = -h; dy <= h; ++dy) acc += k(dy + h, dx + h) * in(detail::reflect101(r + dy, rows), cc);
        }
      }
      out.values(r, c) = acc;
    }
  }
  return out;
}

struct CaptureSpec {
  int upsample_factor = 10;
  SmoothingSpec smoothing;
};

/// calibrate -> reconstruct -> average -> upsample -> smooth.
PressureField process_capture(std::span<const RawFrame> frames, const CalibrationCurve& curve,
                              const SensorLayout& layout, const CaptureSpec& spec = {});

/// Average of calibrated, reconstructed frames (the first two stages of process_capture).
PressureField average_capture(std::span<const RawFrame> frames, const CalibrationCurve& curve,
                              const SensorLayout& layout);

/// Pixel-count downsampling by block averaging; used for live previews.
PressureField block_downsample(const PressureField& field, int factor);

}  // namespace pmat
