#include "pmat/pipeline.hpp"

namespace pmat {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::raw: return "raw";
    case Stage::averaged: return "averaged";
    case Stage::upsampled: return "upsampled";
    case Stage::smoothed: return "smoothed";
  }
  return "raw";
}

Stage stage_from_string(const std::string& s) {
  for (auto st : {Stage::raw, Stage::averaged, Stage::upsampled, Stage::smoothed}) {
    if (to_string(st) == s) return st;
  }
  throw DataError("unknown pipeline stage '" + s + "'");
}

PressureField average_capture(std::span<const RawFrame> frames, const CalibrationCurve& curve,
                              const SensorLayout& layout) {
  if (frames.empty()) throw DataError("process_capture: no frames");
  if (curve.empty()) throw DataError("process_capture: calibration curve is empty");
  layout.validate();
  Eigen::VectorXd kpa;
  RawGrid grid;
  Eigen::ArrayXXd sum;
  for (const auto& frame : frames) {
    calibrate_into(curve, frame, kpa);
    reconstruct_into(layout, std::span<const double>(kpa.data(), kpa.size()), grid);
    if (sum.size() == 0) {
      sum = grid.values;
    } else {
      sum += grid.values;
    }
  }
  PressureField out = field_from_grid<double>(grid);
  out.values = sum / static_cast<double>(frames.size());
  out.provenance = {Stage::raw, Stage::averaged};
  out.frames_averaged = static_cast<int>(frames.size());
  return out;
}

PressureField process_capture(std::span<const RawFrame> frames, const CalibrationCurve& curve,
                              const SensorLayout& layout, const CaptureSpec& spec) {
  const PressureField averaged = average_capture(frames, curve, layout);
  return smooth(upsample_spline(averaged, spec.upsample_factor), spec.smoothing);
}

PressureField block_downsample(const PressureField& field, int factor) {
  if (factor < 1) throw DataError("block_downsample: factor must be >= 1");
  if (factor == 1) return field;
  PressureField out = field;
  const Eigen::Index rows = field.rows() / factor;
  const Eigen::Index cols = field.cols() / factor;
  out.values.resize(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      out.values(r, c) = field.values.block(r * factor, c * factor, factor, factor).mean();
    }
  }
  out.pitch_cm = field.pitch_cm * factor;
  out.origin_cm = field.origin_cm + Eigen::Vector2d::Constant(0.5 * (out.pitch_cm - field.pitch_cm));
  return out;
}

}  // namespace pmat
