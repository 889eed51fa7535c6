#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "pmat/pipeline.hpp"

namespace pmat {

/// Grid header: {"rows", "cols", "pitch_cm", "origin_cm", "units", "provenance",
/// "frames_averaged", "clamped_cells", "data"}; "data" names the sidecar file
/// of row-major little-endian float32 values.
nlohmann::json field_header(const PressureField& field, const std::string& data_file);

/// Writes `<stem>.json` and `<stem>.f32` next to each other.
void write_field(const PressureField& field, const std::filesystem::path& json_path);
PressureField read_field(const std::filesystem::path& json_path);

/// Heatmap PNG for display. Values map linearly from 0 to `max_kpa`
/// (defaults to the field maximum) through a perceptual ramp.
void write_heatmap_png(const PressureField& field, const std::filesystem::path& path,
                       std::optional<double> max_kpa = std::nullopt);

}  // namespace pmat
