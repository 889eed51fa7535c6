#include "pmat/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pmat/error.hpp"
#include "pmat/json_util.hpp"

namespace pmat {

namespace {

constexpr Eigen::Index kBlockSide = 2 * kLatticeSide;  // half-pitch cells per panel side

bool is_multiple(double value, double step) {
  const double q = value / step;
  return std::abs(q - std::round(q)) < 1e-9;
}

}  // namespace

void SensorLayout::validate() const {
  if (!(pitch_cm > 0.0) || !std::isfinite(pitch_cm)) {
    throw DataError("layout: pitch_cm must be positive, got " + std::to_string(pitch_cm));
  }
  const double half = 0.5 * pitch_cm;
  if (std::abs(lattice_offset_cm.x() - half) > 1e-9 || std::abs(lattice_offset_cm.y() - half) > 1e-9) {
    throw DataError("layout: lattice offset must be half a pitch in both axes");
  }
  for (int p = 0; p < kPanels; ++p) {
    const auto& o = panel_origin_cm[p] - panel_origin_cm[0];
    if (!is_multiple(o.x(), half) || !is_multiple(o.y(), half)) {
      throw DataError("layout: panel " + std::to_string(p) + " origin is off the half-pitch grid");
    }
  }
  // Each panel occupies a square of side 16 * pitch; panels must not overlap.
  const double side = kLatticeSide * pitch_cm;
  for (int a = 0; a < kPanels; ++a) {
    for (int b = a + 1; b < kPanels; ++b) {
      const Eigen::Vector2d d = (panel_origin_cm[a] - panel_origin_cm[b]).cwiseAbs();
      if (d.x() < side - 1e-9 && d.y() < side - 1e-9) {
        throw DataError("layout: panels " + std::to_string(a) + " and " + std::to_string(b) + " overlap");
      }
    }
  }
}

ChannelAddress SensorLayout::address(int channel) const {
  if (channel < 0 || channel >= kChannels) {
    throw DataError("channel " + std::to_string(channel) + " out of range [0, " + std::to_string(kChannels) + ")");
  }
  ChannelAddress a;
  a.col = channel % kLatticeSide;
  a.row = (channel / kLatticeSide) % kLatticeSide;
  a.lattice = (channel / kChannelsPerLattice) % kLatticesPerPanel;
  a.panel = channel / (kChannelsPerLattice * kLatticesPerPanel);
  return a;
}

int SensorLayout::channel(const ChannelAddress& a) const {
  if (a.panel < 0 || a.panel >= kPanels || a.lattice < 0 || a.lattice >= kLatticesPerPanel || a.row < 0 ||
      a.row >= kLatticeSide || a.col < 0 || a.col >= kLatticeSide) {
    throw DataError("channel address out of range");
  }
  return ((a.panel * kLatticesPerPanel + a.lattice) * kLatticeSide + a.row) * kLatticeSide + a.col;
}

Eigen::Vector2d SensorLayout::grid_origin() const {
  Eigen::Vector2d lo = panel_origin_cm[0];
  for (const auto& o : panel_origin_cm) lo = lo.cwiseMin(o);
  return lo;
}

std::array<Eigen::Index, 2> SensorLayout::panel_block_origin(int panel) const {
  const Eigen::Vector2d d = (panel_origin_cm[panel] - grid_origin()) / cell_pitch();
  return {static_cast<Eigen::Index>(std::llround(d.y())), static_cast<Eigen::Index>(std::llround(d.x()))};
}

Eigen::Index SensorLayout::grid_rows() const {
  Eigen::Index rows = 0;
  for (int p = 0; p < kPanels; ++p) rows = std::max(rows, panel_block_origin(p)[0] + kBlockSide);
  return rows;
}

Eigen::Index SensorLayout::grid_cols() const {
  Eigen::Index cols = 0;
  for (int p = 0; p < kPanels; ++p) cols = std::max(cols, panel_block_origin(p)[1] + kBlockSide);
  return cols;
}

Eigen::Vector2d channel_to_position(const SensorLayout& layout, int channel) {
  const ChannelAddress a = layout.address(channel);
  Eigen::Vector2d p = layout.panel_origin_cm[a.panel] + layout.pitch_cm * Eigen::Vector2d(a.col, a.row);
  if (a.lattice == 1) p += layout.lattice_offset_cm;
  return p;
}

Eigen::Matrix2Xd sensor_positions(const SensorLayout& layout) {
  Eigen::Matrix2Xd out(2, kChannels);
  for (int ch = 0; ch < kChannels; ++ch) out.col(ch) = channel_to_position(layout, ch);
  return out;
}

void reconstruct_into(const SensorLayout& layout, std::span<const double> values, RawGrid& out) {
  const Eigen::Index rows = layout.grid_rows();
  const Eigen::Index cols = layout.grid_cols();
  if (out.values.rows() != rows || out.values.cols() != cols) {
    out.values.resize(rows, cols);
    out.fill_mask.resize(rows, cols);
  }
  out.values.setZero();
  out.fill_mask.setConstant(CellKind::outside);
  out.pitch_cm = layout.cell_pitch();
  out.origin_cm = layout.grid_origin();

  for (int panel = 0; panel < kPanels; ++panel) {
    const auto [r0, c0] = layout.panel_block_origin(panel);
    auto block = out.values.block(r0, c0, kBlockSide, kBlockSide);
    auto mask = out.fill_mask.block(r0, c0, kBlockSide, kBlockSide);
    // Lattice 0 lands on (even, even) cells, lattice 1 on (odd, odd).
    for (int lattice = 0; lattice < kLatticesPerPanel; ++lattice) {
      const int base = (panel * kLatticesPerPanel + lattice) * kChannelsPerLattice;
      for (int row = 0; row < kLatticeSide; ++row) {
        for (int col = 0; col < kLatticeSide; ++col) {
          const Eigen::Index r = 2 * row + lattice;
          const Eigen::Index c = 2 * col + lattice;
          block(r, c) = values[base + row * kLatticeSide + col];
          mask(r, c) = CellKind::direct;
        }
      }
    }
    // Holes are the mixed-parity cells; their 4-neighbours in the dense grid
    // are the nearest sensors of both lattices (all at half a pitch).
    for (Eigen::Index r = 0; r < kBlockSide; ++r) {
      for (Eigen::Index c = (r + 1) % 2; c < kBlockSide; c += 2) {
        double sum = 0.0;
        int n = 0;
        if (r > 0) sum += block(r - 1, c), ++n;
        if (r + 1 < kBlockSide) sum += block(r + 1, c), ++n;
        if (c > 0) sum += block(r, c - 1), ++n;
        if (c + 1 < kBlockSide) sum += block(r, c + 1), ++n;
        block(r, c) = sum / n;
        mask(r, c) = CellKind::interpolated;
      }
    }
  }
}

RawGrid reconstruct_grid(const SensorLayout& layout, std::span<const double> values) {
  layout.validate();
  if (values.size() != static_cast<std::size_t>(kChannels)) {
    throw DataError("reconstruct_grid: expected " + std::to_string(kChannels) + " values, got " +
                    std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) {
      throw DataError("reconstruct_grid: value at channel " + std::to_string(i) + " is negative or non-finite");
    }
  }
  RawGrid grid;
  reconstruct_into(layout, values, grid);
  return grid;
}

void to_json(nlohmann::json& j, const SensorLayout& layout) {
  j = nlohmann::json{
      {"panels", kPanels},
      {"lattices_per_panel", kLatticesPerPanel},
      {"lattice_dims", {kLatticeSide, kLatticeSide}},
      {"pitch_cm", layout.pitch_cm},
      {"lattice_offset_cm", layout.lattice_offset_cm},
      {"panel_origin_cm", {layout.panel_origin_cm[0], layout.panel_origin_cm[1]}},
      {"channels", kChannels},
      {"channel_order", "panel,lattice,row,col"},
  };
}

void from_json(const nlohmann::json& j, SensorLayout& layout) {
  if (j.value("panels", kPanels) != kPanels || j.value("lattices_per_panel", kLatticesPerPanel) != kLatticesPerPanel) {
    throw DataError("layout: only the 2-panel, 2-lattice configuration is supported");
  }
  if (j.contains("lattice_dims") && j.at("lattice_dims") != nlohmann::json{kLatticeSide, kLatticeSide}) {
    throw DataError("layout: lattice_dims must be [16, 16]");
  }
  SensorLayout out;
  out.pitch_cm = j.value("pitch_cm", out.pitch_cm);
  out.lattice_offset_cm = j.value("lattice_offset_cm", Eigen::Vector2d(0.5 * out.pitch_cm, 0.5 * out.pitch_cm));
  if (j.contains("panel_origin_cm")) {
    const auto& origins = j.at("panel_origin_cm");
    if (!origins.is_array() || origins.size() != kPanels) throw DataError("layout: panel_origin_cm needs 2 entries");
    for (int p = 0; p < kPanels; ++p) out.panel_origin_cm[p] = origins[p].get<Eigen::Vector2d>();
  } else {
    out.panel_origin_cm[1] = Eigen::Vector2d(kLatticeSide * out.pitch_cm, 0.0);
  }
  out.validate();
  layout = out;
}

}  // namespace pmat
