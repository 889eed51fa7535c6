#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace pmat {

inline constexpr int kPanels = 2;
inline constexpr int kLatticesPerPanel = 2;
inline constexpr int kLatticeSide = 16;
inline constexpr int kChannelsPerLattice = kLatticeSide * kLatticeSide;
inline constexpr int kChannels = kPanels * kLatticesPerPanel * kChannelsPerLattice;  // 1024

struct ChannelAddress {
  int panel = 0;
  int lattice = 0;
  int row = 0;
  int col = 0;

  friend bool operator==(const ChannelAddress&, const ChannelAddress&) = default;
};

/// Composite mat: two panels, each an overlay of two 16x16 square lattices
/// where the second lattice is shifted by half a pitch in x and y, so every
/// offset sensor sits at the centroid of four sensors of the first lattice.
///
/// Channels are numbered panel-major, then lattice, then row-major within
/// the lattice: channel = ((panel * 2 + lattice) * 16 + row) * 16 + col.
struct SensorLayout {
  double pitch_cm = 1.0;
  Eigen::Vector2d lattice_offset_cm{0.5, 0.5};
  std::array<Eigen::Vector2d, kPanels> panel_origin_cm{Eigen::Vector2d{0.0, 0.0},
                                                       Eigen::Vector2d{16.0, 0.0}};

  /// Throws DataError if the lattices do not form a quincunx or panels overlap.
  void validate() const;

  ChannelAddress address(int channel) const;
  int channel(const ChannelAddress& address) const;

  // Dense half-pitch grid covering all panels. Cell (r, c) has its center at
  // grid_origin() + cell_pitch() * (c, r).
  double cell_pitch() const { return 0.5 * pitch_cm; }
  Eigen::Vector2d grid_origin() const;
  Eigen::Index grid_rows() const;
  Eigen::Index grid_cols() const;
  /// Top-left cell of a panel's 32x32 block in the dense grid.
  std::array<Eigen::Index, 2> panel_block_origin(int panel) const;
};

Eigen::Vector2d channel_to_position(const SensorLayout& layout, int channel);

/// 2 x 1024 matrix of sensor centers, column i is channel i.
Eigen::Matrix2Xd sensor_positions(const SensorLayout& layout);

enum class CellKind : std::uint8_t { direct, interpolated, outside };

using CellKindArray = Eigen::Array<CellKind, Eigen::Dynamic, Eigen::Dynamic>;

/// Reconstructed image on the dense half-pitch grid; rows run along y.
struct RawGrid {
  Eigen::ArrayXXd values;
  CellKindArray fill_mask;
  double pitch_cm = 0.5;
  Eigen::Vector2d origin_cm = Eigen::Vector2d::Zero();
};

/// Places each channel on its grid cell and fills the quincunx holes with the
/// mean of their nearest direct neighbours (2 to 4 of them, same panel only).
RawGrid reconstruct_grid(const SensorLayout& layout, std::span<const double> channel_values);

/// Same as reconstruct_grid but skips input validation; used on hot paths
/// where values come straight from calibration.
void reconstruct_into(const SensorLayout& layout, std::span<const double> channel_values, RawGrid& out);

void to_json(nlohmann::json& j, const SensorLayout& layout);
void from_json(const nlohmann::json& j, SensorLayout& layout);

}  // namespace pmat
