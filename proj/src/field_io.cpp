#include "pmat/field_io.hpp"

#include <png.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "pmat/json_util.hpp"

namespace pmat {

nlohmann::json field_header(const PressureField& field, const std::string& data_file) {
  auto prov = nlohmann::json::array();
  for (auto s : field.provenance) prov.push_back(to_string(s));
  return {{"rows", field.rows()},
          {"cols", field.cols()},
          {"pitch_cm", field.pitch_cm},
          {"origin_cm", field.origin_cm},
          {"units", "kPa"},
          {"provenance", prov},
          {"frames_averaged", field.frames_averaged},
          {"clamped_cells", field.clamped_cells},
          {"layout", "row-major float32 little-endian"},
          {"data", data_file}};
}

void write_field(const PressureField& field, const std::filesystem::path& json_path) {
  auto data_path = json_path;
  data_path.replace_extension(".f32");
  {
    std::ofstream out(json_path);
    if (!out) throw DataError("cannot write " + json_path.string());
    out << field_header(field, data_path.filename().string()).dump(2) << "\n";
  }
  std::ofstream bin(data_path, std::ios::binary);
  if (!bin) throw DataError("cannot write " + data_path.string());
  std::vector<unsigned char> buf(static_cast<std::size_t>(field.values.size()) * 4);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < field.rows(); ++r) {
    for (Eigen::Index c = 0; c < field.cols(); ++c) {
      const float v = static_cast<float>(field.values(r, c));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      for (int b = 0; b < 4; ++b) buf[k++] = static_cast<unsigned char>(bits >> (8 * b));
    }
  }
  bin.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

PressureField read_field(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw DataError("cannot read " + json_path.string());
  nlohmann::json h;
  try {
    in >> h;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }
  PressureField f;
  const auto rows = h.at("rows").get<Eigen::Index>();
  const auto cols = h.at("cols").get<Eigen::Index>();
  f.pitch_cm = h.at("pitch_cm").get<double>();
  f.origin_cm = h.at("origin_cm").get<Eigen::Vector2d>();
  f.provenance.clear();
  for (const auto& s : h.at("provenance")) f.provenance.push_back(stage_from_string(s.get<std::string>()));
  f.frames_averaged = h.value("frames_averaged", 1);
  f.clamped_cells = h.value("clamped_cells", Eigen::Index{0});
  std::ifstream bin(json_path.parent_path() / h.at("data").get<std::string>(), std::ios::binary);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows * cols) * 4);
  if (!bin.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw DataError("field sidecar is shorter than rows*cols floats");
  }
  f.values.resize(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[k++]) << (8 * b);
      float v;
      std::memcpy(&v, &bits, 4);
      f.values(r, c) = v;
    }
  }
  return f;
}

namespace {

// Coarse samples of a viridis-like ramp, interpolated linearly.
constexpr std::array<std::array<double, 3>, 6> kRamp{{{68, 1, 84},
                                                       {65, 68, 135},
                                                       {42, 120, 142},
                                                       {34, 168, 132},
                                                       {122, 209, 81},
                                                       {253, 231, 37}}};

std::array<png_byte, 3> colour(double t) {
  t = std::clamp(t, 0.0, 1.0) * (kRamp.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), kRamp.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<png_byte, 3> out{};
  for (int ch = 0; ch < 3; ++ch) {
    out[ch] = static_cast<png_byte>(std::lround(kRamp[i][ch] * (1 - f) + kRamp[i + 1][ch] * f));
  }
  return out;
}

}  // namespace

void write_heatmap_png(const PressureField& field, const std::filesystem::path& path, std::optional<double> max_kpa) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  const double top = max_kpa.value_or(field.values.maxCoeff());
  const double scale = top > 0.0 ? 1.0 / top : 0.0;
  const auto w = static_cast<png_uint_32>(field.cols());
  const auto h = static_cast<png_uint_32>(field.rows());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
  // Image rows go top to bottom, field rows bottom (y = 0) to top.
  for (Eigen::Index r = field.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < field.cols(); ++c) {
      const auto rgb = colour(field.values(r, c) * scale);
      std::copy(rgb.begin(), rgb.end(), row.begin() + 3 * c);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace pmat
