#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ksc/errors.hpp"

namespace ksc {

/// Rectangular single-band grid. Values are row-major reals (DN, radiance,
/// reflectance, probability or label codes); NaN is the only nodata marker.
/// Grids are immutable by convention once handed to an operation; every
/// operation here is a pure function of its inputs.
struct RasterGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double pixel_size = 1.0;          // meters, square pixels
  double origin_x = 0.0;            // easting of the (0,0) pixel corner
  double origin_y = 0.0;            // northing of the (0,0) pixel corner
  std::vector<double> values;       // rows*cols, row-major

  RasterGrid() = default;
  RasterGrid(std::size_t r, std::size_t c, double fill = 0.0, double psize = 1.0)
      : rows(r), cols(c), pixel_size(psize), values(r * c, fill) {
    check();
  }

  void check() const {
    if (rows < 1 || cols < 1) throw validation_error("RasterGrid: rows and cols must be >= 1");
    if (!(pixel_size > 0.0)) throw validation_error("RasterGrid: pixel_size must be > 0");
    if (values.size() != rows * cols)
      throw validation_error("RasterGrid: values length != rows*cols");
  }

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  /// Center coordinates of pixel (r, c). The row axis increases northing;
  /// only pair distances matter downstream, so the orientation is a pure
  /// bookkeeping convention.
  double center_x(std::size_t c) const { return origin_x + (static_cast<double>(c) + 0.5) * pixel_size; }
  double center_y(std::size_t r) const { return origin_y + (static_cast<double>(r) + 0.5) * pixel_size; }

  bool same_geometry(const RasterGrid& o, double tol = 1e-9) const {
    return rows == o.rows && cols == o.cols &&
           std::abs(pixel_size - o.pixel_size) <= tol * std::max(1.0, pixel_size) &&
           std::abs(origin_x - o.origin_x) <= tol * std::max(1.0, std::abs(origin_x)) &&
           std::abs(origin_y - o.origin_y) <= tol * std::max(1.0, std::abs(origin_y));
  }

  /// Arithmetic mean over non-NaN values; NaN when there are none.
  double mean_valid() const {
    double s = 0.0;
    std::size_t n = 0;
    for (double v : values)
      if (!std::isnan(v)) { s += v; ++n; }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Pixel sample type of the on-disk raster format.
enum class RasterDtype { u8, f32 };

inline std::size_t dtype_size(RasterDtype t) { return t == RasterDtype::u8 ? 1 : 4; }

inline std::string dtype_name(RasterDtype t) { return t == RasterDtype::u8 ? "u8" : "f32"; }

inline RasterDtype dtype_from_name(const std::string& s) {
  if (s == "u8") return RasterDtype::u8;
  if (s == "f32") return RasterDtype::f32;
  throw format_error("unknown dtype '" + s + "' (expected u8 or f32)");
}

/// Declared shape of a band-sequential raw data file.
struct RasterHeader {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t bands = 0;
  RasterDtype dtype = RasterDtype::f32;
  double pixel_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<std::pair<double, double>> band_windows; // (low_nm, high_nm) per band
};

/// Ordered multi-band stack; all bands share geometry.
struct BandStack {
  std::vector<RasterGrid> bands;
  std::vector<std::pair<double, double>> band_windows;

  void check() const {
    if (bands.empty()) throw validation_error("BandStack: empty band list");
    if (band_windows.size() != bands.size())
      throw validation_error("BandStack: band_windows length != bands length");
    bands.front().check();
    for (const auto& b : bands) {
      b.check();
      if (!b.same_geometry(bands.front()))
        throw validation_error("BandStack: bands disagree on geometry");
    }
    for (const auto& [lo, hi] : band_windows)
      if (!(lo < hi)) throw validation_error("BandStack: band window low_nm must be < high_nm");
  }

  std::size_t rows() const { return bands.front().rows; }
  std::size_t cols() const { return bands.front().cols; }
  double pixel_size() const { return bands.front().pixel_size; }
};

namespace detail {

inline void put_le_f32(std::string& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline float get_le_f32(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace detail

/// Parse a `key = value` header file.
inline RasterHeader read_raster_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open header file: " + path);
  RasterHeader h;
  std::vector<double> lows, highs;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(val);
    try {
      if (key == "rows") h.rows = std::stoull(val);
      else if (key == "cols") h.cols = std::stoull(val);
      else if (key == "bands") h.bands = std::stoull(val);
      else if (key == "dtype") h.dtype = dtype_from_name(val);
      else if (key == "pixel_size") h.pixel_size = std::stod(val);
      else if (key == "origin_easting") h.origin_x = std::stod(val);
      else if (key == "origin_northing") h.origin_y = std::stod(val);
      else if (key == "band_low_nm") lows.push_back(std::stod(val));
      else if (key == "band_high_nm") highs.push_back(std::stod(val));
      // unknown keys are ignored
    } catch (const std::invalid_argument&) {
      throw format_error("header " + path + ": bad value for key '" + key + "'");
    }
  }
  if (h.rows < 1 || h.cols < 1 || h.bands < 1)
    throw format_error("header " + path + ": rows, cols and bands must all be >= 1");
  if (!(h.pixel_size > 0.0)) throw format_error("header " + path + ": pixel_size must be > 0");
  if (lows.size() != highs.size())
    throw format_error("header " + path + ": band_low_nm/band_high_nm count mismatch");
  if (!lows.empty() && lows.size() != h.bands)
    throw format_error("header " + path + ": band window count != bands");
  for (std::size_t i = 0; i < lows.size(); ++i) h.band_windows.emplace_back(lows[i], highs[i]);
  // Windows default to 1-nm slots so a stack is always constructible.
  for (std::size_t i = lows.size(); i < h.bands; ++i)
    h.band_windows.emplace_back(static_cast<double>(i), static_cast<double>(i) + 1.0);
  return h;
}

/// Read a band-sequential little-endian raw file against a declared header.
/// u8 values widen to real; f32 widens exactly to double.
inline BandStack load_raster(const std::string& data_path, const RasterHeader& h) {
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw io_error("cannot open data file: " + data_path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = h.rows * h.cols * h.bands * dtype_size(h.dtype);
  if (bytes.size() != expected)
    throw format_error("data file " + data_path + ": " + std::to_string(bytes.size()) +
                       " bytes, header declares " + std::to_string(expected));

  BandStack stack;
  stack.band_windows = h.band_windows;
  for (std::size_t i = stack.band_windows.size(); i < h.bands; ++i)
    stack.band_windows.emplace_back(static_cast<double>(i), static_cast<double>(i) + 1.0);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t px = h.rows * h.cols;
  for (std::size_t b = 0; b < h.bands; ++b) {
    RasterGrid g(h.rows, h.cols, 0.0, h.pixel_size);
    g.origin_x = h.origin_x;
    g.origin_y = h.origin_y;
    if (h.dtype == RasterDtype::u8) {
      for (std::size_t i = 0; i < px; ++i) g.values[i] = static_cast<double>(p[b * px + i]);
    } else {
      for (std::size_t i = 0; i < px; ++i)
        g.values[i] = static_cast<double>(detail::get_le_f32(p + (b * px + i) * 4));
    }
    stack.bands.push_back(std::move(g));
  }
  stack.check();
  return stack;
}

/// Convenience form: `base` names a header/data pair `base.hdr` + `base.bin`.
inline BandStack load_raster(const std::string& base) {
  return load_raster(base + ".bin", read_raster_header(base + ".hdr"));
}

/// Write `base.hdr` + `base.bin`. f32 is the default dtype; u8 requires all
/// values to be integers in [0, 255] (NaN is not representable in u8).
inline void save_raster(const BandStack& stack, const std::string& base,
                        RasterDtype dtype = RasterDtype::f32) {
  stack.check();
  const auto& g0 = stack.bands.front();

  std::ostringstream hdr;
  hdr << "ksc_raster = 1\n";
  hdr << "rows = " << g0.rows << "\n";
  hdr << "cols = " << g0.cols << "\n";
  hdr << "bands = " << stack.bands.size() << "\n";
  hdr << "dtype = " << dtype_name(dtype) << "\n";
  hdr << "pixel_size = " << detail::format_double(g0.pixel_size) << "\n";
  hdr << "origin_easting = " << detail::format_double(g0.origin_x) << "\n";
  hdr << "origin_northing = " << detail::format_double(g0.origin_y) << "\n";
  for (const auto& [lo, hi] : stack.band_windows) {
    hdr << "band_low_nm = " << detail::format_double(lo) << "\n";
    hdr << "band_high_nm = " << detail::format_double(hi) << "\n";
  }
  {
    std::ofstream out(base + ".hdr");
    if (!out) throw io_error("cannot write header file: " + base + ".hdr");
    out << hdr.str();
    if (!out) throw io_error("write failed: " + base + ".hdr");
  }

  std::string bytes;
  bytes.reserve(stack.bands.size() * g0.values.size() * dtype_size(dtype));
  for (const auto& g : stack.bands) {
    if (dtype == RasterDtype::u8) {
      for (double v : g.values) {
        if (std::isnan(v)) throw validation_error("save_raster: NaN not representable as u8");
        if (v < 0.0 || v > 255.0 || v != std::floor(v))
          throw validation_error("save_raster: value " + detail::format_double(v) +
                                 " not an integer in [0,255]");
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(v)));
      }
    } else {
      for (double v : g.values) detail::put_le_f32(bytes, static_cast<float>(v));
    }
  }
  std::ofstream out(base + ".bin", std::ios::binary);
  if (!out) throw io_error("cannot write data file: " + base + ".bin");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + base + ".bin");
}

inline void save_raster(const RasterGrid& grid, const std::string& base,
                        RasterDtype dtype = RasterDtype::f32) {
  BandStack s;
  s.bands.push_back(grid);
  s.band_windows.emplace_back(0.0, 1.0);
  save_raster(s, base, dtype);
}

/// Block-mean downsampling (the paper-style mean filter). Requires rows and
/// cols divisible by `factor`; NaN cells are excluded from each block mean and
/// an all-NaN block stays NaN.
inline RasterGrid upscale_mean(const RasterGrid& grid, std::size_t factor) {
  grid.check();
  if (factor < 2) throw validation_error("upscale_mean: factor must be >= 2");
  if (grid.rows % factor != 0 || grid.cols % factor != 0)
    throw validation_error("upscale_mean: rows and cols must be divisible by factor (no padding)");

  RasterGrid out(grid.rows / factor, grid.cols / factor, 0.0,
                 grid.pixel_size * static_cast<double>(factor));
  out.origin_x = grid.origin_x;
  out.origin_y = grid.origin_y;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) {
      double s = 0.0;
      std::size_t n = 0;
      for (std::size_t dr = 0; dr < factor; ++dr)
        for (std::size_t dc = 0; dc < factor; ++dc) {
          const double v = grid.at(r * factor + dr, c * factor + dc);
          if (!std::isnan(v)) { s += v; ++n; }
        }
      out.at(r, c) = n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

namespace detail {

/// Rounding rule used by the PGM stretch: half away from zero.
inline int round_half_away(double v) {
  return static_cast<int>(v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

} // namespace detail

/// 8-bit PGM (P5) preview with a linear stretch clamping [lo, hi] to [0, 255].
/// NaN renders as 0. Rounding is half-away-from-zero, so (lo+hi)/2 maps to 128.
inline void to_pgm_preview(const RasterGrid& grid, double lo, double hi, const std::string& path) {
  grid.check();
  if (!(lo < hi)) throw validation_error("to_pgm_preview: lo must be < hi");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write PGM file: " + path);
  out << "P5\n" << grid.cols << " " << grid.rows << "\n255\n";
  std::string bytes;
  bytes.reserve(grid.values.size());
  for (double v : grid.values) {
    int g = 0;
    if (!std::isnan(v)) {
      const double t = (std::clamp(v, lo, hi) - lo) / (hi - lo);
      g = std::clamp(detail::round_half_away(t * 255.0), 0, 255);
    }
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(g)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + path);
}

/// Plot-ready CSV dump: one `row,col,value` line per pixel.
inline void save_grid_csv(const RasterGrid& grid, const std::string& path) {
  grid.check();
  std::ofstream out(path);
  if (!out) throw io_error("cannot write CSV file: " + path);
  out << "row,col,value\n";
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const double v = grid.at(r, c);
      out << r << "," << c << "," << (std::isnan(v) ? "nan" : detail::format_double(v)) << "\n";
    }
  if (!out) throw io_error("write failed: " + path);
}

} // namespace ksc
