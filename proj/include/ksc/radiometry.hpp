#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ksc/errors.hpp"
#include "ksc/raster.hpp"

namespace ksc {

/// Per-band sensor calibration. Radiance units are mW cm^-2 sr^-1 um^-1
/// throughout; gain converts one DN step to radiance. No values are
/// defaulted: real calibration numbers come with the imagery header.
struct CalibrationParams {
  std::vector<double> gain;   // per band, radiance per DN
  std::vector<double> bias;   // per band, radiance
  std::vector<double> esun;   // per band, mean solar exoatmospheric irradiance
  double sun_elevation_deg = 0.0;
  double earth_sun_distance_au = 0.0;

  void check() const {
    if (gain.size() != bias.size() || gain.size() != esun.size() || gain.empty())
      throw validation_error("CalibrationParams: gain/bias/esun must be non-empty, equal length");
    for (double g : gain)
      if (!(g > 0.0)) throw validation_error("CalibrationParams: gain must be > 0");
    for (double e : esun)
      if (!(e > 0.0)) throw validation_error("CalibrationParams: esun must be > 0");
    if (!(sun_elevation_deg > 0.0 && sun_elevation_deg <= 90.0))
      throw validation_error("CalibrationParams: sun_elevation must be in (0, 90] degrees");
    if (!(earth_sun_distance_au > 0.0))
      throw validation_error("CalibrationParams: earth_sun_distance must be > 0");
  }

  std::size_t bands() const { return gain.size(); }

  void check_band(std::size_t band) const {
    if (band >= gain.size())
      throw validation_error("CalibrationParams: band index " + std::to_string(band) +
                             " out of range");
  }
};

namespace detail {
inline constexpr double pi = 3.14159265358979323846;
inline double deg_to_rad(double deg) { return deg * pi / 180.0; }
} // namespace detail

/// At-satellite radiance from ground reflectance:
///   L = r * esun * sin(SE) / (pi * d^2)
/// with the sun elevation converted from degrees to radians here, in one
/// place.
inline double reflectance_to_radiance(double r, std::size_t band, const CalibrationParams& cal) {
  cal.check();
  cal.check_band(band);
  if (!(r >= 0.0 && r <= 1.0))
    throw validation_error("reflectance_to_radiance: reflectance outside [0,1]");
  const double se = detail::deg_to_rad(cal.sun_elevation_deg);
  const double d2 = cal.earth_sun_distance_au * cal.earth_sun_distance_au;
  return r * cal.esun[band] * std::sin(se) / (detail::pi * d2);
}

/// Real-valued DN from radiance: DN = (L - bias) / gain. The result is
/// deliberately not rounded; thresholds derived from ground signatures are
/// compared against the continuous value.
inline double radiance_to_dn(double radiance, std::size_t band, const CalibrationParams& cal) {
  cal.check();
  cal.check_band(band);
  return (radiance - cal.bias[band]) / cal.gain[band];
}

/// Inverse of radiance_to_dn.
inline double dn_to_radiance(double dn, std::size_t band, const CalibrationParams& cal) {
  cal.check();
  cal.check_band(band);
  return dn * cal.gain[band] + cal.bias[band];
}

namespace detail {

/// Nearest-rank lower quantile over the non-NaN values of a band.
inline double dark_object_dn(const RasterGrid& g, double percentile) {
  std::vector<double> vals;
  vals.reserve(g.values.size());
  for (double v : g.values)
    if (!std::isnan(v)) vals.push_back(v);
  if (vals.empty()) throw validation_error("dos_correct: band is entirely NaN");
  std::sort(vals.begin(), vals.end());
  const auto idx = static_cast<std::size_t>(percentile * static_cast<double>(vals.size()));
  return vals[std::min(idx, vals.size() - 1)];
}

} // namespace detail

/// Dark-object subtraction: per band, subtract the dark-object DN (the given
/// lower percentile of the band histogram; 0 selects the band minimum) from
/// every pixel and clamp at zero. NaN pixels stay NaN.
inline BandStack dos_correct(const BandStack& stack, double percentile = 0.0) {
  stack.check();
  if (!(percentile >= 0.0 && percentile <= 0.05))
    throw validation_error("dos_correct: percentile must be in [0, 0.05]");
  BandStack out = stack;
  for (auto& band : out.bands) {
    const double dark = detail::dark_object_dn(band, percentile);
    for (double& v : band.values)
      if (!std::isnan(v)) v = std::max(0.0, v - dark);
  }
  return out;
}

} // namespace ksc
