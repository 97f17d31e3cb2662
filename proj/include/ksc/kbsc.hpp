#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ksc/errors.hpp"
#include "ksc/kriging.hpp"
#include "ksc/raster.hpp"
#include "ksc/signatures.hpp"
#include "ksc/variogram.hpp"

namespace ksc {

/// Binary transforms of one band against one class's DN limits.
/// upper(x) = 1 iff DN(x) <= U_i  (event E1: value below the upper limit)
/// lower(x) = 1 iff DN(x) >= L_i  (event E2: value above the lower limit)
/// Both comparisons are inclusive; NaN DN yields NaN indicators. The lower
/// map is coded in the E2 direction so its kriged surface estimates
/// Pr{E2} directly.
struct IndicatorPair {
  RasterGrid upper;
  RasterGrid lower;
  std::string cls;
  std::size_t band = 0;
};

/// Per-class membership surface; band < 0 marks a joint (all-band) map.
struct ProbabilityMap {
  RasterGrid grid;
  std::string cls;
  int band = -1;
};

/// How per-band upper/lower probabilities merge into the in-range value.
///  - eq5_union: p1 + p2 - p1*p2, the letter's printed formula.
///  - product:   p1 * p2, the intersection-under-independence reading.
enum class CombineRule { eq5_union, product };

inline std::string combine_name(CombineRule r) {
  return r == CombineRule::eq5_union ? "eq5" : "product";
}

inline CombineRule combine_from_name(const std::string& s) {
  if (s == "eq5") return CombineRule::eq5_union;
  if (s == "product") return CombineRule::product;
  throw validation_error("unknown combine rule '" + s + "' (expected eq5 or product)");
}

inline IndicatorPair indicator_maps(const RasterGrid& band, const SignatureStats& stats,
                                    const std::string& cls, std::size_t band_index) {
  band.check();
  const auto& th = stats.threshold(cls, band_index);
  IndicatorPair pair;
  pair.cls = cls;
  pair.band = band_index;
  pair.upper = band;
  pair.lower = band;
  for (std::size_t i = 0; i < band.values.size(); ++i) {
    const double dn = band.values[i];
    if (std::isnan(dn)) {
      pair.upper.values[i] = std::numeric_limits<double>::quiet_NaN();
      pair.lower.values[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      pair.upper.values[i] = dn <= th.upper ? 1.0 : 0.0;
      pair.lower.values[i] = dn >= th.lower ? 1.0 : 0.0;
    }
  }
  return pair;
}

/// Pointwise combination of the kriged upper/lower probability surfaces,
/// exactly as printed for the union rule: p = p1 + p2 - p1*p2. NaN in either
/// input propagates.
inline ProbabilityMap band_probability(const ProbabilityMap& upper_k, const ProbabilityMap& lower_k,
                                       CombineRule rule = CombineRule::eq5_union) {
  upper_k.grid.check();
  lower_k.grid.check();
  if (!upper_k.grid.same_geometry(lower_k.grid))
    throw validation_error("band_probability: upper/lower geometry mismatch");
  ProbabilityMap out;
  out.cls = upper_k.cls;
  out.band = upper_k.band;
  out.grid = upper_k.grid;
  for (std::size_t i = 0; i < out.grid.values.size(); ++i) {
    const double p1 = upper_k.grid.values[i];
    const double p2 = lower_k.grid.values[i];
    // union evaluated as p1 + p2*(1-p1): same algebra as the printed
    // p1 + p2 - p1*p2, exact at the absorbing p1 = 1 boundary
    double p = rule == CombineRule::eq5_union ? p1 + p2 * (1.0 - p1) : p1 * p2;
    // round-off guard so map values honor the [0,1] invariant (NaN passes)
    if (p < 0.0) p = 0.0;
    if (p > 1.0) p = 1.0;
    out.grid.values[i] = p;
  }
  return out;
}

/// Joint class membership: the product of per-band maps (bands treated as
/// independent).
inline ProbabilityMap joint_probability(const std::vector<ProbabilityMap>& band_maps) {
  if (band_maps.empty()) throw validation_error("joint_probability: empty band map list");
  band_maps.front().grid.check();
  ProbabilityMap out;
  out.cls = band_maps.front().cls;
  out.band = -1;
  out.grid = band_maps.front().grid;
  for (std::size_t m = 1; m < band_maps.size(); ++m) {
    band_maps[m].grid.check();
    if (!band_maps[m].grid.same_geometry(out.grid))
      throw validation_error("joint_probability: band map geometry mismatch");
    for (std::size_t i = 0; i < out.grid.values.size(); ++i)
      out.grid.values[i] *= band_maps[m].grid.values[i];
  }
  return out;
}

struct KbscOptions {
  VariogramFamily family = VariogramFamily::spherical;
  double out_pixel_size = 0.0;       // 0 selects the native pixel size
  KrigingConfig kriging;
  CombineRule combine = CombineRule::eq5_union;
  double max_lag = 0.0;              // 0 selects half the grid diagonal
  std::size_t n_bins = 15;
  std::vector<std::size_t> band_subset; // empty = all bands
  unsigned n_threads = 1;
};

/// Fit record for one kriged indicator map.
struct KbscMapReport {
  std::string cls;
  std::size_t band = 0;
  std::string limit;  // "upper" | "lower"
  VariogramModel model;
  double fit_residual = 0.0;
  bool range_unconstrained = false;
  bool constant_fallback = false; // zero-sill fit: kriged with equal weights
  KrigingDiagnostics kriging;
};

struct KbscReport {
  std::vector<KbscMapReport> maps;
  std::vector<std::pair<std::string, std::string>> class_errors; // class -> message
  std::string combine;
  double out_pixel_size = 0.0;
};

struct KbscResult {
  std::vector<ProbabilityMap> joint; // one per successfully classified class
  KbscReport report;
};

/// The full KBSC chain per class and band: threshold to indicator pairs,
/// estimate and fit a variogram per indicator map, krige each map to the
/// output grid (clamped to [0,1]), combine upper/lower into the per-band
/// in-range probability, and multiply across bands. Classes fail
/// independently: an error in one is recorded and the rest are produced.
inline KbscResult classify_kbsc(const BandStack& stack, const SignatureStats& stats,
                                const std::vector<std::string>& classes,
                                const KbscOptions& options) {
  stack.check();
  if (classes.empty()) throw validation_error("classify_kbsc: no classes given");

  std::vector<std::size_t> bands = options.band_subset;
  if (bands.empty())
    for (std::size_t b = 0; b < stack.bands.size(); ++b) bands.push_back(b);
  for (std::size_t b : bands)
    if (b >= stack.bands.size())
      throw validation_error("classify_kbsc: band index " + std::to_string(b) + " out of range");

  const double out_px = options.out_pixel_size > 0.0 ? options.out_pixel_size
                                                     : stack.pixel_size();
  const double max_lag = options.max_lag > 0.0 ? options.max_lag
                                               : default_max_lag(stack.bands.front());

  KbscResult result;
  result.report.combine = combine_name(options.combine);
  result.report.out_pixel_size = out_px;

  for (const auto& cls : classes) {
    try {
      std::vector<ProbabilityMap> per_band;
      for (std::size_t b : bands) {
        const auto pair = indicator_maps(stack.bands[b], stats, cls, b);

        auto krige_limit = [&](const RasterGrid& ind, const char* limit) {
          // Indicator-specific seed: a binary field with mean p has
          // theoretical sill p(1-p).
          const double p = ind.mean_valid();
          std::optional<double> hint;
          if (!std::isnan(p) && p > 0.0 && p < 1.0) hint = p * (1.0 - p);

          const auto emp = empirical_variogram(ind, max_lag, options.n_bins);
          const auto fit = fit_model(emp, options.family, hint);

          KbscMapReport mr;
          mr.cls = cls;
          mr.band = b;
          mr.limit = limit;
          mr.model = fit.model;
          mr.fit_residual = fit.residual;
          mr.range_unconstrained = fit.range_unconstrained;

          // A zero-sill fit (constant indicator field) makes the kriging
          // system singular; any weights summing to one reproduce the
          // constant, so fall back to equal-weight nugget kriging.
          VariogramModel kmodel = fit.model;
          if (kmodel.sill() <= 1e-12) {
            kmodel = VariogramModel{VariogramFamily::nugget, 1.0, 0.0, 1.0};
            mr.constant_fallback = true;
          }

          KrigingConfig cfg = options.kriging;
          cfg.clamp = true; // per-band probabilities must stay in [0,1]
          if (cfg.search_radius <= 0.0) {
            // auto radius: 4x the fitted range, floored at a few pixels so a
            // short-range or fallback model still reaches its neighbors
            cfg.search_radius = std::max(4.0 * kmodel.range,
                                         3.0 * std::max(stack.pixel_size(), out_px));
          }
          ProbabilityMap pm;
          pm.cls = cls;
          pm.band = static_cast<int>(b);
          pm.grid = predict_grid(ind, kmodel, out_px, cfg, &mr.kriging, options.n_threads);
          result.report.maps.push_back(mr);
          return pm;
        };

        const auto upper_k = krige_limit(pair.upper, "upper");
        const auto lower_k = krige_limit(pair.lower, "lower");
        per_band.push_back(band_probability(upper_k, lower_k, options.combine));
      }
      result.joint.push_back(joint_probability(per_band));
    } catch (const std::exception& e) {
      result.report.class_errors.emplace_back(cls, e.what());
    }
  }
  return result;
}

/// Collapse joint maps to labels: per pixel, the argmax class index if its
/// probability reaches `min_probability`, else -1 ("unclassified"). Ties take
/// the earliest class in map order; any NaN across the class maps leaves the
/// pixel unclassified.
inline RasterGrid harden(const std::vector<ProbabilityMap>& maps, double min_probability) {
  if (maps.empty()) throw validation_error("harden: no maps");
  if (!(min_probability >= 0.0 && min_probability <= 1.0))
    throw validation_error("harden: threshold must be in [0,1]");
  maps.front().grid.check();
  for (const auto& m : maps) {
    m.grid.check();
    if (!m.grid.same_geometry(maps.front().grid))
      throw validation_error("harden: map geometry mismatch");
  }
  RasterGrid labels = maps.front().grid;
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    double best = -1.0;
    std::ptrdiff_t best_c = -1;
    bool has_nan = false;
    for (std::size_t m = 0; m < maps.size(); ++m) {
      const double p = maps[m].grid.values[i];
      if (std::isnan(p)) { has_nan = true; break; }
      if (p > best) { best = p; best_c = static_cast<std::ptrdiff_t>(m); }
    }
    labels.values[i] = (has_nan || best < min_probability) ? -1.0
                                                           : static_cast<double>(best_c);
  }
  return labels;
}

} // namespace ksc
