#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ksc/errors.hpp"
#include "ksc/kbsc.hpp"
#include "ksc/raster.hpp"

namespace ksc {

/// Mean/median/sd over the non-NaN values of a grid. The median of an even
/// count is the midpoint of the two central values; sd uses the n-1
/// denominator (0 when fewer than two values).
struct SummaryStats {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

inline SummaryStats summarize(const RasterGrid& grid) {
  std::vector<double> vals;
  vals.reserve(grid.values.size());
  for (double v : grid.values)
    if (!std::isnan(v)) vals.push_back(v);
  SummaryStats s;
  s.count = vals.size();
  if (vals.empty()) {
    s.mean = s.median = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : vals) sum += v;
  s.mean = sum / static_cast<double>(vals.size());
  std::sort(vals.begin(), vals.end());
  const std::size_t n = vals.size();
  s.median = (n % 2 == 1) ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  if (n > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

namespace detail {

inline void check_map_sets(const std::vector<ProbabilityMap>& ref,
                           const std::vector<ProbabilityMap>& test, const char* who) {
  if (ref.empty() || ref.size() != test.size())
    throw validation_error(std::string(who) + ": class count mismatch (" +
                           std::to_string(ref.size()) + " vs " + std::to_string(test.size()) + ")");
  for (std::size_t c = 0; c < ref.size(); ++c) {
    if (ref[c].cls != test[c].cls)
      throw validation_error(std::string(who) + ": class mismatch at position " +
                             std::to_string(c) + " ('" + ref[c].cls + "' vs '" + test[c].cls +
                             "')");
    ref[c].grid.check();
    test[c].grid.check();
    if (!ref[c].grid.same_geometry(ref.front().grid) ||
        !test[c].grid.same_geometry(ref.front().grid))
      throw validation_error(std::string(who) + ": map geometry mismatch for class '" +
                             ref[c].cls + "'");
  }
}

} // namespace detail

struct ClosenessGrid {
  RasterGrid grid;
  SummaryStats summary;
  std::size_t renormalized = 0; // cross entropy only: pixels rescaled to sum 1
};

/// Per-pixel mean square error over classes:
///   S = (1/C) * sum_c (e1c - e2c)^2.
/// A NaN in any class map (either side) makes that pixel NaN.
inline ClosenessGrid mse_closeness(const std::vector<ProbabilityMap>& ref,
                                   const std::vector<ProbabilityMap>& test) {
  detail::check_map_sets(ref, test, "mse_closeness");
  const std::size_t n_cls = ref.size();
  ClosenessGrid out;
  out.grid = ref.front().grid;
  for (std::size_t i = 0; i < out.grid.values.size(); ++i) {
    double s = 0.0;
    bool nan = false;
    for (std::size_t c = 0; c < n_cls; ++c) {
      const double a = ref[c].grid.values[i];
      const double b = test[c].grid.values[i];
      if (std::isnan(a) || std::isnan(b)) { nan = true; break; }
      s += (a - b) * (a - b);
    }
    out.grid.values[i] = nan ? std::numeric_limits<double>::quiet_NaN()
                             : s / static_cast<double>(n_cls);
  }
  out.summary = summarize(out.grid);
  return out;
}

/// Per-pixel cross entropy (the printed form is the Kullback-Leibler
/// divergence, in bits):
///   D(f1, f2) = sum_c f1c * log2(f1c / max(f2c, eps)),
/// with f1c = 0 terms contributing zero. Each side is renormalized to sum to
/// one when it does not already (all-zero rows fall back to uniform); the
/// number of touched pixels is reported.
inline ClosenessGrid cross_entropy(const std::vector<ProbabilityMap>& ref,
                                   const std::vector<ProbabilityMap>& test, double eps = 1e-12) {
  detail::check_map_sets(ref, test, "cross_entropy");
  if (!(eps > 0.0)) throw validation_error("cross_entropy: eps must be > 0");
  const std::size_t n_cls = ref.size();
  ClosenessGrid out;
  out.grid = ref.front().grid;
  std::vector<double> f1(n_cls), f2(n_cls);
  const double inv_log2 = 1.0 / std::log(2.0);
  for (std::size_t i = 0; i < out.grid.values.size(); ++i) {
    bool nan = false;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < n_cls; ++c) {
      f1[c] = ref[c].grid.values[i];
      f2[c] = test[c].grid.values[i];
      if (std::isnan(f1[c]) || std::isnan(f2[c])) { nan = true; break; }
      if (f1[c] < 0.0 || f2[c] < 0.0)
        throw validation_error("cross_entropy: negative proportion at pixel " + std::to_string(i));
      s1 += f1[c];
      s2 += f2[c];
    }
    if (nan) {
      out.grid.values[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    bool touched = false;
    auto normalize = [&](std::vector<double>& f, double s) {
      if (std::abs(s - 1.0) <= 1e-9) return;
      touched = true;
      if (s > 0.0) {
        for (double& v : f) v /= s;
      } else {
        for (double& v : f) v = 1.0 / static_cast<double>(n_cls);
      }
    };
    normalize(f1, s1);
    normalize(f2, s2);
    if (touched) ++out.renormalized;
    double d = 0.0;
    for (std::size_t c = 0; c < n_cls; ++c) {
      if (f1[c] == 0.0) continue;
      d += f1[c] * std::log(f1[c] / std::max(f2[c], eps)) * inv_log2;
    }
    out.grid.values[i] = d;
  }
  out.summary = summarize(out.grid);
  return out;
}

/// Pearson correlation over paired per-pixel proportions, plus r^2.
inline std::pair<double, double> class_correlation(const ProbabilityMap& ref,
                                                   const ProbabilityMap& test) {
  ref.grid.check();
  test.grid.check();
  if (!ref.grid.same_geometry(test.grid))
    throw validation_error("class_correlation: geometry mismatch");
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ref.grid.values.size(); ++i) {
    const double a = ref.grid.values[i], b = test.grid.values[i];
    if (std::isnan(a) || std::isnan(b)) continue;
    sx += a;
    sy += b;
    ++n;
  }
  if (n < 2) throw numerical_error("class_correlation: fewer than 2 paired pixels");
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < ref.grid.values.size(); ++i) {
    const double a = ref.grid.values[i], b = test.grid.values[i];
    if (std::isnan(a) || std::isnan(b)) continue;
    sxx += (a - mx) * (a - mx);
    syy += (b - my) * (b - my);
    sxy += (a - mx) * (b - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw numerical_error("class_correlation: undefined (zero variance in an argument)");
  const double r = sxy / std::sqrt(sxx * syy);
  return {r, r * r};
}

struct AreaEstimate {
  double hectares = 0.0;
  std::size_t nan_pixels = 0; // contribute zero area
};

/// Proportion-weighted area: sum of per-pixel proportion times pixel_area.
inline AreaEstimate area_estimate(const ProbabilityMap& map, double pixel_area_ha) {
  map.grid.check();
  if (!(pixel_area_ha > 0.0)) throw validation_error("area_estimate: pixel_area must be > 0");
  AreaEstimate est;
  for (double v : map.grid.values) {
    if (std::isnan(v)) {
      ++est.nan_pixels;
      continue;
    }
    if (v < 0.0 || v > 1.0)
      throw validation_error("area_estimate: proportion outside [0,1]");
    est.hectares += v * pixel_area_ha;
  }
  return est;
}

/// Percent deviation of an estimate from a reference:
///   100 * (estimate - reference) / reference.
inline double percent_deviation(double estimate, double reference) {
  if (!(reference > 0.0)) throw validation_error("percent_deviation: reference must be > 0");
  return 100.0 * (estimate - reference) / reference;
}

/// Everything the letter's Tables I-III report for one ref/test pairing.
struct ClosenessReport {
  ClosenessGrid s;
  ClosenessGrid d;
  std::vector<std::pair<std::string, std::pair<double, double>>> correlations; // class -> (r, r2)
  std::size_t pixels_used = 0;
};

inline ClosenessReport assess_closeness(const std::vector<ProbabilityMap>& ref,
                                        const std::vector<ProbabilityMap>& test,
                                        double eps = 1e-12) {
  ClosenessReport rep;
  rep.s = mse_closeness(ref, test);
  rep.d = cross_entropy(ref, test, eps);
  rep.pixels_used = rep.s.summary.count;
  for (std::size_t c = 0; c < ref.size(); ++c) {
    try {
      rep.correlations.emplace_back(ref[c].cls, class_correlation(ref[c], test[c]));
    } catch (const numerical_error&) {
      const auto nan = std::numeric_limits<double>::quiet_NaN();
      rep.correlations.emplace_back(ref[c].cls, std::make_pair(nan, nan));
    }
  }
  return rep;
}

/// upscale_mean applied to a whole map set.
inline std::vector<ProbabilityMap> upscale_maps(const std::vector<ProbabilityMap>& maps,
                                                std::size_t factor) {
  std::vector<ProbabilityMap> out;
  for (const auto& m : maps) {
    ProbabilityMap um;
    um.cls = m.cls;
    um.band = m.band;
    um.grid = factor > 1 ? upscale_mean(m.grid, factor) : m.grid;
    out.push_back(std::move(um));
  }
  return out;
}

/// Bring two map sets onto one grid by integer-factor mean aggregation.
/// `target_scale` = 0 selects the coarser of the two pixel sizes; otherwise
/// both sets are aggregated to the requested pixel size. Non-integer scale
/// ratios are rejected.
inline std::pair<std::vector<ProbabilityMap>, std::vector<ProbabilityMap>> align_to_scale(
    const std::vector<ProbabilityMap>& ref, const std::vector<ProbabilityMap>& test,
    double target_scale = 0.0) {
  if (ref.empty() || test.empty()) throw validation_error("align_to_scale: empty map set");
  const double ps_ref = ref.front().grid.pixel_size;
  const double ps_test = test.front().grid.pixel_size;
  const double target = target_scale > 0.0 ? target_scale : std::max(ps_ref, ps_test);
  auto factor_for = [&](double ps) {
    const double ratio = target / ps;
    const auto f = static_cast<long long>(std::llround(ratio));
    if (f < 1 || std::abs(ratio - static_cast<double>(f)) > 1e-6 * ratio)
      throw validation_error("align_to_scale: pixel sizes are not related by an integer factor (" +
                             std::to_string(ps) + " -> " + std::to_string(target) + ")");
    return static_cast<std::size_t>(f);
  };
  return {upscale_maps(ref, factor_for(ps_ref)), upscale_maps(test, factor_for(ps_test))};
}

/// One-hot proportion maps from a label grid (labels < 0 or NaN give NaN in
/// every class map, so unclassified pixels drop out of the closeness stats).
inline std::vector<ProbabilityMap> one_hot_proportions(const RasterGrid& labels,
                                                       const std::vector<std::string>& classes) {
  labels.check();
  std::vector<ProbabilityMap> maps(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    maps[c].cls = classes[c];
    maps[c].grid = labels;
  }
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const double lv = labels.values[i];
    const bool missing = std::isnan(lv) || lv < 0.0 ||
                         static_cast<std::size_t>(lv) >= classes.size();
    for (std::size_t c = 0; c < classes.size(); ++c)
      maps[c].grid.values[i] = missing
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : (static_cast<std::size_t>(lv) == c ? 1.0 : 0.0);
  }
  return maps;
}

} // namespace ksc
