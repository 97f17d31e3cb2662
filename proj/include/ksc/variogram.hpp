#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ksc/detail/linalg.hpp"
#include "ksc/errors.hpp"
#include "ksc/raster.hpp"

namespace ksc {

/// Binned omnidirectional semivariogram estimate.
struct EmpiricalVariogram {
  std::vector<double> lags;              // bin centers, meters, ascending
  std::vector<double> gamma;             // semivariance per bin
  std::vector<std::size_t> pair_counts;  // N(h); 0 marks an empty bin

  void check() const {
    if (lags.size() != gamma.size() || lags.size() != pair_counts.size() || lags.empty())
      throw validation_error("EmpiricalVariogram: ragged or empty");
    for (std::size_t i = 0; i < lags.size(); ++i) {
      if (!(lags[i] > 0.0)) throw validation_error("EmpiricalVariogram: lags must be positive");
      if (i && !(lags[i] > lags[i - 1]))
        throw validation_error("EmpiricalVariogram: lags must ascend");
      if (pair_counts[i] > 0 && !(gamma[i] >= 0.0))
        throw validation_error("EmpiricalVariogram: gamma must be >= 0");
    }
  }

  std::size_t nonempty_bins() const {
    std::size_t n = 0;
    for (auto c : pair_counts)
      if (c > 0) ++n;
    return n;
  }
};

enum class VariogramFamily { nugget, spherical, exponential, gaussian };

inline std::string family_name(VariogramFamily f) {
  switch (f) {
    case VariogramFamily::nugget: return "nugget";
    case VariogramFamily::spherical: return "spherical";
    case VariogramFamily::exponential: return "exponential";
    case VariogramFamily::gaussian: return "gaussian";
  }
  return "?";
}

inline VariogramFamily family_from_name(const std::string& s) {
  if (s == "nugget") return VariogramFamily::nugget;
  if (s == "spherical") return VariogramFamily::spherical;
  if (s == "exponential") return VariogramFamily::exponential;
  if (s == "gaussian") return VariogramFamily::gaussian;
  throw validation_error("unknown variogram family '" + s + "'");
}

/// Permissible isotropic model: gamma(h) = c0 + c * g(h/a) for h > 0, with
/// the strict gamma(0) = 0 convention. The exponential and gaussian shapes
/// use the practical-range scaling (95% of the sill is reached at h = a).
struct VariogramModel {
  VariogramFamily family = VariogramFamily::spherical;
  double nugget = 0.0;       // c0 >= 0
  double partial_sill = 0.0; // c >= 0
  double range = 1.0;        // a > 0

  void check() const {
    if (!(nugget >= 0.0)) throw validation_error("VariogramModel: nugget must be >= 0");
    if (!(partial_sill >= 0.0)) throw validation_error("VariogramModel: partial sill must be >= 0");
    if (!(range > 0.0)) throw validation_error("VariogramModel: range must be > 0");
  }

  double sill() const { return nugget + partial_sill; }
};

inline double model_eval(const VariogramModel& m, double h) {
  if (h < 0.0) throw validation_error("model_eval: negative lag");
  if (h == 0.0) return 0.0;
  double g = 1.0;
  const double u = h / m.range;
  switch (m.family) {
    case VariogramFamily::nugget:
      g = 1.0;
      break;
    case VariogramFamily::spherical:
      g = u >= 1.0 ? 1.0 : 1.5 * u - 0.5 * u * u * u;
      break;
    case VariogramFamily::exponential:
      g = 1.0 - std::exp(-3.0 * u);
      break;
    case VariogramFamily::gaussian:
      g = 1.0 - std::exp(-3.0 * u * u);
      break;
  }
  return m.nugget + m.partial_sill * g;
}

/// Omnidirectional empirical semivariogram over equal-width bins spanning
/// (0, max_lag]. Pairs are enumerated by grid offset (one distance
/// computation per offset); NaN pixels drop out pairwise. Bins with no pairs
/// keep count 0 and gamma 0.
inline EmpiricalVariogram empirical_variogram(const RasterGrid& grid, double max_lag,
                                              std::size_t n_bins) {
  grid.check();
  if (!(max_lag > 0.0)) throw validation_error("empirical_variogram: max_lag must be > 0");
  if (n_bins < 1) throw validation_error("empirical_variogram: n_bins must be >= 1");
  {
    std::size_t valid = 0;
    for (double v : grid.values)
      if (!std::isnan(v) && ++valid >= 2) break;
    if (valid < 2) throw validation_error("empirical_variogram: fewer than 2 non-NaN pixels");
  }

  const double width = max_lag / static_cast<double>(n_bins);
  std::vector<detail::KahanSum> acc(n_bins);
  std::vector<std::size_t> counts(n_bins, 0);

  const auto max_off = static_cast<long>(std::floor(max_lag / grid.pixel_size));
  const auto rows = static_cast<long>(grid.rows);
  const auto cols = static_cast<long>(grid.cols);
  // Offsets (dr, dc) with dr > 0, or dr == 0 and dc > 0: each unordered pair
  // of pixels is visited exactly once.
  for (long dr = 0; dr <= max_off; ++dr) {
    for (long dc = (dr == 0 ? 1 : -max_off); dc <= max_off; ++dc) {
      const double dist = grid.pixel_size * std::hypot(static_cast<double>(dr),
                                                       static_cast<double>(dc));
      if (dist > max_lag || dist <= 0.0) continue;
      auto bin = static_cast<std::size_t>(std::ceil(dist / width)) - 1;
      if (bin >= n_bins) bin = n_bins - 1;
      double part = 0.0;
      std::size_t n = 0;
      const long r0 = std::max(0L, -dr), r1 = std::min(rows, rows - dr);
      const long c0 = std::max(0L, -dc), c1 = std::min(cols, cols - dc);
      for (long r = r0; r < r1; ++r) {
        const double* a = &grid.values[static_cast<std::size_t>(r) * grid.cols];
        const double* b = &grid.values[static_cast<std::size_t>(r + dr) * grid.cols];
        for (long c = c0; c < c1; ++c) {
          const double za = a[c];
          const double zb = b[c + dc];
          if (std::isnan(za) || std::isnan(zb)) continue;
          const double d = za - zb;
          part += d * d;
          ++n;
        }
      }
      if (n) {
        acc[bin].add(part);
        counts[bin] += n;
      }
    }
  }

  EmpiricalVariogram emp;
  bool any = false;
  for (std::size_t i = 0; i < n_bins; ++i) {
    emp.lags.push_back((static_cast<double>(i) + 0.5) * width);
    const bool has = counts[i] > 0;
    any = any || has;
    emp.gamma.push_back(has ? acc[i].value() / (2.0 * static_cast<double>(counts[i])) : 0.0);
    emp.pair_counts.push_back(counts[i]);
  }
  if (!any) throw validation_error("empirical_variogram: no valid pixel pairs in any bin");
  emp.check();
  return emp;
}

/// Default lag cutoff: half the grid diagonal.
inline double default_max_lag(const RasterGrid& grid) {
  return 0.5 * grid.pixel_size *
         std::hypot(static_cast<double>(grid.rows), static_cast<double>(grid.cols));
}

struct VariogramFit {
  VariogramModel model;
  double residual = 0.0;         // weighted SSE at the optimum
  bool range_unconstrained = false; // structure-free data: any range fits
  bool converged = true;
};

namespace detail {

struct FitData {
  std::vector<double> h, g, w; // non-empty bins and N(h) weights
};

inline double fit_objective(const FitData& d, const VariogramModel& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.h.size(); ++i) {
    const double r = d.g[i] - model_eval(m, d.h[i]);
    s += d.w[i] * r * r;
  }
  return s;
}

/// For a fixed range, the weighted LS optimum over (c0, c) with c0, c >= 0 is
/// a 2x2 normal-equation solve plus boundary cases.
inline std::array<double, 2> profile_sills(const FitData& d, VariogramFamily fam, double range) {
  double sww = 0.0, swg = 0.0, swgg = 0.0, swy = 0.0, swgy = 0.0;
  VariogramModel unit{fam, 0.0, 1.0, range};
  for (std::size_t i = 0; i < d.h.size(); ++i) {
    const double gi = model_eval(unit, d.h[i]);
    const double wi = d.w[i];
    sww += wi;
    swg += wi * gi;
    swgg += wi * gi * gi;
    swy += wi * d.g[i];
    swgy += wi * gi * d.g[i];
  }
  const double det = sww * swgg - swg * swg;
  double c0 = 0.0, c = 0.0;
  if (std::abs(det) > 1e-30 * std::max(1.0, sww * swgg)) {
    c0 = (swy * swgg - swgy * swg) / det;
    c = (sww * swgy - swg * swy) / det;
  }
  if (c0 < 0.0 || c < 0.0 || std::abs(det) <= 1e-30 * std::max(1.0, sww * swgg)) {
    // boundary candidates: c0 = 0 or c = 0
    const double c_only = swgg > 0.0 ? std::max(0.0, swgy / swgg) : 0.0;
    const double c0_only = sww > 0.0 ? std::max(0.0, swy / sww) : 0.0;
    VariogramModel m1{fam, 0.0, c_only, range};
    VariogramModel m2{fam, c0_only, 0.0, range};
    if (fit_objective(d, m1) <= fit_objective(d, m2)) { c0 = 0.0; c = c_only; }
    else { c0 = c0_only; c = 0.0; }
  }
  return {c0, c};
}

/// Bounded Nelder-Mead on (c0, c, a); out-of-bound vertices are projected.
inline VariogramModel nelder_mead_polish(const FitData& d, VariogramFamily fam,
                                         VariogramModel start, double lo_a, double hi_a,
                                         double tol, std::size_t max_iter) {
  auto clampm = [&](VariogramModel m) {
    m.nugget = std::max(0.0, m.nugget);
    m.partial_sill = std::max(0.0, m.partial_sill);
    m.range = std::clamp(m.range, lo_a, hi_a);
    return m;
  };
  struct Vertex { VariogramModel m; double f; };
  auto eval = [&](VariogramModel m) {
    m = clampm(m);
    return Vertex{m, fit_objective(d, m)};
  };

  const double s0 = std::max(start.sill(), 1e-12);
  std::array<Vertex, 4> v{eval(start),
                          eval({fam, start.nugget + 0.25 * s0, start.partial_sill, start.range}),
                          eval({fam, start.nugget, start.partial_sill + 0.25 * s0, start.range}),
                          eval({fam, start.nugget, start.partial_sill, start.range * 1.5})};
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    if (v[3].f - v[0].f <= tol * (std::abs(v[0].f) + tol)) break;
    VariogramModel cen{fam, 0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      cen.nugget += v[i].m.nugget / 3.0;
      cen.partial_sill += v[i].m.partial_sill / 3.0;
      cen.range += v[i].m.range / 3.0;
    }
    auto combine = [&](double coef) {
      return VariogramModel{fam, cen.nugget + coef * (cen.nugget - v[3].m.nugget),
                            cen.partial_sill + coef * (cen.partial_sill - v[3].m.partial_sill),
                            cen.range + coef * (cen.range - v[3].m.range)};
    };
    Vertex refl = eval(combine(1.0));
    if (refl.f < v[0].f) {
      Vertex expd = eval(combine(2.0));
      v[3] = expd.f < refl.f ? expd : refl;
    } else if (refl.f < v[2].f) {
      v[3] = refl;
    } else {
      Vertex contr = eval(combine(-0.5));
      if (contr.f < v[3].f) {
        v[3] = contr;
      } else {
        for (int i = 1; i < 4; ++i) {
          v[i].m.nugget = 0.5 * (v[i].m.nugget + v[0].m.nugget);
          v[i].m.partial_sill = 0.5 * (v[i].m.partial_sill + v[0].m.partial_sill);
          v[i].m.range = 0.5 * (v[i].m.range + v[0].m.range);
          v[i] = eval(v[i].m);
        }
      }
    }
  }
  std::sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
  return v[0].m;
}

} // namespace detail

/// Weighted least squares fit of one model family to an empirical variogram,
/// minimizing sum N(h) * (gamma_hat - gamma_model)^2 over (c0, c, a) with
/// c0, c >= 0 and a > 0. Deterministic grid-seeded multi-start: ranges are
/// swept log-uniformly, sills come from the exact non-negative profile
/// solve, and the best seeds are polished with bounded Nelder-Mead to an
/// objective tolerance of 1e-8. `sill_hint` (e.g. p(1-p) for indicator data)
/// only adds a seed; it never constrains the optimum.
inline VariogramFit fit_model(const EmpiricalVariogram& emp, VariogramFamily family,
                              std::optional<double> sill_hint = std::nullopt) {
  emp.check();
  detail::FitData d;
  for (std::size_t i = 0; i < emp.lags.size(); ++i) {
    if (emp.pair_counts[i] == 0) continue;
    d.h.push_back(emp.lags[i]);
    d.g.push_back(emp.gamma[i]);
    d.w.push_back(static_cast<double>(emp.pair_counts[i]));
  }
  if (d.h.size() < 3)
    throw validation_error("fit_model: need at least 3 non-empty bins, have " +
                           std::to_string(d.h.size()));

  double gmax = 0.0;
  for (double g : d.g) gmax = std::max(gmax, g);

  VariogramFit fit;
  if (gmax == 0.0) { // constant field: gamma = 0 everywhere
    fit.model = {family, 0.0, 0.0, d.h.back()};
    fit.residual = 0.0;
    fit.range_unconstrained = true;
    return fit;
  }

  const double lo_a = 0.25 * d.h.front();
  const double hi_a = 4.0 * d.h.back();

  // Seed stage: profile (c0, c) exactly on a log grid of ranges.
  struct Seed { VariogramModel m; double f; };
  std::vector<Seed> seeds;
  const int n_grid = 48;
  for (int i = 0; i < n_grid; ++i) {
    const double a = lo_a * std::pow(hi_a / lo_a, static_cast<double>(i) / (n_grid - 1));
    const auto [c0, c] = detail::profile_sills(d, family, a);
    VariogramModel m{family, c0, c, a};
    seeds.push_back({m, detail::fit_objective(d, m)});
  }
  if (sill_hint && *sill_hint > 0.0) {
    for (double a : {d.h.front() * 2.0, 0.5 * d.h.back()}) {
      VariogramModel m{family, 0.0, *sill_hint, a};
      seeds.push_back({m, detail::fit_objective(d, m)});
    }
  }
  std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.f < b.f; });

  VariogramModel best = seeds.front().m;
  double best_f = seeds.front().f;
  const std::size_t n_polish = std::min<std::size_t>(6, seeds.size());
  for (std::size_t i = 0; i < n_polish; ++i) {
    VariogramModel m = detail::nelder_mead_polish(d, family, seeds[i].m, lo_a, hi_a, 1e-8, 400);
    // re-profile the sills at the polished range: exact in the linear pair
    const auto [c0, c] = detail::profile_sills(d, family, m.range);
    m.nugget = c0;
    m.partial_sill = c;
    const double f = detail::fit_objective(d, m);
    if (f < best_f) { best_f = f; best = m; }
  }

  if (family == VariogramFamily::nugget) {
    best.range = 1.0;
    fit.range_unconstrained = true;
  }
  // The range is unidentifiable when the fitted curve is flat across the
  // observed lags (pure nugget, vanishing partial sill, or range below the
  // first bin).
  if (std::abs(model_eval(best, d.h.back()) - model_eval(best, d.h.front())) <=
      1e-9 * std::max(best.sill(), gmax))
    fit.range_unconstrained = true;

  best.check();
  fit.model = best;
  fit.residual = best_f;
  return fit;
}

} // namespace ksc
