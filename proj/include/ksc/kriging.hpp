#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "ksc/detail/linalg.hpp"
#include "ksc/errors.hpp"
#include "ksc/raster.hpp"
#include "ksc/variogram.hpp"

namespace ksc {

/// One ordinary-kriging prediction problem: estimate the field at `target`
/// from known samples, with weights constrained to sum to one.
struct KrigingSystem {
  std::vector<std::array<double, 2>> locations; // (easting, northing)
  std::vector<double> values;
  VariogramModel model;
  std::array<double, 2> target{0.0, 0.0};
};

struct KrigingWeights {
  std::vector<double> weights;
  double lagrange = 0.0;
};

struct KrigingConfig {
  std::size_t max_neighbors = 16;
  double search_radius = 0.0; // meters; 0 selects 4x the variogram range
  bool clamp = true;          // clip predictions to [0,1] (indicator data)
};

/// Prediction bookkeeping for a predict_grid run.
struct KrigingDiagnostics {
  std::size_t nan_cells = 0;      // targets with no neighbor in radius
  std::size_t clamped_cells = 0;  // predictions clipped to [0,1]
  std::size_t min_neighbors = 0;
  std::size_t max_neighbors = 0;
  bool global = false;            // all samples used for every target
};

namespace detail {

inline double dist2(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

/// Assemble the augmented ordinary-kriging system
///   [ Gamma  1 ] [lambda]   [ gamma(x_l, x0) ]
///   [ 1^T    0 ] [  mu  ] = [       1        ]
/// for the given sample subset.
inline SquareMatrix build_ok_matrix(const std::vector<std::array<double, 2>>& pts,
                                    const VariogramModel& model) {
  const std::size_t k = pts.size();
  SquareMatrix a(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double g = model_eval(model, std::sqrt(dist2(pts[i], pts[j])));
      a(i, j) = g;
      a(j, i) = g;
    }
    a(i, k) = 1.0;
    a(k, i) = 1.0;
  }
  return a;
}

inline std::vector<double> build_ok_rhs(const std::vector<std::array<double, 2>>& pts,
                                        const VariogramModel& model,
                                        const std::array<double, 2>& target) {
  std::vector<double> b(pts.size() + 1);
  for (std::size_t i = 0; i < pts.size(); ++i)
    b[i] = model_eval(model, std::sqrt(dist2(pts[i], target)));
  b[pts.size()] = 1.0;
  return b;
}

} // namespace detail

/// Solve the ordinary-kriging normal equations for BLUE weights. The
/// augmented symmetric-indefinite system goes through a partial-pivot direct
/// solve with a 1e-12 relative pivot threshold; duplicate sample locations or
/// a degenerate model surface a numerical_error naming the offending pivot.
inline KrigingWeights solve_weights(const KrigingSystem& sys) {
  const std::size_t k = sys.locations.size();
  if (k < 1) throw validation_error("solve_weights: need at least one sample");
  if (sys.values.size() != k)
    throw validation_error("solve_weights: values/locations length mismatch");
  sys.model.check();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (detail::dist2(sys.locations[i], sys.locations[j]) == 0.0)
        throw numerical_error("solve_weights: duplicate sample locations " + std::to_string(i) +
                              " and " + std::to_string(j));

  if (k == 1) return {{1.0}, 0.0}; // forced by the unbiasedness constraint

  auto a = detail::build_ok_matrix(sys.locations, sys.model);
  const auto b = detail::build_ok_rhs(sys.locations, sys.model, sys.target);
  std::vector<double> x;
  try {
    x = detail::solve_dense(std::move(a), b);
  } catch (const numerical_error& e) {
    throw numerical_error(std::string("solve_weights: ") + e.what() + " (k=" +
                          std::to_string(k) + ", model=" + family_name(sys.model.family) + ")");
  }
  KrigingWeights w;
  w.weights.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k));
  w.lagrange = x[k];
  return w;
}

/// BLUE estimate at the target. A target that coincides with a sample
/// location returns that sample's value exactly (kriging exactness).
inline double predict_point(const KrigingSystem& sys) {
  for (std::size_t i = 0; i < sys.locations.size(); ++i)
    if (detail::dist2(sys.locations[i], sys.target) == 0.0) return sys.values[i];
  const auto w = solve_weights(sys);
  double est = 0.0;
  for (std::size_t i = 0; i < w.weights.size(); ++i) est += w.weights[i] * sys.values[i];
  return est;
}

namespace detail {

/// Point samples extracted from a grid (pixel centers, NaN dropped).
struct GridSamples {
  std::vector<std::array<double, 2>> pts;
  std::vector<double> vals;
  std::vector<std::ptrdiff_t> cell_index; // rows*cols -> sample index or -1
  const RasterGrid* grid = nullptr;

  static GridSamples from_grid(const RasterGrid& g) {
    GridSamples s;
    s.grid = &g;
    s.cell_index.assign(g.rows * g.cols, -1);
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) {
        const double v = g.at(r, c);
        if (std::isnan(v)) continue;
        s.cell_index[r * g.cols + c] = static_cast<std::ptrdiff_t>(s.pts.size());
        s.pts.push_back({g.center_x(c), g.center_y(r)});
        s.vals.push_back(v);
      }
    return s;
  }

  /// Indices of samples within `radius` of (x, y), nearest max_n kept,
  /// ties broken by sample index for schedule-independent determinism.
  void neighbors(double x, double y, double radius, std::size_t max_n,
                 std::vector<std::pair<double, std::size_t>>& out) const {
    out.clear();
    const RasterGrid& g = *grid;
    const double r2 = radius * radius;
    const long c_lo = static_cast<long>(std::floor((x - radius - g.origin_x) / g.pixel_size - 0.5));
    const long c_hi = static_cast<long>(std::ceil((x + radius - g.origin_x) / g.pixel_size - 0.5));
    const long r_lo = static_cast<long>(std::floor((y - radius - g.origin_y) / g.pixel_size - 0.5));
    const long r_hi = static_cast<long>(std::ceil((y + radius - g.origin_y) / g.pixel_size - 0.5));
    for (long rr = std::max(0L, r_lo); rr <= std::min(static_cast<long>(g.rows) - 1, r_hi); ++rr) {
      for (long cc = std::max(0L, c_lo); cc <= std::min(static_cast<long>(g.cols) - 1, c_hi); ++cc) {
        const auto idx = cell_index[static_cast<std::size_t>(rr) * g.cols +
                                    static_cast<std::size_t>(cc)];
        if (idx < 0) continue;
        const auto si = static_cast<std::size_t>(idx);
        const double dx = pts[si][0] - x;
        const double dy = pts[si][1] - y;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= r2) out.emplace_back(d2, si);
      }
    }
    if (out.size() > max_n) {
      std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(max_n), out.end());
      out.resize(max_n);
    } else {
      std::sort(out.begin(), out.end());
    }
  }
};

} // namespace detail

/// Point-krige a grid of samples onto an output grid of the same spatial
/// extent with pixel size `out_pixel_size`. Each output pixel center is
/// estimated from the nearest `max_neighbors` samples within
/// `search_radius`; when the sample count is at most 64, or the
/// configuration admits every sample everywhere, all samples are used with a
/// single shared factorization. A target with no neighbor in radius becomes
/// NaN. Predictions are clipped to [0,1] when `clamp` is set; weights are
/// never clipped. Work is split across `n_threads` by output row; results do
/// not depend on the schedule.
inline RasterGrid predict_grid(const RasterGrid& samples, const VariogramModel& model,
                               double out_pixel_size, const KrigingConfig& config,
                               KrigingDiagnostics* diag = nullptr, unsigned n_threads = 1) {
  samples.check();
  model.check();
  if (!(out_pixel_size > 0.0)) throw validation_error("predict_grid: out_pixel_size must be > 0");
  if (config.max_neighbors < 1) throw validation_error("predict_grid: max_neighbors must be >= 1");
  if (config.search_radius < 0.0)
    throw validation_error("predict_grid: search_radius must be >= 0");

  const auto gs = detail::GridSamples::from_grid(samples);
  const std::size_t k = gs.pts.size();
  if (k == 0) throw validation_error("predict_grid: sample grid is entirely NaN");

  const double width = static_cast<double>(samples.cols) * samples.pixel_size;
  const double height = static_cast<double>(samples.rows) * samples.pixel_size;
  const auto out_rows = std::max<std::size_t>(1, static_cast<std::size_t>(
                            std::llround(height / out_pixel_size)));
  const auto out_cols = std::max<std::size_t>(1, static_cast<std::size_t>(
                            std::llround(width / out_pixel_size)));

  RasterGrid out(out_rows, out_cols, 0.0, out_pixel_size);
  out.origin_x = samples.origin_x;
  out.origin_y = samples.origin_y;

  double radius = config.search_radius > 0.0 ? config.search_radius : 4.0 * model.range;
  const double diag_len = std::hypot(width, height);
  const bool global = k <= 64 || (config.max_neighbors >= k && radius >= diag_len);
  if (global) radius = diag_len;

  // Squared-distance tolerance under which a target is taken to coincide
  // with a sample (exactness shortcut).
  const double coincide2 = 1e-18 * samples.pixel_size * samples.pixel_size;

  // Global mode: one factorization serves every target.
  detail::SquareMatrix global_lu(1);
  std::vector<std::size_t> global_perm;
  if (global) {
    auto a = detail::build_ok_matrix(gs.pts, model);
    global_perm = detail::lu_factor(a);
    global_lu = std::move(a);
  }

  struct ThreadDiag {
    std::size_t nan_cells = 0, clamped = 0;
    std::size_t min_n = std::numeric_limits<std::size_t>::max(), max_n = 0;
  };
  const unsigned jobs = std::max(1u, n_threads);
  std::vector<ThreadDiag> tdiag(jobs);

  auto run_rows = [&](std::size_t r0, std::size_t r1, ThreadDiag& td) {
    std::vector<std::pair<double, std::size_t>> nbr;
    std::vector<double> rhs, sol;
    std::vector<std::array<double, 2>> pts;
    std::vector<double> vals;
    for (std::size_t r = r0; r < r1; ++r) {
      const double y = out.center_y(r);
      for (std::size_t c = 0; c < out.cols; ++c) {
        const double x = out.center_x(c);
        double est = 0.0;
        if (global) {
          std::ptrdiff_t hit = -1;
          rhs.assign(k + 1, 0.0);
          for (std::size_t i = 0; i < k; ++i) {
            const double d2 = detail::dist2(gs.pts[i], {x, y});
            if (d2 <= coincide2) { hit = static_cast<std::ptrdiff_t>(i); break; }
            rhs[i] = model_eval(model, std::sqrt(d2));
          }
          td.min_n = std::min(td.min_n, k);
          td.max_n = std::max(td.max_n, k);
          if (hit >= 0) {
            est = gs.vals[static_cast<std::size_t>(hit)];
          } else {
            rhs[k] = 1.0;
            sol.assign(k + 1, 0.0);
            detail::lu_solve(global_lu, global_perm, rhs.data(), sol.data());
            est = 0.0;
            for (std::size_t i = 0; i < k; ++i) est += sol[i] * gs.vals[i];
          }
        } else {
          gs.neighbors(x, y, radius, config.max_neighbors, nbr);
          td.min_n = std::min(td.min_n, nbr.size());
          td.max_n = std::max(td.max_n, nbr.size());
          if (nbr.empty()) {
            out.at(r, c) = std::numeric_limits<double>::quiet_NaN();
            ++td.nan_cells;
            continue;
          }
          if (nbr.front().first <= coincide2) {
            est = gs.vals[nbr.front().second];
          } else {
            pts.clear();
            vals.clear();
            for (const auto& [d2, si] : nbr) {
              pts.push_back(gs.pts[si]);
              vals.push_back(gs.vals[si]);
            }
            KrigingSystem sys{pts, vals, model, {x, y}};
            const auto w = solve_weights(sys);
            est = 0.0;
            for (std::size_t i = 0; i < vals.size(); ++i) est += w.weights[i] * vals[i];
          }
        }
        if (config.clamp) {
          const double clipped = std::clamp(est, 0.0, 1.0);
          if (clipped != est) ++td.clamped;
          est = clipped;
        }
        out.at(r, c) = est;
      }
    }
  };

  if (jobs == 1) {
    run_rows(0, out.rows, tdiag[0]);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (out.rows + jobs - 1) / jobs;
    for (unsigned t = 0; t < jobs; ++t) {
      const std::size_t r0 = std::min<std::size_t>(out.rows, t * chunk);
      const std::size_t r1 = std::min<std::size_t>(out.rows, r0 + chunk);
      if (r0 >= r1) break;
      pool.emplace_back(run_rows, r0, r1, std::ref(tdiag[t]));
    }
    for (auto& th : pool) th.join();
  }

  if (diag) {
    KrigingDiagnostics d;
    d.global = global;
    d.min_neighbors = std::numeric_limits<std::size_t>::max();
    for (const auto& td : tdiag) {
      d.nan_cells += td.nan_cells;
      d.clamped_cells += td.clamped;
      d.min_neighbors = std::min(d.min_neighbors, td.min_n);
      d.max_neighbors = std::max(d.max_neighbors, td.max_n);
    }
    if (d.min_neighbors == std::numeric_limits<std::size_t>::max()) d.min_neighbors = 0;
    *diag = d;
  }
  return out;
}

} // namespace ksc
