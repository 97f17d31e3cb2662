#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ksc/detail/random.hpp"
#include "ksc/errors.hpp"
#include "ksc/kbsc.hpp"
#include "ksc/raster.hpp"
#include "ksc/signatures.hpp"

namespace ksc {

struct SceneClass {
  std::string label;
  std::vector<double> band_means; // DN per band
  std::vector<double> band_sds;   // DN per band; spread of the synthetic ground signatures
  double target_fraction = 0.0;
};

/// Recipe for a synthetic scene: a spatially autocorrelated fine-resolution
/// class layout, fine DN imagery, and the mean-degraded coarse imagery the
/// classifiers see. Everything is a deterministic function of `seed`.
struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t fine_rows = 0;
  std::size_t fine_cols = 0;
  double fine_pixel_size = 1.0; // meters
  std::size_t coarsen_factor = 2;
  std::vector<SceneClass> classes;
  double autocorr_range = 1.0; // meters; kernel scale of the latent field
  double noise_sd = 0.0;       // DN; per-pixel sensor noise on the fine imagery
  std::vector<std::pair<double, double>> band_windows; // optional; defaulted

  std::size_t bands() const { return classes.empty() ? 0 : classes.front().band_means.size(); }

  void check() const {
    if (fine_rows < 1 || fine_cols < 1) throw validation_error("SceneSpec: empty fine grid");
    if (!(fine_pixel_size > 0.0)) throw validation_error("SceneSpec: fine_pixel_size must be > 0");
    if (coarsen_factor < 2) throw validation_error("SceneSpec: coarsen_factor must be >= 2");
    if (fine_rows % coarsen_factor != 0 || fine_cols % coarsen_factor != 0)
      throw validation_error("SceneSpec: fine dims must be divisible by coarsen_factor");
    if (classes.empty()) throw validation_error("SceneSpec: no classes");
    if (!(autocorr_range > 0.0)) throw validation_error("SceneSpec: autocorr_range must be > 0");
    if (!(noise_sd >= 0.0)) throw validation_error("SceneSpec: noise_sd must be >= 0");
    const std::size_t b = classes.front().band_means.size();
    if (b == 0) throw validation_error("SceneSpec: classes need at least one band");
    double frac = 0.0;
    for (const auto& c : classes) {
      if (c.band_means.size() != b || c.band_sds.size() != b)
        throw validation_error("SceneSpec: class '" + c.label + "' band count mismatch");
      if (!(c.target_fraction >= 0.0 && c.target_fraction <= 1.0))
        throw validation_error("SceneSpec: class '" + c.label +
                               "' target_fraction outside [0,1]");
      for (double s : c.band_sds)
        if (!(s >= 0.0)) throw validation_error("SceneSpec: negative band sd");
      frac += c.target_fraction;
    }
    if (std::abs(frac - 1.0) > 1e-9)
      throw validation_error("SceneSpec: target_fraction values must sum to 1");
    if (!band_windows.empty() && band_windows.size() != b)
      throw validation_error("SceneSpec: band_windows length mismatch");
  }

  std::vector<std::pair<double, double>> windows() const {
    if (!band_windows.empty()) return band_windows;
    std::vector<std::pair<double, double>> w;
    for (std::size_t i = 0; i < bands(); ++i)
      w.emplace_back(400.0 + 100.0 * static_cast<double>(i),
                     480.0 + 100.0 * static_cast<double>(i));
    return w;
  }
};

struct Scene {
  RasterGrid fine_labels;                    // class index per fine pixel
  BandStack fine_dn;
  BandStack coarse_dn;
  std::vector<ProbabilityMap> true_proportions; // per class, coarse grid
};

namespace detail {

/// Separable Gaussian blur with reflected boundaries; sigma in pixels.
inline void gaussian_blur_inplace(RasterGrid& g, double sigma_px) {
  const auto radius = std::max<long>(1, static_cast<long>(std::ceil(3.0 * sigma_px)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (static_cast<double>(i) / sigma_px) *
                              (static_cast<double>(i) / sigma_px));
    taps[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;

  const auto rows = static_cast<long>(g.rows), cols = static_cast<long>(g.cols);
  auto reflect = [](long i, long n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  std::vector<double> tmp(g.values.size());
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      double s = 0.0;
      for (long t = -radius; t <= radius; ++t)
        s += taps[static_cast<std::size_t>(t + radius)] *
             g.values[static_cast<std::size_t>(r) * g.cols +
                      static_cast<std::size_t>(reflect(c + t, cols))];
      tmp[static_cast<std::size_t>(r) * g.cols + static_cast<std::size_t>(c)] = s;
    }
  for (long c = 0; c < cols; ++c)
    for (long r = 0; r < rows; ++r) {
      double s = 0.0;
      for (long t = -radius; t <= radius; ++t)
        s += taps[static_cast<std::size_t>(t + radius)] *
             tmp[static_cast<std::size_t>(reflect(r + t, rows)) * g.cols +
                 static_cast<std::size_t>(c)];
      g.values[static_cast<std::size_t>(r) * g.cols + static_cast<std::size_t>(c)] = s;
    }
}

/// Quantile thresholding of the latent field: the n_frac(0) smallest values
/// take class 0, the next slice class 1, and so on. Ties resolve by pixel
/// index, so realized fractions hit the targets to 1/N exactly.
inline RasterGrid labels_from_latent(const RasterGrid& latent,
                                     const std::vector<SceneClass>& classes) {
  std::vector<std::size_t> order(latent.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (latent.values[a] != latent.values[b]) return latent.values[a] < latent.values[b];
    return a < b;
  });
  RasterGrid labels = latent;
  const auto n = static_cast<double>(order.size());
  double cum = 0.0;
  std::size_t start = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    cum += classes[c].target_fraction;
    const auto stop = (c + 1 == classes.size())
                          ? order.size()
                          : std::min(order.size(), static_cast<std::size_t>(std::llround(cum * n)));
    for (std::size_t i = start; i < stop; ++i)
      labels.values[order[i]] = static_cast<double>(c);
    start = stop;
  }
  return labels;
}

inline constexpr std::uint64_t ghs_seed_salt = 0x6B73635F67687321ull;

} // namespace detail

/// Deterministic scene synthesis. Random draws come from mt19937_64(seed) in
/// a fixed order: the latent label-field noise first (row-major), then one
/// normal draw per fine pixel per band (band-major, row-major within a
/// band). `label_override`, when given, replaces the latent-field labels
/// entirely (direct label injection for tests); the label noise is still
/// drawn so DN values do not depend on whether injection was used.
inline Scene generate_scene(const SceneSpec& spec,
                            const RasterGrid* label_override = nullptr) {
  spec.check();
  const std::size_t b = spec.bands();
  detail::Rng rng(spec.seed);

  RasterGrid latent(spec.fine_rows, spec.fine_cols, 0.0, spec.fine_pixel_size);
  for (double& v : latent.values) v = rng.gauss();
  const double sigma_px = 0.5 * spec.autocorr_range / spec.fine_pixel_size;
  if (sigma_px > 1e-9) detail::gaussian_blur_inplace(latent, sigma_px);

  Scene scene;
  if (label_override) {
    label_override->check();
    if (label_override->rows != spec.fine_rows || label_override->cols != spec.fine_cols)
      throw validation_error("generate_scene: label_override shape mismatch");
    for (double v : label_override->values)
      if (std::isnan(v) || v < 0.0 || v >= static_cast<double>(spec.classes.size()) ||
          v != std::floor(v))
        throw validation_error("generate_scene: label_override holds invalid class indices");
    scene.fine_labels = *label_override;
    scene.fine_labels.pixel_size = spec.fine_pixel_size;
  } else {
    scene.fine_labels = detail::labels_from_latent(latent, spec.classes);
  }

  scene.fine_dn.band_windows = spec.windows();
  for (std::size_t band = 0; band < b; ++band) {
    RasterGrid g(spec.fine_rows, spec.fine_cols, 0.0, spec.fine_pixel_size);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const auto cls = static_cast<std::size_t>(scene.fine_labels.values[i]);
      g.values[i] = spec.classes[cls].band_means[band] + spec.noise_sd * rng.gauss();
    }
    scene.fine_dn.bands.push_back(std::move(g));
  }
  scene.fine_dn.check();

  scene.coarse_dn.band_windows = spec.windows();
  for (const auto& band : scene.fine_dn.bands)
    scene.coarse_dn.bands.push_back(upscale_mean(band, spec.coarsen_factor));
  scene.coarse_dn.check();

  const std::size_t f = spec.coarsen_factor;
  const std::size_t crows = spec.fine_rows / f, ccols = spec.fine_cols / f;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    ProbabilityMap pm;
    pm.cls = spec.classes[c].label;
    pm.grid = RasterGrid(crows, ccols, 0.0, spec.fine_pixel_size * static_cast<double>(f));
    for (std::size_t r = 0; r < crows; ++r)
      for (std::size_t cc = 0; cc < ccols; ++cc) {
        std::size_t hits = 0;
        for (std::size_t dr = 0; dr < f; ++dr)
          for (std::size_t dc = 0; dc < f; ++dc)
            if (static_cast<std::size_t>(scene.fine_labels.at(r * f + dr, cc * f + dc)) == c)
              ++hits;
        pm.grid.at(r, cc) = static_cast<double>(hits) / static_cast<double>(f * f);
      }
    scene.true_proportions.push_back(std::move(pm));
  }
  return scene;
}

/// Synthetic ground-signature samples: per class and band,
/// `samples_per_class` normal draws around the class band mean with the
/// class band sd. Seeded independently of the scene imagery
/// (mt19937_64(seed ^ salt)); draw order is class-major, band-major, sample
/// last.
inline ClassDnSamples ghs_from_spec(const SceneSpec& spec, std::size_t samples_per_class) {
  spec.check();
  if (samples_per_class < 2)
    throw validation_error("ghs_from_spec: samples_per_class must be >= 2");
  detail::Rng rng(spec.seed ^ detail::ghs_seed_salt);
  ClassDnSamples out;
  for (const auto& cls : spec.classes) {
    std::vector<std::vector<double>> per_band(spec.bands());
    for (std::size_t band = 0; band < spec.bands(); ++band) {
      per_band[band].reserve(samples_per_class);
      for (std::size_t s = 0; s < samples_per_class; ++s)
        per_band[band].push_back(rng.gauss(cls.band_means[band], cls.band_sds[band]));
    }
    out.emplace_back(cls.label, std::move(per_band));
  }
  return out;
}

} // namespace ksc
