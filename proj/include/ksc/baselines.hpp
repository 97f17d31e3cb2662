#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "ksc/detail/linalg.hpp"
#include "ksc/errors.hpp"
#include "ksc/kbsc.hpp"
#include "ksc/raster.hpp"
#include "ksc/signatures.hpp"

namespace ksc {

/// Per-class multivariate Gaussian model over band DN vectors.
struct GaussianSignature {
  std::string cls;
  std::vector<double> mean;  // per band
  std::vector<double> cov;   // bands x bands, row-major, symmetric PSD
  double prior = 0.0;
};

/// Wang-style fuzzy signature: membership-weighted mean and covariance.
struct FuzzySignature {
  std::string cls;
  std::vector<double> mean;
  std::vector<double> cov;
};

namespace detail {

/// Ridge-stabilized Cholesky factor plus log-determinant for a class
/// covariance. The ridge (1e-8 * trace/bands, with an absolute floor for a
/// zero matrix) is applied when the smallest eigenvalue drops below
/// 1e-10 * trace.
struct DensityModel {
  SquareMatrix chol{1};
  std::vector<double> mean;
  double log_norm = 0.0; // -0.5*(logdet + b*log(2*pi))

  static DensityModel build(const std::vector<double>& mean, const std::vector<double>& cov) {
    const std::size_t b = mean.size();
    SquareMatrix m(b);
    for (std::size_t i = 0; i < b * b; ++i) m.a[i] = cov[i];

    double trace = 0.0;
    for (std::size_t i = 0; i < b; ++i) trace += m(i, i);
    const auto eig = symmetric_eigenvalues(m);
    const double min_eig = *std::min_element(eig.begin(), eig.end());
    if (min_eig < 1e-10 * trace || trace <= 0.0) {
      const double ridge = trace > 0.0 ? 1e-8 * trace / static_cast<double>(b) : 1e-8;
      for (std::size_t i = 0; i < b; ++i) m(i, i) += ridge;
    }
    if (!cholesky(m))
      throw numerical_error("baselines: covariance still singular after ridge");

    DensityModel dm;
    dm.mean = mean;
    double logdet = 0.0;
    for (std::size_t i = 0; i < b; ++i) logdet += 2.0 * std::log(m(i, i));
    dm.log_norm = -0.5 * (logdet + static_cast<double>(b) * std::log(2.0 * 3.14159265358979323846));
    dm.chol = std::move(m);
    return dm;
  }

  double log_density(const double* x) const {
    const std::size_t b = mean.size();
    // quad = (x-mu)^T Sigma^-1 (x-mu) via one forward substitution
    double quad = 0.0;
    std::vector<double> y(b);
    for (std::size_t i = 0; i < b; ++i) {
      double s = x[i] - mean[i];
      for (std::size_t j = 0; j < i; ++j) s -= chol(i, j) * y[j];
      y[i] = s / chol(i, i);
      quad += y[i] * y[i];
    }
    return log_norm - 0.5 * quad;
  }
};

inline bool pixel_vector(const BandStack& stack, std::size_t i, std::vector<double>& x) {
  for (std::size_t b = 0; b < stack.bands.size(); ++b) {
    const double v = stack.bands[b].values[i];
    if (std::isnan(v)) return false;
    x[b] = v;
  }
  return true;
}

} // namespace detail

/// Sample mean and covariance per class from labeled pixels. `labels` holds
/// the class index per pixel (anything negative or NaN is unlabeled).
/// Covariance uses the n-1 denominator. Priors default to uniform; supplied
/// priors are normalized.
inline std::vector<GaussianSignature> train_gaussian(const BandStack& stack,
                                                     const RasterGrid& labels,
                                                     const std::vector<std::string>& classes,
                                                     const std::vector<double>& priors = {}) {
  stack.check();
  labels.check();
  if (!labels.same_geometry(stack.bands.front()))
    throw validation_error("train_gaussian: label grid geometry mismatch");
  if (classes.empty()) throw validation_error("train_gaussian: no classes");
  if (!priors.empty() && priors.size() != classes.size())
    throw validation_error("train_gaussian: priors length != classes length");

  const std::size_t b = stack.bands.size();
  const std::size_t n_cls = classes.size();
  std::vector<std::vector<std::vector<double>>> pix(n_cls); // class -> list of band vectors
  std::vector<double> x(b);
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const double lv = labels.values[i];
    if (std::isnan(lv) || lv < 0.0) continue;
    const auto c = static_cast<std::size_t>(lv);
    if (c >= n_cls) continue;
    if (!detail::pixel_vector(stack, i, x)) continue;
    pix[c].push_back(x);
  }

  double prior_sum = 0.0;
  if (!priors.empty()) {
    for (double p : priors) {
      if (!(p >= 0.0)) throw validation_error("train_gaussian: negative prior");
      prior_sum += p;
    }
    if (!(prior_sum > 0.0)) throw validation_error("train_gaussian: priors sum to zero");
  }

  std::vector<GaussianSignature> sigs;
  for (std::size_t c = 0; c < n_cls; ++c) {
    const auto& xs = pix[c];
    if (xs.empty())
      throw validation_error("train_gaussian: class '" + classes[c] + "' has no training pixels");
    GaussianSignature sig;
    sig.cls = classes[c];
    sig.prior = priors.empty() ? 1.0 / static_cast<double>(n_cls) : priors[c] / prior_sum;
    sig.mean.assign(b, 0.0);
    for (const auto& v : xs)
      for (std::size_t j = 0; j < b; ++j) sig.mean[j] += v[j];
    for (double& m : sig.mean) m /= static_cast<double>(xs.size());
    sig.cov.assign(b * b, 0.0);
    if (xs.size() > 1) {
      for (const auto& v : xs)
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t j = 0; j < b; ++j)
            sig.cov[i * b + j] += (v[i] - sig.mean[i]) * (v[j] - sig.mean[j]);
      for (double& cv : sig.cov) cv /= static_cast<double>(xs.size() - 1);
    }
    sigs.push_back(std::move(sig));
  }
  return sigs;
}

/// Default training-set construction when no labels are supplied: a pixel is
/// a training pixel for a class when its DN lies inside that class's
/// [L_i, U_i] in every band, and inside no other class's full range.
inline RasterGrid threshold_pure_training(const BandStack& stack, const SignatureStats& stats,
                                          const std::vector<std::string>& classes) {
  stack.check();
  RasterGrid labels = stack.bands.front();
  std::vector<double> x(stack.bands.size());
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    if (!detail::pixel_vector(stack, i, x)) {
      labels.values[i] = -1.0;
      continue;
    }
    std::ptrdiff_t hit = -1;
    bool ambiguous = false;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      bool in_range = true;
      for (std::size_t b = 0; b < stack.bands.size(); ++b) {
        const auto& th = stats.threshold(classes[c], b);
        if (!(x[b] >= th.lower && x[b] <= th.upper)) { in_range = false; break; }
      }
      if (in_range) {
        if (hit >= 0) { ambiguous = true; break; }
        hit = static_cast<std::ptrdiff_t>(c);
      }
    }
    labels.values[i] = (ambiguous || hit < 0) ? -1.0 : static_cast<double>(hit);
  }
  return labels;
}

namespace detail {

inline std::vector<DensityModel> build_models(const std::vector<GaussianSignature>& sigs) {
  if (sigs.empty()) throw validation_error("baselines: empty signature set");
  std::vector<DensityModel> models;
  for (const auto& s : sigs) models.push_back(DensityModel::build(s.mean, s.cov));
  return models;
}

/// log(prior_c) + log density_c per class, or empty when the pixel has NaN.
template <typename SigT>
inline bool class_log_scores(const BandStack& stack, std::size_t i,
                             const std::vector<SigT>& sigs,
                             const std::vector<DensityModel>& models, bool use_priors,
                             std::vector<double>& x, std::vector<double>& scores) {
  if (!pixel_vector(stack, i, x)) return false;
  for (std::size_t c = 0; c < sigs.size(); ++c) {
    double s = models[c].log_density(x.data());
    if constexpr (std::is_same_v<SigT, GaussianSignature>) {
      if (use_priors) s += std::log(sigs[c].prior > 0.0 ? sigs[c].prior : 1e-300);
    }
    scores[c] = s;
  }
  return true;
}

/// exp-normalize in log space; never NaN even when every density underflows.
inline void softmax_inplace(std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - m);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

} // namespace detail

/// Hard maximum-likelihood labels: per pixel, argmax of log prior + log
/// Gaussian density; ties take the earliest class. NaN pixels get -1.
inline RasterGrid maxlike(const BandStack& stack, const std::vector<GaussianSignature>& sigs) {
  stack.check();
  const auto models = detail::build_models(sigs);
  RasterGrid labels = stack.bands.front();
  std::vector<double> x(stack.bands.size()), scores(sigs.size());
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    if (!detail::class_log_scores(stack, i, sigs, models, true, x, scores)) {
      labels.values[i] = -1.0;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
      if (scores[c] > scores[best]) best = c;
    labels.values[i] = static_cast<double>(best);
  }
  return labels;
}

/// Bayesian posterior membership per class; rows sum to one.
inline std::vector<ProbabilityMap> bayclass(const BandStack& stack,
                                            const std::vector<GaussianSignature>& sigs) {
  stack.check();
  const auto models = detail::build_models(sigs);
  std::vector<ProbabilityMap> maps(sigs.size());
  for (std::size_t c = 0; c < sigs.size(); ++c) {
    maps[c].cls = sigs[c].cls;
    maps[c].grid = stack.bands.front();
  }
  std::vector<double> x(stack.bands.size()), scores(sigs.size());
  for (std::size_t i = 0; i < stack.bands.front().values.size(); ++i) {
    if (!detail::class_log_scores(stack, i, sigs, models, true, x, scores)) {
      for (auto& m : maps) m.grid.values[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    detail::softmax_inplace(scores);
    for (std::size_t c = 0; c < sigs.size(); ++c) maps[c].grid.values[i] = scores[c];
  }
  return maps;
}

/// Dempster-Shafer style belief and plausibility per class.
struct BeliefMaps {
  std::vector<ProbabilityMap> belief;
  std::vector<ProbabilityMap> plausibility;
};

/// Basic probability assignment per pixel: with normalized supports q_c
/// (the Bayesian posteriors), the ignorance set takes
/// m(Theta) = 1 - max q, each singleton takes m(c) = q_c * (1 - m(Theta)),
/// and then belief(c) = m(c), plausibility(c) = m(c) + m(Theta). The belief
/// interval is m(Theta) for every class.
inline BeliefMaps belclass(const BandStack& stack, const std::vector<GaussianSignature>& sigs) {
  stack.check();
  const auto models = detail::build_models(sigs);
  BeliefMaps out;
  out.belief.resize(sigs.size());
  out.plausibility.resize(sigs.size());
  for (std::size_t c = 0; c < sigs.size(); ++c) {
    out.belief[c].cls = sigs[c].cls;
    out.belief[c].grid = stack.bands.front();
    out.plausibility[c].cls = sigs[c].cls;
    out.plausibility[c].grid = stack.bands.front();
  }
  std::vector<double> x(stack.bands.size()), scores(sigs.size());
  for (std::size_t i = 0; i < stack.bands.front().values.size(); ++i) {
    if (!detail::class_log_scores(stack, i, sigs, models, true, x, scores)) {
      for (std::size_t c = 0; c < sigs.size(); ++c) {
        out.belief[c].grid.values[i] = std::numeric_limits<double>::quiet_NaN();
        out.plausibility[c].grid.values[i] = std::numeric_limits<double>::quiet_NaN();
      }
      continue;
    }
    detail::softmax_inplace(scores);
    const double q_max = *std::max_element(scores.begin(), scores.end());
    const double m_theta = 1.0 - q_max;
    for (std::size_t c = 0; c < sigs.size(); ++c) {
      const double m_c = scores[c] * (1.0 - m_theta);
      out.belief[c].grid.values[i] = m_c;
      out.plausibility[c].grid.values[i] = m_c + m_theta;
    }
  }
  return out;
}

/// Membership-weighted signature training (Wang's formulation). The
/// covariance uses a Bessel-style (sum of memberships - 1) denominator so
/// crisp memberships reduce exactly to train_gaussian.
inline std::vector<FuzzySignature> train_fuzzy(const BandStack& stack,
                                               const std::vector<ProbabilityMap>& memberships) {
  stack.check();
  if (memberships.empty()) throw validation_error("train_fuzzy: no membership maps");
  const std::size_t b = stack.bands.size();
  std::vector<FuzzySignature> sigs;
  std::vector<double> x(b);
  for (const auto& mem : memberships) {
    mem.grid.check();
    if (!mem.grid.same_geometry(stack.bands.front()))
      throw validation_error("train_fuzzy: membership geometry mismatch");
    FuzzySignature sig;
    sig.cls = mem.cls;
    sig.mean.assign(b, 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < mem.grid.values.size(); ++i) {
      const double w = mem.grid.values[i];
      if (std::isnan(w) || w <= 0.0) continue;
      if (!detail::pixel_vector(stack, i, x)) continue;
      wsum += w;
      for (std::size_t j = 0; j < b; ++j) sig.mean[j] += w * x[j];
    }
    if (!(wsum > 0.0))
      throw validation_error("train_fuzzy: class '" + mem.cls + "' has zero total membership");
    for (double& m : sig.mean) m /= wsum;
    sig.cov.assign(b * b, 0.0);
    if (wsum > 1.0) {
      for (std::size_t i = 0; i < mem.grid.values.size(); ++i) {
        const double w = mem.grid.values[i];
        if (std::isnan(w) || w <= 0.0) continue;
        if (!detail::pixel_vector(stack, i, x)) continue;
        for (std::size_t p = 0; p < b; ++p)
          for (std::size_t q = 0; q < b; ++q)
            sig.cov[p * b + q] += w * (x[p] - sig.mean[p]) * (x[q] - sig.mean[q]);
      }
      for (double& cv : sig.cov) cv /= (wsum - 1.0);
    }
    sigs.push_back(std::move(sig));
  }
  return sigs;
}

/// Crisp memberships from a label grid.
inline std::vector<ProbabilityMap> crisp_memberships(const RasterGrid& labels,
                                                     const std::vector<std::string>& classes) {
  labels.check();
  std::vector<ProbabilityMap> maps(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    maps[c].cls = classes[c];
    maps[c].grid = labels;
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
      const double lv = labels.values[i];
      maps[c].grid.values[i] =
          (!std::isnan(lv) && lv >= 0.0 && static_cast<std::size_t>(lv) == c) ? 1.0 : 0.0;
    }
  }
  return maps;
}

/// Supervised fuzzy memberships: Gaussian density under each fuzzy signature,
/// normalized across classes (no priors).
inline std::vector<ProbabilityMap> fuzzyclass(const BandStack& stack,
                                              const std::vector<FuzzySignature>& fsigs) {
  stack.check();
  if (fsigs.empty()) throw validation_error("fuzzyclass: empty signature set");
  std::vector<detail::DensityModel> models;
  for (const auto& s : fsigs) models.push_back(detail::DensityModel::build(s.mean, s.cov));
  std::vector<ProbabilityMap> maps(fsigs.size());
  for (std::size_t c = 0; c < fsigs.size(); ++c) {
    maps[c].cls = fsigs[c].cls;
    maps[c].grid = stack.bands.front();
  }
  std::vector<double> x(stack.bands.size()), scores(fsigs.size());
  for (std::size_t i = 0; i < stack.bands.front().values.size(); ++i) {
    if (!detail::class_log_scores(stack, i, fsigs, models, false, x, scores)) {
      for (auto& m : maps) m.grid.values[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    detail::softmax_inplace(scores);
    for (std::size_t c = 0; c < fsigs.size(); ++c) maps[c].grid.values[i] = scores[c];
  }
  return maps;
}

} // namespace ksc
