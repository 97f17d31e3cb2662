#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ksc/detail/special.hpp"
#include "ksc/errors.hpp"
#include "ksc/radiometry.hpp"

namespace ksc {

/// One field-measured reflectance spectrum.
struct Spectrum {
  std::vector<double> wavelengths_nm; // strictly ascending
  std::vector<double> reflectance;    // in [0,1]
  std::string label;

  void check() const {
    if (wavelengths_nm.size() != reflectance.size() || wavelengths_nm.empty())
      throw validation_error("Spectrum: wavelength/reflectance length mismatch or empty");
    for (std::size_t i = 1; i < wavelengths_nm.size(); ++i)
      if (!(wavelengths_nm[i] > wavelengths_nm[i - 1]))
        throw validation_error("Spectrum: wavelengths must be strictly ascending");
    for (double r : reflectance)
      if (!(r >= 0.0 && r <= 1.0))
        throw validation_error("Spectrum: reflectance outside [0,1]");
  }
};

/// Which count plays the role of n in (x̄ ± t_{α,n} s/√n).
///  - bands:   n = number of spectrum samples inside the sensor band window
///             (the letter's verbatim reading).
///  - samples: n = number of field samples minus one (the conventional
///             degrees of freedom).
enum class DfMode { bands, samples };

inline std::string df_mode_name(DfMode m) { return m == DfMode::bands ? "bands" : "samples"; }

inline DfMode df_mode_from_name(const std::string& s) {
  if (s == "bands") return DfMode::bands;
  if (s == "samples") return DfMode::samples;
  throw validation_error("unknown df_mode '" + s + "' (expected bands or samples)");
}

/// Per-band confidence limits on DN for one class.
struct BandThreshold {
  double mean = 0.0;   // x̄_i, DN
  double sd = 0.0;     // s_i, DN (sample standard deviation over field samples)
  double df = 0.0;     // n per DfMode
  double t_crit = 0.0; // two-sided t quantile at alpha
  double upper = 0.0;  // U_i
  double lower = 0.0;  // L_i
  bool degenerate = false; // single sample: sd undefined, U = L = mean
};

struct ClassSignature {
  std::string cls;
  std::vector<BandThreshold> bands;
};

struct SignatureStats {
  double alpha = 0.05;
  DfMode df_mode = DfMode::bands;
  std::vector<ClassSignature> classes;

  const ClassSignature* find(const std::string& cls) const {
    for (const auto& c : classes)
      if (c.cls == cls) return &c;
    return nullptr;
  }

  const BandThreshold& threshold(const std::string& cls, std::size_t band) const {
    const auto* c = find(cls);
    if (!c) throw validation_error("SignatureStats: no class '" + cls + "'");
    if (band >= c->bands.size())
      throw validation_error("SignatureStats: class '" + cls + "' has no band " +
                             std::to_string(band));
    return c->bands[band];
  }
};

/// Pointwise mean of all spectra carrying `cls`. Grids must match exactly;
/// resampling is out of scope.
inline Spectrum average_spectra(const std::vector<Spectrum>& spectra, const std::string& cls) {
  std::vector<const Spectrum*> members;
  for (const auto& s : spectra)
    if (s.label == cls) members.push_back(&s);
  if (members.empty()) throw validation_error("average_spectra: no spectra for class '" + cls + "'");
  members.front()->check();
  for (const auto* s : members) {
    s->check();
    if (s->wavelengths_nm != members.front()->wavelengths_nm)
      throw validation_error("average_spectra: wavelength grids differ within class '" + cls + "'");
  }
  Spectrum out;
  out.label = cls;
  out.wavelengths_nm = members.front()->wavelengths_nm;
  out.reflectance.assign(out.wavelengths_nm.size(), 0.0);
  for (const auto* s : members)
    for (std::size_t i = 0; i < out.reflectance.size(); ++i)
      out.reflectance[i] += s->reflectance[i];
  for (double& r : out.reflectance) r /= static_cast<double>(members.size());
  return out;
}

/// Mean reflectance over samples with low_nm <= λ <= high_nm (inclusive).
inline double band_integrate(const Spectrum& spec, std::pair<double, double> window) {
  spec.check();
  const auto [lo, hi] = window;
  if (!(lo < hi)) throw validation_error("band_integrate: empty window");
  if (lo < spec.wavelengths_nm.front() || hi > spec.wavelengths_nm.back())
    throw validation_error("band_integrate: window outside spectrum coverage");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < spec.wavelengths_nm.size(); ++i) {
    const double w = spec.wavelengths_nm[i];
    if (w >= lo && w <= hi) { s += spec.reflectance[i]; ++n; }
  }
  if (n == 0) throw validation_error("band_integrate: no spectrum samples inside window");
  return s / static_cast<double>(n);
}

/// Number of spectrum samples falling inside a window (the paper-mode n).
inline std::size_t samples_in_window(const Spectrum& spec, std::pair<double, double> window) {
  std::size_t n = 0;
  for (double w : spec.wavelengths_nm)
    if (w >= window.first && w <= window.second) ++n;
  return n;
}

/// Two-sided Student-t critical value: the t with P(|T_df| <= t) = 1 - alpha.
/// Bracketing bisection on the regularized-incomplete-beta CDF; absolute
/// accuracy well below 1e-6.
inline double t_quantile(double alpha, double df) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("t_quantile: alpha must be in (0,1)");
  if (!(df >= 1.0)) throw validation_error("t_quantile: df must be >= 1");
  const double target = 1.0 - alpha;
  double lo = 0.0, hi = 1.0;
  while (detail::student_t_central_prob(hi, df) < target) {
    hi *= 4.0;
    if (hi > 1e12) throw numerical_error("t_quantile: bracket expansion failed");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (detail::student_t_central_prob(mid, df) < target) lo = mid; else hi = mid;
    if (hi - lo < 1e-9 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

/// Per-class, per-band DN samples: one vector of per-field-sample DN values
/// for each band.
using ClassDnSamples = std::vector<std::pair<std::string, std::vector<std::vector<double>>>>;

/// Build U_i/L_i thresholds from per-sample band DN values.
///   U_i = x̄_i + t_{α,n} s_i/√n,  L_i = x̄_i - t_{α,n} s_i/√n
/// where n follows `mode`: DfMode::bands takes the per-band counts in
/// `bands_in_window`; DfMode::samples takes (field samples - 1). s_i is
/// always the sample standard deviation over field samples. A single-sample
/// class yields the degenerate U = L = x̄ with a warning flag.
inline SignatureStats compute_thresholds(const ClassDnSamples& dn_samples, double alpha,
                                         DfMode mode,
                                         const std::vector<double>& bands_in_window = {}) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw validation_error("compute_thresholds: alpha must be in (0,1)");
  if (dn_samples.empty()) throw validation_error("compute_thresholds: no classes");

  SignatureStats stats;
  stats.alpha = alpha;
  stats.df_mode = mode;
  for (const auto& [cls, per_band] : dn_samples) {
    if (per_band.empty())
      throw validation_error("compute_thresholds: class '" + cls + "' has no bands");
    ClassSignature sig;
    sig.cls = cls;
    for (std::size_t b = 0; b < per_band.size(); ++b) {
      const auto& xs = per_band[b];
      const std::size_t m = xs.size();
      if (m == 0)
        throw validation_error("compute_thresholds: class '" + cls + "' band " +
                               std::to_string(b) + " has zero samples");
      BandThreshold th;
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(m);
      th.mean = mean;
      if (m == 1) {
        th.degenerate = true;
        th.upper = th.lower = mean;
        sig.bands.push_back(th);
        continue;
      }
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      th.sd = std::sqrt(ss / static_cast<double>(m - 1));

      if (mode == DfMode::bands) {
        if (b >= bands_in_window.size() || !(bands_in_window[b] >= 1.0))
          throw validation_error("compute_thresholds: bands_in_window missing for band " +
                                 std::to_string(b));
        th.df = bands_in_window[b];
      } else {
        th.df = static_cast<double>(m - 1);
      }
      th.t_crit = t_quantile(alpha, th.df);
      const double half = th.t_crit * th.sd / std::sqrt(th.df);
      th.upper = mean + half;
      th.lower = mean - half;
      sig.bands.push_back(th);
    }
    stats.classes.push_back(std::move(sig));
  }
  return stats;
}

/// Full ground-signature path: per field spectrum, integrate each sensor
/// window, convert reflectance -> radiance -> DN, then derive thresholds in
/// DN space. Class order follows first appearance in `samples`.
inline SignatureStats signatures_from_spectra(const std::vector<Spectrum>& samples,
                                              const std::vector<std::pair<double, double>>& windows,
                                              const CalibrationParams& cal, double alpha,
                                              DfMode mode) {
  cal.check();
  if (windows.size() != cal.bands())
    throw validation_error("signatures_from_spectra: window count != calibration band count");
  if (samples.empty()) throw validation_error("signatures_from_spectra: no spectra");

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> dn; // class -> [band][sample]
  std::vector<double> window_counts(windows.size(), 0.0);
  bool first = true;
  for (const auto& s : samples) {
    s.check();
    if (dn.find(s.label) == dn.end()) {
      order.push_back(s.label);
      dn[s.label].resize(windows.size());
    }
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const auto count = static_cast<double>(samples_in_window(s, windows[b]));
      if (first) window_counts[b] = count;
      else if (count != window_counts[b])
        throw validation_error("signatures_from_spectra: spectra disagree on samples inside band " +
                               std::to_string(b) + " (resampling is out of scope)");
      const double r = band_integrate(s, windows[b]);
      const double radiance = reflectance_to_radiance(r, b, cal);
      dn[s.label][b].push_back(radiance_to_dn(radiance, b, cal));
    }
    first = false;
  }
  ClassDnSamples per_class;
  for (const auto& cls : order) per_class.emplace_back(cls, dn[cls]);
  return compute_thresholds(per_class, alpha, mode, window_counts);
}

/// Two-column CSV (wavelength_nm,reflectance). A non-numeric first line is
/// treated as a header and skipped.
inline Spectrum read_spectrum_csv(const std::string& path, const std::string& label) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open spectrum file: " + path);
  Spectrum s;
  s.label = label;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ls(line);
    std::string wf, rf;
    if (!std::getline(ls, wf, ',') || !std::getline(ls, rf))
      throw format_error("spectrum " + path + ": expected 'wavelength_nm,reflectance'");
    try {
      s.wavelengths_nm.push_back(std::stod(wf));
      s.reflectance.push_back(std::stod(rf));
    } catch (const std::invalid_argument&) {
      if (first) { first = false; continue; } // header line
      throw format_error("spectrum " + path + ": non-numeric row '" + line + "'");
    }
    first = false;
  }
  s.check();
  return s;
}

/// Manifest CSV rows: file,class. Paths are returned verbatim.
inline std::vector<std::pair<std::string, std::string>> read_manifest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest file: " + path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw format_error("manifest " + path + ": expected 'file,class' rows");
    std::string file = line.substr(0, comma);
    std::string cls = line.substr(comma + 1);
    if (!cls.empty() && cls.back() == '\r') cls.pop_back();
    if (file == "file" && cls == "class") continue; // header
    rows.emplace_back(file, cls);
  }
  if (rows.empty()) throw format_error("manifest " + path + ": no entries");
  return rows;
}

} // namespace ksc
