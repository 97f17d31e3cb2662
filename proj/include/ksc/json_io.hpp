#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ksc/assess.hpp"
#include "ksc/baselines.hpp"
#include "ksc/kbsc.hpp"
#include "ksc/kriging.hpp"
#include "ksc/radiometry.hpp"
#include "ksc/signatures.hpp"
#include "ksc/synth.hpp"
#include "ksc/variogram.hpp"

namespace ksc {

using json = nlohmann::json;

inline void to_json(json& j, const VariogramModel& m) {
  j = json{{"family", family_name(m.family)},
           {"nugget", m.nugget},
           {"partial_sill", m.partial_sill},
           {"range", m.range}};
}

inline void from_json(const json& j, VariogramModel& m) {
  m.family = family_from_name(j.at("family").get<std::string>());
  m.nugget = j.at("nugget").get<double>();
  m.partial_sill = j.at("partial_sill").get<double>();
  m.range = j.at("range").get<double>();
  m.check();
}

inline void to_json(json& j, const EmpiricalVariogram& e) {
  j = json{{"lags", e.lags}, {"gamma", e.gamma}, {"pair_counts", e.pair_counts}};
}

inline void from_json(const json& j, EmpiricalVariogram& e) {
  j.at("lags").get_to(e.lags);
  j.at("gamma").get_to(e.gamma);
  j.at("pair_counts").get_to(e.pair_counts);
  e.check();
}

inline void to_json(json& j, const BandThreshold& t) {
  j = json{{"mean", t.mean},   {"sd", t.sd},       {"df", t.df},
           {"t", t.t_crit},    {"upper", t.upper}, {"lower", t.lower},
           {"degenerate", t.degenerate}};
}

inline void from_json(const json& j, BandThreshold& t) {
  j.at("mean").get_to(t.mean);
  j.at("sd").get_to(t.sd);
  j.at("df").get_to(t.df);
  j.at("t").get_to(t.t_crit);
  j.at("upper").get_to(t.upper);
  j.at("lower").get_to(t.lower);
  t.degenerate = j.value("degenerate", false);
}

inline void to_json(json& j, const SignatureStats& s) {
  json classes = json::object();
  for (const auto& c : s.classes) {
    json bands = json::array();
    for (const auto& b : c.bands) bands.push_back(b);
    classes[c.cls] = bands;
  }
  // class order is significant (tie-breaks); keep it explicitly
  json order = json::array();
  for (const auto& c : s.classes) order.push_back(c.cls);
  j = json{{"alpha", s.alpha},
           {"df_mode", df_mode_name(s.df_mode)},
           {"class_order", order},
           {"classes", classes}};
}

inline void from_json(const json& j, SignatureStats& s) {
  s.alpha = j.at("alpha").get<double>();
  s.df_mode = df_mode_from_name(j.at("df_mode").get<std::string>());
  s.classes.clear();
  for (const auto& name : j.at("class_order")) {
    ClassSignature cs;
    cs.cls = name.get<std::string>();
    for (const auto& b : j.at("classes").at(cs.cls)) cs.bands.push_back(b.get<BandThreshold>());
    s.classes.push_back(std::move(cs));
  }
}

inline void to_json(json& j, const KrigingDiagnostics& d) {
  j = json{{"nan_cells", d.nan_cells},
           {"clamped_cells", d.clamped_cells},
           {"min_neighbors", d.min_neighbors},
           {"max_neighbors", d.max_neighbors},
           {"global", d.global}};
}

inline void to_json(json& j, const KbscMapReport& r) {
  j = json{{"class", r.cls},
           {"band", r.band},
           {"limit", r.limit},
           {"model", r.model},
           {"fit_residual", r.fit_residual},
           {"range_unconstrained", r.range_unconstrained},
           {"constant_fallback", r.constant_fallback},
           {"kriging", r.kriging}};
}

inline void to_json(json& j, const KbscReport& r) {
  json errs = json::array();
  for (const auto& [cls, msg] : r.class_errors) errs.push_back({{"class", cls}, {"error", msg}});
  j = json{{"combine", r.combine},
           {"out_pixel_size", r.out_pixel_size},
           {"maps", r.maps},
           {"class_errors", errs}};
}

inline void to_json(json& j, const SummaryStats& s) {
  j = json{{"mean", s.mean}, {"median", s.median}, {"sd", s.sd}, {"count", s.count}};
}

inline void to_json(json& j, const ClosenessReport& r) {
  json corr = json::object();
  for (const auto& [cls, rr] : r.correlations)
    corr[cls] = json{{"r", rr.first}, {"r2", rr.second}};
  j = json{{"S", r.s.summary},
           {"D", r.d.summary},
           {"D_renormalized_pixels", r.d.renormalized},
           {"correlations", corr},
           {"pixels_used", r.pixels_used}};
}

inline void to_json(json& j, const AreaEstimate& a) {
  j = json{{"hectares", a.hectares}, {"nan_pixels", a.nan_pixels}};
}

inline void to_json(json& j, const GaussianSignature& s) {
  j = json{{"class", s.cls}, {"mean", s.mean}, {"cov", s.cov}, {"prior", s.prior}};
}

inline void to_json(json& j, const FuzzySignature& s) {
  j = json{{"class", s.cls}, {"mean", s.mean}, {"cov", s.cov}};
}

inline void from_json(const json& j, CalibrationParams& c) {
  j.at("gain").get_to(c.gain);
  j.at("bias").get_to(c.bias);
  j.at("esun").get_to(c.esun);
  c.sun_elevation_deg = j.at("sun_elevation_deg").get<double>();
  c.earth_sun_distance_au = j.at("earth_sun_distance_au").get<double>();
  c.check();
}

inline void to_json(json& j, const CalibrationParams& c) {
  j = json{{"gain", c.gain},
           {"bias", c.bias},
           {"esun", c.esun},
           {"sun_elevation_deg", c.sun_elevation_deg},
           {"earth_sun_distance_au", c.earth_sun_distance_au}};
}

inline void from_json(const json& j, SceneClass& c) {
  c.label = j.at("label").get<std::string>();
  j.at("band_means").get_to(c.band_means);
  j.at("band_sds").get_to(c.band_sds);
  c.target_fraction = j.at("target_fraction").get<double>();
}

inline void to_json(json& j, const SceneClass& c) {
  j = json{{"label", c.label},
           {"band_means", c.band_means},
           {"band_sds", c.band_sds},
           {"target_fraction", c.target_fraction}};
}

inline void from_json(const json& j, SceneSpec& s) {
  s.seed = j.at("seed").get<std::uint64_t>();
  s.fine_rows = j.at("fine_rows").get<std::size_t>();
  s.fine_cols = j.at("fine_cols").get<std::size_t>();
  s.fine_pixel_size = j.at("fine_pixel_size").get<double>();
  s.coarsen_factor = j.at("coarsen_factor").get<std::size_t>();
  j.at("classes").get_to(s.classes);
  s.autocorr_range = j.at("autocorr_range").get<double>();
  s.noise_sd = j.value("noise_sd", 0.0);
  s.band_windows.clear();
  if (j.contains("band_windows"))
    for (const auto& w : j.at("band_windows"))
      s.band_windows.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
  s.check();
}

inline void to_json(json& j, const SceneSpec& s) {
  json windows = json::array();
  for (const auto& [lo, hi] : s.band_windows) windows.push_back({lo, hi});
  j = json{{"seed", s.seed},
           {"fine_rows", s.fine_rows},
           {"fine_cols", s.fine_cols},
           {"fine_pixel_size", s.fine_pixel_size},
           {"coarsen_factor", s.coarsen_factor},
           {"classes", s.classes},
           {"autocorr_range", s.autocorr_range},
           {"noise_sd", s.noise_sd},
           {"band_windows", windows}};
}

} // namespace ksc
