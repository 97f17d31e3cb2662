#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ksc/json_io.hpp"

namespace ksc {

/// Parsed run configuration (one JSON file drives every subcommand).
/// Relative paths are resolved against the config file's directory.
struct RunConfig {
  // paths
  std::string stack;            // raster base name (without .hdr/.bin)
  std::string spectra_manifest; // CSV: file,class
  std::string signatures_json;  // precomputed SignatureStats (optional)
  std::string out_dir = "out";

  std::optional<CalibrationParams> calibration;
  double alpha = 0.05;
  DfMode df_mode = DfMode::bands;

  // signatures
  std::string signature_source = "spectra"; // spectra | synthetic_ghs | json
  std::size_t ghs_samples_per_class = 6;

  // variogram
  VariogramFamily family = VariogramFamily::spherical;
  double max_lag = 0.0; // 0 = half grid diagonal
  std::size_t n_bins = 15;

  // kriging
  double out_pixel_size = 0.0; // 0 = native; the paper's grid distance h
  std::size_t max_neighbors = 16;
  double search_radius = 0.0; // 0 = 4x fitted range
  bool clamp = true;

  CombineRule combine = CombineRule::eq5_union;
  std::vector<std::string> classes;
  double harden_threshold = 0.0;

  // assess
  double assess_eps = 1e-12;
  double pixel_area_ha = 0.0; // 0 = pixel_size^2 / 1e4
  double assess_scale = 0.0;  // 0 = coarser of the two map sets
  std::map<std::string, double> reference_areas_ha;

  std::optional<SceneSpec> synth;

  // benchmark
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  std::vector<double> h_list;

  std::filesystem::path base_dir; // directory of the config file

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base_dir / fp;
  }

  KbscOptions kbsc_options(unsigned n_threads = 1) const {
    KbscOptions opt;
    opt.family = family;
    opt.out_pixel_size = out_pixel_size;
    opt.kriging.max_neighbors = max_neighbors;
    opt.kriging.search_radius = search_radius;
    opt.kriging.clamp = clamp;
    opt.combine = combine;
    opt.max_lag = max_lag;
    opt.n_bins = n_bins;
    opt.n_threads = n_threads;
    return opt;
  }
};

inline RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.stack = p.value("stack", "");
    c.spectra_manifest = p.value("spectra_manifest", "");
    c.signatures_json = p.value("signatures_json", "");
    c.out_dir = p.value("out_dir", "out");
  }
  if (j.contains("calibration")) c.calibration = j.at("calibration").get<CalibrationParams>();
  c.alpha = j.value("alpha", 0.05);
  if (!(c.alpha > 0.0 && c.alpha < 1.0))
    throw validation_error("config: alpha must be in (0,1)");
  if (j.contains("df_mode")) c.df_mode = df_mode_from_name(j.at("df_mode").get<std::string>());
  if (j.contains("signatures")) {
    const auto& s = j.at("signatures");
    c.signature_source = s.value("source", "spectra");
    c.ghs_samples_per_class = s.value("samples_per_class", std::size_t{6});
    if (c.signature_source != "spectra" && c.signature_source != "synthetic_ghs" &&
        c.signature_source != "json")
      throw validation_error("config: signatures.source must be spectra, synthetic_ghs or json");
  }
  if (j.contains("variogram")) {
    const auto& v = j.at("variogram");
    if (v.contains("family")) c.family = family_from_name(v.at("family").get<std::string>());
    c.max_lag = v.value("max_lag", 0.0);
    c.n_bins = v.value("n_bins", std::size_t{15});
    if (c.n_bins < 1) throw validation_error("config: variogram.n_bins must be >= 1");
  }
  if (j.contains("kriging")) {
    const auto& k = j.at("kriging");
    c.out_pixel_size = k.value("out_pixel_size", 0.0);
    c.max_neighbors = k.value("max_neighbors", std::size_t{16});
    c.search_radius = k.value("search_radius", 0.0);
    c.clamp = k.value("clamp", true);
    if (c.max_neighbors < 1) throw validation_error("config: kriging.max_neighbors must be >= 1");
    if (c.out_pixel_size < 0.0)
      throw validation_error("config: kriging.out_pixel_size must be >= 0");
  }
  if (j.contains("combine")) c.combine = combine_from_name(j.at("combine").get<std::string>());
  if (j.contains("classes")) j.at("classes").get_to(c.classes);
  c.harden_threshold = j.value("harden_threshold", 0.0);
  if (!(c.harden_threshold >= 0.0 && c.harden_threshold <= 1.0))
    throw validation_error("config: harden_threshold must be in [0,1]");
  if (j.contains("assess")) {
    const auto& a = j.at("assess");
    c.assess_eps = a.value("eps", 1e-12);
    c.pixel_area_ha = a.value("pixel_area_ha", 0.0);
    c.assess_scale = a.value("scale", 0.0);
    if (a.contains("reference_areas_ha"))
      a.at("reference_areas_ha").get_to(c.reference_areas_ha);
    if (!(c.assess_eps > 0.0)) throw validation_error("config: assess.eps must be > 0");
  }
  if (j.contains("synth")) c.synth = j.at("synth").get<SceneSpec>();
  if (j.contains("benchmark")) {
    const auto& b = j.at("benchmark");
    if (b.contains("seeds")) b.at("seeds").get_to(c.seeds);
    if (b.contains("methods")) b.at("methods").get_to(c.methods);
    if (b.contains("h")) b.at("h").get_to(c.h_list);
    c.assess_scale = b.value("assess_scale", c.assess_scale);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw format_error("config " + path + ": " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

} // namespace ksc
