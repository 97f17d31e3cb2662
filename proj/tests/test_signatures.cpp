#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "ksc/detail/random.hpp"
#include "ksc/detail/special.hpp"
#include "ksc/signatures.hpp"
#include "oracles/t_density.hpp"
#include "test_util.hpp"

using namespace ksc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Spectrum flat_spectrum(double lo, double hi, double step, double value,
                       const std::string& label) {
  Spectrum s;
  s.label = label;
  for (double w = lo; w <= hi + 1e-9; w += step) {
    s.wavelengths_nm.push_back(w);
    s.reflectance.push_back(value);
  }
  return s;
}

} // namespace

TEST_CASE("average_spectra") {
  SECTION("a single spectrum averages to itself") {
    auto s = flat_spectrum(400, 900, 1.0, 0.25, "wheat");
    auto avg = average_spectra({s}, "wheat");
    CHECK(avg.reflectance == s.reflectance);
  }
  SECTION("mirrored pair v and 1-v averages to constant 0.5") {
    auto a = flat_spectrum(400, 500, 10.0, 0.0, "c");
    auto b = a;
    for (std::size_t i = 0; i < a.reflectance.size(); ++i) {
      a.reflectance[i] = 0.3 + 0.001 * static_cast<double>(i);
      b.reflectance[i] = 1.0 - a.reflectance[i];
    }
    auto avg = average_spectra({a, b}, "c");
    for (double r : avg.reflectance) CHECK_THAT(r, WithinAbs(0.5, 1e-15));
  }
  SECTION("three values at one wavelength") {
    Spectrum s1{{620.0}, {0.2}, "c"};
    Spectrum s2{{620.0}, {0.4}, "c"};
    Spectrum s3{{620.0}, {0.6}, "c"};
    auto avg = average_spectra({s1, s2, s3}, "c");
    CHECK_THAT(avg.reflectance[0], WithinAbs(0.4, 1e-15));
  }
  SECTION("empty class is rejected") {
    auto s = flat_spectrum(400, 500, 10.0, 0.1, "wheat");
    CHECK_THROWS_AS(average_spectra({s}, "mustard"), validation_error);
  }
  SECTION("mismatched grids are rejected") {
    auto a = flat_spectrum(400, 500, 10.0, 0.1, "c");
    auto b = flat_spectrum(400, 500, 5.0, 0.1, "c");
    CHECK_THROWS_AS(average_spectra({a, b}, "c"), validation_error);
  }
}

TEST_CASE("band_integrate") {
  SECTION("constant spectrum") {
    auto s = flat_spectrum(400, 900, 1.0, 0.3, "c");
    CHECK_THAT(band_integrate(s, {620, 680}), WithinAbs(0.3, 1e-15));
    CHECK_THAT(band_integrate(s, {401.5, 402.5}), WithinAbs(0.3, 1e-15));
  }
  SECTION("two in-range samples average") {
    Spectrum s{{600.0, 620.0, 680.0, 700.0}, {0.9, 0.1, 0.3, 0.9}, "c"};
    CHECK_THAT(band_integrate(s, {620, 680}), WithinAbs(0.2, 1e-15));
  }
  SECTION("window endpoints are inclusive") {
    Spectrum s{{620.0, 680.0}, {0.1, 0.3}, "c"};
    CHECK(samples_in_window(s, {620, 680}) == 2);
  }
  SECTION("window outside coverage is rejected") {
    auto s = flat_spectrum(400, 860, 1.0, 0.3, "c");
    CHECK_THROWS_AS(band_integrate(s, {900, 950}), validation_error);
  }
}

TEST_CASE("t_quantile matches closed forms and the quadrature oracle") {
  SECTION("df=1 alpha=0.05 is the Cauchy value 12.7062") {
    const double expected = std::tan(3.14159265358979323846 * 0.475); // 12.7062...
    CHECK_THAT(t_quantile(0.05, 1), WithinAbs(expected, 1e-6));
    CHECK_THAT(t_quantile(0.05, 1), WithinAbs(12.7062, 1e-3));
  }
  SECTION("df=10000 alpha=0.05 approaches the normal 1.9600") {
    CHECK_THAT(t_quantile(0.05, 10000), WithinAbs(1.9600, 1e-3));
  }
  SECTION("df=1 alpha=0.5 is the Cauchy quartile 1") {
    CHECK_THAT(t_quantile(0.5, 1), WithinAbs(1.0, 1e-9));
  }
  SECTION("CDF agrees with adaptive-Simpson integration of the density") {
    for (double df : {1.0, 2.0, 5.0, 17.0, 120.0}) {
      for (double alpha : {0.5, 0.1, 0.05, 0.01}) {
        const double t = t_quantile(alpha, df);
        CHECK_THAT(oracle::t_central_prob(t, df), WithinAbs(1.0 - alpha, 1e-8));
      }
    }
  }
  SECTION("decreasing in df at fixed alpha") {
    double prev = t_quantile(0.05, 1);
    for (double df : {2.0, 4.0, 8.0, 32.0, 1000.0}) {
      const double t = t_quantile(0.05, df);
      CHECK(t < prev);
      prev = t;
    }
  }
  SECTION("invalid arguments") {
    CHECK_THROWS_AS(t_quantile(0.05, 0.5), validation_error);
    CHECK_THROWS_AS(t_quantile(0.0, 5), validation_error);
    CHECK_THROWS_AS(t_quantile(1.0, 5), validation_error);
  }
}

TEST_CASE("compute_thresholds") {
  SECTION("zero spread collapses the interval") {
    ClassDnSamples in{{"c", {{100.0, 100.0, 100.0}}}};
    auto stats = compute_thresholds(in, 0.05, DfMode::samples);
    const auto& th = stats.threshold("c", 0);
    CHECK(th.upper == 100.0);
    CHECK(th.lower == 100.0);
    CHECK_FALSE(th.degenerate);
  }
  SECTION("hand case: x=100, s=10, n=25, t=2 gives U=104 L=96") {
    // pick alpha so that the df=25 critical value is exactly 2.0
    const double alpha = 1.0 - detail::student_t_central_prob(2.0, 25.0);
    // 26 samples -> mean 100, sd 10 with samples df mode wouldn't give df 25;
    // use bands mode with 25 in-window samples as the stipulated n.
    std::vector<double> xs;
    for (int i = 0; i < 13; ++i) { xs.push_back(90.0); xs.push_back(110.0); }
    // sample sd of 13+13 points at +-10 around 100 is 10.198; rescale to hit s=10
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double s_now = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    for (double& x : xs) x = mean + (x - mean) * (10.0 / s_now);

    ClassDnSamples in{{"c", {xs}}};
    auto stats = compute_thresholds(in, alpha, DfMode::bands, {25.0});
    const auto& th = stats.threshold("c", 0);
    CHECK_THAT(th.t_crit, WithinAbs(2.0, 1e-7));
    CHECK_THAT(th.sd, WithinAbs(10.0, 1e-12));
    CHECK_THAT(th.upper, WithinAbs(104.0, 1e-6));
    CHECK_THAT(th.lower, WithinAbs(96.0, 1e-6));
  }
  SECTION("alpha near 1 collapses the interval toward the mean") {
    ClassDnSamples in{{"c", {{90.0, 110.0, 95.0, 105.0}}}};
    auto stats = compute_thresholds(in, 0.999999, DfMode::samples);
    const auto& th = stats.threshold("c", 0);
    CHECK_THAT(th.upper - th.lower, WithinAbs(0.0, 1e-4));
  }
  SECTION("single sample degenerates with a warning flag") {
    ClassDnSamples in{{"c", {{42.0}}}};
    auto stats = compute_thresholds(in, 0.05, DfMode::samples);
    const auto& th = stats.threshold("c", 0);
    CHECK(th.degenerate);
    CHECK(th.upper == 42.0);
    CHECK(th.lower == 42.0);
  }
  SECTION("zero samples are rejected") {
    ClassDnSamples in{{"c", {{}}}};
    CHECK_THROWS_AS(compute_thresholds(in, 0.05, DfMode::samples), validation_error);
  }
  SECTION("smaller alpha widens the interval") {
    ClassDnSamples in{{"c", {{90.0, 110.0, 95.0, 105.0, 98.0}}}};
    double prev_width = -1.0;
    for (double alpha : {0.2, 0.1, 0.05, 0.01}) {
      auto stats = compute_thresholds(in, alpha, DfMode::samples);
      const auto& th = stats.threshold("c", 0);
      const double width = th.upper - th.lower;
      CHECK(width > prev_width);
      prev_width = width;
    }
  }
  SECTION("df modes differ as documented") {
    ClassDnSamples in{{"c", {{90.0, 110.0, 100.0}}}};
    auto bands_mode = compute_thresholds(in, 0.05, DfMode::bands, {61.0});
    auto samples_mode = compute_thresholds(in, 0.05, DfMode::samples);
    CHECK(bands_mode.threshold("c", 0).df == 61.0);
    CHECK(samples_mode.threshold("c", 0).df == 2.0);
    // small-sample t is much wider than the 61-df one
    CHECK(samples_mode.threshold("c", 0).t_crit > bands_mode.threshold("c", 0).t_crit);
  }
}

TEST_CASE("band_integrate commutes with spectrum averaging") {
  std::vector<Spectrum> specs;
  detail::Rng rng(21);
  for (int i = 0; i < 5; ++i) {
    auto s = flat_spectrum(400, 900, 2.0, 0.0, "c");
    for (double& r : s.reflectance) r = rng.uniform();
    specs.push_back(std::move(s));
  }
  const std::pair<double, double> window{620, 680};
  const double direct = band_integrate(average_spectra(specs, "c"), window);
  double mean = 0.0;
  for (const auto& s : specs) mean += band_integrate(s, window);
  mean /= static_cast<double>(specs.size());
  CHECK_THAT(direct, WithinAbs(mean, 1e-12));
}

TEST_CASE("signatures_from_spectra runs the full DN-space path") {
  CalibrationParams cal;
  cal.gain = {0.04, 0.05};
  cal.bias = {1.0, 1.2};
  cal.esun = {185.3, 158.8};
  cal.sun_elevation_deg = 40.0;
  cal.earth_sun_distance_au = 1.0;
  const std::vector<std::pair<double, double>> windows{{620, 680}, {770, 860}};

  std::vector<Spectrum> samples;
  detail::Rng rng(4);
  for (int i = 0; i < 4; ++i) {
    auto s = flat_spectrum(400, 900, 1.0, 0.0, i < 2 ? "wheat" : "mustard");
    for (double& r : s.reflectance) r = 0.2 + 0.1 * rng.uniform();
    samples.push_back(std::move(s));
  }
  auto stats = signatures_from_spectra(samples, windows, cal, 0.05, DfMode::bands);
  REQUIRE(stats.classes.size() == 2);
  CHECK(stats.classes[0].cls == "wheat");
  // paper-mode df equals the per-window 1 nm sample count
  CHECK(stats.threshold("wheat", 0).df == 61.0);
  CHECK(stats.threshold("wheat", 1).df == 91.0);
  // thresholds live in DN space: reconstruct the per-sample DN by hand
  std::vector<double> dn;
  for (int i = 0; i < 2; ++i) {
    const double r = band_integrate(samples[static_cast<std::size_t>(i)], windows[0]);
    dn.push_back(radiance_to_dn(reflectance_to_radiance(r, 0, cal), 0, cal));
  }
  const double mean = 0.5 * (dn[0] + dn[1]);
  CHECK_THAT(stats.threshold("wheat", 0).mean, WithinRel(mean, 1e-12));
}

TEST_CASE("spectrum and manifest CSV readers") {
  auto dir = testutil::scratch_dir("spectra");
  {
    std::ofstream out(dir / "s1.csv");
    out << "wavelength_nm,reflectance\n400,0.10\n401,0.20\n402,0.15\n";
  }
  {
    std::ofstream out(dir / "manifest.csv");
    out << "file,class\ns1.csv,wheat\n";
  }
  auto spec = read_spectrum_csv((dir / "s1.csv").string(), "wheat");
  REQUIRE(spec.wavelengths_nm.size() == 3);
  CHECK(spec.reflectance[1] == 0.20);
  auto manifest = read_manifest_csv((dir / "manifest.csv").string());
  REQUIRE(manifest.size() == 1);
  CHECK(manifest[0].first == "s1.csv");
  CHECK(manifest[0].second == "wheat");
}
