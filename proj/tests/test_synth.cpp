#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ksc/synth.hpp"
#include "test_util.hpp"

using namespace ksc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SceneSpec base_spec() {
  SceneSpec spec;
  spec.seed = 42;
  spec.fine_rows = spec.fine_cols = 40;
  spec.fine_pixel_size = 10.0;
  spec.coarsen_factor = 4;
  spec.autocorr_range = 100.0; // 10 fine pixels
  spec.noise_sd = 5.0;
  spec.classes = {{"a", {60.0, 120.0}, {6.0, 5.0}, 0.6}, {"b", {110.0, 70.0}, {5.0, 6.0}, 0.4}};
  return spec;
}

} // namespace

TEST_CASE("generate_scene determinism and fractions") {
  auto spec = base_spec();
  auto s1 = generate_scene(spec);
  auto s2 = generate_scene(spec);

  SECTION("identical spec gives identical outputs") {
    CHECK(s1.fine_labels.values == s2.fine_labels.values);
    for (std::size_t b = 0; b < 2; ++b)
      CHECK(s1.fine_dn.bands[b].values == s2.fine_dn.bands[b].values);
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(s1.true_proportions[c].grid.values == s2.true_proportions[c].grid.values);
  }
  SECTION("realized fine fractions hit the targets within 2%") {
    std::size_t count_a = 0;
    for (double v : s1.fine_labels.values)
      if (v == 0.0) ++count_a;
    const double frac = static_cast<double>(count_a) / static_cast<double>(40 * 40);
    CHECK_THAT(frac, WithinAbs(0.6, 0.02));
  }
  SECTION("true proportions sum to 1 per coarse cell") {
    for (std::size_t i = 0; i < s1.true_proportions[0].grid.values.size(); ++i)
      CHECK_THAT(s1.true_proportions[0].grid.values[i] + s1.true_proportions[1].grid.values[i],
                 WithinAbs(1.0, 1e-12));
  }
  SECTION("coarse stack is the block mean of the fine stack") {
    auto direct = upscale_mean(s1.fine_dn.bands[0], 4);
    CHECK(direct.values == s1.coarse_dn.bands[0].values);
  }
}

TEST_CASE("generate_scene degenerate cases") {
  SECTION("single class, zero noise is constant everywhere") {
    SceneSpec spec = base_spec();
    spec.classes = {{"only", {75.0, 40.0}, {3.0, 3.0}, 1.0}};
    spec.noise_sd = 0.0;
    auto scene = generate_scene(spec);
    for (double v : scene.fine_dn.bands[0].values) CHECK(v == 75.0);
    for (double v : scene.coarse_dn.bands[1].values) CHECK_THAT(v, WithinAbs(40.0, 1e-12));
    for (double v : scene.true_proportions[0].grid.values) CHECK(v == 1.0);
  }
  SECTION("checkerboard label injection gives exactly half-and-half coarse proportions") {
    SceneSpec spec = base_spec();
    spec.noise_sd = 0.0;
    RasterGrid board(spec.fine_rows, spec.fine_cols);
    for (std::size_t r = 0; r < board.rows; ++r)
      for (std::size_t c = 0; c < board.cols; ++c) board.at(r, c) = static_cast<double>((r + c) % 2);
    auto scene = generate_scene(spec, &board);
    for (std::size_t c = 0; c < 2; ++c)
      for (double v : scene.true_proportions[c].grid.values) CHECK(v == 0.5);
  }
  SECTION("invalid fractions are rejected") {
    SceneSpec spec = base_spec();
    spec.classes[0].target_fraction = 0.9; // sums to 1.3
    CHECK_THROWS_AS(generate_scene(spec), validation_error);
  }
}

TEST_CASE("coarse DN equals the proportion-weighted mixture of class means at zero noise") {
  SceneSpec spec = base_spec();
  spec.noise_sd = 0.0;
  auto scene = generate_scene(spec);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < scene.coarse_dn.bands[b].values.size(); ++i) {
      const double mixture = scene.true_proportions[0].grid.values[i] *
                                 spec.classes[0].band_means[b] +
                             scene.true_proportions[1].grid.values[i] *
                                 spec.classes[1].band_means[b];
      CHECK_THAT(scene.coarse_dn.bands[b].values[i], WithinAbs(mixture, 1e-10));
    }
  }
}

TEST_CASE("two-stage coarsening is consistent with one-shot coarsening") {
  SceneSpec spec = base_spec();
  spec.fine_rows = spec.fine_cols = 48;
  spec.coarsen_factor = 6;
  auto scene = generate_scene(spec);
  // proportions at factor 6 == upscale_mean of proportions at factor 2 by 3
  SceneSpec spec2 = spec;
  spec2.coarsen_factor = 2;
  auto scene2 = generate_scene(spec2, &scene.fine_labels);
  for (std::size_t c = 0; c < 2; ++c) {
    auto two_stage = upscale_mean(scene2.true_proportions[c].grid, 3);
    for (std::size_t i = 0; i < two_stage.values.size(); ++i)
      CHECK_THAT(two_stage.values[i], WithinAbs(scene.true_proportions[c].grid.values[i], 1e-12));
  }
}

TEST_CASE("ghs_from_spec") {
  auto spec = base_spec();
  SECTION("deterministic across calls") {
    auto a = ghs_from_spec(spec, 8);
    auto b = ghs_from_spec(spec, 8);
    REQUIRE(a.size() == b.size());
    for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c].second == b[c].second);
  }
  SECTION("zero sd makes every sample the band mean") {
    SceneSpec spec0 = spec;
    for (auto& c : spec0.classes) c.band_sds = {0.0, 0.0};
    auto samples = ghs_from_spec(spec0, 4);
    for (std::size_t c = 0; c < samples.size(); ++c)
      for (std::size_t b = 0; b < 2; ++b)
        for (double v : samples[c].second[b])
          CHECK(v == spec0.classes[c].band_means[b]);
  }
  SECTION("large-sample mean lands near the band mean") {
    auto samples = ghs_from_spec(spec, 4000);
    const double sd = spec.classes[0].band_sds[0];
    double mean = 0.0;
    for (double v : samples[0].second[0]) mean += v;
    mean /= 4000.0;
    CHECK_THAT(mean, WithinAbs(spec.classes[0].band_means[0], 3.0 * sd / std::sqrt(4000.0)));
  }
  SECTION("fewer than two samples per class is rejected") {
    CHECK_THROWS_AS(ghs_from_spec(spec, 1), validation_error);
  }
}
