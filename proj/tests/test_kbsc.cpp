#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ksc/detail/random.hpp"
#include "ksc/kbsc.hpp"
#include "ksc/synth.hpp"
#include "oracles/reference_kbsc.hpp"
#include "test_util.hpp"

using namespace ksc;
using Catch::Matchers::WithinAbs;

namespace {

/// Hand-built thresholds: one class, given (lower, upper) per band.
SignatureStats make_stats(const std::string& cls,
                          std::initializer_list<std::pair<double, double>> limits) {
  SignatureStats stats;
  ClassSignature sig;
  sig.cls = cls;
  for (const auto& [lo, hi] : limits) {
    BandThreshold th;
    th.lower = lo;
    th.upper = hi;
    th.mean = 0.5 * (lo + hi);
    sig.bands.push_back(th);
  }
  stats.classes.push_back(sig);
  return stats;
}

ProbabilityMap map_of(std::size_t rows, std::size_t cols, std::initializer_list<double> vals,
                      const std::string& cls = "c", int band = 0) {
  ProbabilityMap m;
  m.cls = cls;
  m.band = band;
  m.grid = testutil::grid_from(rows, cols, vals);
  return m;
}

} // namespace

TEST_CASE("indicator_maps boundary conventions") {
  auto stats = make_stats("wheat", {{50.0, 60.0}});
  auto band = testutil::grid_from(1, 5, {49.0, 50.0, 55.0, 60.0, 61.0});
  auto pair = indicator_maps(band, stats, "wheat", 0);
  // upper: DN <= 60 (inclusive)
  CHECK(pair.upper.values == std::vector<double>{1, 1, 1, 1, 0});
  // lower: DN >= 50 (inclusive)
  CHECK(pair.lower.values == std::vector<double>{0, 1, 1, 1, 1});

  SECTION("DN below L: upper=1, lower=0") {
    CHECK(pair.upper.values[0] == 1.0);
    CHECK(pair.lower.values[0] == 0.0);
  }
  SECTION("fully in-range band gives all-ones maps") {
    auto mid = testutil::grid_from(2, 2, {52, 55, 58, 50});
    auto p2 = indicator_maps(mid, stats, "wheat", 0);
    for (double v : p2.upper.values) CHECK(v == 1.0);
    for (double v : p2.lower.values) CHECK(v == 1.0);
  }
  SECTION("NaN DN produces NaN indicators") {
    auto g = testutil::grid_from(1, 2, {std::nan(""), 55.0});
    auto p2 = indicator_maps(g, stats, "wheat", 0);
    CHECK(std::isnan(p2.upper.values[0]));
    CHECK(std::isnan(p2.lower.values[0]));
  }
  SECTION("missing thresholds are rejected") {
    CHECK_THROWS_AS(indicator_maps(band, stats, "mustard", 0), validation_error);
    CHECK_THROWS_AS(indicator_maps(band, stats, "wheat", 3), validation_error);
  }
}

TEST_CASE("band_probability implements the printed union formula") {
  SECTION("absorbing one") {
    auto p = band_probability(map_of(1, 2, {1.0, 1.0}), map_of(1, 2, {0.3, 0.9}));
    CHECK(p.grid.values == std::vector<double>{1.0, 1.0});
  }
  SECTION("zero case") {
    auto p = band_probability(map_of(1, 1, {0.0}), map_of(1, 1, {0.0}));
    CHECK(p.grid.values[0] == 0.0);
  }
  SECTION("hand value 0.9,0.9 -> 0.99") {
    auto p = band_probability(map_of(1, 1, {0.9}), map_of(1, 1, {0.9}));
    CHECK_THAT(p.grid.values[0], WithinAbs(0.99, 1e-15));
  }
  SECTION("product alternative") {
    auto p = band_probability(map_of(1, 1, {0.9}), map_of(1, 1, {0.9}), CombineRule::product);
    CHECK_THAT(p.grid.values[0], WithinAbs(0.81, 1e-15));
  }
  SECTION("geometry mismatch is rejected") {
    CHECK_THROWS_AS(band_probability(map_of(1, 2, {0.1, 0.2}), map_of(2, 1, {0.1, 0.2})),
                    validation_error);
  }
  SECTION("stays in [0,1] and is monotone in each argument") {
    detail::Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
      const double p1 = rng.uniform(), p2 = rng.uniform();
      const double v = band_probability(map_of(1, 1, {p1}), map_of(1, 1, {p2})).grid.values[0];
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v >= std::max(p1, p2) - 1e-15);
      const double dv = band_probability(map_of(1, 1, {std::min(1.0, p1 + 0.05)}),
                                         map_of(1, 1, {p2}))
                            .grid.values[0];
      CHECK(dv >= v - 1e-15);
    }
  }
}

TEST_CASE("joint_probability") {
  SECTION("single band is the identity") {
    auto j = joint_probability({map_of(1, 2, {0.3, 0.8})});
    CHECK(j.grid.values == std::vector<double>{0.3, 0.8});
    CHECK(j.band == -1);
  }
  SECTION("Fig. 2 step V to step VI fixture") {
    const std::vector<double> band_a{1, 0.9, 0.84, 0.91, 1, 0.92, 0.9, 1,
                                     0.8, 0.76, 0.84, 1, 0.4, 0.93, 1, 1};
    const std::vector<double> band_b{1, 0.9, 0.64, 0.82, 0.9, 0.73, 0.65, 0.82,
                                     1, 0.75, 0.64, 1, 0.94, 0.96, 0.92, 1};
    const std::vector<double> expected{1, 0.81, 0.5376, 0.7462, 0.9, 0.6716, 0.585, 0.82,
                                       0.8, 0.57, 0.5376, 1, 0.376, 0.8928, 0.92, 1};
    ProbabilityMap a, b;
    a.cls = b.cls = "wheat";
    a.band = 0;
    b.band = 1;
    a.grid = RasterGrid(4, 4);
    b.grid = RasterGrid(4, 4);
    a.grid.values = band_a;
    b.grid.values = band_b;
    auto j = joint_probability({a, b});
    for (std::size_t i = 0; i < 16; ++i) CHECK_THAT(j.grid.values[i], WithinAbs(expected[i], 1e-4));
  }
  SECTION("zero annihilates") {
    auto j = joint_probability({map_of(1, 1, {0.0}), map_of(1, 1, {0.9})});
    CHECK(j.grid.values[0] == 0.0);
  }
  SECTION("bounded by the per-band minimum") {
    detail::Rng rng(29);
    for (int i = 0; i < 500; ++i) {
      const double p1 = rng.uniform(), p2 = rng.uniform(), p3 = rng.uniform();
      auto j = joint_probability({map_of(1, 1, {p1}), map_of(1, 1, {p2}), map_of(1, 1, {p3})});
      CHECK(j.grid.values[0] <= std::min({p1, p2, p3}) + 1e-15);
    }
  }
  SECTION("empty list is rejected") {
    CHECK_THROWS_AS(joint_probability({}), validation_error);
  }
}

TEST_CASE("classify_kbsc degenerate and exactness cases") {
  SECTION("constant in-range field classifies to 1 at any output size") {
    BandStack stack;
    stack.bands.push_back(RasterGrid(8, 8, 55.0, 10.0));
    stack.band_windows = {{620, 680}};
    auto stats = make_stats("wheat", {{50.0, 60.0}});
    for (double out_px : {5.0, 10.0, 40.0}) {
      KbscOptions opt;
      opt.out_pixel_size = out_px;
      auto res = classify_kbsc(stack, stats, {"wheat"}, opt);
      REQUIRE(res.joint.size() == 1);
      REQUIRE(res.report.class_errors.empty());
      for (double v : res.joint[0].grid.values) CHECK_THAT(v, WithinAbs(1.0, 1e-12));
    }
  }
  SECTION("native resolution reproduces the probability law on raw indicators") {
    SceneSpec spec;
    spec.seed = 7;
    spec.fine_rows = spec.fine_cols = 32;
    spec.fine_pixel_size = 10.0;
    spec.coarsen_factor = 2;
    spec.autocorr_range = 60.0;
    spec.noise_sd = 4.0;
    spec.classes = {{"a", {60.0, 120.0}, {5.0, 5.0}, 0.5}, {"b", {110.0, 70.0}, {5.0, 5.0}, 0.5}};
    auto scene = generate_scene(spec);

    SignatureStats stats;
    for (const auto& cls : spec.classes) {
      ClassSignature sig;
      sig.cls = cls.label;
      for (std::size_t b = 0; b < 2; ++b) {
        BandThreshold th;
        th.mean = cls.band_means[b];
        th.lower = cls.band_means[b] - 8.0;
        th.upper = cls.band_means[b] + 8.0;
        sig.bands.push_back(th);
      }
      stats.classes.push_back(sig);
    }

    for (auto rule : {CombineRule::eq5_union, CombineRule::product}) {
      KbscOptions opt;
      opt.combine = rule;
      opt.out_pixel_size = scene.coarse_dn.pixel_size(); // native
      auto res = classify_kbsc(scene.coarse_dn, stats, {"a", "b"}, opt);
      REQUIRE(res.report.class_errors.empty());
      REQUIRE(res.joint.size() == 2);
      for (std::size_t c = 0; c < 2; ++c) {
        const auto& cls = res.joint[c].cls;
        for (std::size_t i = 0; i < res.joint[c].grid.values.size(); ++i) {
          double expected = 1.0;
          for (std::size_t b = 0; b < 2; ++b) {
            const auto& th = stats.threshold(cls, b);
            const double dn = scene.coarse_dn.bands[b].values[i];
            const double p1 = dn <= th.upper ? 1.0 : 0.0;
            const double p2 = dn >= th.lower ? 1.0 : 0.0;
            expected *= rule == CombineRule::eq5_union ? p1 + p2 - p1 * p2 : p1 * p2;
          }
          CHECK_THAT(res.joint[c].grid.values[i], WithinAbs(expected, 1e-12));
        }
      }
    }
  }
  SECTION("per-class failures are isolated") {
    BandStack stack;
    stack.bands.push_back(RasterGrid(4, 4, 55.0, 10.0));
    stack.band_windows = {{620, 680}};
    auto stats = make_stats("wheat", {{50.0, 60.0}}); // no "mustard"
    KbscOptions opt;
    auto res = classify_kbsc(stack, stats, {"wheat", "mustard"}, opt);
    CHECK(res.joint.size() == 1);
    REQUIRE(res.report.class_errors.size() == 1);
    CHECK(res.report.class_errors[0].first == "mustard");
  }
}

TEST_CASE("classify_kbsc matches the straight-line reference when interpolating") {
  SceneSpec spec;
  spec.seed = 42;
  spec.fine_rows = spec.fine_cols = 32;
  spec.fine_pixel_size = 10.0;
  spec.coarsen_factor = 4; // 8x8 coarse
  spec.autocorr_range = 80.0;
  spec.noise_sd = 5.0;
  spec.classes = {{"a", {60.0, 120.0}, {6.0, 6.0}, 0.55}, {"b", {110.0, 70.0}, {6.0, 6.0}, 0.45}};
  auto scene = generate_scene(spec);
  const double native = scene.coarse_dn.pixel_size();

  auto samples = ghs_from_spec(spec, 6);
  auto stats = compute_thresholds(samples, 0.01, DfMode::samples);

  for (double out_px : {2.0 * native, 0.5 * native}) {
    for (auto rule : {CombineRule::eq5_union, CombineRule::product}) {
      KbscOptions opt;
      opt.combine = rule;
      opt.out_pixel_size = out_px;
      opt.kriging.max_neighbors = 64; // all samples: global kriging
      opt.kriging.search_radius = 1e6;
      auto res = classify_kbsc(scene.coarse_dn, stats, {"a", "b"}, opt);
      REQUIRE(res.report.class_errors.empty());

      for (const auto& jm : res.joint) {
        // reuse the production-fit models (the fit has its own oracle)
        std::vector<std::pair<VariogramModel, VariogramModel>> models(2);
        for (const auto& mr : res.report.maps) {
          if (mr.cls != jm.cls) continue;
          auto m = mr.constant_fallback
                       ? VariogramModel{VariogramFamily::nugget, 1.0, 0.0, 1.0}
                       : mr.model;
          if (mr.limit == "upper") models[mr.band].first = m;
          else models[mr.band].second = m;
        }
        auto ref = oracle::ref_joint_map(scene.coarse_dn, stats, jm.cls, models, out_px,
                                         rule == CombineRule::product);
        REQUIRE(ref.values.size() == jm.grid.values.size());
        for (std::size_t i = 0; i < ref.values.size(); ++i)
          CHECK_THAT(jm.grid.values[i], WithinAbs(ref.values[i], 1e-6));
      }
    }
  }
}

TEST_CASE("classify_kbsc is deterministic") {
  SceneSpec spec;
  spec.seed = 5;
  spec.fine_rows = spec.fine_cols = 24;
  spec.fine_pixel_size = 10.0;
  spec.coarsen_factor = 2;
  spec.autocorr_range = 50.0;
  spec.noise_sd = 4.0;
  spec.classes = {{"a", {60.0, 120.0}, {6.0, 6.0}, 0.5}, {"b", {110.0, 70.0}, {6.0, 6.0}, 0.5}};
  auto scene = generate_scene(spec);
  auto stats = compute_thresholds(ghs_from_spec(spec, 5), 0.05, DfMode::samples);

  KbscOptions opt;
  opt.out_pixel_size = 10.0;
  auto a = classify_kbsc(scene.coarse_dn, stats, {"a", "b"}, opt);
  auto b = classify_kbsc(scene.coarse_dn, stats, {"a", "b"}, opt);
  REQUIRE(a.joint.size() == b.joint.size());
  for (std::size_t c = 0; c < a.joint.size(); ++c)
    CHECK(a.joint[c].grid.values == b.joint[c].grid.values);
}

TEST_CASE("harden") {
  SECTION("single class, zero threshold takes everything") {
    auto labels = harden({map_of(1, 3, {0.2, 0.0, 0.9})}, 0.0);
    CHECK(labels.values == std::vector<double>{0, 0, 0});
  }
  SECTION("ties break to the earlier class") {
    auto labels = harden({map_of(1, 1, {0.7}, "wheat"), map_of(1, 1, {0.7}, "mustard")}, 0.0);
    CHECK(labels.values[0] == 0.0);
  }
  SECTION("below-threshold pixels are unclassified") {
    auto labels = harden({map_of(1, 1, {0.4})}, 0.5);
    CHECK(labels.values[0] == -1.0);
  }
  SECTION("argmax is invariant under a monotone transform of all maps") {
    detail::Rng rng(67);
    std::vector<ProbabilityMap> maps;
    for (int c = 0; c < 3; ++c) {
      ProbabilityMap m;
      m.cls = "c" + std::to_string(c);
      m.grid = RasterGrid(6, 6);
      for (double& v : m.grid.values) v = rng.uniform();
      maps.push_back(std::move(m));
    }
    auto base = harden(maps, 0.0);
    auto transformed = maps;
    for (auto& m : transformed)
      for (double& v : m.grid.values) v = std::sqrt(v); // strictly monotone on [0,1]
    auto after = harden(transformed, 0.0);
    CHECK(base.values == after.values);
  }
  SECTION("NaN in any map leaves the pixel unclassified") {
    auto labels = harden({map_of(1, 1, {std::nan("")}), map_of(1, 1, {0.9})}, 0.0);
    CHECK(labels.values[0] == -1.0);
  }
}
