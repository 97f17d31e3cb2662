#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "test_util.hpp"

#ifdef _WIN32
#error "POSIX-only test driver"
#endif
#include <sys/wait.h>

using nlohmann::json;

namespace {

std::string cli_path() {
  const char* env = std::getenv("KSC_CLI");
  REQUIRE(env != nullptr);
  return env;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

json base_config() {
  return json{
      {"paths", {{"out_dir", "out"}}},
      {"alpha", 0.02},
      {"df_mode", "samples"},
      {"signatures", {{"source", "synthetic_ghs"}, {"samples_per_class", 5}}},
      {"variogram", {{"family", "spherical"}, {"n_bins", 10}}},
      {"kriging", {{"out_pixel_size", 0.0}, {"max_neighbors", 16}}},
      {"combine", "product"},
      {"classes", {"a", "b"}},
      {"synth",
       {{"seed", 42},
        {"fine_rows", 16},
        {"fine_cols", 16},
        {"fine_pixel_size", 10.0},
        {"coarsen_factor", 2},
        {"autocorr_range", 40.0},
        {"noise_sd", 5.0},
        {"classes",
         {{{"label", "a"}, {"band_means", {60.0, 120.0}}, {"band_sds", {6.0, 6.0}},
           {"target_fraction", 0.5}},
          {{"label", "b"}, {"band_means", {110.0, 70.0}}, {"band_sds", {6.0, 6.0}},
           {"target_fraction", 0.5}}}}}},
      {"benchmark", {{"seeds", {1}}, {"methods", {"kbsc"}}}}};
}

std::filesystem::path write_config(const std::filesystem::path& dir, const json& j) {
  auto path = dir / "config.json";
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

} // namespace

TEST_CASE("cli validate") {
  auto dir = testutil::scratch_dir("cli_validate");
  auto cfg = write_config(dir, base_config());
  CHECK(run("validate --config " + cfg.string()) == 0);

  auto bad = base_config();
  bad["paths"]["stack"] = "nonexistent_raster";
  auto cfg2 = write_config(dir, bad);
  CHECK(run("validate --config " + cfg2.string()) == 2);
}

TEST_CASE("cli synth is deterministic and rejects bad fractions") {
  auto dir = testutil::scratch_dir("cli_synth");
  auto cfg = write_config(dir, base_config());
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "o1").string()) == 0);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "o2").string()) == 0);
  CHECK(testutil::slurp(dir / "o1" / "coarse_dn.bin") == testutil::slurp(dir / "o2" / "coarse_dn.bin"));
  CHECK(testutil::slurp(dir / "o1" / "fine_labels.bin") ==
        testutil::slurp(dir / "o2" / "fine_labels.bin"));

  auto bad = base_config();
  bad["synth"]["classes"][0]["target_fraction"] = 0.9;
  auto cfg2 = write_config(dir, bad);
  CHECK(run("synth --config " + cfg2.string()) == 2);
}

TEST_CASE("cli classify: kbsc and baselines run; unknown method exits 2") {
  auto dir = testutil::scratch_dir("cli_classify");
  auto cfgj = base_config();
  cfgj["paths"]["stack"] = (dir / "scene" / "coarse_dn").string();
  auto cfg = write_config(dir, cfgj);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "scene").string()) == 0);

  CHECK(run("classify --config " + cfg.string() + " --method kbsc --out " +
            (dir / "kbsc").string()) == 0);
  CHECK(std::filesystem::exists(dir / "kbsc" / "kbsc_a.bin"));
  CHECK(std::filesystem::exists(dir / "kbsc" / "kbsc_labels.bin"));
  CHECK(std::filesystem::exists(dir / "kbsc" / "report_kbsc.json"));

  CHECK(run("classify --config " + cfg.string() + " --method maxlike --out " +
            (dir / "mx").string()) == 0);
  CHECK(std::filesystem::exists(dir / "mx" / "maxlike_b.bin"));

  CHECK(run("classify --config " + cfg.string() + " --method nonsense --out " +
            (dir / "x").string()) == 2);
}

TEST_CASE("cli assess compares map sets and rejects mismatched classes") {
  auto dir = testutil::scratch_dir("cli_assess");
  auto cfgj = base_config();
  cfgj["paths"]["stack"] = (dir / "scene" / "coarse_dn").string();
  auto cfg = write_config(dir, cfgj);
  REQUIRE(run("synth --config " + cfg.string() + " --out " + (dir / "scene").string()) == 0);
  REQUIRE(run("classify --config " + cfg.string() + " --method kbsc --out " +
              (dir / "kbsc").string()) == 0);

  CHECK(run("assess --config " + cfg.string() + " --ref " + (dir / "scene" / "true").string() +
            " --test " + (dir / "kbsc" / "kbsc").string() + " --out " +
            (dir / "assess").string()) == 0);
  CHECK(std::filesystem::exists(dir / "assess" / "assess.json"));
  CHECK(std::filesystem::exists(dir / "assess" / "closeness_S.pgm"));

  // identical sets give S == 0: assess true against itself
  REQUIRE(run("assess --config " + cfg.string() + " --ref " + (dir / "scene" / "true").string() +
              " --test " + (dir / "scene" / "true").string() + " --out " +
              (dir / "self").string()) == 0);
  {
    std::ifstream in(dir / "self" / "assess.json");
    json j;
    in >> j;
    CHECK(j["closeness"]["S"]["mean"].get<double>() == 0.0);
    CHECK(j["closeness"]["D"]["mean"].get<double>() == 0.0);
  }

  auto bad = cfgj;
  bad["classes"] = {"a", "zzz"};
  auto cfg2 = write_config(dir, bad);
  CHECK(run("assess --config " + cfg2.string() + " --ref " + (dir / "scene" / "true").string() +
            " --test " + (dir / "kbsc" / "kbsc").string() + " --out " +
            (dir / "bad").string()) != 0);
}

TEST_CASE("cli benchmark writes one row per combination, deterministically") {
  auto dir = testutil::scratch_dir("cli_bench");
  auto cfg = write_config(dir, base_config());
  REQUIRE(run("benchmark --config " + cfg.string() + " --seeds 7 --methods kbsc --out " +
              (dir / "b1").string()) == 0);
  auto csv = testutil::slurp(dir / "b1" / "benchmark.csv");
  CHECK(csv.rfind("schema_version,seed,method,h,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2); // header + one row

  REQUIRE(run("benchmark --config " + cfg.string() + " --seeds 7 --methods kbsc --out " +
              (dir / "b2").string()) == 0);
  CHECK(testutil::slurp(dir / "b1" / "benchmark.csv") == testutil::slurp(dir / "b2" / "benchmark.csv"));
  CHECK(std::filesystem::exists(dir / "b1" / "timings.csv"));

  // identical seeds repeated yield identical metric rows
  REQUIRE(run("benchmark --config " + cfg.string() + " --seeds 7,7 --methods kbsc --out " +
              (dir / "b3").string()) == 0);
  auto csv3 = testutil::slurp(dir / "b3" / "benchmark.csv");
  std::istringstream lines(csv3);
  std::string header, r1, r2;
  std::getline(lines, header);
  std::getline(lines, r1);
  std::getline(lines, r2);
  CHECK(r1 == r2);
}
