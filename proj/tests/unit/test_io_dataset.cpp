#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include "doctest.h"
#include "hbfill/dataset.hpp"
#include "hbfill/error.hpp"
#include "hbfill/io.hpp"
#include "test_util.hpp"

using namespace hbfill;
namespace fs = std::filesystem;

TEST_CASE("decimal strings round-trip every double") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100000; ++k) {
    const std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(parse_double(Json(format_double(v))) == v);
  }
  CHECK(parse_double(Json(2.5)) == 2.5);
  CHECK(parse_double(Json("1e-3")) == 1e-3);
  CHECK_THROWS_AS(parse_double(Json("abc")), FormatError);
  CHECK_THROWS_AS(parse_double(Json("1.5x")), FormatError);
  CHECK_THROWS_AS(parse_double(Json::array()), FormatError);
}

TEST_CASE("profile CSV and sidecar round-trip") {
  const testutil::TempDir dir("io");
  HeightProfile p;
  p.h = {1.0, 0.75, 1.0 / 3.0, 0.0, 0.0};
  p.t = 0.123456789012345;
  p.params = {12.5, 0.3, 0.8};
  p.provenance = Provenance::pde;
  write_profile(p, dir.path / "prof", 77);
  const LoadedProfile lp = read_profile(dir.path / "prof.csv");
  CHECK(lp.h == p.h);
  CHECK(lp.x.front() == 0.0);
  CHECK(lp.x.back() == 1.0);
  REQUIRE(lp.sidecar.has_value());
  CHECK(lp.sidecar->params == p.params);
  CHECK(lp.sidecar->wall_touch_time == p.t);
  CHECK(lp.sidecar->nx == 5);
  CHECK(lp.sidecar->steps == 77);
  CHECK(read_profile(dir.path / "prof").h == p.h);

  write_text(dir.path / "bare.csv", "0,1\n0.5,2\n1,3\n");
  const LoadedProfile bare = read_profile(dir.path / "bare.csv");
  CHECK(bare.h == std::vector<double>{1, 2, 3});
  CHECK_FALSE(bare.sidecar.has_value());

  write_text(dir.path / "bad.csv", "x,h\n0,1\n0.5,oops\n");
  CHECK_THROWS_AS(read_profile(dir.path / "bad.csv"), FormatError);
  CHECK_THROWS_AS(read_profile(dir.path / "missing.csv"), FormatError);
}

TEST_CASE("resampling onto a uniform grid") {
  const std::vector<double> x{0.0, 0.1, 0.5, 1.0}, h{0.0, 1.0, 5.0, 10.0};
  const auto r = resample_uniform(x, h, 11);
  for (int i = 0; i <= 10; ++i) CHECK(r[i] == doctest::Approx(i * 1.0));
  const std::vector<double> bad{0.0, 0.5, 0.4, 1.0};
  CHECK_THROWS_AS(resample_uniform(bad, h, 5), DomainError);
  const std::vector<double> short_x{0.0, 0.5, 0.9};
  CHECK_THROWS_AS(resample_uniform(short_x, std::vector<double>{1, 2, 3}, 5), DomainError);
}

TEST_CASE("solver config JSON round-trip") {
  SolverConfig c;
  c.nx = 77;
  c.Cd = 0.25;
  c.wall_touch_threshold = 1e-9;
  const SolverConfig r = solver_config_from_json(to_json(c));
  CHECK(r.nx == 77);
  CHECK(r.Cd == 0.25);
  CHECK(r.resolved_dt_max() == c.resolved_dt_max());
  CHECK(r.wall_touch_threshold == 1e-9);
}

TEST_CASE("dataset couples") {
  SolverConfig cfg;
  cfg.nx = 21;
  DatasetSpec reg = DatasetSpec::regular(20, 20, 1.0, cfg);
  const auto c = dataset_couples(reg);
  REQUIRE(c.size() == 400);
  CHECK(c.front().B == 0.5);
  CHECK(c.front().S == 0.05);
  CHECK(c.back().B == 250.0);
  CHECK(c.back().S == 120.0);
  CHECK(c[1].B == 0.5);  // B-major

  const DatasetSpec rnd = DatasetSpec::random(200, 9, 1.0, cfg);
  const auto a = dataset_couples(rnd), b = dataset_couples(rnd);
  CHECK(a == b);
  for (const auto& p : a) CHECK(kDefaultDomain.contains(p.B, p.S));

  CHECK(predicted_cost({250.0, 0.05, 1.0}) > predicted_cost({250.0, 1.0, 1.0}));
  CHECK(predicted_cost({250.0, 1.0, 1.0}) > predicted_cost({10.0, 1.0, 1.0}));
  CHECK(predicted_cost({10.0, 0.01, 1.0}) == predicted_cost({10.0, 0.05, 1.0}));

  DatasetSpec bad = DatasetSpec::regular(1, 5, 1.0, cfg);
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = reg;
  bad.B_max = 300.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("dataset generation is resumable and worker-independent") {
  SolverConfig cfg;
  cfg.nx = 21;
  DatasetSpec spec = DatasetSpec::regular(3, 2, 1.0, cfg);
  spec.B_min = 1.0;
  spec.B_max = 5.0;
  spec.S_min = 10.0;
  spec.S_max = 40.0;
  const testutil::TempDir one("ds1"), many("ds4"), resumed("dsr");
  generate_dataset(spec, one.path, 1);
  generate_dataset(spec, many.path, 4);
  CHECK(testutil::same_tree(one.path, many.path));

  generate_dataset(spec, resumed.path, 2);
  fs::remove(resumed.path / "couple_00002.json");
  fs::remove(resumed.path / "couple_00004.csv");
  fs::remove(resumed.path / "index.json");
  const auto r = generate_dataset(spec, resumed.path, 1);
  CHECK(testutil::same_tree(one.path, resumed.path));
  std::size_t skipped = 0;
  for (const auto& t : r.timings) skipped += t.resumed;
  CHECK(skipped == 4);

  const TrainingSet ts = load_dataset(one.path);
  CHECK(ts.size() == 6);
  CHECK(ts.nx() == 21);
  CHECK(ts.inputs[0] == RheoParams{1.0, 10.0, 1.0});
  const DatasetIndex idx = read_index(one.path);
  CHECK(idx.failures() == 0);
  CHECK(idx.spec.grid.nB == 3);
}

TEST_CASE("failed couples are listed and block loading") {
  SolverConfig cfg;
  cfg.nx = 21;
  cfg.max_steps = 5;
  DatasetSpec spec = DatasetSpec::regular(2, 2, 1.0, cfg);
  const testutil::TempDir dir("dsf");
  const auto r = generate_dataset(spec, dir.path, 1);
  CHECK(r.index.failures() == 4);
  CHECK(read_index(dir.path).couples[0].error.find("no wall-touch") != std::string::npos);
  CHECK_THROWS_AS(load_dataset(dir.path), FormatError);
}
