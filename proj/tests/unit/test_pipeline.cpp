#include <doctest.h>

#include "temp_dir.hpp"
#include "romforge/bench.hpp"
#include "romforge/io.hpp"
#include "romforge/pipeline.hpp"

#include <cmath>
#include <string>

using namespace romforge;
using testing::TempDir;

namespace {

std::string duffing_config(const std::string& extra_pod = "", const std::string& snapshots = "") {
  const std::string snap = snapshots.empty()
                               ? R"({"strategy": "HB", "omegas_rel": [0.95, 1.0, 1.05], "beta_un": 0.02, "harmonics": 5})"
                               : snapshots;
  return R"({
    "model": {"kind": "duffing", "omega0_rad_per_time": 1.0, "gamma_un_per_um3": 0.1, "quality_factor": 50},
    "snapshots": )" + snap + R"(,
    "pod": {"p": 1)" + extra_pod + R"(},
    "frf": {"omega_min_rel": 0.8, "omega_max_rel": 1.3, "beta_un": [0.01, 0.05], "harmonics": 5},
    "output_dir": "out"
  })";
}

}  // namespace

TEST_CASE("smallest pipeline: Duffing with one POM writes five artifacts and a complete FRF") {
  TempDir tmp;
  const RunConfig cfg = parse_run_config(duffing_config(), tmp.path());
  CHECK(cfg.output_dir == tmp / "out");
  const PipelineResult res = run_pipeline(cfg);
  REQUIRE(res.artifacts.size() == 5);
  for (const auto& a : res.artifacts) CHECK(std::filesystem::exists(res.dir / a.path));
  const auto frf = io::read_frf(tmp / "out/frf/frf.csv");
  REQUIRE(frf.observables == std::vector<std::string>{"x"});
  CHECK(res.frf.size() == 2);
  CHECK(res.frf[0].complete);
  CHECK(frf.rows.front().omega == doctest::Approx(0.8));
  CHECK(frf.rows.back().omega == doctest::Approx(1.3));
  // The heavier forcing level folds over: two saddle-nodes survive the round trip.
  int sn = 0;
  for (const auto& r : frf.rows) sn += r.bif == "SN";
  CHECK(sn == 2);
  const std::string manifest = io::read_file(tmp / "out/manifest.json");
  CHECK(manifest.find(res.config_sha256) != std::string::npos);
  CHECK(std::filesystem::exists(tmp / "out/config.json"));
}

TEST_CASE("pipeline reruns give byte-identical manifests; config edits change the hash") {
  TempDir tmp;
  const RunConfig cfg = parse_run_config(duffing_config(), tmp.path());
  run_pipeline(cfg);
  const std::string first = io::read_file(tmp / "out/manifest.json");
  run_pipeline(cfg);
  CHECK(io::read_file(tmp / "out/manifest.json") == first);

  const RunConfig other = parse_run_config(duffing_config(R"(, "svd": "snapshots")"), tmp.path());
  CHECK(io::sha256_hex(dump_run_config(other)) != io::sha256_hex(dump_run_config(cfg)));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(duffing_config(R"(, "q": 2)")), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config(duffing_config(R"(, "q": 2)")), doctest::Contains("unknown key 'q'"),
                       ConfigError);
  CHECK_THROWS_AS(parse_run_config(duffing_config("", R"({"strategy": "HB", "beta_un": 0.1})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(duffing_config("", R"({"strategy": "XX", "omegas_rel": [1], "beta_un": 0.1})")),
                  ConfigError);
  // Strategy-specific keys are only accepted for their strategy.
  CHECK_THROWS_AS(
      parse_run_config(duffing_config("", R"({"strategy": "HB", "omegas_rel": [1], "beta_un": 0.1, "cycles": 4})")),
      ConfigError);
  CHECK_NOTHROW(
      parse_run_config(duffing_config("", R"({"strategy": "TM-TR", "omegas_rel": [1], "beta_un": 0.1, "cycles": 4})")));
  CHECK_THROWS_AS(parse_run_config(duffing_config(
                      "", R"({"strategy": "HB", "omegas_rel": [1], "omegas_rad_per_time": [1], "beta_un": 0.1})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_model_config(R"({"kind": "file", "path": "/no/such/model"})"), ConfigError);
  CHECK_THROWS_AS(parse_model_config(R"({"kind": "duffing", "omega0_rad_per_time": -1, "quality_factor": 5})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_model_config(R"({"kind": "vk_beam", "length": 1000})"), ConfigError);
}

TEST_CASE("stage failures name the stage and a reproduction command") {
  TempDir tmp;
  RunConfig cfg = parse_run_config(duffing_config(), tmp.path());
  cfg.p = 3;  // more POMs than the rank-one Duffing snapshots support
  cfg.source = "run.json";
  try {
    run_pipeline(cfg);
    FAIL("expected a failure");
  } catch (const ContractViolation& e) {
    const std::string what = e.what();
    CHECK(what.find("stage 'pod'") != std::string::npos);
    CHECK(what.find("romforge pipeline --config run.json") != std::string::npos);
  }
}

TEST_CASE("time-marching snapshot strategies record one block per training frequency") {
  const FullOrderModel m = zoo::make_duffing(1.0, 0.1, 20.0);
  SnapshotConfig ss;
  ss.strategy = SnapshotSource::TM_SS;
  ss.omegas = {{0.9, true}, {1.1, true}};
  ss.beta = 0.02;
  ss.steps_per_cycle = 40;
  const SnapshotMatrix S = collect_snapshots(m, ss, 1.0);
  CHECK(S.count() == 80);
  REQUIRE(S.provenance.size() == 2);
  CHECK(S.provenance[1].source == SnapshotSource::TM_SS);
  CHECK(S.provenance[1].omega == doctest::Approx(1.1));

  // A steady-state period must match harmonic balance.
  HbConfig hc;
  hc.harmonics = 7;
  const FourierSolution hb = hb_solve(m, 0.9, 0.02, std::nullopt, hc);
  const double hb_amp = observable_amplitude(hb, m.observables()[0].functional);
  const auto row = S.X.row(0).head(40);
  CHECK(0.5 * (row.maxCoeff() - row.minCoeff()) == doctest::Approx(hb_amp).epsilon(5e-3));

  SnapshotConfig tr;
  tr.strategy = SnapshotSource::TM_TR;
  tr.omegas = {{1.0, true}};
  tr.beta = 0.02;
  tr.cycles = 4;
  tr.steps_per_cycle = 25;
  const SnapshotMatrix T = collect_snapshots(m, tr, 1.0);
  CHECK(T.count() == 100);
  CHECK(T.provenance[0].source == SnapshotSource::TM_TR);
}

TEST_CASE("time-marching FRF agrees with harmonic balance off resonance") {
  const FullOrderModel m = zoo::make_duffing(1.0, 0.1, 20.0);
  FrfConfig fc;
  fc.solver = FrfSolver::TM;
  fc.omega_min = {0.6, true};
  fc.omega_max = {0.8, true};
  fc.betas = {0.02};
  fc.points = 3;
  fc.steps_per_cycle = 200;
  const auto br = compute_frf(m, fc, 1.0, quality_factor(m, 1.0));
  REQUIRE(br.size() == 1);
  REQUIRE(br[0].points.size() == 3);
  HbConfig hc;
  hc.harmonics = 7;
  for (const auto& p : br[0].points) {
    CHECK_FALSE(p.stability_known);
    const FourierSolution s = hb_solve(m, p.omega, 0.02, std::nullopt, hc);
    CHECK(p.amplitudes[0] == doctest::Approx(observable_amplitude(s, m.observables()[0].functional)).epsilon(2e-3));
  }
  CHECK(quality_factor(m, 1.0) == doctest::Approx(20.0));
}

TEST_CASE("file models can be re-damped through the config") {
  TempDir tmp;
  io::write_model(tmp / "m", zoo::make_duffing(2.0, 0.0, 10.0));
  const ModelConfig mc = parse_model_config(R"({"kind": "file", "path": "m", "quality_factor": 40})", tmp.path());
  const FullOrderModel m = build_model(mc);
  CHECK(quality_factor(m, reference_frequency(m)) == doctest::Approx(40.0));
}

TEST_CASE("hb_sweep tracks a frequency grid and survives a jump") {
  const FullOrderModel m = zoo::make_duffing(1.0, 0.1, 50.0);
  HbConfig hc;
  hc.harmonics = 5;
  const std::vector<double> w{0.9, 0.95, 1.0, 1.02, 1.2};
  const auto pts = hb_sweep(m, w, m.forcing().with(0.01, 0.9), hc);
  REQUIRE(pts.size() == w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(pts[k].omega == w[k]);
    const FourierSolution ref = hb_solve(m, w[k], 0.01, pts[k].sol, hc);
    CHECK((ref.coeffs - pts[k].sol.coeffs).norm() < 1e-10);
  }
  HbSweepOptions par;
  par.threads = 2;
  const auto pp = hb_sweep(m, w, m.forcing().with(0.01, 0.9), hc, par);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(pp[k].amplitudes[0] == doctest::Approx(pts[k].amplitudes[0]));
  CHECK_THROWS_AS(hb_sweep(m, {}, m.forcing(), hc), ContractViolation);
}

TEST_CASE("benchmark report invariants and table layout") {
  BenchConfig bc = parse_bench_config(R"({
    "model": {"kind": "two_dof", "omega1_rad_per_time": 1.0, "detuning_rel": 0.05, "coupling_un_per_um2": 0.3, "quality_factor": 50},
    "snapshots": {"strategy": "HB", "omegas_rel": [0.9, 1.0, 1.1], "beta_un": 0.002, "harmonics": 3},
    "pod": {"p": 2},
    "frf": {"omega_min_rel": 0.8, "omega_max_rel": 1.2, "beta_un": 0.002, "harmonics": 3},
    "bench": {"n_freq": 400, "repeats": 3,
              "compare": [{"strategy": "TM-TR", "omegas_rel": [1.0], "beta_un": 0.002, "cycles": 6, "steps_per_cycle": 50}]}
  })");
  const TimingReport r = run_benchmark(bc);
  CHECK(r.n == 2);
  CHECK(r.p == 2);
  CHECK(r.n_freq == 400);
  CHECK(r.t_offline >= r.t_snap);
  CHECK(r.speedup_online() > 0.0);
  CHECK(r.speedup_total() > 0.0);
  REQUIRE(r.offline_rows.size() == 2);
  CHECK(r.offline_rows[1].strategy == SnapshotSource::TM_TR);
  CHECK(r.offline_rows[1].snapshots == 300);
  // p = n: no reduction, so the online sweep costs about the same as the full one.
  CHECK(r.t_online < 2.0 * r.t_fom);
  const std::string table = format_report(r);
  CHECK(table.find("T_FOM/T_online") != std::string::npos);
  CHECK(table.find("TM-TR") != std::string::npos);

  CHECK_THROWS_AS(parse_bench_config(R"({"bench": {"nfreq": 3}})"), ConfigError);
}

TEST_CASE("sweep plans resolve relative frequencies and validate ordering") {
  const SweepPlan p = parse_sweep_plan(
      R"({"omegas_rel": [1.2, 1.0], "direction": "down", "beta_un": 0.1, "cycles": 7, "carry_state": false})", 2.0);
  REQUIRE(p.omegas.size() == 2);
  CHECK(p.omegas[0] == doctest::Approx(2.4));
  CHECK(p.direction == SweepDirection::Down);
  CHECK(p.cycles == 7);
  CHECK_FALSE(p.carry_state);
  CHECK_THROWS_AS(parse_sweep_plan(R"({"omegas_rel": [1.2, 1.0], "beta_un": 0.1})", 1.0), ConfigError);
  CHECK_THROWS_AS(parse_sweep_plan(R"({"omegas_rel": [1.0], "beta_un": 0.1, "dir": "up"})", 1.0), ConfigError);
  CHECK_THROWS_AS(parse_sweep_plan(R"({"omegas_rel": [1.0]})", 1.0), ConfigError);
}
