#include <doctest.h>

#include "random_models.hpp"
#include "temp_dir.hpp"
#include "romforge/io.hpp"
#include "romforge/zoo.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

using namespace romforge;
using testing::TempDir;

namespace {

Vector random_vector(Index n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

}  // namespace

TEST_CASE("17-digit formatting round-trips doubles exactly") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int k = 0; k < 2000; ++k) {
    const double v = std::ldexp(u(rng), static_cast<int>(u(rng) * 10));
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  TempDir tmp;
  Matrix edge(1, 4);
  edge << std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max(), -0.0, 1e-300;
  io::write_dense(tmp / "edge.mtx", edge);
  CHECK(io::read_dense(tmp / "edge.mtx") == edge);
}

TEST_CASE("Matrix Market round trips are exact") {
  TempDir tmp;
  std::mt19937 rng(11);
  const Matrix A = testing::random_matrix(7, 7, rng);
  const Matrix S = A + A.transpose();

  io::write_sparse(tmp / "s.mtx", SparseMatrixSym::from_dense(S, true));
  const auto s = io::read_sparse(tmp / "s.mtx");
  CHECK(s.symmetric());
  CHECK((s.to_dense() - S).cwiseAbs().maxCoeff() == 0.0);

  io::write_sparse(tmp / "g.mtx", SparseMatrixSym::from_dense(A, false));
  const auto g = io::read_sparse(tmp / "g.mtx");
  CHECK_FALSE(g.symmetric());
  CHECK((g.to_dense() - A).cwiseAbs().maxCoeff() == 0.0);

  const Matrix R = testing::random_matrix(5, 3, rng);
  io::write_dense(tmp / "d.mtx", R);
  CHECK(io::read_dense(tmp / "d.mtx") == R);

  io::write_file_atomic(tmp / "bad.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
  CHECK_THROWS_AS(io::read_sparse(tmp / "bad.mtx"), IoError);
  io::write_file_atomic(tmp / "short.mtx", "%%MatrixMarket matrix array real general\n2 2\n1\n2\n");
  CHECK_THROWS_AS(io::read_dense(tmp / "short.mtx"), IoError);
  CHECK_THROWS_AS(io::read_dense(tmp / "missing.mtx"), IoError);
}

TEST_CASE("model directories round-trip matrices, tensors, forcing and observables") {
  TempDir tmp;
  std::mt19937 rng(5);
  const FullOrderModel m = testing::random_model(9, rng);
  io::write_model(tmp / "m", m);
  const FullOrderModel r = io::read_model(tmp / "m");
  CHECK(r.M().to_dense() == m.M().to_dense());
  CHECK(r.C().to_dense() == m.C().to_dense());
  CHECK(r.K().to_dense() == m.K().to_dense());
  CHECK(r.G().nnz() == m.G().nnz());
  CHECK(r.H().nnz() == m.H().nnz());
  for (int k = 0; k < 5; ++k) {
    const Vector D = random_vector(9, rng);
    CHECK((internal_force(r, D) - internal_force(m, D)).norm() == 0.0);
  }
  CHECK(r.forcing().F0 == m.forcing().F0);
  CHECK(r.forcing().omega == m.forcing().omega);
  CHECK(r.forcing().beta == m.forcing().beta);
  REQUIRE(r.observables().size() == 2);
  CHECK(r.observables()[1].name == "o2");
  CHECK(r.observables()[1].functional == m.observables()[1].functional);
  CHECK_FALSE(io::read_beam_spec(tmp / "m").has_value());
  CHECK_THROWS_AS(io::read_rom(tmp / "m"), IoError);

  zoo::BeamSpec spec;
  spec.elements = 6;
  spec.rise = 0.5;
  io::write_model(tmp / "beam", zoo::make_vk_beam(spec), spec);
  const auto back = io::read_beam_spec(tmp / "beam");
  REQUIRE(back.has_value());
  CHECK(back->elements == 6);
  CHECK(back->rise == 0.5);
  CHECK(back->young == spec.young);
}

TEST_CASE("reduced models round-trip with their basis") {
  TempDir tmp;
  std::mt19937 rng(8);
  const FullOrderModel m = testing::random_model(10, rng);
  const ReducedOrderModel rom = project(m, testing::random_orthonormal(10, 3, rng));
  io::write_rom(tmp / "rom", rom);
  const ReducedOrderModel r = io::read_rom(tmp / "rom");
  CHECK(r.M() == rom.M());
  CHECK(r.K() == rom.K());
  CHECK(r.basis() == rom.basis());
  CHECK(r.g_dense() == rom.g_dense());
  CHECK(r.h_dense() == rom.h_dense());
  CHECK(r.forcing().F0 == rom.forcing().F0);
}

TEST_CASE("trajectories and snapshot matrices round-trip") {
  TempDir tmp;
  auto m = zoo::make_duffing(1.0, 0.2, 30.0);
  SweepPlan plan;
  plan.omegas = {0.9, 1.1};
  plan.cycles = 3;
  plan.steps_per_cycle = 20;
  plan.beta = 0.1;
  const Trajectory t = sweep(m, plan);
  io::write_trajectory(tmp / "t.bin", t);
  const Trajectory r = io::read_trajectory(tmp / "t.bin");
  CHECK(r.D == t.D);
  CHECK(r.V == t.V);
  CHECK(r.times == t.times);
  REQUIRE(r.segments.size() == 2);
  CHECK(r.segments[1].omega == 1.1);
  CHECK(r.segments[1].first == t.segments[1].first);

  const std::string bytes = io::read_file(tmp / "t.bin");
  io::write_file_atomic(tmp / "cut.bin", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(io::read_trajectory(tmp / "cut.bin"), IoError);
  io::write_file_atomic(tmp / "junk.bin", "not a trajectory at all");
  CHECK_THROWS_AS(io::read_trajectory(tmp / "junk.bin"), IoError);

  const SnapshotMatrix S = assemble_snapshots({TrajectorySnapshots{&t, SnapshotSource::TM_TR}});
  io::write_snapshots(tmp / "x.mtx", S);
  const SnapshotMatrix back = io::read_snapshots(tmp / "x.mtx");
  CHECK(back.X == S.X);
  REQUIRE(back.provenance.size() == 2);
  CHECK(back.provenance[0].source == SnapshotSource::TM_TR);
  CHECK(back.provenance[1].count == S.provenance[1].count);

  const SnapshotMatrix direct = io::read_snapshots(tmp / "t.bin");
  CHECK(direct.X == S.X);
}

TEST_CASE("Fourier coefficients round-trip") {
  TempDir tmp;
  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  HbConfig cfg;
  cfg.harmonics = 5;
  const FourierSolution s = hb_solve(m, 0.9, 0.03, std::nullopt, cfg);
  io::write_fourier(tmp / "f.csv", s);
  const FourierSolution r = io::read_fourier(tmp / "f.csv");
  CHECK(r.omega == s.omega);
  CHECK(r.coeffs == s.coeffs);
}

TEST_CASE("FRF export: header-only for an empty branch, one SN row per fold") {
  TempDir tmp;
  FrfBranch empty;
  empty.observables = {"x"};
  io::export_frf(empty, tmp / "empty.csv");
  CHECK(io::read_file(tmp / "empty.csv") == "omega_rad_per_time,beta,x,stable,bif\n");
  CHECK(io::read_frf(tmp / "empty.csv").rows.empty());

  auto m = zoo::make_duffing(1.0, 0.1, 50.0);
  ContinuationConfig cfg;
  cfg.hb.harmonics = 5;
  const FrfBranch b = trace_frf(m, 0.8, 1.3, 0.05, cfg);
  REQUIRE(b.count(Bifurcation::SN) == 2);
  io::export_frf(b, tmp / "frf.csv");
  const auto t = io::read_frf(tmp / "frf.csv");
  REQUIRE(t.rows.size() == b.points.size());
  int sn = 0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    sn += t.rows[k].bif == "SN";
    CHECK(t.rows[k].omega == b.points[k].omega);
    CHECK(t.rows[k].amplitudes[0] == b.points[k].amplitudes[0]);
    CHECK(t.rows[k].stable == (b.points[k].stable ? 1 : 0));
  }
  CHECK(sn == 2);
  const std::string script = io::read_file(tmp / "frf.plot.py");
  CHECK(script.find("'frf.csv'") != std::string::npos);
}

TEST_CASE("spectrum export sums to one when re-read") {
  TempDir tmp;
  std::mt19937 rng(21);
  const PodBasis b = compute_pod(testing::random_matrix(12, 8, rng), 3);
  io::export_spectrum(b, tmp / "spectrum.csv");
  const auto s = io::read_spectrum(tmp / "spectrum.csv");
  REQUIRE(s.sigma.size() == 8);
  CHECK(std::abs(s.rel_energy.sum() - 1.0) < 1e-12);
  CHECK(std::abs(s.cum_energy[7] - 1.0) < 1e-12);
  CHECK(s.sigma == b.sigma);
  CHECK(std::filesystem::exists(tmp / "spectrum.plot.py"));
}

TEST_CASE("manifold files declare units and carry every channel") {
  TempDir tmp;
  ElectroManifold mf;
  mf.grid = uniform_grid(-1.0, 1.0, 9);
  mf.samples.resize(2, 9);
  for (Index g = 0; g < 9; ++g) {
    const double q = mf.grid[g];
    mf.samples(0, g) = kEpsilon0 * (1.0 + 0.5 * q + 0.1 * q * q * q);
    mf.samples(1, g) = kEpsilon0 * (2.0 - q);
  }
  fit_cubic(mf);
  io::write_manifold(tmp.path(), mf);
  const std::string c = io::read_file(tmp / "coefficients.csv");
  CHECK(c.find("uN/V^2") != std::string::npos);
  CHECK(c.find("\n2,") != std::string::npos);
  CHECK(io::read_file(tmp / "manifold.csv").find("q_um,F1,F2") != std::string::npos);
}

TEST_CASE("hashing: known vector and order-independent directory digests") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  TempDir a, b;
  io::write_file_atomic(a / "x.txt", "1");
  io::write_file_atomic(a / "sub/y.txt", "2");
  io::write_file_atomic(b / "sub/y.txt", "2");
  io::write_file_atomic(b / "x.txt", "1");
  CHECK(io::sha256_path(a.path()) == io::sha256_path(b.path()));
  io::write_file_atomic(b / "x.txt", "3");
  CHECK(io::sha256_path(a.path()) != io::sha256_path(b.path()));
  CHECK_THROWS_AS(io::sha256_path(a / "nothing"), IoError);
}

TEST_CASE("atomic writes leave no temporaries and report failures") {
  TempDir tmp;
  io::write_file_atomic(tmp / "f.txt", "first");
  io::write_file_atomic(tmp / "f.txt", "second");
  CHECK(io::read_file(tmp / "f.txt") == "second");
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(tmp.path())) files += e.is_regular_file();
  CHECK(files == 1);
  io::write_file_atomic(tmp / "blocker", "x");
  CHECK_THROWS_AS(io::write_file_atomic(tmp / "blocker" / "f.txt", "y"), IoError);
}
