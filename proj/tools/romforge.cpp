// romforge: command-line driver for model generation, solvers, POD reduction,
// electrostatic fitting, benchmarks and full pipelines.

#include "romforge/bench.hpp"
#include "romforge/electro.hpp"
#include "romforge/io.hpp"
#include "romforge/modal.hpp"
#include "romforge/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <iostream>
#include <memory>
#include <numbers>

using namespace romforge;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kIo = 4 };

// FOM or ROM directory, dispatched on model.json.
std::unique_ptr<DynamicSystem> load_system(const fs::path& dir) {
  const auto meta = nlohmann::json::parse(io::read_file(dir / "model.json"), nullptr, false);
  if (meta.is_discarded()) throw IoError((dir / "model.json").string() + ": malformed JSON");
  const std::string kind = meta.value("kind", "");
  if (kind == "fom") return std::make_unique<FullOrderModel>(io::read_model(dir));
  if (kind == "rom") return std::make_unique<ReducedOrderModel>(io::read_rom(dir));
  throw IoError((dir / "model.json").string() + ": unknown model kind '" + kind + "'");
}

// Either --omega (rad/time) or --omega-rel (multiple of the first eigenfrequency).
struct FreqArg {
  double abs = 0.0, rel = 0.0;
  void add(CLI::App* app, const std::string& name, const std::string& what) {
    auto* a = app->add_option("--" + name, abs, what + " [rad/time]");
    auto* r = app->add_option("--" + name + "-rel", rel, what + " relative to the first eigenfrequency");
    a->excludes(r);
  }
  bool given() const { return abs > 0.0 || rel > 0.0; }
  double resolve(const DynamicSystem& sys, const std::string& name) const {
    if (abs > 0.0) return abs;
    if (rel > 0.0) return rel * reference_frequency(sys);
    throw ConfigError("--" + name + " or --" + name + "-rel is required");
  }
};

void print_amplitudes(const DynamicSystem& sys, const std::vector<double>& a) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    fmt::print("{} amplitude: {}\n", sys.observables()[k].name, io::format_double(a[k]));
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("romforge"));
  spdlog::set_pattern("%^%l%$: %v");

  CLI::App app{"Nonlinear reduced-order modelling of resonators: HB, POD, continuation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  // model build
  auto* model_cmd = app.add_subcommand("model", "Model generation");
  model_cmd->require_subcommand(1);
  auto* build_cmd = model_cmd->add_subcommand("build", "Build a full-order model directory from a model config");
  fs::path build_config, build_out;
  build_cmd->add_option("--config", build_config, "JSON file with a model section (or a whole run config)")
      ->required()
      ->check(CLI::ExistingFile);
  build_cmd->add_option("--out", build_out, "Output model directory")->required();
  std::string build_kind;
  build_cmd->add_option("--kind", build_kind, "Model kind, overriding the config (arch = beam with rise_um > 0)")
      ->check(CLI::IsMember({"duffing", "twodof", "beam", "arch"}));

  // eig
  auto* eig_cmd = app.add_subcommand("eig", "Lowest eigenfrequencies");
  fs::path eig_model, eig_out;
  Index eig_count = 5;
  eig_cmd->add_option("--model", eig_model, "Model directory (full or reduced)")->required();
  eig_cmd->add_option("-k,--count", eig_count, "Number of modes")->check(CLI::PositiveNumber);
  eig_cmd->add_option("--out", eig_out, "CSV of eigenfrequencies");

  // tm
  auto* tm_cmd = app.add_subcommand("tm", "Newmark time marching from rest");
  fs::path tm_model, tm_out;
  FreqArg tm_omega;
  double tm_beta = 0.0;
  Index tm_cycles = 100, tm_steps = 50, tm_stride = 1;
  tm_cmd->add_option("--model", tm_model, "Model directory")->required();
  tm_omega.add(tm_cmd, "omega", "Forcing frequency");
  auto* tm_beta_opt = tm_cmd->add_option("--beta", tm_beta, "Forcing level [uN]");
  tm_cmd->add_option("--cycles", tm_cycles, "Forcing periods")->check(CLI::PositiveNumber);
  tm_cmd->add_option("--steps-per-cycle", tm_steps, "Time steps per period")->check(CLI::PositiveNumber);
  tm_cmd->add_option("--stride", tm_stride, "Record every stride-th step")->check(CLI::PositiveNumber);
  fs::path tm_plan;
  tm_cmd->add_option("--plan", tm_plan, "JSON sweep plan (several frequencies, carried or restarted state)")
      ->check(CLI::ExistingFile)
      ->excludes(tm_beta_opt);
  tm_cmd->add_option("--out", tm_out, "Trajectory file (binary)");

  // hb
  auto* hb_cmd = app.add_subcommand("hb", "Harmonic-balance periodic solution at one frequency");
  fs::path hb_model, hb_out;
  FreqArg hb_omega;
  double hb_beta = 0.0;
  Index hb_harmonics = 9;
  hb_cmd->add_option("--model", hb_model, "Model directory")->required();
  hb_omega.add(hb_cmd, "omega", "Forcing frequency");
  hb_cmd->add_option("--beta", hb_beta, "Forcing level [uN]")->required();
  hb_cmd->add_option("--harmonics", hb_harmonics, "Retained harmonics Hn")->check(CLI::PositiveNumber);
  hb_cmd->add_option("--out", hb_out, "Fourier coefficient CSV");

  // pod
  auto* pod_cmd = app.add_subcommand("pod", "POD basis of a snapshot matrix or trajectory");
  fs::path pod_snap, pod_out;
  Index pod_p = 1;
  std::string pod_svd = "jacobi";
  pod_cmd->add_option("--snapshots", pod_snap, "Snapshot .mtx or trajectory file")->required();
  pod_cmd->add_option("--p", pod_p, "Number of POMs")->check(CLI::PositiveNumber);
  pod_cmd->add_option("--svd", pod_svd, "jacobi | snapshots")->check(CLI::IsMember({"jacobi", "snapshots"}));
  pod_cmd->add_option("--out", pod_out, "Output directory (U.mtx, spectrum.csv)")->required();

  // project
  auto* proj_cmd = app.add_subcommand("project", "Galerkin projection onto a basis");
  fs::path proj_model, proj_basis, proj_out;
  proj_cmd->add_option("--model", proj_model, "Full-order model directory")->required();
  proj_cmd->add_option("--basis", proj_basis, "Basis matrix U (.mtx)")->required();
  proj_cmd->add_option("--out", proj_out, "Reduced model directory")->required();

  // frf
  auto* frf_cmd = app.add_subcommand("frf", "Frequency response by continuation or time marching");
  fs::path frf_model, frf_out;
  FreqArg frf_lo, frf_hi;
  std::vector<double> frf_betas;
  Index frf_harmonics = 5, frf_points = 41, frf_steps = 50;
  std::string frf_solver = "hb";
  bool frf_no_stability = false;
  frf_cmd->add_option("--model", frf_model, "Model directory")->required();
  frf_lo.add(frf_cmd, "omega-min", "Lower frequency");
  frf_hi.add(frf_cmd, "omega-max", "Upper frequency");
  frf_cmd->add_option("--beta", frf_betas, "Forcing level(s) [uN]")->required();
  frf_cmd->add_option("--solver", frf_solver, "hb | tm")->check(CLI::IsMember({"hb", "tm"}));
  frf_cmd->add_option("--harmonics", frf_harmonics, "Retained harmonics (hb)")->check(CLI::PositiveNumber);
  frf_cmd->add_option("--points", frf_points, "Frequency grid size (tm)")->check(CLI::Range(2, 1000000));
  frf_cmd->add_option("--steps-per-cycle", frf_steps, "Time steps per period (tm)")->check(CLI::Range(8, 100000));
  frf_cmd->add_flag("--no-stability", frf_no_stability, "Skip Floquet analysis (hb)");
  frf_cmd->add_option("--out", frf_out, "FRF CSV")->required();

  // electro fit
  auto* electro_cmd = app.add_subcommand("electro", "Electrostatic force manifold");
  electro_cmd->require_subcommand(1);
  auto* fit_cmd = electro_cmd->add_subcommand("fit", "Sample and fit the projected electrostatic force");
  fs::path fit_rom, fit_model, fit_out;
  std::string fit_oracle = "plate";
  double fit_gap = 0.0, fit_area = 0.0, fit_range = 0.15, fit_tol = 1e-2;
  Index fit_points = kDefaultGridPoints, fit_active = 1;
  fit_cmd->add_option("--rom", fit_rom, "Reduced model directory (supplies U)")->required();
  fit_cmd->add_option("--model", fit_model, "Full-order beam model directory (electrode geometry)")->required();
  fit_cmd->add_option("--oracle", fit_oracle, "Force oracle")->check(CLI::IsMember({"plate"}));
  fit_cmd->add_option("--gap", fit_gap, "Electrode gap [um]")->required()->check(CLI::PositiveNumber);
  fit_cmd->add_option("--area", fit_area, "Electrode area per node [um^2] (default width x element length)");
  fit_cmd->add_option("--range", fit_range, "Half range of the sampled gap closure, fraction of the gap")
      ->check(CLI::Range(1e-6, 0.9));
  fit_cmd->add_option("--points", fit_points, "Grid points")->check(CLI::Range(8, 100000));
  fit_cmd->add_option("--active", fit_active, "Electrically active POM (1-based)")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--tol", fit_tol, "Relative fit residual above which a channel is dropped");
  fit_cmd->add_option("--out", fit_out, "Output directory")->required();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Offline/online timing tables");
  fs::path bench_config;
  Index bench_nfreq = 0, bench_repeats = 0;
  bool bench_parallel = false;
  bench_cmd->add_option("--config", bench_config, "Run config with optional bench section")
      ->required()
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--n-freq", bench_nfreq, "Override the number of frequencies");
  bench_cmd->add_option("--repeats", bench_repeats, "Override the repeat count");
  bench_cmd->add_flag("--parallel", bench_parallel, "Also time the threaded sweeps");

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "model -> snapshots -> POD -> projection -> FRF");
  fs::path pipe_config, pipe_out;
  pipe_cmd->add_option("--config", pipe_config, "Run config")->required()->check(CLI::ExistingFile);
  pipe_cmd->add_option("--out", pipe_out, "Override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*build_cmd) {
      const std::string text = io::read_file(build_config);
      const auto j = nlohmann::json::parse(text, nullptr, false);
      if (j.is_discarded()) throw ConfigError(build_config.string() + ": malformed JSON");
      nlohmann::json section = j.contains("model") ? j["model"] : j;
      if (!build_kind.empty()) {
        if (!section.is_object()) throw ConfigError(build_config.string() + ": model section must be an object");
        if (build_kind == "arch" && !(section.value("rise_um", 0.0) > 0.0)) {
          throw ConfigError("--kind arch needs a positive rise_um in the model config");
        }
        section["kind"] = build_kind == "duffing" ? "duffing" : build_kind == "twodof" ? "two_dof" : "vk_beam";
      }
      const ModelConfig mc = parse_model_config(section.dump(), build_config.parent_path());
      const FullOrderModel m = build_model(mc);
      io::write_model(build_out, m, mc.kind == ModelKind::VkBeam ? std::optional<zoo::BeamSpec>(mc.beam) : std::nullopt);
      fmt::print("wrote {} ({} dofs)\n", build_out.string(), m.dofs());
    } else if (*eig_cmd) {
      const auto sys = load_system(eig_model);
      const auto modes = solve_eigs(*sys, std::min<Index>(eig_count, sys->dofs()));
      std::string csv = "mode,omega_rad_per_time,frequency_per_time\n";
      for (std::size_t k = 0; k < modes.size(); ++k) {
        fmt::print("{:>4}  omega = {:<24}  f = {}\n", k + 1, io::format_double(modes[k].omega),
                   io::format_double(modes[k].frequency()));
        csv += fmt::format("{},{},{}\n", k + 1, io::format_double(modes[k].omega), io::format_double(modes[k].frequency()));
      }
      if (!eig_out.empty()) io::write_file_atomic(eig_out, csv);
    } else if (*tm_cmd) {
      const auto sys = load_system(tm_model);
      if (!tm_plan.empty()) {
        const SweepPlan plan = parse_sweep_plan(io::read_file(tm_plan), reference_frequency(*sys));
        const Trajectory t = sweep(*sys, plan);
        const Index per = std::max<Index>(1, plan.steps_per_cycle / plan.stride);
        for (const auto& seg : t.segments) {
          fmt::print("omega = {}:", io::format_double(seg.omega));
          for (const auto& o : sys->observables()) {
            const Eigen::RowVectorXd y = o.functional.transpose() * t.D.middleCols(seg.first + seg.count - per, per);
            fmt::print("  {} amplitude {}", o.name, io::format_double(0.5 * (y.maxCoeff() - y.minCoeff())));
          }
          fmt::print("\n");
        }
        if (!tm_out.empty()) io::write_trajectory(tm_out, t);
        return kOk;
      }
      if (tm_beta <= 0.0) throw ConfigError("tm: --beta (positive) or --plan is required");
      const double w = tm_omega.resolve(*sys, "omega");
      const double T = 2.0 * std::numbers::pi / w;
      SimulateOptions so;
      so.stride = tm_stride;
      const ForcingSpec load = sys->forcing().with(tm_beta, w);
      Trajectory t = simulate(*sys, load, T * static_cast<double>(tm_cycles), T / static_cast<double>(tm_steps),
                              zero_state(sys->dofs()), so);
      t.segments.push_back({w, tm_beta, 0, t.size()});
      // Amplitude over the final period.
      const Index last = std::min<Index>(t.size(), tm_steps / tm_stride + 1);
      std::vector<double> amps;
      for (const auto& o : sys->observables()) {
        const Eigen::RowVectorXd y = o.functional.transpose() * t.D.rightCols(last);
        amps.push_back(0.5 * (y.maxCoeff() - y.minCoeff()));
      }
      print_amplitudes(*sys, amps);
      if (!tm_out.empty()) io::write_trajectory(tm_out, t);
    } else if (*hb_cmd) {
      const auto sys = load_system(hb_model);
      const double w = hb_omega.resolve(*sys, "omega");
      HbConfig hc;
      hc.harmonics = hb_harmonics;
      HbReport rep;
      const FourierSolution sol = hb_solve(*sys, w, hb_beta, std::nullopt, hc, &rep);
      fmt::print("converged in {} iterations, residual {}\n", rep.iterations, io::format_double(rep.residual_norm));
      std::vector<double> amps;
      for (const auto& o : sys->observables()) amps.push_back(observable_amplitude(sol, o.functional));
      print_amplitudes(*sys, amps);
      if (!hb_out.empty()) io::write_fourier(hb_out, sol);
    } else if (*pod_cmd) {
      const SnapshotMatrix X = io::read_snapshots(pod_snap);
      const PodBasis b = compute_pod(X, pod_p, pod_svd == "jacobi" ? SvdMethod::Jacobi : SvdMethod::Snapshots);
      io::write_dense(pod_out / "U.mtx", b.U);
      io::export_spectrum(b, pod_out / "spectrum.csv");
      const Vector e = energy_spectrum(b);
      fmt::print("{} snapshots of {} dofs; first POM energy {:.6f}, first {} POMs {:.9f}\n", X.count(), X.dofs(), e[0],
                 pod_p, e.head(pod_p).sum());
    } else if (*proj_cmd) {
      const FullOrderModel m = io::read_model(proj_model);
      const ReducedOrderModel rom = project(m, io::read_dense(proj_basis));
      io::write_rom(proj_out, rom);
      fmt::print("wrote {} ({} -> {} dofs)\n", proj_out.string(), m.dofs(), rom.dofs());
    } else if (*frf_cmd) {
      const auto sys = load_system(frf_model);
      const double w1 = reference_frequency(*sys);
      FrfConfig fc;
      fc.solver = frf_solver == "hb" ? FrfSolver::HB : FrfSolver::TM;
      fc.omega_min = {frf_lo.resolve(*sys, "omega-min"), false};
      fc.omega_max = {frf_hi.resolve(*sys, "omega-max"), false};
      fc.betas = frf_betas;
      fc.harmonics = frf_harmonics;
      fc.stability = !frf_no_stability;
      fc.points = frf_points;
      fc.steps_per_cycle = frf_steps;
      const double Q = fc.solver == FrfSolver::TM ? quality_factor(*sys, w1) : 0.0;
      const auto branches = compute_frf(*sys, fc, w1, Q);
      io::export_frf(branches, frf_out);
      for (const auto& b : branches) {
        fmt::print("beta = {}: {} points, {} SN, {} NS, {} PD\n", io::format_double(b.points.front().beta),
                   b.points.size(), b.count(Bifurcation::SN), b.count(Bifurcation::NS), b.count(Bifurcation::PD));
      }
    } else if (*fit_cmd) {
      const ReducedOrderModel rom = io::read_rom(fit_rom);
      const auto spec = io::read_beam_spec(fit_model);
      if (!spec) throw ConfigError(fit_model.string() + ": the plate oracle needs a beam model");
      PlateOracle oracle = PlateOracle::for_beam(*spec, fit_gap);
      if (fit_area > 0.0) {
        oracle = PlateOracle(oracle.dofs(), oracle.gap_dofs(),
                             std::vector<double>(oracle.gap_dofs().size(), fit_area), fit_gap);
      }
      if (oracle.dofs() != rom.basis().rows()) throw ConfigError("--rom and --model have different dof counts");
      const Index active = fit_active - 1;
      if (active >= rom.dofs()) throw ConfigError("--active exceeds the number of POMs");
      double umax = 0.0;
      for (Index d : oracle.gap_dofs()) umax = std::max(umax, std::abs(rom.basis()(d, active)));
      if (!(umax > 0.0)) throw ConfigError("the active POM does not move the electrode");
      const double qmax = fit_range * fit_gap / umax;
      ElectroManifold mf = sample_manifold(oracle, rom.basis(), active, uniform_grid(-qmax, qmax, fit_points));
      fit_cubic(mf, fit_tol);
      io::write_manifold(fit_out, mf);
      fmt::print("fitted {} channels over q in [{:.6g}, {:.6g}] um; {} dropped\n", mf.channels(), -qmax, qmax,
                 std::count(mf.dropped.begin(), mf.dropped.end(), true));
    } else if (*bench_cmd) {
      BenchConfig bc = load_bench_config(bench_config);
      if (bench_nfreq > 0) bc.n_freq = bench_nfreq;
      if (bench_repeats > 0) bc.repeats = bench_repeats;
      if (bench_parallel) bc.parallel = true;
      std::cout << format_report(run_benchmark(bc));
    } else if (*pipe_cmd) {
      RunConfig rc = load_run_config(pipe_config);
      if (!pipe_out.empty()) rc.output_dir = pipe_out;
      const PipelineResult res = run_pipeline(rc);
      fmt::print("omega_1 = {}\n", io::format_double(res.omega1));
      for (const auto& a : res.artifacts) fmt::print("{:<10} {}  {}\n", a.name, a.sha256, (res.dir / a.path).string());
    }
  } catch (const ConvergenceError& e) {
    spdlog::error("{}", e.what());
    return kSolver;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIo;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  } catch (const ContractViolation& e) {
    spdlog::error("{}", e.what());
    return kConfig;
  }
  return kOk;
}
