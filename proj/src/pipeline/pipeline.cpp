#include "romforge/pipeline.hpp"

#include "romforge/io.hpp"
#include "romforge/modal.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace romforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON object wrapper that remembers which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key) && fallback) return *fallback;
    const double v = get<double>(key);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(where_ + "." + key + ": must be positive");
    return v;
  }

  Index count(const std::string& key, Index fallback, Index min = 1) {
    if (!has(key)) return fallback;
    const auto v = get<long long>(key);
    if (v < min) throw ConfigError(where_ + "." + key + ": must be at least " + std::to_string(min));
    return static_cast<Index>(v);
  }

  /// `<stem>_rel` or `<stem>_rad_per_time`, exactly one of them.
  std::optional<Frequency> frequency(const std::string& stem) {
    const bool rel = has(stem + "_rel"), abs = has(stem + "_rad_per_time");
    if (rel && abs) throw ConfigError(where_ + ": give either " + stem + "_rel or " + stem + "_rad_per_time");
    if (!rel && !abs) return std::nullopt;
    return Frequency{positive(stem + (rel ? "_rel" : "_rad_per_time")), rel};
  }

  std::optional<std::vector<Frequency>> frequencies(const std::string& stem) {
    const bool rel = has(stem + "_rel"), abs = has(stem + "_rad_per_time");
    if (rel && abs) throw ConfigError(where_ + ": give either " + stem + "_rel or " + stem + "_rad_per_time");
    if (!rel && !abs) return std::nullopt;
    const auto v = get<std::vector<double>>(stem + (rel ? "_rel" : "_rad_per_time"));
    std::vector<Frequency> out;
    for (double w : v) {
      if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError(where_ + "." + stem + ": frequencies must be positive");
      out.push_back({w, rel});
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ModelConfig parse_model(Section s, const fs::path& base) {
  ModelConfig m;
  const auto kind = s.get<std::string>("kind");
  if (kind == "duffing") {
    m.kind = ModelKind::Duffing;
    m.omega0 = s.positive("omega0_rad_per_time");
    m.gamma = s.get<double>("gamma_un_per_um3", 0.0);
    m.quality_factor = s.positive("quality_factor");
  } else if (kind == "two_dof") {
    m.kind = ModelKind::TwoDof;
    m.omega1 = s.positive("omega1_rad_per_time");
    m.detuning = s.get<double>("detuning_rel", 0.0);
    m.coupling = s.get<double>("coupling_un_per_um2", 0.0);
    m.quality_factor = s.positive("quality_factor");
  } else if (kind == "vk_beam") {
    m.kind = ModelKind::VkBeam;
    zoo::BeamSpec b;
    b.length = s.positive("length_um", b.length);
    b.width = s.positive("width_um", b.width);
    b.height = s.positive("height_um", b.height);
    b.elements = s.count("elements", b.elements, 2);
    b.young = s.positive("young_mpa", b.young);
    b.density = s.positive("density_ng_per_um3", b.density);
    b.rise = s.get<double>("rise_um", b.rise);
    b.quality_factor = s.positive("quality_factor", b.quality_factor);
    m.beam = b;
    m.quality_factor = b.quality_factor;
  } else if (kind == "file") {
    m.kind = ModelKind::File;
    fs::path p = s.get<std::string>("path");
    if (p.is_relative() && !base.empty()) p = base / p;
    if (!fs::exists(p / "model.json")) throw ConfigError(s.where() + ".path: no model directory at " + p.string());
    m.path = fs::absolute(p).lexically_normal();
    if (s.has("quality_factor")) m.quality_factor = s.positive("quality_factor");
  } else {
    throw ConfigError(s.where() + ".kind: unknown model kind '" + kind + "' (duffing, two_dof, vk_beam, file)");
  }
  s.finish();
  return m;
}

SnapshotSource parse_strategy(const std::string& s) {
  if (s == "HB") return SnapshotSource::HB;
  if (s == "TM-SS") return SnapshotSource::TM_SS;
  if (s == "TM-TR") return SnapshotSource::TM_TR;
  throw ConfigError("snapshots.strategy: unknown strategy '" + s + "' (HB, TM-SS, TM-TR)");
}

SnapshotConfig parse_snapshots(Section s) {
  SnapshotConfig c;
  c.strategy = parse_strategy(s.get<std::string>("strategy"));
  auto omegas = s.frequencies("omegas");
  if (!omegas || omegas->empty()) throw ConfigError("snapshots: omegas_rel or omegas_rad_per_time is required");
  c.omegas = *omegas;
  c.beta = s.positive("beta_un");
  switch (c.strategy) {
    case SnapshotSource::HB:
      c.harmonics = s.count("harmonics", c.harmonics);
      c.samples_per_period = s.count("samples_per_period", c.samples_per_period, 2);
      break;
    case SnapshotSource::TM_SS:
      c.steps_per_cycle = s.count("steps_per_cycle", c.steps_per_cycle, 8);
      c.max_periods = s.count("max_periods", 0, 0);
      break;
    case SnapshotSource::TM_TR:
      c.cycles = s.count("cycles", c.cycles);
      c.steps_per_cycle = s.count("steps_per_cycle", c.steps_per_cycle, 8);
      break;
  }
  s.finish();
  return c;
}

FrfConfig parse_frf(Section s) {
  FrfConfig f;
  const auto solver = s.get<std::string>("solver", "hb");
  if (solver == "hb") {
    f.solver = FrfSolver::HB;
  } else if (solver == "tm") {
    f.solver = FrfSolver::TM;
  } else {
    throw ConfigError("frf.solver: expected 'hb' or 'tm'");
  }
  auto lo = s.frequency("omega_min"), hi = s.frequency("omega_max");
  if (!lo || !hi) throw ConfigError("frf: omega_min_* and omega_max_* are required");
  f.omega_min = *lo;
  f.omega_max = *hi;
  if (f.omega_min.relative == f.omega_max.relative && !(f.omega_max.value > f.omega_min.value)) {
    throw ConfigError("frf: omega_max must exceed omega_min");
  }
  const json& betas = s.raw("beta_un");
  if (betas.is_number()) {
    f.betas = {betas.get<double>()};
  } else {
    f.betas = s.get<std::vector<double>>("beta_un");
  }
  if (f.betas.empty()) throw ConfigError("frf.beta_un: at least one forcing level is required");
  for (double b : f.betas) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("frf.beta_un: forcing levels must be non-negative");
  }
  if (f.solver == FrfSolver::HB) {
    f.harmonics = s.count("harmonics", f.harmonics);
    f.stability = s.get<bool>("stability", true);
  } else {
    f.points = s.count("points", f.points, 2);
    f.steps_per_cycle = s.count("steps_per_cycle", f.steps_per_cycle, 8);
    f.max_periods = s.count("max_periods", 0, 0);
  }
  s.finish();
  return f;
}

json frequency_json(const Frequency& f) { return {{"value", f.value}, {"relative", f.relative}}; }

json model_json(const ModelConfig& m) {
  json j;
  switch (m.kind) {
    case ModelKind::Duffing:
      j = {{"kind", "duffing"}, {"omega0_rad_per_time", m.omega0}, {"gamma_un_per_um3", m.gamma}};
      break;
    case ModelKind::TwoDof:
      j = {{"kind", "two_dof"},
           {"omega1_rad_per_time", m.omega1},
           {"detuning_rel", m.detuning},
           {"coupling_un_per_um2", m.coupling}};
      break;
    case ModelKind::VkBeam:
      j = {{"kind", "vk_beam"},
           {"length_um", m.beam.length},
           {"width_um", m.beam.width},
           {"height_um", m.beam.height},
           {"elements", m.beam.elements},
           {"young_mpa", m.beam.young},
           {"density_ng_per_um3", m.beam.density},
           {"rise_um", m.beam.rise}};
      break;
    case ModelKind::File:
      j = {{"kind", "file"}, {"path", m.path.generic_string()}};
      break;
  }
  if (m.quality_factor) j["quality_factor"] = *m.quality_factor;
  return j;
}

std::vector<double> resolve(const std::vector<Frequency>& f, double omega1) {
  std::vector<double> out;
  for (const auto& x : f) out.push_back(x.resolve(omega1));
  return out;
}

double half_range(const Vector& o, const Matrix& D) {
  const Eigen::RowVectorXd y = o.transpose() * D;
  return 0.5 * (y.maxCoeff() - y.minCoeff());
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const fs::path& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  Section root(j, "config");
  RunConfig cfg;
  cfg.model = parse_model(Section(root.raw("model"), "model"), base);
  cfg.snapshots = parse_snapshots(Section(root.raw("snapshots"), "snapshots"));
  {
    Section pod(root.raw("pod"), "pod");
    cfg.p = pod.count("p", 1);
    const auto svd = pod.get<std::string>("svd", "jacobi");
    if (svd == "jacobi") {
      cfg.svd = SvdMethod::Jacobi;
    } else if (svd == "snapshots") {
      cfg.svd = SvdMethod::Snapshots;
    } else {
      throw ConfigError("pod.svd: expected 'jacobi' or 'snapshots'");
    }
    pod.finish();
  }
  cfg.frf = parse_frf(Section(root.raw("frf"), "frf"));
  fs::path out = root.get<std::string>("output_dir", "romforge-out");
  if (out.is_relative() && !base.empty()) out = base / out;
  cfg.output_dir = out;
  root.finish();
  return cfg;
}

ModelConfig parse_model_config(const std::string& json_text, const fs::path& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: malformed JSON: ") + e.what());
  }
  return parse_model(Section(j, "model"), base);
}

SnapshotConfig parse_snapshot_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("snapshots: malformed JSON: ") + e.what());
  }
  return parse_snapshots(Section(j, "snapshots"));
}

SweepPlan parse_sweep_plan(const std::string& json_text, double omega1) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plan: malformed JSON: ") + e.what());
  }
  Section s(j, "plan");
  SweepPlan plan;
  auto omegas = s.frequencies("omegas");
  if (!omegas || omegas->empty()) throw ConfigError("plan: omegas_rel or omegas_rad_per_time is required");
  plan.omegas = resolve(*omegas, omega1);
  plan.beta = s.positive("beta_un");
  plan.cycles = s.count("cycles", plan.cycles);
  plan.steps_per_cycle = s.count("steps_per_cycle", plan.steps_per_cycle, 8);
  plan.stride = s.count("stride", plan.stride);
  plan.carry_state = s.get<bool>("carry_state", plan.carry_state);
  const auto dir = s.get<std::string>("direction", "up");
  if (dir != "up" && dir != "down") throw ConfigError("plan.direction: expected 'up' or 'down'");
  plan.direction = dir == "up" ? SweepDirection::Up : SweepDirection::Down;
  s.finish();
  plan.validate();
  return plan;
}

RunConfig load_run_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg = parse_run_config(text, path.parent_path());
  cfg.source = path;
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  json omegas = json::array();
  for (const auto& w : cfg.snapshots.omegas) omegas.push_back(frequency_json(w));
  const auto& s = cfg.snapshots;
  const auto& f = cfg.frf;
  json j = {
      {"model", model_json(cfg.model)},
      {"snapshots",
       {{"strategy", std::string(to_string(s.strategy))},
        {"omegas", omegas},
        {"beta_un", s.beta},
        {"harmonics", s.harmonics},
        {"samples_per_period", s.samples_per_period},
        {"cycles", s.cycles},
        {"steps_per_cycle", s.steps_per_cycle},
        {"max_periods", s.max_periods}}},
      {"pod", {{"p", cfg.p}, {"svd", cfg.svd == SvdMethod::Jacobi ? "jacobi" : "snapshots"}}},
      {"frf",
       {{"solver", f.solver == FrfSolver::HB ? "hb" : "tm"},
        {"omega_min", frequency_json(f.omega_min)},
        {"omega_max", frequency_json(f.omega_max)},
        {"beta_un", f.betas},
        {"harmonics", f.harmonics},
        {"stability", f.stability},
        {"points", f.points},
        {"steps_per_cycle", f.steps_per_cycle},
        {"max_periods", f.max_periods}}},
  };
  return j.dump(2) + "\n";
}

FullOrderModel build_model(const ModelConfig& cfg) {
  switch (cfg.kind) {
    case ModelKind::Duffing:
      return zoo::make_duffing(cfg.omega0, cfg.gamma, cfg.quality_factor.value_or(50.0));
    case ModelKind::TwoDof:
      return zoo::make_two_dof_1to2(cfg.omega1, cfg.detuning, cfg.coupling, cfg.quality_factor.value_or(50.0));
    case ModelKind::VkBeam:
      return zoo::make_vk_beam(cfg.beam);
    case ModelKind::File: {
      FullOrderModel m = io::read_model(cfg.path);
      if (!cfg.quality_factor) return m;
      const double w1 = reference_frequency(m);
      return m.with_damping(rayleigh_damping(m, w1, *cfg.quality_factor));
    }
  }
  throw ConfigError("unknown model kind");
}

double reference_frequency(const DynamicSystem& model) {
  const auto modes = solve_eigs(model, 1);
  if (modes.empty() || !(modes.front().omega > 0.0)) throw ConfigError("model has no positive eigenfrequency");
  return modes.front().omega;
}

double quality_factor(const DynamicSystem& sys, double omega1) {
  const auto modes = solve_eigs(sys, 1);
  const Vector& phi = modes.front().shape;
  const double c = phi.dot(sys.damping() * phi);
  if (!(c > 0.0)) throw ConfigError("model is undamped; time-marching steady states need damping");
  return omega1 / c;
}

SnapshotMatrix collect_snapshots(const FullOrderModel& model, const SnapshotConfig& cfg, double omega1) {
  const std::vector<double> omegas = resolve(cfg.omegas, omega1);
  const ForcingSpec load = model.forcing().with(cfg.beta, omegas.front());
  switch (cfg.strategy) {
    case SnapshotSource::HB: {
      HbConfig hc;
      hc.harmonics = cfg.harmonics;
      HbSweepOptions so;
      so.amplitudes = false;
      const auto pts = hb_sweep(model, omegas, load, hc, so);
      std::vector<SnapshotInput> in;
      for (const auto& p : pts) in.push_back(HbSnapshots{p.sol, cfg.samples_per_period, cfg.beta});
      return assemble_snapshots(in);
    }
    case SnapshotSource::TM_SS: {
      if (model.observables().empty()) throw ConfigError("TM-SS snapshots need an observable to detect steady state");
      const Index max_periods =
          cfg.max_periods > 0 ? cfg.max_periods
                              : static_cast<Index>(std::ceil(6.0 * quality_factor(model, omega1)));
      Trajectory all;
      all.n = model.dofs();
      all.D.resize(model.dofs(), cfg.steps_per_cycle * static_cast<Index>(omegas.size()));
      State state = zero_state(model.dofs());
      SimulateOptions so;
      so.include_initial = false;
      for (double w : omegas) {
        const ForcingSpec lw = load.with(cfg.beta, w);
        const auto ss = steady_state(model, lw, 0, cfg.steps_per_cycle, max_periods, state, 1e-6);
        const double T = 2.0 * std::numbers::pi / w;
        const Trajectory period = simulate(model, lw, T, T / static_cast<double>(cfg.steps_per_cycle), ss.state, so);
        const Index first = static_cast<Index>(all.times.size());
        all.D.middleCols(first, period.size()) = period.D;
        for (double t : period.times) all.times.push_back(t);
        all.segments.push_back({w, cfg.beta, first, period.size()});
        state = ss.state;
      }
      return assemble_snapshots({TrajectorySnapshots{&all, SnapshotSource::TM_SS}});
    }
    case SnapshotSource::TM_TR: {
      SweepPlan plan;
      plan.omegas = omegas;
      std::sort(plan.omegas.begin(), plan.omegas.end());
      plan.cycles = cfg.cycles;
      plan.steps_per_cycle = cfg.steps_per_cycle;
      plan.beta = cfg.beta;
      const Trajectory t = sweep(model, plan);
      return assemble_snapshots({TrajectorySnapshots{&t, SnapshotSource::TM_TR}});
    }
  }
  throw ConfigError("unknown snapshot strategy");
}

std::vector<FrfBranch> compute_frf(const DynamicSystem& sys, const FrfConfig& cfg, double omega1, double Q) {
  const double lo = cfg.omega_min.resolve(omega1), hi = cfg.omega_max.resolve(omega1);
  if (!(hi > lo)) throw ConfigError("frf: omega_max must exceed omega_min");
  std::vector<FrfBranch> out;
  std::vector<std::string> names;
  for (const auto& o : sys.observables()) names.push_back(o.name);
  for (double beta : cfg.betas) {
    if (cfg.solver == FrfSolver::HB) {
      ContinuationConfig cc;
      cc.hb.harmonics = cfg.harmonics;
      cc.stability = cfg.stability;
      FrfBranch b = trace_frf(sys, lo, hi, sys.forcing().with(beta, lo), cc);
      if (!b.complete) {
        std::string why = b.diagnostics.empty() ? std::string("stalled") : b.diagnostics.back();
        throw ConvergenceError("frf: continuation at beta = " + io::format_double(beta) + " did not reach omega_max (" +
                                   why + ")",
                               b.points.empty() ? 0.0 : b.points.back().residual_norm, 0);
      }
      out.push_back(std::move(b));
      continue;
    }
    if (sys.observables().empty()) throw ConfigError("frf: the time-marching solver needs an observable");
    const Index max_periods =
        cfg.max_periods > 0 ? cfg.max_periods : static_cast<Index>(std::ceil(6.0 * Q));
    FrfBranch b;
    b.observables = names;
    State state = zero_state(sys.dofs());
    SimulateOptions so;
    so.include_initial = false;
    for (Index k = 0; k < cfg.points; ++k) {
      const double w = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(cfg.points - 1);
      const ForcingSpec lw = sys.forcing().with(beta, w);
      const auto ss = steady_state(sys, lw, 0, cfg.steps_per_cycle, max_periods, state, 1e-6);
      const double T = 2.0 * std::numbers::pi / w;
      const Trajectory period = simulate(sys, lw, T, T / static_cast<double>(cfg.steps_per_cycle), ss.state, so);
      BranchPoint p;
      p.omega = w;
      p.beta = beta;
      for (const auto& o : sys.observables()) p.amplitudes.push_back(half_range(o.functional, period.D));
      b.points.push_back(std::move(p));
      state = ss.state;
    }
    b.complete = true;
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

std::string reproduce(const RunConfig& cfg) {
  return cfg.source.empty() ? std::string("romforge pipeline --config <config.json>")
                            : "romforge pipeline --config " + cfg.source.string();
}

template <typename F>
auto stage(const char* name, const RunConfig& cfg, F&& f) -> decltype(f()) {
  const auto msg = [&](const std::exception& e) {
    return std::string("pipeline stage '") + name + "' failed: " + e.what() + "\n  reproduce with: " + reproduce(cfg);
  };
  try {
    return f();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(msg(e), e.residual_norm(), e.iterations());
  } catch (const ConfigError& e) {
    throw ConfigError(msg(e));
  } catch (const IoError& e) {
    throw IoError(msg(e));
  } catch (const ContractViolation& e) {
    throw ContractViolation(msg(e));
  }
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult res;
  res.dir = cfg.output_dir;
  const fs::path& dir = cfg.output_dir;

  FullOrderModel model = stage("model", cfg, [&] {
    FullOrderModel m = build_model(cfg.model);
    io::write_model(dir / "model", m,
                    cfg.model.kind == ModelKind::VkBeam ? std::optional<zoo::BeamSpec>(cfg.model.beam) : std::nullopt);
    return m;
  });
  res.omega1 = stage("model", cfg, [&] { return reference_frequency(model); });

  const SnapshotMatrix X = stage("snapshots", cfg, [&] {
    SnapshotMatrix S = collect_snapshots(model, cfg.snapshots, res.omega1);
    io::write_snapshots(dir / "snapshots" / "snapshots.mtx", S);
    return S;
  });

  res.basis = stage("pod", cfg, [&] {
    PodBasis b = compute_pod(X, cfg.p, cfg.svd);
    io::write_dense(dir / "pod" / "U.mtx", b.U);
    io::export_spectrum(b, dir / "pod" / "spectrum.csv");
    return b;
  });

  const ReducedOrderModel rom = stage("project", cfg, [&] {
    ReducedOrderModel r = project(model, res.basis);
    io::write_rom(dir / "rom", r);
    return r;
  });

  res.frf = stage("frf", cfg, [&] {
    const double Q = cfg.frf.solver == FrfSolver::TM ? quality_factor(rom, res.omega1) : 0.0;
    auto branches = compute_frf(rom, cfg.frf, res.omega1, Q);
    io::export_frf(branches, dir / "frf" / "frf.csv");
    return branches;
  });

  stage("manifest", cfg, [&] {
    const std::string config_text = dump_run_config(cfg);
    io::write_file_atomic(dir / "config.json", config_text);
    res.config_sha256 = io::sha256_hex(config_text);
    json inputs = json::array();
    if (cfg.model.kind == ModelKind::File) {
      inputs.push_back({{"path", cfg.model.path.generic_string()}, {"sha256", io::sha256_path(cfg.model.path)}});
    }
    json arts = json::array();
    for (const char* name : {"model", "snapshots", "pod", "rom", "frf"}) {
      ManifestEntry e{name, name, io::sha256_path(dir / name)};
      arts.push_back({{"name", e.name}, {"path", e.path}, {"sha256", e.sha256}});
      res.artifacts.push_back(std::move(e));
    }
    const json manifest = {{"format", "romforge-manifest"},
                           {"version", 1},
                           {"config_sha256", res.config_sha256},
                           {"inputs", inputs},
                           {"artifacts", arts}};
    io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    return 0;
  });
  return res;
}

}  // namespace romforge
