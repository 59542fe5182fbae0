#include "romforge/bench.hpp"

#include "romforge/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <thread>

namespace romforge {

using nlohmann::json;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <typename F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> grid(double lo, double hi, Index n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) {
    w[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  return w;
}

}  // namespace

BenchConfig parse_bench_config(const std::string& json_text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  BenchConfig cfg;
  if (j.is_object() && j.contains("bench")) {
    const json b = j["bench"];
    j.erase("bench");
    if (!b.is_object()) throw ConfigError("bench: expected an object");
    for (const auto& [key, v] : b.items()) {
      try {
        if (key == "n_freq") {
          cfg.n_freq = v.get<Index>();
        } else if (key == "repeats") {
          cfg.repeats = v.get<Index>();
        } else if (key == "parallel") {
          cfg.parallel = v.get<bool>();
        } else if (key == "threads") {
          cfg.threads = v.get<unsigned>();
        } else if (key == "compare") {
          for (const auto& s : v) cfg.compare.push_back(parse_snapshot_config(s.dump()));
        } else {
          throw ConfigError("bench: unknown key '" + key + "'");
        }
      } catch (const json::exception&) {
        throw ConfigError("bench." + key + ": wrong type");
      }
    }
    if (cfg.n_freq < 1) throw ConfigError("bench.n_freq: must be at least 1");
    if (cfg.repeats < 1) throw ConfigError("bench.repeats: must be at least 1");
  }
  cfg.run = parse_run_config(j.dump(), base);
  return cfg;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  BenchConfig cfg = parse_bench_config(text, path.parent_path());
  cfg.run.source = path;
  return cfg;
}

OfflineTiming time_offline(const FullOrderModel& model, const SnapshotConfig& snapshots, Index p, SvdMethod svd,
                           double omega1, Index repeats, std::optional<ReducedOrderModel>* rom) {
  std::vector<double> ts, tv, tp;
  OfflineTiming out;
  out.strategy = snapshots.strategy;
  for (Index r = 0; r < repeats; ++r) {
    SnapshotMatrix X;
    PodBasis basis;
    ts.push_back(seconds([&] { X = collect_snapshots(model, snapshots, omega1); }));
    tv.push_back(seconds([&] { basis = compute_pod(X, p, svd); }));
    tp.push_back(seconds([&] {
      ReducedOrderModel r = project(model, basis);
      if (rom) rom->emplace(std::move(r));
    }));
    out.snapshots = X.count();
  }
  out.t_snap = median(ts);
  out.t_svd = median(tv);
  out.t_proj = median(tp);
  return out;
}

TimingReport run_benchmark(const BenchConfig& cfg) {
  const RunConfig& run = cfg.run;
  const FullOrderModel model = build_model(run.model);
  const double omega1 = reference_frequency(model);
  const double beta = run.frf.betas.front();
  const auto omegas = grid(run.frf.omega_min.resolve(omega1), run.frf.omega_max.resolve(omega1), cfg.n_freq);
  HbConfig hc;
  hc.harmonics = run.frf.harmonics;
  HbSweepOptions serial;
  serial.amplitudes = false;

  TimingReport rep;
  rep.n = model.dofs();
  rep.p = run.p;
  rep.harmonics = hc.harmonics;
  rep.n_freq = cfg.n_freq;
  rep.strategy = run.snapshots.strategy;

  std::vector<double> tf;
  for (Index r = 0; r < cfg.repeats; ++r) {
    tf.push_back(seconds([&] { hb_sweep(model, omegas, model.forcing().with(beta, omegas.front()), hc, serial); }));
  }
  rep.t_fom = median(tf);

  std::optional<ReducedOrderModel> rom;
  const OfflineTiming primary = time_offline(model, run.snapshots, run.p, run.svd, omega1, cfg.repeats, &rom);
  rep.snapshots = primary.snapshots;
  rep.t_snap = primary.t_snap;
  rep.t_svd = primary.t_svd;
  rep.t_proj = primary.t_proj;
  rep.t_offline = primary.offline();
  rep.offline_rows.push_back(primary);
  for (const auto& s : cfg.compare) {
    rep.offline_rows.push_back(time_offline(model, s, run.p, run.svd, omega1, cfg.repeats));
  }

  std::vector<double> to;
  for (Index r = 0; r < cfg.repeats; ++r) {
    to.push_back(seconds([&] { hb_sweep(*rom, omegas, rom->forcing().with(beta, omegas.front()), hc, serial); }));
  }
  rep.t_online = median(to);

  if (cfg.parallel) {
    HbSweepOptions par = serial;
    par.threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    rep.threads = par.threads;
    std::vector<double> fp, op;
    for (Index r = 0; r < cfg.repeats; ++r) {
      fp.push_back(seconds([&] { hb_sweep(model, omegas, model.forcing().with(beta, omegas.front()), hc, par); }));
      op.push_back(seconds([&] { hb_sweep(*rom, omegas, rom->forcing().with(beta, omegas.front()), hc, par); }));
    }
    rep.t_fom_parallel = median(fp);
    rep.t_online_parallel = median(op);
  }
  return rep;
}

std::string format_report(const TimingReport& r) {
  std::string s;
  s += fmt::format("n = {}, p = {}, Hn = {}, frequencies = {}, training = {} ({} snapshots)\n\n", r.n, r.p,
                   r.harmonics, r.n_freq, to_string(r.strategy), r.snapshots);
  s += fmt::format("{:>12} {:>12} {:>14} {:>22}\n", "T_FOM [s]", "T_online [s]", "T_FOM/T_online",
                   "T_FOM/(T_on+T_off)");
  s += fmt::format("{:>12.4g} {:>12.4g} {:>14.1f} {:>22.2f}\n", r.t_fom, r.t_online, r.speedup_online(),
                   r.speedup_total());
  if (r.t_fom_parallel > 0.0) {
    s += fmt::format("{:>12.4g} {:>12.4g} {:>14.1f} {:>22}   ({} threads)\n", r.t_fom_parallel, r.t_online_parallel,
                     r.t_fom_parallel / r.t_online_parallel, "-", r.threads);
  }
  s += "\n";
  s += fmt::format("{:<8} {:>9} {:>11} {:>10} {:>11} {:>13} {:>15}\n", "training", "snapshots", "T_snap [s]",
                   "T_SVD [s]", "T_proj [s]", "T_offline [s]", "T_FOM/T_offline");
  for (const auto& o : r.offline_rows) {
    s += fmt::format("{:<8} {:>9} {:>11.4g} {:>10.4g} {:>11.4g} {:>13.4g} {:>15.1f}\n", to_string(o.strategy),
                     o.snapshots, o.t_snap, o.t_svd, o.t_proj, o.offline(), r.t_fom / o.offline());
  }
  return s;
}

}  // namespace romforge
