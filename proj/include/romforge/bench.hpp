#pragma once

// Offline/online timing harness. All times are wall-clock seconds around the
// compute kernels only (no file I/O), reported as the median of the repeats.

#include "romforge/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace romforge {

struct BenchConfig {
  RunConfig run;
  Index n_freq = 1000;
  Index repeats = 3;
  bool parallel = false;   ///< also time the threaded sweeps
  unsigned threads = 0;    ///< 0: hardware concurrency
  std::vector<SnapshotConfig> compare;  ///< extra training recipes timed offline only
};

/// Accepts a pipeline config with an optional `bench` section
/// {n_freq, repeats, parallel, threads, compare: [snapshot sections]}.
BenchConfig parse_bench_config(const std::string& json_text, const std::filesystem::path& base = {});
BenchConfig load_bench_config(const std::filesystem::path& path);

struct OfflineTiming {
  SnapshotSource strategy = SnapshotSource::HB;
  Index snapshots = 0;
  double t_snap = 0.0;
  double t_svd = 0.0;
  double t_proj = 0.0;
  double offline() const { return t_snap + t_svd + t_proj; }
};

struct TimingReport {
  Index n = 0, p = 0, harmonics = 0, n_freq = 0;
  SnapshotSource strategy = SnapshotSource::HB;
  Index snapshots = 0;
  double t_fom = 0.0;
  double t_snap = 0.0;
  double t_svd = 0.0;
  double t_proj = 0.0;
  double t_offline = 0.0;  ///< t_snap + t_svd + t_proj
  double t_online = 0.0;
  std::vector<OfflineTiming> offline_rows;  ///< primary recipe first, then the compared ones
  unsigned threads = 1;
  double t_fom_parallel = 0.0;     ///< only with BenchConfig::parallel
  double t_online_parallel = 0.0;
  double speedup_online() const { return t_fom / t_online; }
  double speedup_total() const { return t_fom / (t_online + t_offline); }
};

/// Times one training recipe; the reduced model of the last repeat is returned through `rom`.
OfflineTiming time_offline(const FullOrderModel& model, const SnapshotConfig& snapshots, Index p, SvdMethod svd,
                           double omega1, Index repeats, std::optional<ReducedOrderModel>* rom = nullptr);

TimingReport run_benchmark(const BenchConfig& cfg);

/// Two tables: FOM vs online ROM, and the offline split per training recipe.
std::string format_report(const TimingReport& report);

}  // namespace romforge
