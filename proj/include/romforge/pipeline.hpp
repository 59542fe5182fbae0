#pragma once

// Declarative end-to-end runs: model -> snapshots -> POD -> projection -> FRF.
// Configs are JSON with unit-suffixed keys; frequencies given with the `_rel`
// suffix are multiples of the model's first eigenfrequency.

#include "romforge/continuation.hpp"
#include "romforge/pod.hpp"
#include "romforge/timeint.hpp"
#include "romforge/zoo.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace romforge {

enum class ModelKind { Duffing, TwoDof, VkBeam, File };
enum class FrfSolver { HB, TM };

struct ModelConfig {
  ModelKind kind = ModelKind::Duffing;
  // duffing
  double omega0 = 1.0;
  double gamma = 0.0;
  // two-dof
  double omega1 = 1.0;
  double detuning = 0.0;
  double coupling = 0.0;
  // beam
  zoo::BeamSpec beam;
  // file
  std::filesystem::path path;
  /// Quality factor of the mass-proportional damping; for file models it
  /// replaces the stored damping when set.
  std::optional<double> quality_factor;
};

/// Frequency given either absolutely or relative to the first eigenfrequency.
struct Frequency {
  double value = 1.0;
  bool relative = true;
  double resolve(double omega1) const { return relative ? value * omega1 : value; }
};

struct SnapshotConfig {
  SnapshotSource strategy = SnapshotSource::HB;
  std::vector<Frequency> omegas;  ///< training frequencies
  double beta = 0.0;              ///< training forcing level
  Index harmonics = 5;            ///< HB training
  Index samples_per_period = 50;  ///< HB and TM-SS
  Index cycles = 10;              ///< TM-TR: forcing periods per frequency from rest
  Index steps_per_cycle = 50;     ///< TM-SS / TM-TR time steps per period
  Index max_periods = 0;          ///< TM-SS cap; 0 means 6 Q
};

struct FrfConfig {
  FrfSolver solver = FrfSolver::HB;
  Frequency omega_min{0.9, true};
  Frequency omega_max{1.1, true};
  std::vector<double> betas;
  Index harmonics = 5;
  bool stability = true;
  Index points = 41;            ///< grid size of the time-marching FRF
  Index steps_per_cycle = 50;   ///< time-marching FRF
  Index max_periods = 0;        ///< time-marching FRF cap; 0 means 6 Q
};

struct RunConfig {
  ModelConfig model;
  SnapshotConfig snapshots;
  Index p = 1;
  SvdMethod svd = SvdMethod::Jacobi;
  FrfConfig frf;
  std::filesystem::path output_dir;
  std::filesystem::path source;  ///< config file, when loaded from one (for error messages)
};

/// Parses and validates; unknown keys, missing strategy fields and missing
/// referenced files raise ConfigError. Relative paths resolve against `base`.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON form (sorted keys, absolute frequencies kept symbolic); the
/// manifest hashes this text.
std::string dump_run_config(const RunConfig& cfg);
/// One `model` section on its own (JSON object text).
ModelConfig parse_model_config(const std::string& json_text, const std::filesystem::path& base = {});
/// One `snapshots` section on its own (JSON object text).
SnapshotConfig parse_snapshot_config(const std::string& json_text);
/// Time-marching sweep plan: omegas_rel | omegas_rad_per_time, beta_un, cycles,
/// steps_per_cycle, stride, direction ("up" | "down"), carry_state.
SweepPlan parse_sweep_plan(const std::string& json_text, double omega1);

FullOrderModel build_model(const ModelConfig& cfg);
/// First eigenfrequency used to resolve relative frequencies.
double reference_frequency(const DynamicSystem& model);

SnapshotMatrix collect_snapshots(const FullOrderModel& model, const SnapshotConfig& cfg, double omega1);

/// FRF of any system under the config's solver. HB traces one branch per beta;
/// TM reports steady-state amplitudes on a grid with unknown stability.
std::vector<FrfBranch> compute_frf(const DynamicSystem& sys, const FrfConfig& cfg, double omega1, double Q);

/// Damping quality factor of a mass-proportional model, from the first mode.
double quality_factor(const DynamicSystem& sys, double omega1);

struct ManifestEntry {
  std::string name;
  std::string path;  ///< relative to the output directory
  std::string sha256;
};

struct PipelineResult {
  std::filesystem::path dir;
  std::vector<ManifestEntry> artifacts;
  std::string config_sha256;
  PodBasis basis;
  std::vector<FrfBranch> frf;
  double omega1 = 0.0;
};

/// Runs every stage, writing the model/, snapshots/, pod/, rom/ and frf/ artifacts,
/// config.json and
/// manifest.json under cfg.output_dir. Stage failures are rethrown with the
/// stage name and a reproduction command.
PipelineResult run_pipeline(const RunConfig& cfg);

}  // namespace romforge
