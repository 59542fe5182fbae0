#pragma once

// Persistence. Matrices use Matrix Market (coordinate for sparse, array for
// dense), tensors a small text format with 1-based indices, trajectories a
// little-endian binary layout, tabular results CSV with 17 significant digits.
// Every write goes to a temporary file first and is renamed into place.

#include "romforge/continuation.hpp"
#include "romforge/electro.hpp"
#include "romforge/pod.hpp"
#include "romforge/timeint.hpp"
#include "romforge/zoo.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace romforge::io {

namespace fs = std::filesystem;

/// Atomically replaces `path` with `content`, creating parent directories.
void write_file_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

/// Shortest round-tripping representation (%.17g).
std::string format_double(double v);

// Matrix Market ---------------------------------------------------------------

void write_sparse(const fs::path& path, const SparseMatrixSym& A);
SparseMatrixSym read_sparse(const fs::path& path);
void write_dense(const fs::path& path, const Matrix& A);
Matrix read_dense(const fs::path& path);

// Tensors ---------------------------------------------------------------------

void write_tensor(const fs::path& path, const CubicTensor& G);
void write_tensor(const fs::path& path, const QuarticTensor& H);
CubicTensor read_cubic(const fs::path& path);
QuarticTensor read_quartic(const fs::path& path);

// Models ----------------------------------------------------------------------

/// Directory with model.json, M/C/K.mtx, G.tns, H.tns, F0.mtx, observables.mtx.
/// `beam` records the generator parameters when the model is a beam.
void write_model(const fs::path& dir, const FullOrderModel& model, const std::optional<zoo::BeamSpec>& beam = {});
FullOrderModel read_model(const fs::path& dir);
std::optional<zoo::BeamSpec> read_beam_spec(const fs::path& dir);

/// Same layout with dense matrices and the basis in U.mtx.
void write_rom(const fs::path& dir, const ReducedOrderModel& rom);
ReducedOrderModel read_rom(const fs::path& dir);

// Trajectories and snapshots --------------------------------------------------

void write_trajectory(const fs::path& path, const Trajectory& traj);
Trajectory read_trajectory(const fs::path& path);

/// Snapshot matrix (dense .mtx) plus provenance CSV next to it.
void write_snapshots(const fs::path& path, const SnapshotMatrix& S);
/// Accepts a dense matrix file or a trajectory file.
SnapshotMatrix read_snapshots(const fs::path& path);

// CSV results -----------------------------------------------------------------

void write_fourier(const fs::path& path, const FourierSolution& sol);
FourierSolution read_fourier(const fs::path& path);

/// Columns: omega_rad_per_time, beta, <observable...>, stable, bif. `stable`
/// is 1, 0, or -1 when stability was not computed.
void export_frf(const FrfBranch& branch, const fs::path& path, bool emit_plot_script = true);
void export_frf(const std::vector<FrfBranch>& branches, const fs::path& path, bool emit_plot_script = true);

struct FrfRow {
  double omega = 0.0;
  double beta = 0.0;
  std::vector<double> amplitudes;
  int stable = -1;
  std::string bif;
};
struct FrfTable {
  std::vector<std::string> observables;
  std::vector<FrfRow> rows;
};
FrfTable read_frf(const fs::path& path);

/// Columns: index, sigma, rel_energy, cum_energy.
void export_spectrum(const PodBasis& basis, const fs::path& path, bool emit_plot_script = true);
struct SpectrumTable {
  Vector sigma, rel_energy, cum_energy;
};
SpectrumTable read_spectrum(const fs::path& path);

void write_manifold(const fs::path& dir, const ElectroManifold& mf);

// Hashing ---------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes);
/// Hash of a file, or of the sorted (relative name, file hash) list of a directory.
std::string sha256_path(const fs::path& path);

}  // namespace romforge::io
