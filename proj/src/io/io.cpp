#include "romforge/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace romforge::io {

using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::random_device rd;
  const fs::path tmp = path.string() + ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

// Line reader that skips blank lines and '%' / '#' comments after the header.
struct Lines {
  std::istringstream in;
  fs::path path;
  explicit Lines(const fs::path& p) : in(read_file(p)), path(p) {}
  bool next(std::string& line, bool keep_comments = false) {
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!keep_comments && (line[0] == '%' || line[0] == '#')) continue;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const { throw IoError(path.string() + ": " + what); }
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const Lines& src) {
  // strtod rather than stod: subnormals set ERANGE but parse exactly.
  if (s.empty()) src.fail("empty number field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) src.fail("malformed number '" + s + "'");
  if (errno == ERANGE && std::isinf(v)) src.fail("number out of range '" + s + "'");
  return v;
}

std::string header_mm(const std::string& layout, const std::string& symmetry) {
  return "%%MatrixMarket matrix " + layout + " real " + symmetry + "\n";
}

}  // namespace

void write_sparse(const fs::path& path, const SparseMatrixSym& A) {
  std::string s = header_mm("coordinate", A.symmetric() ? "symmetric" : "general");
  s += std::to_string(A.n()) + " " + std::to_string(A.n()) + " " + std::to_string(A.nnz()) + "\n";
  for (const auto& e : A.entries()) {
    // Symmetric Matrix Market stores the lower triangle.
    const Index r = A.symmetric() ? e.col : e.row, c = A.symmetric() ? e.row : e.col;
    s += std::to_string(r + 1) + " " + std::to_string(c + 1) + " " + format_double(e.value) + "\n";
  }
  write_file_atomic(path, s);
}

SparseMatrixSym read_sparse(const fs::path& path) {
  Lines in(path);
  std::string line;
  if (!in.next(line, true)) in.fail("empty file");
  std::istringstream h(lower(line));
  std::string banner, object, layout, field, symmetry;
  h >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix") in.fail("not a Matrix Market matrix");
  if (field != "real" && field != "double" && field != "integer") in.fail("unsupported field " + field);
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") in.fail("unsupported symmetry " + symmetry);
  if (!in.next(line)) in.fail("missing size line");
  std::istringstream sz(line);
  Index rows = 0, cols = 0;
  if (layout == "array") {
    sz >> rows >> cols;
    if (!sz || rows != cols) in.fail("expected a square matrix");
    Matrix A(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = (symmetric ? c : 0); r < rows; ++r) {
        if (!in.next(line)) in.fail("truncated array data");
        A(r, c) = to_double(line.substr(0, line.find_first_of(" \t") == std::string::npos ? line.size() : line.find_first_of(" \t")), in);
        if (symmetric) A(c, r) = A(r, c);
      }
    return SparseMatrixSym::from_dense(A, symmetric);
  }
  if (layout != "coordinate") in.fail("unsupported layout " + layout);
  std::size_t nnz = 0;
  sz >> rows >> cols >> nnz;
  if (!sz || rows != cols) in.fail("expected a square matrix");
  std::vector<MatrixEntry> entries;
  entries.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!in.next(line)) in.fail("truncated coordinate data");
    std::istringstream es(line);
    Index r = 0, c = 0;
    std::string v;
    es >> r >> c >> v;
    if (!es && v.empty()) in.fail("malformed entry '" + line + "'");
    if (r < 1 || c < 1 || r > rows || c > cols) in.fail("index out of range in '" + line + "'");
    entries.push_back({r - 1, c - 1, to_double(v, in)});
  }
  return SparseMatrixSym(rows, std::move(entries), symmetric);
}

void write_dense(const fs::path& path, const Matrix& A) {
  std::string s = header_mm("array", "general");
  s += std::to_string(A.rows()) + " " + std::to_string(A.cols()) + "\n";
  s.reserve(s.size() + static_cast<std::size_t>(A.size()) * 24);
  for (Index c = 0; c < A.cols(); ++c)
    for (Index r = 0; r < A.rows(); ++r) {
      s += format_double(A(r, c));
      s += '\n';
    }
  write_file_atomic(path, s);
}

Matrix read_dense(const fs::path& path) {
  Lines in(path);
  std::string line;
  if (!in.next(line, true)) in.fail("empty file");
  std::istringstream h(lower(line));
  std::string banner, object, layout, field, symmetry;
  h >> banner >> object >> layout >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix" || layout != "array" || symmetry != "general") {
    in.fail("expected a general Matrix Market array");
  }
  if (!in.next(line)) in.fail("missing size line");
  std::istringstream sz(line);
  Index rows = 0, cols = 0;
  sz >> rows >> cols;
  if (!sz || rows < 0 || cols < 0) in.fail("malformed size line");
  Matrix A(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) {
      if (!in.next(line)) in.fail("truncated array data");
      A(r, c) = to_double(line, in);
    }
  return A;
}

// ---------------------------------------------------------------------------

void write_tensor(const fs::path& path, const CubicTensor& G) {
  std::string s = "%%romforge tensor cubic\n";
  s += std::to_string(G.n()) + " " + std::to_string(G.nnz()) + "\n";
  for (const auto& e : G.entries()) {
    s += std::to_string(e.i + 1) + " " + std::to_string(e.j + 1) + " " + std::to_string(e.k + 1) + " " +
         format_double(e.value) + "\n";
  }
  write_file_atomic(path, s);
}

void write_tensor(const fs::path& path, const QuarticTensor& H) {
  std::string s = "%%romforge tensor quartic\n";
  s += std::to_string(H.n()) + " " + std::to_string(H.nnz()) + "\n";
  for (const auto& e : H.entries()) {
    s += std::to_string(e.i + 1) + " " + std::to_string(e.j + 1) + " " + std::to_string(e.k + 1) + " " +
         std::to_string(e.l + 1) + " " + format_double(e.value) + "\n";
  }
  write_file_atomic(path, s);
}

namespace {

template <int Order>
std::pair<Index, std::vector<std::array<double, Order + 1>>> read_tensor_entries(const fs::path& path,
                                                                               const std::string& kind) {
  Lines in(path);
  std::string line;
  if (!in.next(line, true) || lower(line).rfind("%%romforge tensor " + kind, 0) != 0) {
    in.fail("expected a '" + kind + "' tensor file");
  }
  if (!in.next(line)) in.fail("missing size line");
  std::istringstream sz(line);
  Index n = 0;
  std::size_t nnz = 0;
  sz >> n >> nnz;
  if (!sz || n < 0) in.fail("malformed size line");
  std::vector<std::array<double, Order + 1>> out(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!in.next(line)) in.fail("truncated tensor data");
    std::istringstream es(line);
    for (int a = 0; a < Order; ++a) {
      Index idx = 0;
      es >> idx;
      if (!es || idx < 1 || idx > n) in.fail("index out of range in '" + line + "'");
      out[k][static_cast<std::size_t>(a)] = static_cast<double>(idx - 1);
    }
    std::string v;
    es >> v;
    out[k][Order] = to_double(v, in);
  }
  return {n, std::move(out)};
}

}  // namespace

CubicTensor read_cubic(const fs::path& path) {
  auto [n, raw] = read_tensor_entries<3>(path, "cubic");
  std::vector<CubicEntry> e;
  e.reserve(raw.size());
  for (const auto& r : raw) e.push_back({static_cast<Index>(r[0]), static_cast<Index>(r[1]), static_cast<Index>(r[2]), r[3]});
  return CubicTensor(n, std::move(e));
}

QuarticTensor read_quartic(const fs::path& path) {
  auto [n, raw] = read_tensor_entries<4>(path, "quartic");
  std::vector<QuarticEntry> e;
  e.reserve(raw.size());
  for (const auto& r : raw) {
    e.push_back({static_cast<Index>(r[0]), static_cast<Index>(r[1]), static_cast<Index>(r[2]),
                 static_cast<Index>(r[3]), r[4]});
  }
  return QuarticTensor(n, std::move(e));
}

// ---------------------------------------------------------------------------

namespace {

json forcing_json(const ForcingSpec& f) {
  return {{"beta", f.beta}, {"omega_rad_per_time", f.omega}, {"phase_rad", f.phase}};
}

ForcingSpec forcing_from(const json& j, Vector F0) {
  ForcingSpec f;
  f.F0 = std::move(F0);
  f.beta = j.at("beta").get<double>();
  f.omega = j.at("omega_rad_per_time").get<double>();
  f.phase = j.at("phase_rad").get<double>();
  return f;
}

Matrix observables_matrix(const std::vector<Observable>& obs, Index n) {
  Matrix O(n, static_cast<Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) O.col(static_cast<Index>(k)) = obs[k].functional;
  return O;
}

std::vector<Observable> observables_from(const json& names, const Matrix& O) {
  std::vector<Observable> out;
  if (static_cast<Index>(names.size()) != O.cols()) throw IoError("observable names and functionals disagree");
  for (std::size_t k = 0; k < names.size(); ++k) out.push_back({names[k].get<std::string>(), O.col(static_cast<Index>(k))});
  return out;
}

json beam_json(const zoo::BeamSpec& b) {
  return {{"length_um", b.length},           {"width_um", b.width},
          {"height_um", b.height},           {"elements", b.elements},
          {"young_mpa", b.young},            {"density_ng_per_um3", b.density},
          {"rise_um", b.rise},               {"quality_factor", b.quality_factor}};
}

json load_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_model(const fs::path& dir, const FullOrderModel& model, const std::optional<zoo::BeamSpec>& beam) {
  json meta = {{"format", "romforge-model"}, {"version", 1}, {"kind", "fom"}, {"dofs", model.dofs()},
               {"forcing", forcing_json(model.forcing())}};
  json names = json::array();
  for (const auto& o : model.observables()) names.push_back(o.name);
  meta["observables"] = names;
  if (beam) meta["beam"] = beam_json(*beam);
  write_sparse(dir / "M.mtx", model.M());
  write_sparse(dir / "C.mtx", model.C());
  write_sparse(dir / "K.mtx", model.K());
  write_tensor(dir / "G.tns", model.G());
  write_tensor(dir / "H.tns", model.H());
  write_dense(dir / "F0.mtx", model.forcing().F0);
  write_dense(dir / "observables.mtx", observables_matrix(model.observables(), model.dofs()));
  write_file_atomic(dir / "model.json", meta.dump(2) + "\n");
}

FullOrderModel read_model(const fs::path& dir) {
  const json meta = load_json(dir / "model.json");
  if (meta.value("format", "") != "romforge-model" || meta.value("kind", "") != "fom") {
    throw IoError((dir / "model.json").string() + ": not a full-order model directory");
  }
  try {
    return FullOrderModel(read_sparse(dir / "M.mtx"), read_sparse(dir / "C.mtx"), read_sparse(dir / "K.mtx"),
                          read_cubic(dir / "G.tns"), read_quartic(dir / "H.tns"),
                          forcing_from(meta.at("forcing"), read_dense(dir / "F0.mtx").col(0)),
                          observables_from(meta.at("observables"), read_dense(dir / "observables.mtx")));
  } catch (const json::exception& e) {
    throw IoError((dir / "model.json").string() + ": " + e.what());
  }
}

std::optional<zoo::BeamSpec> read_beam_spec(const fs::path& dir) {
  const json meta = load_json(dir / "model.json");
  if (!meta.contains("beam")) return std::nullopt;
  const json& b = meta["beam"];
  zoo::BeamSpec s;
  s.length = b.at("length_um");
  s.width = b.at("width_um");
  s.height = b.at("height_um");
  s.elements = b.at("elements");
  s.young = b.at("young_mpa");
  s.density = b.at("density_ng_per_um3");
  s.rise = b.at("rise_um");
  s.quality_factor = b.at("quality_factor");
  return s;
}

void write_rom(const fs::path& dir, const ReducedOrderModel& rom) {
  json meta = {{"format", "romforge-model"}, {"version", 1}, {"kind", "rom"}, {"dofs", rom.dofs()},
               {"forcing", forcing_json(rom.forcing())}};
  json names = json::array();
  for (const auto& o : rom.observables()) names.push_back(o.name);
  meta["observables"] = names;
  write_dense(dir / "M.mtx", rom.M());
  write_dense(dir / "C.mtx", rom.C());
  write_dense(dir / "K.mtx", rom.K());
  write_tensor(dir / "G.tns", rom.g());
  write_tensor(dir / "H.tns", rom.h());
  write_dense(dir / "F0.mtx", rom.forcing().F0);
  write_dense(dir / "observables.mtx", observables_matrix(rom.observables(), rom.dofs()));
  write_dense(dir / "U.mtx", rom.basis());
  write_file_atomic(dir / "model.json", meta.dump(2) + "\n");
}

ReducedOrderModel read_rom(const fs::path& dir) {
  const json meta = load_json(dir / "model.json");
  if (meta.value("format", "") != "romforge-model" || meta.value("kind", "") != "rom") {
    throw IoError((dir / "model.json").string() + ": not a reduced-model directory");
  }
  try {
    return ReducedOrderModel(read_dense(dir / "M.mtx"), read_dense(dir / "C.mtx"), read_dense(dir / "K.mtx"),
                             read_cubic(dir / "G.tns"), read_quartic(dir / "H.tns"),
                             forcing_from(meta.at("forcing"), read_dense(dir / "F0.mtx").col(0)),
                             observables_from(meta.at("observables"), read_dense(dir / "observables.mtx")),
                             read_dense(dir / "U.mtx"));
  } catch (const json::exception& e) {
    throw IoError((dir / "model.json").string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kTrajMagic[8] = {'R', 'F', 'T', 'R', 'A', 'J', '0', '1'};

void check_endianness() {
  if constexpr (std::endian::native != std::endian::little) {
    throw IoError("trajectory files are little-endian; big-endian hosts are not supported");
  }
}

template <typename T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

void put_doubles(std::string& s, const double* p, std::size_t n) {
  s.append(reinterpret_cast<const char*>(p), n * sizeof(double));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;
  fs::path path;
  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw IoError(path.string() + ": truncated trajectory file");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  void get_doubles(double* p, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(p, bytes.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
  }
};

}  // namespace

void write_trajectory(const fs::path& path, const Trajectory& t) {
  check_endianness();
  const auto nt = static_cast<std::uint64_t>(t.times.size());
  require(t.D.rows() == t.n && static_cast<std::uint64_t>(t.D.cols()) == nt, "write_trajectory: inconsistent sizes");
  const bool has_v = t.V.size() != 0;
  if (has_v) require(t.V.rows() == t.n && t.V.cols() == t.D.cols(), "write_trajectory: velocity shape");
  std::string s(kTrajMagic, sizeof(kTrajMagic));
  put<std::uint64_t>(s, static_cast<std::uint64_t>(t.n));
  put<std::uint64_t>(s, nt);
  put<std::uint64_t>(s, static_cast<std::uint64_t>(t.stride));
  put<std::uint64_t>(s, static_cast<std::uint64_t>(t.segments.size()));
  put<std::uint64_t>(s, has_v ? 1 : 0);
  put_doubles(s, t.times.data(), t.times.size());
  put_doubles(s, t.D.data(), static_cast<std::size_t>(t.D.size()));
  if (has_v) put_doubles(s, t.V.data(), static_cast<std::size_t>(t.V.size()));
  for (const auto& seg : t.segments) {
    put<double>(s, seg.omega);
    put<double>(s, seg.beta);
    put<std::uint64_t>(s, static_cast<std::uint64_t>(seg.first));
    put<std::uint64_t>(s, static_cast<std::uint64_t>(seg.count));
  }
  write_file_atomic(path, s);
}

Trajectory read_trajectory(const fs::path& path) {
  check_endianness();
  const std::string bytes = read_file(path);
  Reader r{bytes, 0, path};
  r.need(sizeof(kTrajMagic));
  if (std::memcmp(bytes.data(), kTrajMagic, sizeof(kTrajMagic)) != 0) throw IoError(path.string() + ": not a trajectory file");
  r.pos = sizeof(kTrajMagic);
  Trajectory t;
  t.n = static_cast<Index>(r.get<std::uint64_t>());
  const auto nt = static_cast<Index>(r.get<std::uint64_t>());
  t.stride = static_cast<Index>(r.get<std::uint64_t>());
  const auto nseg = r.get<std::uint64_t>();
  const bool has_v = r.get<std::uint64_t>() != 0;
  if (t.n < 0 || nt < 0 || static_cast<double>(t.n) * static_cast<double>(nt) * 8.0 > static_cast<double>(bytes.size())) {
    throw IoError(path.string() + ": corrupt trajectory header");
  }
  t.times.resize(static_cast<std::size_t>(nt));
  r.get_doubles(t.times.data(), t.times.size());
  t.D.resize(t.n, nt);
  r.get_doubles(t.D.data(), static_cast<std::size_t>(t.D.size()));
  if (has_v) {
    t.V.resize(t.n, nt);
    r.get_doubles(t.V.data(), static_cast<std::size_t>(t.V.size()));
  }
  for (std::uint64_t k = 0; k < nseg; ++k) {
    TrajectorySegment seg;
    seg.omega = r.get<double>();
    seg.beta = r.get<double>();
    seg.first = static_cast<Index>(r.get<std::uint64_t>());
    seg.count = static_cast<Index>(r.get<std::uint64_t>());
    t.segments.push_back(seg);
  }
  if (r.pos != bytes.size()) throw IoError(path.string() + ": trailing bytes in trajectory file");
  return t;
}

namespace {

fs::path provenance_path(const fs::path& p) { return fs::path(p.string() + ".provenance.csv"); }

SnapshotSource source_from(const std::string& s) {
  if (s == "HB") return SnapshotSource::HB;
  if (s == "TM-SS") return SnapshotSource::TM_SS;
  if (s == "TM-TR") return SnapshotSource::TM_TR;
  throw IoError("unknown snapshot source '" + s + "'");
}

}  // namespace

void write_snapshots(const fs::path& path, const SnapshotMatrix& S) {
  write_dense(path, S.X);
  std::string csv = "source,omega_rad_per_time,beta,first,count\n";
  for (const auto& b : S.provenance) {
    csv += std::string(to_string(b.source)) + "," + format_double(b.omega) + "," + format_double(b.beta) + "," +
           std::to_string(b.first) + "," + std::to_string(b.count) + "\n";
  }
  write_file_atomic(provenance_path(path), csv);
}

SnapshotMatrix read_snapshots(const fs::path& path) {
  const std::string head = read_file(path).substr(0, 8);
  if (head == std::string(kTrajMagic, sizeof(kTrajMagic))) {
    const Trajectory t = read_trajectory(path);
    return assemble_snapshots({TrajectorySnapshots{&t, SnapshotSource::TM_TR}});
  }
  SnapshotMatrix S;
  S.X = read_dense(path);
  if (S.X.cols() < 1) throw IoError(path.string() + ": snapshot matrix has no columns");
  const fs::path prov = provenance_path(path);
  if (fs::exists(prov)) {
    Lines in(prov);
    std::string line;
    in.next(line);  // header
    while (in.next(line)) {
      const auto c = split_csv(line);
      if (c.size() != 5) in.fail("expected 5 columns");
      S.provenance.push_back({source_from(c[0]), to_double(c[1], in), to_double(c[2], in),
                              static_cast<Index>(to_double(c[3], in)), static_cast<Index>(to_double(c[4], in))});
    }
  }
  return S;
}

// ---------------------------------------------------------------------------

void write_fourier(const fs::path& path, const FourierSolution& sol) {
  std::string s = "# omega_rad_per_time=" + format_double(sol.omega) + "\ndof,c0";
  for (Index h = 1; h <= sol.harmonics(); ++h) s += ",a" + std::to_string(h) + ",b" + std::to_string(h);
  s += "\n";
  for (Index i = 0; i < sol.dofs(); ++i) {
    s += std::to_string(i);
    for (Index c = 0; c < sol.coeffs.cols(); ++c) s += "," + format_double(sol.coeffs(i, c));
    s += "\n";
  }
  write_file_atomic(path, s);
}

FourierSolution read_fourier(const fs::path& path) {
  Lines in(path);
  std::string line;
  if (!in.next(line, true) || line.rfind("# omega_rad_per_time=", 0) != 0) in.fail("missing omega line");
  const double omega = to_double(line.substr(std::strlen("# omega_rad_per_time=")), in);
  if (!in.next(line)) in.fail("missing header");
  const Index cols = static_cast<Index>(split_csv(line).size()) - 1;
  if (cols < 1 || cols % 2 == 0) in.fail("malformed header");
  std::vector<std::vector<double>> rows;
  while (in.next(line)) {
    const auto c = split_csv(line);
    if (static_cast<Index>(c.size()) != cols + 1) in.fail("row width differs from header");
    std::vector<double> r;
    for (std::size_t k = 1; k < c.size(); ++k) r.push_back(to_double(c[k], in));
    rows.push_back(std::move(r));
  }
  FourierSolution sol(omega, static_cast<Index>(rows.size()), (cols - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index c = 0; c < cols; ++c) sol.coeffs(static_cast<Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return sol;
}

namespace {

fs::path script_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".plot.py");
  return p;
}

void emit_frf_script(const fs::path& csv, const std::vector<std::string>& observables) {
  std::string s =
      "# Plots the FRF written next to this script.\n"
      "import csv, os\n"
      "import matplotlib\n"
      "matplotlib.use('Agg')\n"
      "import matplotlib.pyplot as plt\n\n"
      "here = os.path.dirname(os.path.abspath(__file__))\n"
      "path = os.path.join(here, '" + csv.filename().string() + "')\n"
      "rows = list(csv.DictReader(open(path)))\n"
      "fig, ax = plt.subplots()\n"
      "for beta in sorted({r['beta'] for r in rows}, key=float):\n"
      "    sel = [r for r in rows if r['beta'] == beta]\n"
      "    w = [float(r['omega_rad_per_time']) for r in sel]\n"
      "    a = [float(r['" + (observables.empty() ? std::string("omega_rad_per_time") : observables.front()) + "']) for r in sel]\n"
      "    st = [r['stable'] for r in sel]\n"
      "    ax.plot(w, a, '-', lw=0.8, label='beta=' + beta)\n"
      "    ax.plot([x for x, s in zip(w, st) if s == '0'], [y for y, s in zip(a, st) if s == '0'], 'r.', ms=2)\n"
      "    for r, x, y in zip(sel, w, a):\n"
      "        if r['bif'] not in ('', 'none'):\n"
      "            ax.annotate(r['bif'], (x, y), fontsize=7)\n"
      "ax.set_xlabel('omega [rad/time]')\n"
      "ax.set_ylabel('amplitude')\n"
      "ax.legend()\n"
      "fig.savefig(os.path.splitext(path)[0] + '.png', dpi=150)\n";
  write_file_atomic(script_path(csv), s);
}

}  // namespace

void export_frf(const std::vector<FrfBranch>& branches, const fs::path& path, bool emit_plot_script) {
  std::vector<std::string> obs;
  if (!branches.empty()) obs = branches.front().observables;
  for (const auto& b : branches) {
    if (b.observables != obs) throw ContractViolation("export_frf: branches disagree on observables");
  }
  std::string s = "omega_rad_per_time,beta";
  for (const auto& o : obs) s += "," + o;
  s += ",stable,bif\n";
  for (const auto& b : branches) {
    for (const auto& p : b.points) {
      s += format_double(p.omega) + "," + format_double(p.beta);
      for (double a : p.amplitudes) s += "," + format_double(a);
      s += p.stability_known ? (p.stable ? ",1" : ",0") : ",-1";
      s += ",";
      s += p.bif == Bifurcation::None ? "none" : std::string(to_string(p.bif));
      s += "\n";
    }
  }
  write_file_atomic(path, s);
  if (emit_plot_script) emit_frf_script(path, obs);
}

void export_frf(const FrfBranch& branch, const fs::path& path, bool emit_plot_script) {
  export_frf(std::vector<FrfBranch>{branch}, path, emit_plot_script);
}

FrfTable read_frf(const fs::path& path) {
  Lines in(path);
  std::string line;
  if (!in.next(line)) in.fail("missing header");
  const auto head = split_csv(line);
  if (head.size() < 4 || head[0] != "omega_rad_per_time" || head[1] != "beta" || head[head.size() - 2] != "stable" ||
      head.back() != "bif") {
    in.fail("unexpected FRF header");
  }
  FrfTable t;
  t.observables.assign(head.begin() + 2, head.end() - 2);
  while (in.next(line)) {
    const auto c = split_csv(line);
    if (c.size() != head.size()) in.fail("row width differs from header");
    FrfRow r;
    r.omega = to_double(c[0], in);
    r.beta = to_double(c[1], in);
    for (std::size_t k = 2; k + 2 < c.size(); ++k) r.amplitudes.push_back(to_double(c[k], in));
    r.stable = static_cast<int>(to_double(c[c.size() - 2], in));
    r.bif = c.back();
    t.rows.push_back(std::move(r));
  }
  return t;
}

void export_spectrum(const PodBasis& basis, const fs::path& path, bool emit_plot_script) {
  const Vector rel = energy_spectrum(basis);
  std::string s = "index,sigma,rel_energy,cum_energy\n";
  double cum = 0.0;
  for (Index k = 0; k < rel.size(); ++k) {
    cum += rel[k];
    s += std::to_string(k + 1) + "," + format_double(basis.sigma[k]) + "," + format_double(rel[k]) + "," +
         format_double(cum) + "\n";
  }
  write_file_atomic(path, s);
  if (emit_plot_script) {
    write_file_atomic(script_path(path),
                      "# Plots the POD energy spectrum written next to this script.\n"
                      "import csv, os\n"
                      "import matplotlib\n"
                      "matplotlib.use('Agg')\n"
                      "import matplotlib.pyplot as plt\n\n"
                      "here = os.path.dirname(os.path.abspath(__file__))\n"
                      "path = os.path.join(here, '" + path.filename().string() + "')\n"
                      "rows = list(csv.DictReader(open(path)))\n"
                      "k = [int(r['index']) for r in rows]\n"
                      "e = [max(float(r['rel_energy']), 1e-300) for r in rows]\n"
                      "fig, ax = plt.subplots()\n"
                      "ax.semilogy(k, e, 'o-')\n"
                      "ax.set_xlabel('POM index')\n"
                      "ax.set_ylabel('relative energy')\n"
                      "fig.savefig(os.path.splitext(path)[0] + '.png', dpi=150)\n");
  }
}

SpectrumTable read_spectrum(const fs::path& path) {
  Lines in(path);
  std::string line;
  if (!in.next(line) || line != "index,sigma,rel_energy,cum_energy") in.fail("unexpected spectrum header");
  std::vector<std::array<double, 3>> rows;
  while (in.next(line)) {
    const auto c = split_csv(line);
    if (c.size() != 4) in.fail("expected 4 columns");
    rows.push_back({to_double(c[1], in), to_double(c[2], in), to_double(c[3], in)});
  }
  SpectrumTable t;
  const auto n = static_cast<Index>(rows.size());
  t.sigma.resize(n);
  t.rel_energy.resize(n);
  t.cum_energy.resize(n);
  for (Index k = 0; k < n; ++k) {
    t.sigma[k] = rows[static_cast<std::size_t>(k)][0];
    t.rel_energy[k] = rows[static_cast<std::size_t>(k)][1];
    t.cum_energy[k] = rows[static_cast<std::size_t>(k)][2];
  }
  return t;
}

void write_manifold(const fs::path& dir, const ElectroManifold& mf) {
  std::string s = "# projected electrostatic force per unit V^2 [uN/V^2]; active POM " + std::to_string(mf.active + 1) +
                  "\nq_um";
  for (Index i = 0; i < mf.channels(); ++i) s += ",F" + std::to_string(i + 1);
  s += "\n";
  for (Index g = 0; g < mf.grid.size(); ++g) {
    s += format_double(mf.grid[g]);
    for (Index i = 0; i < mf.channels(); ++i) s += "," + format_double(mf.samples(i, g));
    s += "\n";
  }
  write_file_atomic(dir / "manifold.csv", s);
  if (!mf.fitted()) return;
  std::string c =
      "# F_i / (eps0 V^2) = alpha0 + alpha1 q + alpha2 q^2 + alpha3 q^3, q in um, eps0 = " + format_double(kEpsilon0) +
      " uN/V^2\nchannel,alpha0,alpha1,alpha2,alpha3,fit_residual_uN_per_V2,dropped\n";
  for (Index i = 0; i < mf.channels(); ++i) {
    c += std::to_string(i + 1);
    for (int j = 0; j < 4; ++j) c += "," + format_double(mf.alpha(i, j));
    c += "," + format_double(mf.fit_residual[i]) + "," + (mf.dropped[static_cast<std::size_t>(i)] ? "1" : "0") + "\n";
  }
  write_file_atomic(dir / "coefficients.csv", c);
}

// ---------------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_path(const fs::path& path) {
  if (fs::is_regular_file(path)) return sha256_hex(read_file(path));
  if (!fs::is_directory(path)) throw IoError("cannot hash missing path " + path.string());
  std::map<std::string, std::string> entries;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) entries[fs::relative(e.path(), path).generic_string()] = sha256_hex(read_file(e.path()));
  }
  std::string listing;
  for (const auto& [name, h] : entries) listing += name + " " + h + "\n";
  return sha256_hex(listing);
}

}  // namespace romforge::io
