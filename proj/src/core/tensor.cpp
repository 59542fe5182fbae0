#include "romforge/core/tensor.hpp"

#include "romforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <string>
#include <utility>

namespace romforge {
namespace {

void check_index(Index idx, Index n, const char* what) {
  if (idx < 0 || idx >= n) {
    throw ContractViolation(std::string(what) + ": index " + std::to_string(idx) + " outside [0," +
                            std::to_string(n) + ")");
  }
}

}  // namespace

CubicTensor::CubicTensor(Index n, std::vector<CubicEntry> entries) : n_(n) {
  for (auto& e : entries) {
    check_index(e.i, n, "CubicTensor");
    check_index(e.j, n, "CubicTensor");
    check_index(e.k, n, "CubicTensor");
    if (!std::isfinite(e.value)) throw ContractViolation("CubicTensor: non-finite entry");
    if (e.j > e.k) std::swap(e.j, e.k);
  }
  std::sort(entries.begin(), entries.end(), [](const CubicEntry& a, const CubicEntry& b) {
    return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
  });
  for (const auto& e : entries) {
    if (!entries_.empty()) {
      auto& last = entries_.back();
      if (last.i == e.i && last.j == e.j && last.k == e.k) {
        last.value += e.value;
        continue;
      }
    }
    entries_.push_back(e);
  }
  std::erase_if(entries_, [](const CubicEntry& e) { return e.value == 0.0; });
}

void CubicTensor::apply(const Eigen::Ref<const Vector>& D, Eigen::Ref<Vector> out) const {
  require_size(D.size(), n_, "CubicTensor::apply");
  require_size(out.size(), n_, "CubicTensor::apply output");
  for (const auto& e : entries_) out[e.i] += e.value * D[e.j] * D[e.k];
}

QuarticTensor::QuarticTensor(Index n, std::vector<QuarticEntry> entries) : n_(n) {
  for (auto& e : entries) {
    check_index(e.i, n, "QuarticTensor");
    check_index(e.j, n, "QuarticTensor");
    check_index(e.k, n, "QuarticTensor");
    check_index(e.l, n, "QuarticTensor");
    if (!std::isfinite(e.value)) throw ContractViolation("QuarticTensor: non-finite entry");
    std::array<Index, 3> t{e.j, e.k, e.l};
    std::sort(t.begin(), t.end());
    e.j = t[0];
    e.k = t[1];
    e.l = t[2];
  }
  std::sort(entries.begin(), entries.end(), [](const QuarticEntry& a, const QuarticEntry& b) {
    return std::tie(a.i, a.j, a.k, a.l) < std::tie(b.i, b.j, b.k, b.l);
  });
  for (const auto& e : entries) {
    if (!entries_.empty()) {
      auto& last = entries_.back();
      if (last.i == e.i && last.j == e.j && last.k == e.k && last.l == e.l) {
        last.value += e.value;
        continue;
      }
    }
    entries_.push_back(e);
  }
  std::erase_if(entries_, [](const QuarticEntry& e) { return e.value == 0.0; });
}

void QuarticTensor::apply(const Eigen::Ref<const Vector>& D, Eigen::Ref<Vector> out) const {
  require_size(D.size(), n_, "QuarticTensor::apply");
  require_size(out.size(), n_, "QuarticTensor::apply output");
  for (const auto& e : entries_) out[e.i] += e.value * D[e.j] * D[e.k] * D[e.l];
}

void TangentPattern::add_to_triplets(const double* slots, std::vector<Triplet>& out, double scale) const {
  for (std::size_t s = 0; s < rows.size(); ++s) out.emplace_back(rows[s], cols[s], scale * slots[s]);
}

void TangentPattern::add_to_dense(const double* slots, Matrix& out, double scale) const {
  for (std::size_t s = 0; s < rows.size(); ++s) out(rows[s], cols[s]) += scale * slots[s];
}

PolynomialForce::PolynomialForce(CubicTensor G, QuarticTensor H)
    : n_(std::max(G.n(), H.n())), G_(std::move(G)), H_(std::move(H)) {
  if (!G_.empty() && !H_.empty()) require(G_.n() == H_.n(), "PolynomialForce: tensor dimensions differ");
  if (G_.n() == 0) G_ = CubicTensor(n_);
  if (H_.n() == 0) H_ = QuarticTensor(n_);
  require(G_.n() == n_ && H_.n() == n_, "PolynomialForce: tensor dimensions differ");

  pattern_.n = n_;
  std::map<std::pair<Index, Index>, Index> slot_of;
  auto slot = [&](Index r, Index c) {
    auto [it, inserted] = slot_of.try_emplace({c, r}, 0);
    return &it->second;
  };
  for (const auto& e : G_.entries()) {
    slot(e.i, e.j);
    slot(e.i, e.k);
  }
  for (const auto& e : H_.entries()) {
    slot(e.i, e.j);
    slot(e.i, e.k);
    slot(e.i, e.l);
  }
  // Column-major slot order matches Eigen's compressed storage.
  Index next = 0;
  for (auto& [key, idx] : slot_of) {
    idx = next++;
    pattern_.rows.push_back(key.second);
    pattern_.cols.push_back(key.first);
  }
  g_slots_.reserve(G_.nnz());
  for (const auto& e : G_.entries()) g_slots_.push_back({*slot(e.i, e.j), *slot(e.i, e.k)});
  h_slots_.reserve(H_.nnz());
  for (const auto& e : H_.entries()) h_slots_.push_back({*slot(e.i, e.j), *slot(e.i, e.k), *slot(e.i, e.l)});
}

void PolynomialForce::add_force(const Eigen::Ref<const Vector>& D, double, Eigen::Ref<Vector> out) const {
  G_.apply(D, out);
  H_.apply(D, out);
}

void PolynomialForce::tangent(const Eigen::Ref<const Vector>& D, double, double* slots) const {
  require_size(D.size(), n_, "PolynomialForce::tangent");
  std::fill(slots, slots + pattern_.size(), 0.0);
  const auto& ge = G_.entries();
  for (std::size_t e = 0; e < ge.size(); ++e) {
    const auto& t = ge[e];
    slots[g_slots_[e][0]] += t.value * D[t.k];
    slots[g_slots_[e][1]] += t.value * D[t.j];
  }
  const auto& he = H_.entries();
  for (std::size_t e = 0; e < he.size(); ++e) {
    const auto& t = he[e];
    slots[h_slots_[e][0]] += t.value * D[t.k] * D[t.l];
    slots[h_slots_[e][1]] += t.value * D[t.j] * D[t.l];
    slots[h_slots_[e][2]] += t.value * D[t.j] * D[t.k];
  }
}

void PolynomialForce::add_force_samples(const SampleMatrix& D, const Vector&, SampleMatrix& out) const {
  require(D.rows() == n_ && out.rows() == n_ && out.cols() == D.cols(),
          "PolynomialForce::add_force_samples: shape mismatch");
  const auto& kt = kernels::active();
  const auto ns = static_cast<std::size_t>(D.cols());
  for (const auto& e : G_.entries()) kt.mul_axpy(e.value, D.row(e.j).data(), D.row(e.k).data(), out.row(e.i).data(), ns);

  Vector pair(static_cast<Index>(ns));
  Index last_j = -1, last_k = -1;
  for (const auto& e : H_.entries()) {
    if (e.j != last_j || e.k != last_k) {
      kt.mul(D.row(e.j).data(), D.row(e.k).data(), pair.data(), ns);
      last_j = e.j;
      last_k = e.k;
    }
    kt.mul_axpy(e.value, pair.data(), D.row(e.l).data(), out.row(e.i).data(), ns);
  }
}

void PolynomialForce::tangent_samples(const SampleMatrix& D, const Vector&, SampleMatrix& slots) const {
  require(D.rows() == n_, "PolynomialForce::tangent_samples: shape mismatch");
  const auto& kt = kernels::active();
  const auto ns = static_cast<std::size_t>(D.cols());
  slots.setZero(static_cast<Index>(pattern_.size()), D.cols());
  const auto& ge = G_.entries();
  for (std::size_t e = 0; e < ge.size(); ++e) {
    const auto& t = ge[e];
    kt.axpy(t.value, D.row(t.k).data(), slots.row(g_slots_[e][0]).data(), ns);
    kt.axpy(t.value, D.row(t.j).data(), slots.row(g_slots_[e][1]).data(), ns);
  }
  const auto& he = H_.entries();
  for (std::size_t e = 0; e < he.size(); ++e) {
    const auto& t = he[e];
    kt.mul_axpy(t.value, D.row(t.k).data(), D.row(t.l).data(), slots.row(h_slots_[e][0]).data(), ns);
    kt.mul_axpy(t.value, D.row(t.j).data(), D.row(t.l).data(), slots.row(h_slots_[e][1]).data(), ns);
    kt.mul_axpy(t.value, D.row(t.j).data(), D.row(t.k).data(), slots.row(h_slots_[e][2]).data(), ns);
  }
}

}  // namespace romforge
