#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rpsim/errors.hpp"
#include "rpsim/linalg.hpp"

// Hilbert spaces, spin operators and singlet/triplet projectors for a radical
// pair: two electron spins-1/2 plus any number of nuclear spins.
//
// Basis ordering is fixed: electron 1 (x) electron 2 (x) nuclei in declaration
// order. Each single-spin factor is ordered m = I, I-1, ..., -I, so for an
// electron index 0 is |up> and index 1 is |down>.

namespace rpsim {

// Spin quantum number stored as 2*I so half-integers are exact.
class SpinQuantum {
 public:
  constexpr SpinQuantum() = default;

  static SpinQuantum from_twice(int twice) {
    if (twice < 0) throw InputError("spin quantum number must be non-negative");
    SpinQuantum s;
    s.twice_ = twice;
    return s;
  }

  static SpinQuantum from_value(double spin) {
    const double twice = 2.0 * spin;
    const double rounded = std::round(twice);
    if (!std::isfinite(spin) || spin < 0.0 || std::abs(twice - rounded) > 1e-12)
      throw InputError("invalid spin quantum number " + to_text(spin) +
                       ": 2*spin must be a non-negative integer");
    return from_twice(static_cast<int>(rounded));
  }

  constexpr int twice() const { return twice_; }
  constexpr double value() const { return 0.5 * twice_; }
  constexpr Eigen::Index multiplicity() const { return twice_ + 1; }

  friend constexpr bool operator==(SpinQuantum, SpinQuantum) = default;

 private:
  int twice_ = 1;
};

struct NuclearSpec {
  SpinQuantum spin = SpinQuantum::from_twice(1);
  int coupled_electron = 1;  // 1 or 2

  friend bool operator==(const NuclearSpec&, const NuclearSpec&) = default;
};

class SpinSystem {
 public:
  static constexpr int kElectronCount = 2;

  SpinSystem() = default;

  explicit SpinSystem(std::vector<NuclearSpec> nuclei) : nuclei_(std::move(nuclei)) {
    for (const auto& n : nuclei_)
      if (n.coupled_electron != 1 && n.coupled_electron != 2)
        throw InputError("nucleus coupled_electron must be 1 or 2");
  }

  const std::vector<NuclearSpec>& nuclei() const { return nuclei_; }

  // Subspaces: 0 = electron 1, 1 = electron 2, 2 + k = nucleus k.
  std::size_t subspace_count() const { return 2 + nuclei_.size(); }

  Eigen::Index subspace_dim(std::size_t index) const {
    if (index >= subspace_count())
      throw InputError("subspace index " + std::to_string(index) + " out of range");
    return index < 2 ? 2 : nuclei_[index - 2].spin.multiplicity();
  }

  Eigen::Index nuclear_dim() const {
    Eigen::Index d = 1;
    for (const auto& n : nuclei_) d *= n.spin.multiplicity();
    return d;
  }

  Eigen::Index total_dim() const { return 4 * nuclear_dim(); }

  static constexpr std::size_t electron_subspace(int electron) {
    return static_cast<std::size_t>(electron - 1);
  }
  static constexpr std::size_t nucleus_subspace(std::size_t nucleus) { return 2 + nucleus; }

  friend bool operator==(const SpinSystem&, const SpinSystem&) = default;

 private:
  std::vector<NuclearSpec> nuclei_;
};

struct SpinMatrices {
  Matrix x, y, z;
};

inline SpinMatrices spin_operators(SpinQuantum spin) {
  const Eigen::Index n = spin.multiplicity();
  const double s = spin.value();
  SpinMatrices out{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};
  Matrix raise = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double m = s - static_cast<double>(k);
    out.z(k, k) = m;
    // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>; |m+1> sits at index k-1.
    if (k > 0) raise(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  Matrix lower = raise.adjoint();
  out.x = 0.5 * (raise + lower);
  out.y = (raise - lower) / (2.0 * kI);
  return out;
}

inline SpinMatrices spin_operators(double spin) { return spin_operators(SpinQuantum::from_value(spin)); }

// I (x) ... (x) op (x) ... (x) I with op acting on the indexed subspace.
inline Matrix embed(const SpinSystem& system, std::size_t subspace_index, const Matrix& op) {
  const Eigen::Index d = system.subspace_dim(subspace_index);
  if (op.rows() != d || op.cols() != d)
    throw InputError("operator dimension " + std::to_string(op.rows()) +
                     " does not match subspace dimension " + std::to_string(d));
  Eigen::Index left = 1, right = 1;
  for (std::size_t i = 0; i < subspace_index; ++i) left *= system.subspace_dim(i);
  for (std::size_t i = subspace_index + 1; i < system.subspace_count(); ++i)
    right *= system.subspace_dim(i);
  return kron(kron(identity(left), op), identity(right));
}

inline SpinMatrices embed(const SpinSystem& system, std::size_t subspace_index,
                          const SpinMatrices& ops) {
  return {embed(system, subspace_index, ops.x), embed(system, subspace_index, ops.y),
          embed(system, subspace_index, ops.z)};
}

// Embedded spin vector operators of electron 1 or 2.
inline SpinMatrices electron_spin(const SpinSystem& system, int electron) {
  return embed(system, SpinSystem::electron_subspace(electron),
               spin_operators(SpinQuantum::from_twice(1)));
}

inline SpinMatrices nuclear_spin(const SpinSystem& system, std::size_t nucleus) {
  if (nucleus >= system.nuclei().size())
    throw InputError("nucleus index " + std::to_string(nucleus) + " out of range");
  return embed(system, SpinSystem::nucleus_subspace(nucleus),
               spin_operators(system.nuclei()[nucleus].spin));
}

inline Matrix dot(const SpinMatrices& a, const SpinMatrices& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

// Q_S = (1/4 - s1.s2) (x) I_nuclear.
inline Matrix singlet_projector(const SpinSystem& system) {
  const SpinSystem bare;
  const Matrix electronic =
      0.25 * identity(4) - dot(electron_spin(bare, 1), electron_spin(bare, 2));
  return kron(electronic, identity(system.nuclear_dim()));
}

inline Matrix triplet_projector(const SpinSystem& system) {
  return identity(system.total_dim()) - singlet_projector(system);
}

// Two-electron basis vectors (4-dimensional) in the up/down product basis.
namespace electron_states {

inline Vector basis(Eigen::Index i) {
  Vector v = Vector::Zero(4);
  v(i) = 1.0;
  return v;
}
inline Vector singlet() { return (basis(1) - basis(2)) / std::sqrt(2.0); }
inline Vector triplet_0() { return (basis(1) + basis(2)) / std::sqrt(2.0); }
inline Vector triplet_plus() { return basis(0); }
inline Vector triplet_minus() { return basis(3); }

}  // namespace electron_states

struct DensityTolerances {
  double hermiticity = 1e-10;
  double min_eigenvalue = -1e-9;
  double trace_excess = 1e-9;
};

// Reason a matrix fails to be a valid (possibly sub-normalised) density
// matrix, or nullopt when it passes.
inline std::optional<std::string> density_violation(const Matrix& m,
                                                    const DensityTolerances& tol = {}) {
  if (m.rows() != m.cols() || m.rows() == 0) return "not a non-empty square matrix";
  if (!m.allFinite()) return "non-finite entries";
  const double herm = hermiticity_defect(m);
  if (herm > tol.hermiticity) return "hermiticity defect " + to_text(herm);
  const double tr = real_trace(m);
  if (tr < -tol.trace_excess || tr > 1.0 + tol.trace_excess)
    return "trace " + to_text(tr) + " outside [0,1]";
  const double lmin = min_eigenvalue(m);
  if (lmin < tol.min_eigenvalue) return "negative eigenvalue " + to_text(lmin);
  return std::nullopt;
}

// Hermitian, positive semidefinite, 0 <= Tr <= 1.
class DensityState {
 public:
  explicit DensityState(Matrix rho, const DensityTolerances& tol = {}) : rho_(std::move(rho)) {
    if (auto why = density_violation(rho_, tol)) throw InputError("invalid density state: " + *why);
  }

  static DensityState from_pure(const Vector& psi) {
    return DensityState(psi * psi.adjoint());
  }

  const Matrix& matrix() const { return rho_; }
  Eigen::Index dim() const { return rho_.rows(); }
  double trace() const { return real_trace(rho_); }

 private:
  Matrix rho_;
};

enum class NamedState {
  singlet,
  triplet_0,
  triplet_plus,
  triplet_minus,
  coherent_plus,
  coherent_minus,
  mixed_ST,
  custom,
};

inline constexpr std::array<std::pair<NamedState, std::string_view>, 8> kNamedStates{{
    {NamedState::singlet, "singlet"},
    {NamedState::triplet_0, "triplet_0"},
    {NamedState::triplet_plus, "triplet_plus"},
    {NamedState::triplet_minus, "triplet_minus"},
    {NamedState::coherent_plus, "coherent_plus"},
    {NamedState::coherent_minus, "coherent_minus"},
    {NamedState::mixed_ST, "mixed_ST"},
    {NamedState::custom, "custom"},
}};

inline std::string_view to_string(NamedState s) {
  for (const auto& [k, v] : kNamedStates)
    if (k == s) return v;
  return "?";
}

inline NamedState parse_named_state(std::string_view name) {
  for (const auto& [k, v] : kNamedStates)
    if (v == name) return k;
  std::string known;
  for (const auto& [k, v] : kNamedStates) known += (known.empty() ? "" : ", ") + std::string(v);
  throw InputError("unknown state name '" + std::string(name) + "' (known: " + known + ")");
}

// A state given as a classical ensemble of pure states (weights sum to 1).
struct PureEnsemble {
  std::vector<double> weights;
  std::vector<Vector> states;

  Matrix density() const {
    Matrix rho = Matrix::Zero(states.front().size(), states.front().size());
    for (std::size_t i = 0; i < states.size(); ++i)
      rho += weights[i] * states[i] * states[i].adjoint();
    return rho;
  }
};

namespace detail {

inline void require_normalized(const Vector& v) {
  if (std::abs(v.squaredNorm() - 1.0) > 1e-9)
    throw InputError("custom amplitudes not normalized (|psi|^2 = " +
                     to_text(v.squaredNorm()) + ")");
}

// Electronic pure components of a named state with their weights.
inline std::vector<std::pair<double, Vector>> electronic_components(NamedState name) {
  namespace es = electron_states;
  switch (name) {
    case NamedState::singlet: return {{1.0, es::singlet()}};
    case NamedState::triplet_0: return {{1.0, es::triplet_0()}};
    case NamedState::triplet_plus: return {{1.0, es::triplet_plus()}};
    case NamedState::triplet_minus: return {{1.0, es::triplet_minus()}};
    case NamedState::coherent_plus:
      return {{1.0, (es::singlet() + es::triplet_0()) / std::sqrt(2.0)}};
    case NamedState::coherent_minus:
      return {{1.0, (es::singlet() - es::triplet_0()) / std::sqrt(2.0)}};
    case NamedState::mixed_ST: return {{0.5, es::singlet()}, {0.5, es::triplet_0()}};
    case NamedState::custom: break;
  }
  throw InputError("state 'custom' requires amplitudes");
}

}  // namespace detail

// Pure-state decomposition of a named state: electronic components tensored
// with nuclear basis states |m>, nuclei uniformly weighted (maximally mixed).
// Custom amplitudes may span the electron space (length 4, nuclei mixed) or
// the full space (a single pure state).
inline PureEnsemble named_components(const SpinSystem& system, NamedState name,
                                     const std::optional<Vector>& amplitudes = std::nullopt) {
  std::vector<std::pair<double, Vector>> electronic;
  if (name == NamedState::custom) {
    if (!amplitudes) throw InputError("state 'custom' requires amplitudes");
    detail::require_normalized(*amplitudes);
    if (amplitudes->size() == system.total_dim()) return PureEnsemble{{1.0}, {*amplitudes}};
    if (amplitudes->size() != 4)
      throw InputError("custom amplitudes must have length 4 or " +
                       std::to_string(system.total_dim()));
    electronic.emplace_back(1.0, *amplitudes);
  } else {
    if (amplitudes) throw InputError("amplitudes are only accepted for state 'custom'");
    electronic = detail::electronic_components(name);
  }
  const Eigen::Index nd = system.nuclear_dim();
  PureEnsemble out;
  for (const auto& [w, e] : electronic) {
    for (Eigen::Index m = 0; m < nd; ++m) {
      Vector nuc = Vector::Zero(nd);
      nuc(m) = 1.0;
      Vector full(4 * nd);
      for (Eigen::Index i = 0; i < 4; ++i) full.segment(i * nd, nd) = e(i) * nuc;
      out.weights.push_back(w / static_cast<double>(nd));
      out.states.push_back(std::move(full));
    }
  }
  return out;
}

inline DensityState named_state(const SpinSystem& system, NamedState name,
                                const std::optional<Vector>& amplitudes = std::nullopt) {
  return DensityState(named_components(system, name, amplitudes).density());
}

inline DensityState named_state(const SpinSystem& system, std::string_view name,
                                const std::optional<Vector>& amplitudes = std::nullopt) {
  return named_state(system, parse_named_state(name), amplitudes);
}

}  // namespace rpsim
