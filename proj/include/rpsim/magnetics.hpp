#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rpsim/coherence.hpp"
#include "rpsim/spin_core.hpp"

namespace rpsim {

using Vec3 = std::array<double, 3>;
using Tensor3 = std::array<std::array<double, 3>, 3>;

struct HyperfineCoupling {
  std::size_t nucleus = 0;  // 0-based, declaration order
  int electron = 1;         // 1 or 2
  // Isotropic constant A or a full (not symmetrised) 3x3 tensor.
  std::variant<double, Tensor3> coupling = 0.0;

  friend bool operator==(const HyperfineCoupling&, const HyperfineCoupling&) = default;
};

// All couplings in angular-frequency units with hbar = 1.
struct HamiltonianSpec {
  Vec3 magnetic_field{0.0, 0.0, 0.0};
  std::array<double, 2> g_scale{1.0, 1.0};
  std::vector<HyperfineCoupling> hyperfine;
  double exchange_J = 0.0;
  // omega in omega (s1z - s2z): the minimal S-T0 mixing term.
  double delta_g_z = 0.0;

  friend bool operator==(const HamiltonianSpec&, const HamiltonianSpec&) = default;
};

namespace detail {

inline bool all_finite(const HamiltonianSpec& spec) {
  auto ok = [](double v) { return std::isfinite(v); };
  for (double v : spec.magnetic_field)
    if (!ok(v)) return false;
  for (double v : spec.g_scale)
    if (!ok(v)) return false;
  if (!ok(spec.exchange_J) || !ok(spec.delta_g_z)) return false;
  for (const auto& hf : spec.hyperfine) {
    if (const auto* a = std::get_if<double>(&hf.coupling)) {
      if (!ok(*a)) return false;
    } else {
      for (const auto& row : std::get<Tensor3>(hf.coupling))
        for (double v : row)
          if (!ok(v)) return false;
    }
  }
  return true;
}

}  // namespace detail

inline Matrix build_hamiltonian(const SpinSystem& system, const HamiltonianSpec& spec) {
  if (!detail::all_finite(spec)) throw InputError("Hamiltonian couplings must be finite");
  const Eigen::Index dim = system.total_dim();
  Matrix h = Matrix::Zero(dim, dim);
  const SpinMatrices s1 = electron_spin(system, 1);
  const SpinMatrices s2 = electron_spin(system, 2);
  const auto& b = spec.magnetic_field;

  // Zeeman: B . (g1 s1 + g2 s2), g folded into the field scale.
  for (int e = 0; e < 2; ++e) {
    const SpinMatrices& s = e == 0 ? s1 : s2;
    h += spec.g_scale[static_cast<std::size_t>(e)] * (b[0] * s.x + b[1] * s.y + b[2] * s.z);
  }

  for (const auto& hf : spec.hyperfine) {
    if (hf.electron != 1 && hf.electron != 2)
      throw InputError("hyperfine electron index must be 1 or 2");
    if (hf.nucleus >= system.nuclei().size())
      throw InputError("hyperfine nucleus index " + std::to_string(hf.nucleus) +
                       " out of range");
    const SpinMatrices& s = hf.electron == 1 ? s1 : s2;
    const SpinMatrices nuc = nuclear_spin(system, hf.nucleus);
    if (const auto* a = std::get_if<double>(&hf.coupling)) {
      h += *a * dot(s, nuc);
    } else {
      const auto& t = std::get<Tensor3>(hf.coupling);
      const std::array<const Matrix*, 3> se{&s.x, &s.y, &s.z};
      const std::array<const Matrix*, 3> ie{&nuc.x, &nuc.y, &nuc.z};
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          if (t[i][j] != 0.0) h += t[i][j] * (*se[i]) * (*ie[j]);
    }
  }

  if (spec.exchange_J != 0.0) h += spec.exchange_J * dot(s1, s2);
  if (spec.delta_g_z != 0.0) h += spec.delta_g_z * (s1.z - s2.z);

  if (hermiticity_defect(h) > 1e-12)
    throw InvariantError("hamiltonian_hermiticity", 0, "built Hamiltonian is not Hermitian");
  return h;
}

// H_ab = Q_a H Q_b.
struct HamiltonianBlocks {
  Matrix SS, ST, TS, TT;

  Matrix sum() const { return SS + ST + TS + TT; }
};

inline HamiltonianBlocks block_decompose(const Matrix& h, const Matrix& q_s, const Matrix& q_t) {
  require_square(h, "Hamiltonian");
  require_same_dim(h, q_s, "Hamiltonian vs singlet projector");
  require_same_dim(h, q_t, "Hamiltonian vs triplet projector");
  const Matrix hq_s = h * q_s;
  const Matrix hq_t = h * q_t;
  return {q_s * hq_s, q_s * hq_t, q_t * hq_s, q_t * hq_t};
}

// Rate of change of the S-T coherent part rho~ = rho_ST + rho_TS under the
// non-reacting equation, written entirely in S/T blocks:
//   -(kS+kT)/2 rho~ - i(H_TS rho_SS - rho_SS H_ST + H_ST rho_TT - rho_TT H_TS
//                      + H_SS rho_ST - rho_ST H_TT + H_TT rho_TS - rho_TS H_SS)
// The H_ST/H_TS terms are the only ones that can create coherence from a
// block-diagonal state.
inline Matrix coherence_generation(const HamiltonianBlocks& h, const RhoBlocks& r,
                                   double total_rate) {
  const Matrix commutator_part = h.TS * r.SS - r.SS * h.ST + h.ST * r.TT - r.TT * h.TS +
                                 h.SS * r.ST - r.ST * h.TT + h.TT * r.TS - r.TS * h.SS;
  return -0.5 * total_rate * r.coherent() - kI * commutator_part;
}

}  // namespace rpsim
