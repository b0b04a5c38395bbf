#include <catch2/catch_amalgamated.hpp>

#include <rpsim/spin_core.hpp>

#include "test_support.hpp"

using namespace rpsim;
using Catch::Approx;

namespace {

SpinSystem one_nucleus() { return SpinSystem({NuclearSpec{SpinQuantum::from_value(0.5), 1}}); }

SpinSystem mixed_nuclei() {
  return SpinSystem({NuclearSpec{SpinQuantum::from_value(0.5), 1},
                     NuclearSpec{SpinQuantum::from_value(1.0), 2},
                     NuclearSpec{SpinQuantum::from_value(1.5), 1}});
}

}  // namespace

TEST_CASE("spin operators follow the angular momentum algebra", "[spin_core]") {
  SECTION("spin 1/2 is Pauli/2") {
    const auto s = spin_operators(0.5);
    Matrix expected_z(2, 2);
    expected_z << 0.5, 0.0, 0.0, -0.5;
    CHECK(max_abs_diff(s.z, expected_z) == 0.0);
    CHECK(max_abs_diff(s.x * s.y - s.y * s.x, kI * s.z) < 1e-15);
  }
  SECTION("spin 1 has Sz = diag(1, 0, -1)") {
    const auto s = spin_operators(1.0);
    CHECK(s.z(0, 0).real() == 1.0);
    CHECK(s.z(1, 1).real() == 0.0);
    CHECK(s.z(2, 2).real() == -1.0);
  }
  SECTION("cyclic commutators and Casimir for I up to 3/2") {
    for (double spin : {0.5, 1.0, 1.5}) {
      const auto s = spin_operators(spin);
      CHECK(max_abs_diff(commutator(s.x, s.y), kI * s.z) < 1e-14);
      CHECK(max_abs_diff(commutator(s.y, s.z), kI * s.x) < 1e-14);
      CHECK(max_abs_diff(commutator(s.z, s.x), kI * s.y) < 1e-14);
      const Matrix casimir = s.x * s.x + s.y * s.y + s.z * s.z;
      CHECK(max_abs_diff(casimir, spin * (spin + 1.0) * identity(s.z.rows())) < 1e-14);
    }
  }
  SECTION("invalid spin values are rejected") {
    CHECK_THROWS_AS(spin_operators(0.3), InputError);
    CHECK_THROWS_AS(spin_operators(-0.5), InputError);
  }
}

TEST_CASE("SpinSystem dimensions and embedding", "[spin_core]") {
  CHECK(SpinSystem().total_dim() == 4);
  CHECK(one_nucleus().total_dim() == 8);
  CHECK(mixed_nuclei().total_dim() == 4 * 2 * 3 * 4);
  CHECK_THROWS_AS(SpinSystem({NuclearSpec{SpinQuantum::from_value(0.5), 3}}), InputError);

  const SpinSystem bare;
  const auto sz = spin_operators(0.5).z;
  CHECK(max_abs_diff(embed(bare, 0, sz), kron(sz, identity(2))) == 0.0);

  const SpinSystem sys = mixed_nuclei();
  rpsim::testing::RandomMatrices rnd(7);
  for (std::size_t a = 0; a < sys.subspace_count(); ++a) {
    const Matrix op_a = rnd.gaussian(sys.subspace_dim(a), sys.subspace_dim(a));
    const Matrix ea = embed(sys, a, op_a);
    CHECK(std::abs(ea.trace() - op_a.trace() * double(sys.total_dim() / op_a.rows())) < 1e-10);
    for (std::size_t b = a + 1; b < sys.subspace_count(); ++b) {
      const Matrix eb = embed(sys, b, rnd.gaussian(sys.subspace_dim(b), sys.subspace_dim(b)));
      CHECK(max_abs(commutator(ea, eb)) < 1e-10);
    }
  }
  CHECK_THROWS_AS(embed(sys, 5, sz), InputError);
  CHECK_THROWS_AS(embed(sys, 3, sz), InputError);  // spin-1 nucleus needs 3x3
}

TEST_CASE("singlet and triplet projectors", "[spin_core]") {
  const SpinSystem bare;
  const Matrix qs = singlet_projector(bare);
  const Matrix qt = triplet_projector(bare);
  namespace es = electron_states;

  CHECK(max_abs_diff(qs * es::singlet(), es::singlet()) < 1e-15);
  CHECK(max_abs(qs * es::triplet_plus()) < 1e-15);
  CHECK(max_abs_diff(qt * es::triplet_0(), es::triplet_0()) < 1e-15);
  CHECK(qt.trace().real() == Approx(3.0));

  // Direct construction for one spin-1/2 nucleus: |S><S| (x) I_2 has trace 2.
  const Matrix ss = es::singlet() * es::singlet().adjoint();
  CHECK(max_abs_diff(singlet_projector(one_nucleus()), kron(ss, identity(2))) < 1e-15);
  CHECK(singlet_projector(one_nucleus()).trace().real() == Approx(2.0));

  for (const SpinSystem& sys : {bare, one_nucleus(), mixed_nuclei()}) {
    const Matrix s = singlet_projector(sys);
    const Matrix t = triplet_projector(sys);
    const Matrix id = identity(sys.total_dim());
    CHECK(max_abs_diff(s * s, s) < 1e-12);
    CHECK(max_abs_diff(t * t, t) < 1e-12);
    CHECK(max_abs(s * t) < 1e-12);
    CHECK(max_abs(t * s) < 1e-12);
    CHECK(max_abs_diff(s + t, id) < 1e-12);
    CHECK(hermiticity_defect(s) < 1e-15);
    CHECK(s.trace().real() == Approx(double(sys.total_dim()) / 4.0));
    for (std::size_t k = 0; k < sys.nuclei().size(); ++k) {
      const auto n = nuclear_spin(sys, k);
      CHECK(max_abs(commutator(s, n.x)) < 1e-12);
      CHECK(max_abs(commutator(s, n.y)) < 1e-12);
    }
  }
}

TEST_CASE("named states", "[spin_core]") {
  const SpinSystem bare;
  const Matrix qs = singlet_projector(bare);
  const Matrix qt = triplet_projector(bare);

  const DensityState coherent = named_state(bare, "coherent_plus");
  CHECK(trace_of_product(qs, coherent.matrix()).real() == Approx(0.5));
  CHECK(trace_of_product(qt, coherent.matrix()).real() == Approx(0.5));

  const DensityState singlet = named_state(bare, NamedState::singlet);
  CHECK(trace_of_product(qs, singlet.matrix()).real() == Approx(1.0));

  namespace es = electron_states;
  const Matrix mixed = 0.5 * (es::singlet() * es::singlet().adjoint() +
                              es::triplet_0() * es::triplet_0().adjoint());
  CHECK(max_abs_diff(named_state(bare, "mixed_ST").matrix(), mixed) < 1e-15);

  SECTION("nuclei default to maximally mixed") {
    const SpinSystem sys = one_nucleus();
    const DensityState rho = named_state(sys, NamedState::coherent_plus);
    CHECK(rho.trace() == Approx(1.0));
    const Vector psi = (es::singlet() + es::triplet_0()) / std::sqrt(2.0);
    CHECK(max_abs_diff(rho.matrix(), rpsim::testing::with_mixed_nuclei(sys, psi * psi.adjoint())) <
          1e-15);
  }
  SECTION("every named state is a valid density state") {
    for (const SpinSystem& sys : {bare, one_nucleus(), mixed_nuclei()})
      for (const auto& [name, label] : kNamedStates) {
        if (name == NamedState::custom) continue;
        const DensityState rho = named_state(sys, name);
        CHECK_FALSE(density_violation(rho.matrix()).has_value());
        CHECK(rho.trace() == Approx(1.0).margin(1e-12));
      }
  }
  SECTION("custom amplitudes") {
    Vector amp = Vector::Zero(4);
    amp(0) = 0.6;
    amp(3) = Complex(0.0, 0.8);
    const DensityState rho = named_state(one_nucleus(), NamedState::custom, amp);
    CHECK(rho.trace() == Approx(1.0));
    CHECK(rho.dim() == 8);
    Vector full = Vector::Zero(8);
    full(5) = 1.0;
    CHECK(named_state(one_nucleus(), NamedState::custom, full).matrix()(5, 5).real() == 1.0);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(named_state(bare, "jones_hore"), InputError);
    CHECK_THROWS_AS(named_state(bare, NamedState::custom), InputError);
    Vector bad = Vector::Ones(4);
    CHECK_THROWS_AS(named_state(bare, NamedState::custom, bad), InputError);
    CHECK_THROWS_AS(named_state(bare, NamedState::custom, Vector(Vector::Ones(3) / std::sqrt(3.0))),
                    InputError);
  }
}

TEST_CASE("DensityState rejects invalid matrices", "[spin_core]") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.2;
  CHECK_THROWS_AS(DensityState(m), InputError);
  m(0, 0) = 1.0;
  m(0, 1) = 0.5;
  CHECK_THROWS_AS(DensityState(m), InputError);  // not Hermitian
  m(1, 0) = 0.5;
  CHECK_THROWS_AS(DensityState(m), InputError);  // trace 1, eigenvalue < 0
  CHECK_NOTHROW(DensityState(Matrix::Zero(2, 2)));
}
