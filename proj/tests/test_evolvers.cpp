#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <rpsim/evolvers.hpp>

#include "test_support.hpp"

using namespace rpsim;
using Catch::Approx;
namespace es = rpsim::electron_states;

namespace {

const SpinSystem kBare;

// Reference values from tests/oracles/two_level_reaction.py (DOP853, rtol 1e-13)
// for the bare pair with H = 0 started in (|S> + |T0>)/sqrt(2), kS = 1, kT = 0.
struct OraclePoint {
  double t, tr_QS, tr_QT, Y_S;
};
constexpr OraclePoint kCoherentKS1[] = {
    {1.0, 2.644849234182e-01, 3.594722806145e-01, 3.760427959674e-01},
    {2.0, 1.260191620305e-01, 3.103875525946e-01, 5.635932853749e-01},
    {5.0, 1.131156193444e-02, 2.797974401793e-01, 7.088909978862e-01},
    {20.0, 1.203121517675e-08, 2.779584214407e-01, 7.220415665281e-01},
};

Matrix st_plane(double a, double b, double c) {
  const Vector s = es::singlet(), t = es::triplet_0();
  return a * s * s.adjoint() + b * t * t.adjoint() + c * (s * t.adjoint() + t * s.adjoint());
}

RadicalPairModel free_model(double kS, double kT) {
  return RadicalPairModel::build(kBare, HamiltonianSpec{}, ReactionParams{kS, kT});
}

const RecordRow& row_at(const SimulationRecord& rec, double t) {
  for (const auto& r : rec.rows)
    if (std::abs(r.t - t) < 1e-9) return r;
  FAIL("no row at t = " << t);
  return rec.rows.front();
}

Matrix haberkorn(const Matrix& rho, const Matrix& h, const Projectors& q, double kS, double kT) {
  return -kI * (h * rho - rho * h) - 0.5 * kS * (q.singlet * rho + rho * q.singlet) -
         0.5 * kT * (q.triplet * rho + rho * q.triplet);
}

}  // namespace

TEST_CASE("traditional rhs equals the Haberkorn form", "[evolvers]") {
  rpsim::testing::RandomMatrices rnd(1);
  const SpinSystem nuc({NuclearSpec{}});
  for (const SpinSystem* sys : {&kBare, &nuc}) {
    const Projectors q = Projectors::of(*sys);
    for (int i = 0; i < 100; ++i) {
      const Matrix rho = rnd.density(sys->total_dim());
      const Matrix h = rnd.hermitian(sys->total_dim(), 3.0);
      const double kS = rnd.uniform(0, 4), kT = rnd.uniform(0, 4);
      const RhsResult r = rhs_traditional(rho, h, q, ReactionParams{kS, kT});
      CHECK(max_abs_diff(r.drho, haberkorn(rho, h, q, kS, kT)) < 1e-12);
      CHECK(r.dnS_rate == Approx(kS * trace_of_product(q.singlet, rho).real()));
    }
  }
}

TEST_CASE("right-hand side structure", "[evolvers]") {
  rpsim::testing::RandomMatrices rnd(2);
  const Projectors q = Projectors::of(kBare);
  const ReactionParams rates{1.3, 0.4};
  for (int i = 0; i < 50; ++i) {
    const Matrix rho = rnd.density(4);
    const Matrix h = rnd.hermitian(4, 2.0);
    const Matrix d0 = rhs_nonreacting(rho, h, q, rates);
    CHECK(std::abs(d0.trace()) < 1e-13);
    CHECK(hermiticity_defect(d0) < 1e-13);

    // Any p: trace loss equals the total recombination rate.
    const double p = rnd.uniform(0, 1);
    const RhsResult r = rhs_reacting(rho, h, q, rates, p);
    CHECK(real_trace(r.drho) == Approx(-(r.dnS_rate + r.dnT_rate)).margin(1e-13));
    CHECK(hermiticity_defect(r.drho) < 1e-13);
  }

  SECTION("p = 1 removes rho uniformly") {
    const Matrix rho = st_plane(0.5, 0.5, 0.5);
    const RhsResult r = rhs_kominis(rho, Matrix::Zero(4, 4), q, ReactionParams{1.0, 0.0});
    const Matrix expected = rhs_nonreacting(rho, Matrix::Zero(4, 4), q, {1.0, 0.0}) - 0.5 * rho;
    CHECK(max_abs_diff(r.drho, expected) < 1e-14);
  }
  SECTION("incoherent state: kominis equals traditional") {
    const Matrix rho = st_plane(0.3, 0.7, 0.0);
    const Matrix h = Matrix::Zero(4, 4);
    CHECK(max_abs_diff(rhs_kominis(rho, h, q, rates).drho,
                       rhs_traditional(rho, h, q, rates).drho) < 1e-15);
  }
  SECTION("zero trace is a terminated reaction") {
    CHECK_THROWS_AS(rhs_kominis(Matrix::Zero(4, 4), Matrix::Zero(4, 4), q, rates),
                    TerminatedReaction);
  }
}

TEST_CASE("coherent pair, kS = 1, kT = 0: kominis against the oracle", "[evolvers]") {
  const RadicalPairModel model = free_model(1.0, 0.0);
  IntegratorConfig ic;
  ic.dt = 0.01;
  ic.t_max = 20.0;
  const auto rec = integrate(model, named_state(kBare, "coherent_plus"), ic);
  REQUIRE_FALSE(rec.terminated);
  for (const auto& o : kCoherentKS1) {
    const RecordRow& r = row_at(rec, o.t);
    CHECK(r.tr_QS == Approx(o.tr_QS).margin(1e-8));
    CHECK(r.tr_QT == Approx(o.tr_QT).margin(1e-8));
    CHECK(r.dnS_cum == Approx(o.Y_S).margin(1e-8));
    // Along this solution the coherence decays as 1/(1+t).
    CHECK(r.p_coh == Approx(1.0 / (1.0 + o.t)).epsilon(1e-6));
  }
  CHECK(rec.Y_S == Approx(kCoherentKS1[3].Y_S).margin(1e-8));
  CHECK(rec.Y_T == 0.0);
  CHECK(rec.survival() + rec.Y_S == Approx(1.0).margin(1e-9));
}

TEST_CASE("coherent pair, kS = 1, kT = 0: traditional", "[evolvers]") {
  const RadicalPairModel model = free_model(1.0, 0.0);
  IntegratorConfig ic;
  ic.theory = Theory::traditional;
  const auto rec = integrate(model, named_state(kBare, "coherent_plus"), ic);
  for (const auto& r : rec.rows) {
    CHECK(r.tr_QS == Approx(0.5 * std::exp(-r.t)).margin(1e-9));
    CHECK(r.tr_QT == Approx(0.5).margin(1e-12));
  }
  CHECK(rec.rows.back().tr_QS == Approx(1.030576813457e-09).margin(1e-12));
  CHECK(rec.Y_S == Approx(0.5).margin(1e-8));
}

TEST_CASE("other rate combinations against the oracle", "[evolvers]") {
  IntegratorConfig ic;
  ic.t_max = 10.0;
  SECTION("kS = kT = 1") {
    const auto rec = integrate(free_model(1.0, 1.0), named_state(kBare, "coherent_plus"), ic);
    CHECK(rec.survival() == Approx(4.539992976260e-05).epsilon(1e-6));
    CHECK(rec.Y_S == Approx(4.999773000351e-01).margin(1e-8));
    CHECK(rec.Y_T == Approx(4.999773000351e-01).margin(1e-8));
  }
  SECTION("asymmetric rates, unequal amplitudes") {
    const auto rec = integrate(free_model(2.0, 0.5), DensityState(st_plane(0.8, 0.2, 0.4)), ic);
    CHECK(rec.survival() == Approx(5.992200436095e-04).epsilon(1e-5));
    CHECK(rec.Y_S == Approx(8.847670944970e-01).margin(1e-7));
    CHECK(rec.Y_T == Approx(1.146336854593e-01).margin(1e-7));
  }
}

TEST_CASE("integrator converges at fourth order", "[evolvers]") {
  const RadicalPairModel model = free_model(2.0, 0.5);
  const DensityState rho0(st_plane(0.8, 0.2, 0.4));
  auto error_at = [&](double dt) {
    IntegratorConfig ic;
    ic.dt = dt;
    ic.t_max = 10.0;
    return std::abs(integrate(model, rho0, ic).Y_S - 8.847670944970e-01);
  };
  const double e1 = error_at(0.02), e2 = error_at(0.01);
  CHECK(e2 < e1);
  CHECK(e1 / e2 > 8.0);  // fourth order would give 16; the clamp in p can cost a little
}

TEST_CASE("invariants hold along a hyperfine-driven run", "[evolvers]") {
  const SpinSystem sys({NuclearSpec{}});
  HamiltonianSpec spec;
  spec.magnetic_field = {0.0, 0.0, 0.5};
  spec.hyperfine = {HyperfineCoupling{0, 1, 1.0}};
  const RadicalPairModel model = RadicalPairModel::build(sys, spec, ReactionParams{1.0, 0.3});
  for (Theory th : {Theory::kominis, Theory::traditional}) {
    for (CoherenceMode mode : {CoherenceMode::instantaneous, CoherenceMode::averaged}) {
      IntegratorConfig ic;
      ic.theory = th;
      ic.coherence_mode = mode;
      ic.t_max = 10.0;
      const auto rec = integrate(model, named_state(sys, "singlet"), ic);
      double prev = 1.0;
      for (const auto& r : rec.rows) {
        CHECK(r.trace <= prev + 1e-12);
        CHECK(r.trace + r.dnS_cum + r.dnT_cum == Approx(1.0).margin(1e-9));
        CHECK(r.p_coh >= 0.0);
        CHECK(r.p_coh <= 1.0);
        prev = r.trace;
      }
      CHECK(min_eigenvalue(rec.final_rho) > -1e-9);
    }
  }
}

TEST_CASE("non-reacting evolution preserves the trace", "[evolvers]") {
  const SpinSystem sys({NuclearSpec{}});
  HamiltonianSpec spec;
  spec.hyperfine = {HyperfineCoupling{0, 1, 2.0}};
  const RadicalPairModel model = RadicalPairModel::build(sys, spec, ReactionParams{1.0, 0.0});
  IntegratorConfig ic;
  ic.theory = Theory::nonreacting;
  ic.t_max = 5.0;
  const auto rec = integrate(model, named_state(sys, "coherent_plus"), ic);
  for (const auto& r : rec.rows) CHECK(r.trace == Approx(1.0).margin(1e-12));
  CHECK(rec.Y_S == 0.0);
}

TEST_CASE("trace floor terminates the run", "[evolvers]") {
  IntegratorConfig ic;
  ic.t_max = 40.0;
  const auto rec = integrate(free_model(1.0, 1.0), named_state(kBare, "coherent_plus"), ic);
  CHECK(rec.terminated);
  CHECK(rec.rows.back().t < 40.0);
  CHECK(rec.survival() < ic.trace_floor);
}

TEST_CASE("integrator input validation", "[evolvers]") {
  const RadicalPairModel model = free_model(1.0, 0.0);
  const DensityState rho0 = named_state(kBare, "singlet");
  IntegratorConfig ic;
  ic.dt = 0.1;
  CHECK_THROWS_AS(integrate(model, rho0, ic), InputError);
  ic = {};
  ic.dt = -1.0;
  CHECK_THROWS_AS(integrate(model, rho0, ic), InputError);
  ic = {};
  CHECK_THROWS_AS(integrate(free_model(0.0, 0.0), rho0, ic), InputError);
  ic.theory = Theory::nonreacting;
  CHECK_NOTHROW(integrate(free_model(0.0, 0.0), rho0, ic));
  CHECK_THROWS_AS(integrate(model, DensityState(Matrix(0.5 * rho0.matrix())), IntegratorConfig{}),
                  InputError);
  CHECK_THROWS_AS(ReactionParams({-1.0, 0.0}).validate(), InputError);
  CHECK_THROWS_AS(parse_theory("jones_hore"), InputError);
  CHECK(parse_theory("traditional") == Theory::traditional);
}

TEST_CASE("one-step comparison of the two theories", "[evolvers]") {
  const DensityState rho1 = named_state(kBare, "coherent_plus");
  const ReactionParams rates{1.0, 0.0};
  const double N = 1000.0;
  const auto a = one_step_comparison(N, rho1, rates, 1e-3);
  const auto b = one_step_comparison(N, rho1, rates, 5e-4);
  CHECK(a.dn_S == Approx(0.5));
  CHECK(a.rate_trace_kominis == Approx(-N / 2).epsilon(1e-3));
  CHECK(a.rate_trace_traditional == Approx(-N / 2).epsilon(1e-3));
  // Residuals are second order in dt.
  CHECK(a.residual_kominis < 1e-3 * N * 1e-3);
  CHECK(a.residual_traditional < 1e-3 * N * 1e-3);
  CHECK(a.residual_kominis / b.residual_kominis == Approx(4.0).epsilon(0.05));
  CHECK(a.residual_traditional / b.residual_traditional == Approx(4.0).epsilon(0.05));
  // The theories differ at first order.
  CHECK(max_abs_diff(a.drho_kominis, a.drho_traditional) > 0.1 * N * 1e-3);
  CHECK_THROWS_AS(one_step_comparison(N, rho1, ReactionParams{1.0, 1.0}, 1e-3), InputError);
}
