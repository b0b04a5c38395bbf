#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <rpsim/trajectories.hpp>

#include "test_support.hpp"

using namespace rpsim;
using Catch::Approx;
namespace es = rpsim::electron_states;

namespace {

const SpinSystem kBare;

RadicalPairModel free_model(double kS, double kT) {
  return RadicalPairModel::build(kBare, HamiltonianSpec{}, ReactionParams{kS, kT});
}

RadicalPairModel hyperfine_model(double kS, double kT) {
  const SpinSystem sys({NuclearSpec{}});
  HamiltonianSpec spec;
  spec.magnetic_field = {0.0, 0.0, 0.7};
  spec.hyperfine = {HyperfineCoupling{0, 1, 2.0}};
  return RadicalPairModel::build(sys, spec, ReactionParams{kS, kT});
}

PureEnsemble pure(const Vector& v) { return {{1.0}, {v}}; }

}  // namespace

TEST_CASE("counter RNG is reproducible and stream separated", "[trajectories][rng]") {
  CounterRng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
  }
  CHECK(a.draws() == 100);
  CounterRng u(1, 0);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    mean += x;
  }
  CHECK(mean / 100000 == Approx(0.5).margin(0.005));
}

TEST_CASE("step probabilities", "[trajectories]") {
  const RadicalPairModel model = free_model(2.0, 0.5);
  const TrajectoryPropagator prop(model, 1e-3);
  const auto p = prop.probabilities(es::singlet());
  CHECK(p.recombine_singlet == Approx(2e-3));
  CHECK(p.recombine_triplet == Approx(0.0).margin(1e-18));
  CHECK(p.project_singlet == Approx(1.25e-3));
  CHECK(p.project_triplet == Approx(0.0).margin(1e-18));

  const Vector psi = (es::singlet() + es::triplet_0()) / std::sqrt(2.0);
  const auto q = prop.probabilities(psi);
  CHECK(q.recombine_singlet == Approx(1e-3));
  CHECK(q.recombine_triplet == Approx(0.25e-3));
  CHECK(q.project_singlet == Approx(0.625e-3));
  CHECK(q.project_triplet == Approx(0.625e-3));

  const TrajectoryPropagator no_recomb(model, 1e-3, false);
  CHECK(no_recomb.probabilities(psi).recombine_singlet == 0.0);
}

TEST_CASE("singlet population matches <psi|Q_S|psi>", "[trajectories]") {
  rpsim::testing::RandomMatrices rnd(12);
  const RadicalPairModel model = hyperfine_model(1.0, 0.0);
  const TrajectoryPropagator prop(model, 1e-3);
  for (int i = 0; i < 100; ++i) {
    const Vector psi = rnd.pure(model.dim());
    CHECK(prop.singlet_population(psi) ==
          Approx(psi.dot(model.projectors.singlet * psi).real()).margin(1e-14));
  }
}

TEST_CASE("projection events land in the measured subspace", "[trajectories]") {
  rpsim::testing::RandomMatrices rnd(13);
  const RadicalPairModel model = hyperfine_model(5.0, 5.0);
  TrajectoryPropagator prop(model, 1e-3, false);
  const Matrix& qs = model.projectors.singlet;
  const Matrix& qt = model.projectors.triplet;
  int seen_s = 0, seen_t = 0;
  for (std::uint64_t stream = 0; stream < 200 && (seen_s < 5 || seen_t < 5); ++stream) {
    CounterRng rng(99, stream);
    TrajectoryState st{rnd.pure(model.dim())};
    for (int k = 0; k < 2000; ++k) {
      const StepEvent ev = trajectory_step(st, prop, rng);
      CHECK(st.psi.norm() == Approx(1.0).margin(1e-12));
      if (ev == StepEvent::projected_singlet) {
        CHECK((qs * st.psi - st.psi).norm() < 1e-12);
        ++seen_s;
        break;
      }
      if (ev == StepEvent::projected_triplet) {
        CHECK((qt * st.psi - st.psi).norm() < 1e-12);
        ++seen_t;
        break;
      }
    }
  }
  CHECK(seen_s >= 5);
  CHECK(seen_t >= 5);
}

TEST_CASE("absorbed states", "[trajectories]") {
  const TrajectoryPropagator prop(free_model(1.0, 0.0), 1e-3);
  CHECK(prop.absorbed(es::triplet_0()));
  CHECK_FALSE(prop.absorbed(es::singlet()));
  CHECK_FALSE(prop.absorbed(Vector((es::singlet() + es::triplet_0()) / std::sqrt(2.0))));
  const TrajectoryPropagator both(free_model(1.0, 1.0), 1e-3);
  CHECK_FALSE(both.absorbed(es::triplet_0()));
  const TrajectoryPropagator hf(hyperfine_model(1.0, 0.0), 1e-3);
  CHECK_FALSE(hf.absorbed(kron(es::triplet_0(), Vector::Unit(2, 0))));
}

TEST_CASE("ensemble results do not depend on the thread count", "[trajectories]") {
  const RadicalPairModel model = hyperfine_model(1.0, 0.5);
  TrajectoryConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 5.0;
  cfg.n_trajectories = 3000;
  cfg.seed = 42;
  cfg.threads = 1;
  const auto init = named_state(SpinSystem({NuclearSpec{}}), "coherent_plus");
  const McReport a = run_ensemble(init, model, cfg);
  cfg.threads = 3;
  const McReport b = run_ensemble(init, model, cfg);
  CHECK(a.n_singlet == b.n_singlet);
  CHECK(a.n_triplet == b.n_triplet);
  CHECK(a.n_alive == b.n_alive);
  CHECK(a.n_singlet + a.n_triplet + a.n_alive == cfg.n_trajectories);
  cfg.seed = 43;
  const McReport c = run_ensemble(init, model, cfg);
  CHECK((c.n_singlet != a.n_singlet || c.n_triplet != a.n_triplet));
}

TEST_CASE("coherent pair recombines through the singlet with yield 3/4", "[trajectories]") {
  TrajectoryConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 20.0;
  cfg.n_trajectories = 20000;
  const McReport rep = run_ensemble(pure((es::singlet() + es::triplet_0()) / std::sqrt(2.0)),
                                    free_model(1.0, 0.0), cfg);
  CHECK(std::abs(rep.Y_S - 0.75) <= 3.0 * rep.se_Y_S);
  CHECK(rep.Y_T == 0.0);
  CHECK(rep.Y_S + rep.survival == Approx(1.0));
}

TEST_CASE("incoherent S/T mixture gives yield 1/2", "[trajectories]") {
  TrajectoryConfig cfg;
  cfg.n_trajectories = 20000;
  const McReport rep = run_ensemble(named_state(kBare, "mixed_ST"), free_model(1.0, 0.0), cfg);
  CHECK(std::abs(rep.Y_S - 0.5) <= 3.0 * rep.se_Y_S);
}

TEST_CASE("first-step singlet projections occur at rate (kS+kT)/2 <Q_S>", "[trajectories]") {
  TrajectoryConfig cfg;
  cfg.dt = 0.01;
  cfg.t_max = 0.01;
  cfg.n_trajectories = 40000;
  const McReport rep = run_ensemble(pure((es::singlet() + es::triplet_0()) / std::sqrt(2.0)),
                                    free_model(1.0, 0.0), cfg);
  // Projection is drawn only when recombination is not: (1 - dt/2) dt/4 per trajectory.
  const double expected = cfg.n_trajectories * (1.0 - cfg.dt / 2) * cfg.dt / 4.0;
  CHECK(std::abs(rep.first_step_singlet_projections - expected) < 4.0 * std::sqrt(expected));
}

TEST_CASE("spectral decomposition of mixed states", "[trajectories]") {
  const Projectors q = Projectors::of(kBare);
  SECTION("S/T-incoherent mixtures decompose into S-pure and T-pure members") {
    const Matrix rho = 0.25 * q.singlet + 0.25 * q.triplet;
    const PureEnsemble e = spectral_components(rho, q);
    REQUIRE(e.states.size() == 4);
    for (const auto& v : e.states) {
      const double ps = v.dot(q.singlet * v).real();
      CHECK((ps < 1e-12 || ps > 1.0 - 1e-12));
    }
    CHECK(max_abs_diff(e.density(), rho) < 1e-12);
  }
  SECTION("random states are reconstructed") {
    rpsim::testing::RandomMatrices rnd(3);
    for (int i = 0; i < 20; ++i) {
      const Matrix rho = rnd.density(4, rnd.integer(1, 4));
      CHECK(max_abs_diff(spectral_components(rho, q).density(), rho) < 1e-10);
    }
  }
}

TEST_CASE("recombination-free trajectory mean follows the non-reacting equation",
          "[trajectories]") {
  const RadicalPairModel model = hyperfine_model(1.0, 0.5);
  TrajectoryConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_max = 2.0;
  cfg.n_trajectories = 4000;
  cfg.sample_times = {0.0, 0.5, 1.0, 2.0};
  const auto init = named_components(SpinSystem({NuclearSpec{}}), NamedState::coherent_plus);
  const auto cmp = mean_state_vs_master(init, model, cfg);
  REQUIRE(cmp.points.size() == 4);
  for (const auto& p : cmp.points) {
    INFO("t = " << p.t << " max z = " << p.max_z);
    CHECK(p.within);
    CHECK(std::abs(p.trajectory_mean.trace() - 1.0) < 1e-9);
  }
}

TEST_CASE("trajectory input validation", "[trajectories]") {
  TrajectoryConfig cfg;
  cfg.dt = 0.1;
  CHECK_THROWS_AS(run_ensemble(named_state(kBare, "singlet"), free_model(1.0, 0.0), cfg),
                  InputError);
  cfg = {};
  cfg.n_trajectories = 0;
  CHECK_THROWS_AS(validate(cfg, ReactionParams{1.0, 0.0}), InputError);
  cfg = {};
  cfg.sample_times = {25.0};
  CHECK_THROWS_AS(validate(cfg, ReactionParams{1.0, 0.0}), InputError);
}
