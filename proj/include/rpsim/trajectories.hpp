#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpsim/evolvers.hpp"
#include "rpsim/parallel.hpp"
#include "rpsim/rng.hpp"
#include "rpsim/spin_core.hpp"

// Single-molecule quantum trajectories. Each step of length dt a live pair
//   1. recombines through the singlet (prob kS dt <Q_S>) or triplet channel
//      (prob kT dt <Q_T>), ending the trajectory; otherwise
//   2. is projected by Q_S (prob (kS+kT)/2 dt <Q_S>) or Q_T (prob
//      (kS+kT)/2 dt <Q_T>) and renormalised; otherwise
//   3. evolves unitarily by exp(-i H dt).
// The recombination draw always precedes the measurement draw.

namespace rpsim {

enum class TrajectoryStatus : std::uint8_t { alive, recombined_singlet, recombined_triplet };

enum class StepEvent : std::uint8_t {
  unitary,
  recombined_singlet,
  recombined_triplet,
  projected_singlet,
  projected_triplet,
};

struct TrajectoryState {
  Vector psi;
  TrajectoryStatus status = TrajectoryStatus::alive;
  double t = 0.0;
};

struct TrajectoryConfig {
  double dt = 1e-3;
  double t_max = 20.0;
  std::size_t n_trajectories = 100000;
  std::uint64_t seed = 1;
  bool record_mean_state = false;
  std::vector<double> sample_times;
  // Disabled for the comparison against the non-reacting equation.
  bool recombination = true;
  unsigned threads = 0;  // 0: RPSIM_THREADS or hardware concurrency

  friend bool operator==(const TrajectoryConfig&, const TrajectoryConfig&) = default;
};

inline constexpr double kMaxTrajectoryStepProduct = 0.01;

inline void validate(const TrajectoryConfig& config, const ReactionParams& rates) {
  rates.validate();
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) throw InputError("trajectory dt must be > 0");
  if (!(config.t_max >= 0.0) || !std::isfinite(config.t_max))
    throw InputError("trajectory t_max must be finite and >= 0");
  if (config.n_trajectories < 1) throw InputError("n_trajectories must be >= 1");
  if (config.dt * rates.total() > kMaxTrajectoryStepProduct + 1e-12)
    throw InputError("trajectory step too large: dt * (k_S + k_T) = " +
                     to_text(config.dt * rates.total()) + " exceeds bound " +
                     to_text(kMaxTrajectoryStepProduct));
  for (double t : config.sample_times)
    if (!(t >= 0.0) || t > config.t_max + 1e-12)
      throw InputError("sample time " + to_text(t) + " outside [0, t_max]");
}

struct StepProbabilities {
  double recombine_singlet = 0.0;
  double recombine_triplet = 0.0;
  double project_singlet = 0.0;
  double project_triplet = 0.0;
};

// Precomputed per-run data for stepping pure states. Uses Q_S = |S><S| (x) I,
// so singlet amplitudes are read off per nuclear index.
class TrajectoryPropagator {
 public:
  TrajectoryPropagator(const RadicalPairModel& model, double dt, bool recombination = true)
      : rates_(model.rates), dt_(dt), recombination_(recombination) {
    const Eigen::Index dim = model.dim();
    if (dim % 4 != 0) throw InputError("model dimension must be a multiple of 4");
    nuclear_dim_ = dim / 4;
    hamiltonian_ = model.hamiltonian;
    trivial_hamiltonian_ = max_abs(model.hamiltonian) == 0.0;
    if (!trivial_hamiltonian_) unitary_ = unitary_propagator(model.hamiltonian, dt);
    h_norm_ = trivial_hamiltonian_ ? 0.0 : spectral_norm_hermitian(model.hamiltonian);
    buffer_.resize(dim);
  }

  double dt() const { return dt_; }

  // <psi|Q_S|psi> for a normalised psi.
  double singlet_population(const Vector& psi) const {
    double acc = 0.0;
    const Eigen::Index nd = nuclear_dim_;
    for (Eigen::Index m = 0; m < nd; ++m) acc += std::norm(psi(nd + m) - psi(2 * nd + m));
    return std::clamp(0.5 * acc, 0.0, 1.0);
  }

  StepProbabilities probabilities(const Vector& psi) const {
    const double ps = singlet_population(psi);
    const double pt = 1.0 - ps;
    StepProbabilities p;
    if (recombination_) {
      p.recombine_singlet = rates_.k_S * dt_ * ps;
      p.recombine_triplet = rates_.k_T * dt_ * pt;
    }
    const double measure = 0.5 * rates_.total() * dt_;
    p.project_singlet = measure * ps;
    p.project_triplet = measure * pt;
    return p;
  }

  StepEvent step(TrajectoryState& state, CounterRng& rng) {
    if (state.status != TrajectoryStatus::alive)
      throw InputError("cannot step a recombined trajectory");
    const StepProbabilities p = probabilities(state.psi);
    state.t += dt_;
    if (recombination_) {
      const double u = rng.uniform();
      if (u < p.recombine_singlet) {
        state.status = TrajectoryStatus::recombined_singlet;
        return StepEvent::recombined_singlet;
      }
      if (u < p.recombine_singlet + p.recombine_triplet) {
        state.status = TrajectoryStatus::recombined_triplet;
        return StepEvent::recombined_triplet;
      }
    }
    const double u = rng.uniform();
    if (u < p.project_singlet) {
      project(state.psi, true);
      return StepEvent::projected_singlet;
    }
    if (u < p.project_singlet + p.project_triplet) {
      project(state.psi, false);
      return StepEvent::projected_triplet;
    }
    if (!trivial_hamiltonian_) {
      buffer_.noalias() = unitary_ * state.psi;
      state.psi.swap(buffer_);
    }
    return StepEvent::unitary;
  }

  // True when no further step can change psi|psi| or end the trajectory:
  // no reachable recombination channel, projections act trivially and psi is
  // an eigenvector of H.
  bool absorbed(const Vector& psi) const {
    constexpr double kTiny = 1e-14;
    const double ps = singlet_population(psi);
    const double pt = 1.0 - ps;
    if (std::min(ps, pt) > kTiny) return false;
    if (recombination_ && rates_.k_S * ps + rates_.k_T * pt > kTiny) return false;
    if (trivial_hamiltonian_) return true;
    const Vector hpsi = hamiltonian_ * psi;
    const Complex energy = psi.dot(hpsi);
    return (hpsi - energy * psi).norm() <= 1e-12 * (1.0 + h_norm_);
  }

 private:
  void project(Vector& psi, bool onto_singlet) const {
    const Eigen::Index nd = nuclear_dim_;
    for (Eigen::Index m = 0; m < nd; ++m) {
      // Components along |S> and |T0> in the (updown, downup) plane.
      const Complex a = psi(nd + m), b = psi(2 * nd + m);
      const Complex s = 0.5 * (a - b);
      if (onto_singlet) {
        psi(m) = 0.0;
        psi(nd + m) = s;
        psi(2 * nd + m) = -s;
        psi(3 * nd + m) = 0.0;
      } else {
        psi(nd + m) = a - s;
        psi(2 * nd + m) = b + s;
      }
    }
    psi.normalize();
  }

  ReactionParams rates_;
  double dt_;
  bool recombination_;
  Eigen::Index nuclear_dim_ = 1;
  bool trivial_hamiltonian_ = true;
  Matrix hamiltonian_;
  Matrix unitary_;
  double h_norm_ = 0.0;
  Vector buffer_;
};

inline StepEvent trajectory_step(TrajectoryState& state, TrajectoryPropagator& propagator,
                                 CounterRng& rng) {
  return propagator.step(state, rng);
}

// Pure-state decomposition of a mixed state: eigenvectors weighted by
// eigenvalues. Inside a degenerate eigenspace the basis is rotated to
// diagonalise Q_S, so S/T-incoherent mixtures sample S-pure and T-pure
// members rather than arbitrary superpositions.
inline PureEnsemble spectral_components(const Matrix& rho, const Projectors& q,
                                        double degeneracy_tol = 1e-10, double drop_below = 1e-13) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(rho));
  const Eigen::VectorXd& lambda = es.eigenvalues();
  Matrix v = es.eigenvectors();
  const Eigen::Index n = lambda.size();
  for (Eigen::Index start = 0; start < n;) {
    Eigen::Index end = start + 1;
    while (end < n && lambda(end) - lambda(start) <= degeneracy_tol) ++end;
    if (end - start > 1) {
      const Matrix block = v.middleCols(start, end - start);
      Eigen::SelfAdjointEigenSolver<Matrix> inner(
          hermitian_part(Matrix(block.adjoint() * q.singlet * block)));
      v.middleCols(start, end - start) = block * inner.eigenvectors();
    }
    start = end;
  }
  PureEnsemble out;
  double total = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (lambda(i) <= drop_below) continue;
    out.weights.push_back(lambda(i));
    out.states.push_back(v.col(i).normalized());
    total += lambda(i);
  }
  if (out.states.empty()) throw InputError("cannot sample a zero-trace state");
  for (double& w : out.weights) w /= total;
  return out;
}

struct MeanStateSample {
  double t = 0.0;
  Matrix mean;  // ensemble average of |psi><psi| (zero for recombined)
  Eigen::MatrixXd se_real;
  Eigen::MatrixXd se_imag;
};

struct McReport {
  std::size_t n_trajectories = 0;
  std::size_t n_singlet = 0;
  std::size_t n_triplet = 0;
  std::size_t n_alive = 0;
  std::size_t first_step_singlet_projections = 0;
  double Y_S = 0.0;
  double Y_T = 0.0;
  double survival = 0.0;
  double se_Y_S = 0.0;
  double se_Y_T = 0.0;
  double se_survival = 0.0;
  std::vector<MeanStateSample> mean_state;
};

namespace detail {

inline constexpr std::size_t kTrajectoryBlock = 1024;

struct BlockTally {
  std::size_t singlet = 0, triplet = 0, alive = 0, first_step_singlet = 0;
  std::vector<Matrix> sum;
  std::vector<Eigen::MatrixXd> sumsq_re, sumsq_im;
};

inline std::vector<long> sample_steps(const TrajectoryConfig& config) {
  std::vector<long> steps;
  for (double t : config.sample_times) steps.push_back(std::lround(t / config.dt));
  return steps;
}

inline void accumulate(BlockTally& tally, std::size_t slot, const Vector& psi) {
  const Matrix outer = psi * psi.adjoint();
  tally.sum[slot] += outer;
  tally.sumsq_re[slot] += outer.real().cwiseAbs2();
  tally.sumsq_im[slot] += outer.imag().cwiseAbs2();
}

}  // namespace detail

inline McReport run_ensemble(const PureEnsemble& initial, const RadicalPairModel& model,
                             const TrajectoryConfig& config) {
  validate(config, model.rates);
  if (initial.states.empty()) throw InputError("empty initial ensemble");
  for (const auto& s : initial.states) {
    if (s.size() != model.dim()) throw InputError("initial state dimension does not match model");
    if (std::abs(s.squaredNorm() - 1.0) > 1e-9) throw InputError("initial states must be normalised");
  }
  std::vector<double> cumulative;
  double acc = 0.0;
  for (double w : initial.weights) {
    if (!(w >= 0.0)) throw InputError("ensemble weights must be non-negative");
    cumulative.push_back(acc += w);
  }
  if (std::abs(acc - 1.0) > 1e-9) throw InputError("ensemble weights must sum to 1");

  const long n_steps = std::lround(config.t_max / config.dt);
  const std::vector<long> sample_at = detail::sample_steps(config);
  const bool record = config.record_mean_state && !sample_at.empty();
  const Eigen::Index dim = model.dim();
  const std::size_t n = config.n_trajectories;
  const std::size_t n_blocks = (n + detail::kTrajectoryBlock - 1) / detail::kTrajectoryBlock;
  std::vector<detail::BlockTally> tallies(n_blocks);
  const TrajectoryPropagator prototype(model, config.dt, config.recombination);

  auto run_block = [&](std::size_t block) {
    TrajectoryPropagator propagator = prototype;
    detail::BlockTally& tally = tallies[block];
    if (record) {
      tally.sum.assign(sample_at.size(), Matrix::Zero(dim, dim));
      tally.sumsq_re.assign(sample_at.size(), Eigen::MatrixXd::Zero(dim, dim));
      tally.sumsq_im.assign(sample_at.size(), Eigen::MatrixXd::Zero(dim, dim));
    }
    const std::size_t first = block * detail::kTrajectoryBlock;
    const std::size_t last = std::min(n, first + detail::kTrajectoryBlock);
    for (std::size_t i = first; i < last; ++i) {
      CounterRng rng(config.seed, i);
      std::size_t component = 0;
      if (initial.states.size() > 1) {
        const double u = rng.uniform();
        component = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        component = std::min(component, initial.states.size() - 1);
      }
      TrajectoryState state{initial.states[component], TrajectoryStatus::alive, 0.0};
      auto record_samples = [&](long step_index) {
        if (!record) return;
        for (std::size_t k = 0; k < sample_at.size(); ++k)
          if (sample_at[k] == step_index) detail::accumulate(tally, k, state.psi);
      };
      auto record_remaining = [&](long from_step) {
        if (!record) return;
        for (std::size_t k = 0; k < sample_at.size(); ++k)
          if (sample_at[k] > from_step) detail::accumulate(tally, k, state.psi);
      };

      record_samples(0);
      bool absorbed = propagator.absorbed(state.psi);
      for (long step = 1; step <= n_steps && !absorbed; ++step) {
        const StepEvent ev = propagator.step(state, rng);
        if (state.status != TrajectoryStatus::alive) break;
        if (step == 1 && ev == StepEvent::projected_singlet) ++tally.first_step_singlet;
        record_samples(step);
        if (ev == StepEvent::projected_singlet || ev == StepEvent::projected_triplet) {
          absorbed = propagator.absorbed(state.psi);
          if (absorbed) record_remaining(step);
        }
      }
      if (absorbed && state.status == TrajectoryStatus::alive && state.t == 0.0)
        record_remaining(0);
      switch (state.status) {
        case TrajectoryStatus::alive: ++tally.alive; break;
        case TrajectoryStatus::recombined_singlet: ++tally.singlet; break;
        case TrajectoryStatus::recombined_triplet: ++tally.triplet; break;
      }
    }
  };
  parallel_for_blocks(n_blocks, config.threads ? config.threads : default_thread_count(),
                      run_block);

  McReport rep;
  rep.n_trajectories = n;
  std::vector<Matrix> sum(sample_at.size(), Matrix::Zero(dim, dim));
  std::vector<Eigen::MatrixXd> sq_re(sample_at.size(), Eigen::MatrixXd::Zero(dim, dim));
  std::vector<Eigen::MatrixXd> sq_im(sample_at.size(), Eigen::MatrixXd::Zero(dim, dim));
  for (const auto& t : tallies) {
    rep.n_singlet += t.singlet;
    rep.n_triplet += t.triplet;
    rep.n_alive += t.alive;
    rep.first_step_singlet_projections += t.first_step_singlet;
    if (record) {
      for (std::size_t k = 0; k < sample_at.size(); ++k) {
        sum[k] += t.sum[k];
        sq_re[k] += t.sumsq_re[k];
        sq_im[k] += t.sumsq_im[k];
      }
    }
  }
  const double nd = static_cast<double>(n);
  rep.Y_S = static_cast<double>(rep.n_singlet) / nd;
  rep.Y_T = static_cast<double>(rep.n_triplet) / nd;
  rep.survival = static_cast<double>(rep.n_alive) / nd;
  auto binomial_se = [nd](double p) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / nd); };
  rep.se_Y_S = binomial_se(rep.Y_S);
  rep.se_Y_T = binomial_se(rep.Y_T);
  rep.se_survival = binomial_se(rep.survival);
  if (record) {
    for (std::size_t k = 0; k < sample_at.size(); ++k) {
      MeanStateSample s;
      s.t = static_cast<double>(sample_at[k]) * config.dt;
      s.mean = sum[k] / nd;
      auto se = [nd](const Eigen::MatrixXd& sq, const Eigen::MatrixXd& mean) {
        if (nd < 2) return Eigen::MatrixXd(Eigen::MatrixXd::Zero(mean.rows(), mean.cols()));
        Eigen::MatrixXd var = (sq - nd * mean.cwiseAbs2()) / (nd - 1.0);
        return Eigen::MatrixXd(var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(nd));
      };
      s.se_real = se(sq_re[k], s.mean.real());
      s.se_imag = se(sq_im[k], s.mean.imag());
      rep.mean_state.push_back(std::move(s));
    }
  }
  return rep;
}

inline McReport run_ensemble(const DensityState& rho0, const RadicalPairModel& model,
                             const TrajectoryConfig& config) {
  return run_ensemble(spectral_components(rho0.matrix(), model.projectors), model, config);
}

struct MeanStateComparisonPoint {
  double t = 0.0;
  double max_abs_deviation = 0.0;
  double max_z = 0.0;  // max |deviation| / SE over entries with SE > 0
  bool within = true;  // every entry within n_sigma SE (+ abs_floor)
  Matrix trajectory_mean;
  Matrix master;
};

struct MeanStateComparison {
  double n_sigma = 3.0;
  double abs_floor = 1e-9;
  std::vector<MeanStateComparisonPoint> points;
  bool all_within() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.within; });
  }
};

// Recombination-free trajectory average against the non-reacting master
// equation at each of config.sample_times.
inline MeanStateComparison mean_state_vs_master(const PureEnsemble& initial,
                                                const RadicalPairModel& model,
                                                TrajectoryConfig config, double master_dt = 1e-3,
                                                double n_sigma = 3.0, double abs_floor = 1e-9) {
  if (config.sample_times.empty()) throw InputError("mean-state comparison needs sample_times");
  config.recombination = false;
  config.record_mean_state = true;
  const McReport rep = run_ensemble(initial, model, config);

  const double scale = std::max(model.rates.total(), spectral_norm_hermitian(model.hamiltonian));
  if (scale > 0.0) master_dt = std::min(master_dt, kMaxStepProduct / scale);
  const DensityState rho0(initial.density());

  MeanStateComparison out;
  out.n_sigma = n_sigma;
  out.abs_floor = abs_floor;
  for (const auto& sample : rep.mean_state) {
    MeanStateComparisonPoint pt;
    pt.t = sample.t;
    pt.trajectory_mean = sample.mean;
    if (sample.t == 0.0) {
      pt.master = rho0.matrix();
    } else {
      IntegratorConfig ic;
      ic.dt = master_dt;
      ic.t_max = sample.t;
      ic.theory = Theory::nonreacting;
      pt.master = integrate(model, rho0, ic).final_rho;
    }
    for (Eigen::Index i = 0; i < pt.master.rows(); ++i) {
      for (Eigen::Index j = 0; j < pt.master.cols(); ++j) {
        const Complex d = pt.trajectory_mean(i, j) - pt.master(i, j);
        const std::array<std::pair<double, double>, 2> parts{
            {{std::abs(d.real()), sample.se_real(i, j)}, {std::abs(d.imag()), sample.se_imag(i, j)}}};
        for (const auto& [dev, se] : parts) {
          pt.max_abs_deviation = std::max(pt.max_abs_deviation, dev);
          if (se > 0.0) pt.max_z = std::max(pt.max_z, dev / se);
          if (dev > n_sigma * se + abs_floor) pt.within = false;
        }
      }
    }
    out.points.push_back(std::move(pt));
  }
  return out;
}

}  // namespace rpsim
