#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "rpsim/spin_core.hpp"

namespace rpsim {

struct Projectors {
  Matrix singlet;
  Matrix triplet;

  static Projectors of(const SpinSystem& system) {
    return {singlet_projector(system), triplet_projector(system)};
  }
  Eigen::Index dim() const { return singlet.rows(); }
};

// rho = SS + TT + ST + TS with XY = Q_X rho Q_Y.
struct RhoBlocks {
  Matrix SS, TT, ST, TS;

  Matrix sum() const { return SS + TT + ST + TS; }
  Matrix coherent() const { return ST + TS; }
  Matrix incoherent() const { return SS + TT; }
};

inline RhoBlocks decompose(const Matrix& rho, const Projectors& q) {
  require_square(rho, "density matrix");
  require_same_dim(rho, q.singlet, "density matrix vs projectors");
  const Matrix rq_s = rho * q.singlet;
  const Matrix rq_t = rho * q.triplet;
  return {q.singlet * rq_s, q.triplet * rq_t, q.singlet * rq_t, q.triplet * rq_s};
}

inline RhoBlocks decompose(const DensityState& rho, const Projectors& q) {
  return decompose(rho.matrix(), q);
}

struct CoherenceConfig {
  double epsilon_denominator = 1e-12;
  // Averaging window for the time-averaged measure; derived from the
  // Hamiltonian spectrum and the reaction rates when unset.
  std::optional<double> tau_window;
  int tau_samples = 64;

  void validate() const {
    if (!(epsilon_denominator > 0.0)) throw InputError("epsilon_denominator must be > 0");
    if (tau_window && !(*tau_window > 0.0)) throw InputError("tau_window must be > 0");
    if (tau_samples < 8) throw InputError("tau_samples must be >= 8");
  }

  friend bool operator==(const CoherenceConfig&, const CoherenceConfig&) = default;
};

namespace detail {

struct StTraces {
  double total;
  double singlet;
  double triplet;
};

inline StTraces st_traces(const Matrix& rho, const Projectors& q) {
  const double ts = trace_of_product(q.singlet, rho).real();
  const double tt = trace_of_product(q.triplet, rho).real();
  return {ts + tt, ts, tt};
}

// Shared tail of both measures: guard the 0/0 limit and clamp to [0,1].
inline double coherence_ratio(double numerator, const StTraces& tr, double epsilon) {
  if (!(tr.total > 0.0)) throw InputError("coherence of a zero-trace state is undefined");
  const double denominator = tr.singlet * tr.triplet;
  if (denominator < epsilon * tr.total * tr.total) return 0.0;
  return std::clamp(numerator / denominator, 0.0, 1.0);
}

}  // namespace detail

// Tr{rho_ST rho_TS} / (Tr{rho_SS} Tr{rho_TT}).
inline double p_coh(const Matrix& rho, const Projectors& q, const CoherenceConfig& config = {}) {
  require_same_dim(rho, q.singlet, "density matrix vs projectors");
  // Tr{Q_S rho Q_T rho Q_S} = Tr{(Q_S rho)(Q_T rho)}
  const Matrix a = q.singlet * rho;
  const Matrix b = q.triplet * rho;
  const double numerator = trace_of_product(a, b).real();
  return detail::coherence_ratio(numerator, detail::st_traces(rho, q), config.epsilon_denominator);
}

inline double p_coh(const DensityState& rho, const Projectors& q,
                    const CoherenceConfig& config = {}) {
  return p_coh(rho.matrix(), q, config);
}

// Window heuristic: ten periods of the widest splitting of H, never longer
// than half the reaction lifetime 1/(kS+kT). No reactions: no cap. No
// splitting either: 1 (the average is then window independent).
inline double default_tau_window(const Matrix& hamiltonian, double total_rate) {
  const Eigen::VectorXd e = hermitian_eigenvalues(hamiltonian);
  const double gap = e.maxCoeff() - e.minCoeff();
  const double periods = gap > 1e-12 ? 10.0 * 2.0 * std::numbers::pi / gap : 0.0;
  if (total_rate <= 0.0) return periods > 0.0 ? periods : 1.0;
  const double cap = 0.5 / total_rate;
  return periods > 0.0 ? std::min(periods, cap) : cap;
}

// Time-averaged coherence |<<Tr{rho_ST(t) rho_TS(t+tau)}>>| / (Tr rho_SS Tr rho_TT)
// with rho_TS(t+tau) = exp(-iH tau) rho_TS exp(iH tau) and a midpoint rule over
// [0, window]. The propagator phases are precomputed in the eigenbasis of H,
// so repeated evaluation during integration costs a few matrix products.
class AveragedCoherence {
 public:
  AveragedCoherence(const Matrix& hamiltonian, const Projectors& q, double window, int samples,
                    double epsilon = 1e-12)
      : epsilon_(epsilon), window_(window) {
    require_same_dim(hamiltonian, q.singlet, "Hamiltonian vs projectors");
    if (!(window > 0.0)) throw InputError("tau_window must be > 0");
    if (samples < 8) throw InputError("tau_samples must be >= 8");
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(hamiltonian));
    const Matrix& v = es.eigenvectors();
    const Eigen::VectorXd& e = es.eigenvalues();
    const Eigen::Index n = e.size();
    trivial_ = (e.maxCoeff() - e.minCoeff()) * window == 0.0;
    vdag_qs_ = v.adjoint() * q.singlet;
    qt_v_ = q.triplet * v;
    vdag_qt_ = v.adjoint() * q.triplet;
    qs_v_ = q.singlet * v;
    weights_ = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        Complex acc = 0.0;
        for (int m = 0; m < samples; ++m) {
          const double tau = (m + 0.5) * window / samples;
          acc += std::exp(-kI * (e(i) - e(j)) * tau);
        }
        weights_(i, j) = acc / static_cast<double>(samples);
      }
    }
    projectors_ = q;
  }

  double window() const { return window_; }

  double operator()(const Matrix& rho) const {
    if (trivial_) return p_coh(rho, projectors_, CoherenceConfig{epsilon_, window_, 8});
    const Matrix st = vdag_qs_ * rho * qt_v_;  // rho_ST in the eigenbasis
    const Matrix ts = vdag_qt_ * rho * qs_v_;
    // sum_ij ST_ji TS_ij W_ij
    const Complex avg = (st.transpose().array() * ts.array() * weights_.array()).sum();
    return detail::coherence_ratio(std::abs(avg), detail::st_traces(rho, projectors_), epsilon_);
  }

 private:
  double epsilon_;
  double window_;
  bool trivial_ = false;
  Matrix vdag_qs_, qt_v_, vdag_qt_, qs_v_, weights_;
  Projectors projectors_;
};

inline double p_coh_averaged(const Matrix& rho, const Matrix& hamiltonian, const Projectors& q,
                             const CoherenceConfig& config = {}, double total_rate = 0.0) {
  config.validate();
  const double window = config.tau_window.value_or(default_tau_window(hamiltonian, total_rate));
  return AveragedCoherence(hamiltonian, q, window, config.tau_samples,
                           config.epsilon_denominator)(rho);
}

inline double p_coh_averaged(const DensityState& rho, const Matrix& hamiltonian,
                             const Projectors& q, const CoherenceConfig& config = {},
                             double total_rate = 0.0) {
  return p_coh_averaged(rho.matrix(), hamiltonian, q, config, total_rate);
}

}  // namespace rpsim
