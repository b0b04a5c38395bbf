#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rpsim/coherence.hpp"
#include "rpsim/magnetics.hpp"
#include "rpsim/spin_core.hpp"

namespace rpsim {

struct ReactionParams {
  double k_S = 0.0;
  double k_T = 0.0;

  double total() const { return k_S + k_T; }

  void validate() const {
    if (!std::isfinite(k_S) || !std::isfinite(k_T) || k_S < 0.0 || k_T < 0.0)
      throw InputError("recombination rates must be finite and non-negative");
  }

  friend bool operator==(const ReactionParams&, const ReactionParams&) = default;
};

enum class Theory { kominis, traditional, nonreacting };
enum class CoherenceMode { instantaneous, averaged };

inline std::string_view to_string(Theory t) {
  switch (t) {
    case Theory::kominis: return "kominis";
    case Theory::traditional: return "traditional";
    case Theory::nonreacting: return "nonreacting";
  }
  return "?";
}

inline Theory parse_theory(std::string_view s) {
  if (s == "kominis") return Theory::kominis;
  if (s == "traditional") return Theory::traditional;
  if (s == "nonreacting") return Theory::nonreacting;
  throw InputError("unsupported theory '" + std::string(s) +
                   "' (supported: kominis, traditional, nonreacting)");
}

inline std::string_view to_string(CoherenceMode m) {
  return m == CoherenceMode::instantaneous ? "instantaneous" : "averaged";
}

inline CoherenceMode parse_coherence_mode(std::string_view s) {
  if (s == "instantaneous") return CoherenceMode::instantaneous;
  if (s == "averaged") return CoherenceMode::averaged;
  throw InputError("unsupported coherence_mode '" + std::string(s) +
                   "' (supported: instantaneous, averaged)");
}

// Everything the right-hand sides need, built once per run.
struct RadicalPairModel {
  Matrix hamiltonian;
  Projectors projectors;
  ReactionParams rates;

  static RadicalPairModel build(const SpinSystem& system, const HamiltonianSpec& spec,
                                const ReactionParams& rates) {
    rates.validate();
    return {build_hamiltonian(system, spec), Projectors::of(system), rates};
  }

  Eigen::Index dim() const { return hamiltonian.rows(); }
};

struct RhsResult {
  Matrix drho;
  double dnS_rate = 0.0;
  double dnT_rate = 0.0;
};

// -i[H, rho] - (kS+kT)/2 (rho Q_S + Q_S rho - 2 Q_S rho Q_S). Trace preserving.
inline Matrix rhs_nonreacting(const Matrix& rho, const Matrix& h, const Projectors& q,
                              const ReactionParams& rates) {
  require_same_dim(rho, h, "density matrix vs Hamiltonian");
  require_same_dim(rho, q.singlet, "density matrix vs projectors");
  const Matrix qr = q.singlet * rho;
  const Matrix rq = rho * q.singlet;
  return -kI * (h * rho - rho * h) - 0.5 * rates.total() * (rq + qr - 2.0 * qr * q.singlet);
}

// Full reaction equation for a given coherence weight p:
//   rhs_nonreacting - (1-p)(kS Q_S rho Q_S + kT Q_T rho Q_T)
//                   - p (kS Tr{Q_S rho} + kT Tr{Q_T rho}) rho / Tr{rho}
// p = 0 is the traditional theory.
inline RhsResult rhs_reacting(const Matrix& rho, const Matrix& h, const Projectors& q,
                              const ReactionParams& rates, double p, double trace_floor = 0.0) {
  require_same_dim(rho, h, "density matrix vs Hamiltonian");
  require_same_dim(rho, q.singlet, "density matrix vs projectors");
  const Matrix qr = q.singlet * rho;
  const Matrix rq = rho * q.singlet;
  const Matrix rho_ss = qr * q.singlet;
  const double tr_s = qr.trace().real();
  const double tr_t = (q.triplet * rho).trace().real();
  const double tr = tr_s + tr_t;
  if (!(tr > trace_floor))
    throw TerminatedReaction("reaction terminated: Tr{rho} = " + to_text(tr));
  const double dnS = rates.k_S * tr_s;
  const double dnT = rates.k_T * tr_t;

  RhsResult out;
  out.drho = -kI * (h * rho - rho * h) - 0.5 * rates.total() * (rq + qr - 2.0 * rho_ss);
  if (p < 1.0) {
    const Matrix rho_tt = q.triplet * rho * q.triplet;
    out.drho -= (1.0 - p) * (rates.k_S * rho_ss + rates.k_T * rho_tt);
  }
  if (p > 0.0) out.drho -= (p * (dnS + dnT) / tr) * rho;
  out.dnS_rate = dnS;
  out.dnT_rate = dnT;
  return out;
}

inline RhsResult rhs_traditional(const Matrix& rho, const Matrix& h, const Projectors& q,
                                 const ReactionParams& rates, double trace_floor = 0.0) {
  return rhs_reacting(rho, h, q, rates, 0.0, trace_floor);
}

inline RhsResult rhs_kominis(const Matrix& rho, const Matrix& h, const Projectors& q,
                             const ReactionParams& rates,
                             CoherenceMode mode = CoherenceMode::instantaneous,
                             const CoherenceConfig& coherence = {}, double trace_floor = 0.0) {
  if (!(real_trace(rho) > trace_floor))
    throw TerminatedReaction("reaction terminated: Tr{rho} = " + to_text(real_trace(rho)));
  const double p = mode == CoherenceMode::instantaneous
                       ? p_coh(rho, q, coherence)
                       : p_coh_averaged(rho, h, q, coherence, rates.total());
  return rhs_reacting(rho, h, q, rates, p, trace_floor);
}

struct IntegratorConfig {
  double dt = 0.01;
  double t_max = 20.0;
  double trace_floor = 1e-9;
  Theory theory = Theory::kominis;
  CoherenceMode coherence_mode = CoherenceMode::instantaneous;
  CoherenceConfig coherence;
  // Eigen-check every step; disable only for throughput experiments.
  bool check_invariants = true;

  friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

inline constexpr double kMaxStepProduct = 0.05;
// Evolved states may dip below zero by RK truncation error; input states are
// held to the tighter DensityTolerances.
inline constexpr double kPositivityTolerance = 1e-7;

inline void validate(const IntegratorConfig& config, const RadicalPairModel& model) {
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) throw InputError("dt must be > 0");
  if (!(config.t_max >= 0.0) || !std::isfinite(config.t_max))
    throw InputError("t_max must be finite and >= 0");
  if (!(config.trace_floor >= 0.0)) throw InputError("trace_floor must be >= 0");
  config.coherence.validate();
  model.rates.validate();
  if (config.theory != Theory::nonreacting && !(model.rates.total() > 0.0))
    throw InputError("reacting theories need k_S + k_T > 0");
  const double scale = std::max(model.rates.total(), spectral_norm_hermitian(model.hamiltonian));
  if (config.dt * scale > kMaxStepProduct + 1e-12)
    throw InputError("step too large: dt * max(k_S + k_T, |H|) = " +
                     to_text(config.dt * scale) + " exceeds bound " +
                     to_text(kMaxStepProduct));
}

struct RecordRow {
  double t = 0.0;
  double trace = 0.0;
  double tr_QS = 0.0;
  double tr_QT = 0.0;
  double p_coh = 0.0;
  double dnS_cum = 0.0;
  double dnT_cum = 0.0;
};

struct SimulationRecord {
  std::vector<RecordRow> rows;
  double Y_S = 0.0;
  double Y_T = 0.0;
  Matrix final_rho;
  // Stopped early because Tr{rho} fell below the trace floor. The remaining
  // trace is unreacted residue, not assigned to either yield.
  bool terminated = false;

  double survival() const { return rows.empty() ? 0.0 : rows.back().trace; }
};

namespace detail {

// Coherence weight used by the dynamics for each theory.
inline std::function<double(const Matrix&)> coherence_functional(const RadicalPairModel& model,
                                                                 const IntegratorConfig& config) {
  if (config.theory != Theory::kominis) return [](const Matrix&) { return 0.0; };
  if (config.coherence_mode == CoherenceMode::averaged) {
    const double window = config.coherence.tau_window.value_or(
        default_tau_window(model.hamiltonian, model.rates.total()));
    return [avg = AveragedCoherence(model.hamiltonian, model.projectors, window,
                                    config.coherence.tau_samples,
                                    config.coherence.epsilon_denominator)](const Matrix& rho) {
      return avg(rho);
    };
  }
  return [q = model.projectors, c = config.coherence](const Matrix& rho) {
    return p_coh(rho, q, c);
  };
}

inline RhsResult evaluate(const RadicalPairModel& model, const IntegratorConfig& config,
                          const std::function<double(const Matrix&)>& coherence,
                          const Matrix& rho) {
  if (config.theory == Theory::nonreacting)
    return {rhs_nonreacting(rho, model.hamiltonian, model.projectors, model.rates), 0.0, 0.0};
  return rhs_reacting(rho, model.hamiltonian, model.projectors, model.rates, coherence(rho));
}

struct Rk4Step {
  Matrix drho;  // rho(t+h) - rho(t)
  double dnS = 0.0;
  double dnT = 0.0;
};

// Classical RK4 on (rho, nS, nT); the coherence weight is re-evaluated at
// every stage from that stage's rho.
template <class Rhs>
Rk4Step rk4_step(const Matrix& rho, double h, Rhs&& f) {
  const RhsResult k1 = f(rho);
  const RhsResult k2 = f(Matrix(rho + 0.5 * h * k1.drho));
  const RhsResult k3 = f(Matrix(rho + 0.5 * h * k2.drho));
  const RhsResult k4 = f(Matrix(rho + h * k3.drho));
  Rk4Step out;
  out.drho = (h / 6.0) * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho);
  out.dnS = (h / 6.0) * (k1.dnS_rate + 2.0 * k2.dnS_rate + 2.0 * k3.dnS_rate + k4.dnS_rate);
  out.dnT = (h / 6.0) * (k1.dnT_rate + 2.0 * k2.dnT_rate + 2.0 * k3.dnT_rate + k4.dnT_rate);
  return out;
}

inline RecordRow make_row(double t, const Matrix& rho, const Projectors& q, double p,
                          double dnS, double dnT) {
  RecordRow row;
  row.t = t;
  row.tr_QS = trace_of_product(q.singlet, rho).real();
  row.tr_QT = trace_of_product(q.triplet, rho).real();
  row.trace = real_trace(rho);
  row.p_coh = p;
  row.dnS_cum = dnS;
  row.dnT_cum = dnT;
  return row;
}

}  // namespace detail

inline SimulationRecord integrate(const RadicalPairModel& model, const DensityState& rho0,
                                  const IntegratorConfig& config) {
  validate(config, model);
  if (rho0.dim() != model.dim())
    throw InputError("initial state dimension does not match the model");
  if (std::abs(rho0.trace() - 1.0) > 1e-9) throw InputError("initial state must have trace 1");

  const auto coherence = detail::coherence_functional(model, config);
  // The recorded column is the coherence of the state; for kominis it is the
  // weight the dynamics used.
  const auto recorded_coherence =
      config.theory == Theory::kominis
          ? coherence
          : std::function<double(const Matrix&)>(
                [q = model.projectors, c = config.coherence](const Matrix& rho) {
                  return p_coh(rho, q, c);
                });
  auto rhs = [&](const Matrix& rho) { return detail::evaluate(model, config, coherence, rho); };

  SimulationRecord rec;
  Matrix rho = rho0.matrix();
  double dnS = 0.0, dnT = 0.0;
  rec.rows.push_back(detail::make_row(0.0, rho, model.projectors, recorded_coherence(rho), 0.0, 0.0));

  const long n_steps =
      config.t_max == 0.0 ? 0 : static_cast<long>(std::ceil(config.t_max / config.dt - 1e-9));
  const bool reacting = config.theory != Theory::nonreacting;
  DensityTolerances tol;
  for (long step = 1; step <= n_steps; ++step) {
    const double trace_before = rec.rows.back().trace;
    if (trace_before < config.trace_floor) {
      rec.terminated = true;
      break;
    }
    const double t0 = rec.rows.back().t;
    const double t1 = step == n_steps ? config.t_max : static_cast<double>(step) * config.dt;
    const auto inc = detail::rk4_step(rho, t1 - t0, rhs);
    rho += inc.drho;
    dnS += inc.dnS;
    dnT += inc.dnT;

    const double drift = hermiticity_defect(rho);
    if (drift > 1e-12 * std::max(1.0, max_abs(rho)))
      throw InvariantError("hermiticity", step, "drift " + to_text(drift));
    rho = hermitian_part(rho);

    auto row = detail::make_row(t1, rho, model.projectors, 0.0, dnS, dnT);
    if (config.check_invariants) {
      if (!std::isfinite(row.trace)) throw InvariantError("trace", step, "non-finite trace");
      if (row.trace > 1.0 + tol.trace_excess)
        throw InvariantError("trace", step, "trace " + to_text(row.trace) + " exceeds 1");
      if (reacting && row.trace > trace_before + 1e-12)
        throw InvariantError("trace_monotonicity", step, "trace increased");
      const double accounting = std::abs(row.trace + dnS + dnT - rho0.trace());
      if (accounting > 1e-6)
        throw InvariantError("trace_accounting", step, "drift " + to_text(accounting));
      const double lmin = min_eigenvalue(rho);
      if (lmin < -kPositivityTolerance)
        throw InvariantError("positivity", step, "min eigenvalue " + to_text(lmin));
    }
    row.p_coh = row.trace > 0.0 ? recorded_coherence(rho) : 0.0;
    rec.rows.push_back(row);
  }
  if (!rec.terminated && rec.rows.back().trace < config.trace_floor && n_steps > 0)
    rec.terminated = true;
  rec.Y_S = dnS;
  rec.Y_T = dnT;
  rec.final_rho = std::move(rho);
  return rec;
}

// One RK step of N identical coherent molecules, under both theories, next to
// the first-order ensemble decompositions
//   kominis:     d rho = -dn_S rho_1 - (kS dt / 2) rho_coh
//   traditional: d rho = -dn_S rho_1 + N (kS dt / 4)(|T><T| - |S><S|)
// with dn_S = N kS dt / 2 and rho_coh = N (|S><T| + |T><S|)/2.
struct OneStepReport {
  double dn_S = 0.0;
  Matrix drho_kominis;
  Matrix drho_traditional;
  Matrix predicted_kominis;
  Matrix predicted_traditional;
  double residual_kominis = 0.0;      // max entrywise |drho - predicted|
  double residual_traditional = 0.0;
  double rate_trace_kominis = 0.0;    // Tr{d rho}/dt
  double rate_trace_traditional = 0.0;
};

inline OneStepReport one_step_comparison(double n_molecules, const DensityState& rho1,
                                         const ReactionParams& rates, double dt) {
  rates.validate();
  if (rho1.dim() != 4) throw InputError("one-step comparison is defined on the bare electron pair");
  if (rates.k_T != 0.0) throw InputError("one-step comparison requires k_T = 0");
  if (!(n_molecules > 0.0) || !(dt > 0.0)) throw InputError("N and dt must be positive");

  const SpinSystem pair;
  const Projectors q = Projectors::of(pair);
  const Vector s = electron_states::singlet();
  const Vector t = electron_states::triplet_0();
  const Matrix h = Matrix::Zero(4, 4);
  const Matrix rho = n_molecules * rho1.matrix();

  auto kominis = [&](const Matrix& r) { return rhs_kominis(r, h, q, rates); };
  auto traditional = [&](const Matrix& r) { return rhs_traditional(r, h, q, rates); };

  OneStepReport rep;
  rep.dn_S = n_molecules * rates.k_S * dt / 2.0;
  rep.drho_kominis = detail::rk4_step(rho, dt, kominis).drho;
  rep.drho_traditional = detail::rk4_step(rho, dt, traditional).drho;
  const Matrix rho1_coh = 0.5 * (s * t.adjoint() + t * s.adjoint());
  rep.predicted_kominis =
      -rep.dn_S * rho1.matrix() - (rates.k_S * dt / 2.0) * (n_molecules * rho1_coh);
  rep.predicted_traditional =
      -rep.dn_S * rho1.matrix() +
      n_molecules * (rates.k_S * dt / 4.0) * (t * t.adjoint() - s * s.adjoint());
  rep.residual_kominis = max_abs_diff(rep.drho_kominis, rep.predicted_kominis);
  rep.residual_traditional = max_abs_diff(rep.drho_traditional, rep.predicted_traditional);
  rep.rate_trace_kominis = real_trace(rep.drho_kominis) / dt;
  rep.rate_trace_traditional = real_trace(rep.drho_traditional) / dt;
  return rep;
}

}  // namespace rpsim
