#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rpsim/evolvers.hpp"
#include "rpsim/parallel.hpp"

namespace rpsim {

// A preparation history: each molecule is in one of the component states and
// we only lack the knowledge of which. Under the nonlinear reaction equation
// this differs from evolving the summed density matrix.
class ProperMixture {
 public:
  struct Component {
    double weight;
    DensityState state;
  };

  explicit ProperMixture(std::vector<Component> components) : components_(std::move(components)) {
    if (components_.empty()) throw InputError("proper mixture needs at least one component");
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
        throw InputError("mixture weights must be finite and non-negative");
      if (c.state.dim() != components_.front().state.dim())
        throw InputError("mixture components must share a dimension");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("mixture weights must sum to 1");
  }

  const std::vector<Component>& components() const { return components_; }

  // The improper counterpart: the weighted sum of the component matrices.
  DensityState summed() const {
    Matrix rho = Matrix::Zero(components_.front().state.dim(), components_.front().state.dim());
    for (const auto& c : components_) rho += c.weight * c.state.matrix();
    return DensityState(rho);
  }

 private:
  std::vector<Component> components_;
};

struct ProperRecord {
  SimulationRecord aggregate;
  std::vector<SimulationRecord> components;
};

// Components are integrated independently and their observables weight-summed
// row by row. A component that hit the trace floor early holds its last row.
// The aggregated p_coh column is the trace-weighted mean of the components'.
inline ProperRecord evolve_proper(const ProperMixture& mixture, const RadicalPairModel& model,
                                  const IntegratorConfig& config, unsigned threads = 0) {
  const auto& comps = mixture.components();
  ProperRecord out;
  out.components.resize(comps.size());
  parallel_for_blocks(comps.size(), threads ? threads : default_thread_count(),
                      [&](std::size_t i) {
                        out.components[i] = integrate(model, comps[i].state, config);
                      });

  std::size_t n_rows = 0;
  for (const auto& r : out.components) n_rows = std::max(n_rows, r.rows.size());
  const SimulationRecord& longest = *std::max_element(
      out.components.begin(), out.components.end(),
      [](const auto& a, const auto& b) { return a.rows.size() < b.rows.size(); });

  SimulationRecord& agg = out.aggregate;
  agg.rows.resize(n_rows);
  agg.final_rho = Matrix::Zero(model.dim(), model.dim());
  agg.terminated = true;
  for (std::size_t k = 0; k < n_rows; ++k) {
    RecordRow row;
    row.t = longest.rows[k].t;
    double coherent_weight = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto& rows = out.components[i].rows;
      const RecordRow& r = rows[std::min(k, rows.size() - 1)];
      const double w = comps[i].weight;
      row.trace += w * r.trace;
      row.tr_QS += w * r.tr_QS;
      row.tr_QT += w * r.tr_QT;
      row.dnS_cum += w * r.dnS_cum;
      row.dnT_cum += w * r.dnT_cum;
      coherent_weight += w * r.trace * r.p_coh;
    }
    row.p_coh = row.trace > 0.0 ? coherent_weight / row.trace : 0.0;
    agg.rows[k] = row;
  }
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto& rec = out.components[i];
    agg.Y_S += comps[i].weight * rec.Y_S;
    agg.Y_T += comps[i].weight * rec.Y_T;
    agg.final_rho += comps[i].weight * rec.final_rho;
    agg.terminated = agg.terminated && rec.terminated;
  }
  return out;
}

inline SimulationRecord evolve_improper(const DensityState& rho, const RadicalPairModel& model,
                                        const IntegratorConfig& config) {
  return integrate(model, rho, config);
}

inline SimulationRecord evolve_improper(const ProperMixture& mixture,
                                        const RadicalPairModel& model,
                                        const IntegratorConfig& config) {
  return integrate(model, mixture.summed(), config);
}

}  // namespace rpsim
