// rpsim: command-line driver for the radical-pair simulations.
//
//   rpsim simulate     CONFIG   integrate the master equation, write CSV/JSON/plot
//   rpsim trajectories CONFIG   Monte Carlo trajectories (+ mean-state check)
//   rpsim compare      CONFIG   kominis vs traditional side by side
//   rpsim coherence    CONFIG   p_coh of the configured initial state
//
// Exit status: 0 success, 1 config error, 2 runtime or invariant failure,
// 64 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <rpsim/io/config.hpp>
#include <rpsim/io/output.hpp>

namespace fs = std::filesystem;
using namespace rpsim;
using namespace rpsim::io;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

struct Options {
  std::string config_path;
  std::optional<std::string> theory;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

RunConfig load(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  if (opt.theory) cfg.integrator.theory = parse_theory(*opt.theory);
  if (opt.seed) cfg.trajectories.config.seed = *opt.seed;
  io::validate(cfg);
  return cfg;
}

fs::path output_path(const Options& opt, const std::string& configured,
                     const std::string& fallback) {
  const fs::path p = configured.empty() ? fs::path(fallback) : fs::path(configured);
  return p.is_absolute() ? p : fs::path(opt.out_dir) / p;
}

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

void write_json(const fs::path& p, const Json& j) {
  auto out = open_output(p);
  out << j.dump(2) << '\n';
  std::cout << "wrote " << p.string() << '\n';
}

SimulationRecord run_theory(const RunConfig& cfg, const RadicalPairModel& model, Theory theory) {
  IntegratorConfig ic = cfg.integrator;
  ic.theory = theory;
  if (cfg.initial_state.proper_mixture) return evolve_proper(proper_mixture(cfg), model, ic).aggregate;
  return integrate(model, initial_density(cfg), ic);
}

int cmd_simulate(const Options& opt) {
  const RunConfig cfg = load(opt);
  const RadicalPairModel model = cfg.model();
  const SimulationRecord rec = run_theory(cfg, model, cfg.integrator.theory);

  const fs::path csv = output_path(opt, cfg.outputs.csv, "simulate.csv");
  {
    auto out = open_output(csv);
    write_csv(out, rec, cfg.outputs.stride);
  }
  std::cout << "wrote " << csv.string() << '\n';

  Json j{{"command", "simulate"},
         {"theory", std::string(to_string(cfg.integrator.theory))},
         {"result", record_json(rec)}};
  if (cfg.trajectories.enabled)
    j["trajectories"] = mc_json(run_ensemble(pure_ensemble(cfg), model, cfg.trajectories.config));
  j["config"] = to_json(cfg);
  write_json(output_path(opt, cfg.outputs.json, "simulate.json"), j);

  if (!cfg.outputs.plot.empty()) {
    const fs::path svg = output_path(opt, cfg.outputs.plot, "");
    auto out = open_output(svg);
    write_svg(out, {{std::string(to_string(cfg.integrator.theory)), &rec}}, "rpsim simulate");
    std::cout << "wrote " << svg.string() << '\n';
  }
  fmt::print("Y_S = {}  Y_T = {}  survival = {}{}\n", number(rec.Y_S), number(rec.Y_T),
             number(rec.survival()), rec.terminated ? "  (terminated at trace floor)" : "");
  return 0;
}

int cmd_trajectories(const Options& opt) {
  const RunConfig cfg = load(opt);
  validate(cfg.trajectories.config, cfg.reaction);
  const RadicalPairModel model = cfg.model();
  const PureEnsemble initial = pure_ensemble(cfg);
  TrajectoryConfig tc = cfg.trajectories.config;
  tc.record_mean_state = false;
  const McReport rep = run_ensemble(initial, model, tc);

  Json j{{"command", "trajectories"}, {"result", mc_json(rep)}};
  if (!cfg.trajectories.config.sample_times.empty())
    j["mean_state"] = mean_state_json(mean_state_vs_master(initial, model, cfg.trajectories.config));
  j["config"] = to_json(cfg);
  write_json(output_path(opt, cfg.outputs.json, "trajectories.json"), j);
  fmt::print("Y_S = {} +- {}  Y_T = {} +- {}  alive = {}\n", number(rep.Y_S), number(rep.se_Y_S),
             number(rep.Y_T), number(rep.se_Y_T), number(rep.survival));
  return 0;
}

int cmd_compare(const Options& opt) {
  const RunConfig cfg = load(opt);
  const RadicalPairModel model = cfg.model();
  const SimulationRecord kom = run_theory(cfg, model, Theory::kominis);
  const SimulationRecord trad = run_theory(cfg, model, Theory::traditional);
  const Comparison cmp = compare_records(kom, trad);

  const fs::path csv = output_path(opt, cfg.outputs.csv, "compare.csv");
  {
    auto out = open_output(csv);
    write_comparison_csv(out, cmp, cfg.outputs.stride);
  }
  std::cout << "wrote " << csv.string() << '\n';

  Json columns = Json::object();
  for (std::size_t i = 0; i < Comparison::kColumns.size(); ++i)
    columns[Comparison::kColumns[i]] = cmp.max_abs_discrepancy[i];
  Json j{{"command", "compare"},
         {"kominis", record_json(kom)},
         {"traditional", record_json(trad)},
         {"max_discrepancy", cmp.max_discrepancy()},
         {"max_discrepancy_by_column", columns},
         {"config", to_json(cfg)}};
  write_json(output_path(opt, cfg.outputs.json, "compare.json"), j);

  if (!cfg.outputs.plot.empty()) {
    const fs::path svg = output_path(opt, cfg.outputs.plot, "");
    auto out = open_output(svg);
    write_svg(out, {{"kominis", &kom, false}, {"traditional", &trad, true}},
              "kominis (solid) vs traditional (dashed)");
    std::cout << "wrote " << svg.string() << '\n';
  }
  fmt::print("Y_S kominis = {}  traditional = {}  max discrepancy = {}\n", number(kom.Y_S),
             number(trad.Y_S), number(cmp.max_discrepancy()));
  return 0;
}

int cmd_coherence(const Options& opt, std::optional<double> tau_window) {
  const RunConfig cfg = load(opt);
  const RadicalPairModel model = cfg.model();
  const DensityState rho = initial_density(cfg);
  CoherenceConfig cc = cfg.integrator.coherence;
  if (tau_window) cc.tau_window = tau_window;
  const double window = cc.tau_window.value_or(default_tau_window(model.hamiltonian, model.rates.total()));
  const double inst = p_coh(rho, model.projectors, cc);
  const double avg = p_coh_averaged(rho, model.hamiltonian, model.projectors, cc, model.rates.total());
  fmt::print("p_coh = {}\np_coh_averaged = {}\ntau_window = {}\n", number(inst), number(avg),
             number(window));
  if (!cfg.outputs.json.empty())
    write_json(output_path(opt, cfg.outputs.json, ""),
               Json{{"command", "coherence"},
                    {"p_coh", inst},
                    {"p_coh_averaged", avg},
                    {"tau_window", window},
                    {"config", to_json(cfg)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radical-pair spin dynamics: master equations, trajectories, coherence."};
  app.require_subcommand(1);
  app.footer(fmt::format("Thread count for trajectories: {} (default: hardware concurrency).\n"
                         "Exit status: 0 ok, 1 config error, 2 runtime/invariant failure, 64 usage.",
                         kThreadsEnv));

  Options opt;
  std::optional<double> tau_window;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config_path, "YAML run configuration")->required();
    sub->add_option("--out-dir", opt.out_dir, "Directory for relative output paths");
    sub->add_option("--theory", opt.theory, "Override integrator.theory")
        ->check(CLI::IsMember({"kominis", "traditional", "nonreacting"}));
    sub->add_option("--seed", opt.seed, "Override trajectories.seed");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Integrate the master equation");
  CLI::App* trajectories = app.add_subcommand("trajectories", "Run Monte Carlo trajectories");
  CLI::App* compare = app.add_subcommand("compare", "Kominis vs traditional theory");
  CLI::App* coherence = app.add_subcommand("coherence", "Coherence of the initial state");
  for (CLI::App* sub : {simulate, trajectories, compare, coherence}) add_common(sub);
  coherence->add_option("--tau-window", tau_window, "Averaging window for p_coh_averaged");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(opt);
    if (*trajectories) return cmd_trajectories(opt);
    if (*compare) return cmd_compare(opt);
    if (*coherence) return cmd_coherence(opt, tau_window);
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const YAML::Exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
