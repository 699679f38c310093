// panelmc: causal panel estimation via nuclear-norm matrix completion.
//
// Verbs:
//   run        full pipeline: load -> filter -> (residualize) -> CV ->
//              estimators -> aggregation -> bootstrap -> diagnostics -> files
//   summarize  data report: per-unit ranges, adoption timing, filter counts
//   simulate   write a synthetic staggered panel (and its true effects)
//   cv         cross-validation only; writes cv_report.csv
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "panelmc/runner.hpp"

namespace {

panelmc::RunConfig load_config(const std::string& config_path) {
  if (config_path.empty()) return {};
  std::ifstream in(config_path);
  panelmc::require(in.good(), panelmc::ErrorKind::Config, "cannot open config '",
                   config_path, "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    panelmc::fail(panelmc::ErrorKind::Config, "config '", config_path, "': ", e.what());
  }
  return panelmc::parse_run_config(j);
}

struct CommonFlags {
  std::string config_path;
  std::string input;
  std::string out_dir;
  std::vector<std::string> estimators;
  bool residualize = false;
  bool no_residualize = false;
  bool no_bootstrap = false;
  long long seed = -1;
  int min_pre = -1;
  double fixed_lambda = -1.0;

  void attach(CLI::App* cmd, bool with_estimators = true) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--input", input, "long-format panel CSV");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "root RNG seed");
    cmd->add_option("--min-pre", min_pre, "minimum pre-treatment periods filter");
    if (with_estimators) {
      cmd->add_option("--estimators", estimators,
                      "estimators to run (full-mc, cy, combine-apply, did, twfe-pooled)")
          ->delimiter(',');
      cmd->add_flag("--residualize", residualize, "fixed-effect pre-processing");
      cmd->add_flag("--no-residualize", no_residualize, "disable pre-processing");
      cmd->add_flag("--no-bootstrap", no_bootstrap, "skip bootstrap CIs");
      cmd->add_option("--lambda", fixed_lambda, "fixed regularization level (skips CV)");
    }
  }

  panelmc::RunConfig merge() const {
    panelmc::RunConfig cfg = load_config(config_path);
    if (!input.empty()) cfg.input = input;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (min_pre >= 0) cfg.min_pre = min_pre;
    if (!estimators.empty()) {
      cfg.estimators.clear();
      for (const std::string& tag : estimators)
        cfg.estimators.push_back(panelmc::estimator_from_tag(tag));
    }
    if (residualize) cfg.residualize = true;
    if (no_residualize) cfg.residualize = false;
    if (no_bootstrap) cfg.bootstrap_replicates = 0;
    if (fixed_lambda >= 0.0) cfg.fixed_lambda = fixed_lambda;
    return cfg;
  }
};

int cmd_run(const CommonFlags& flags) {
  const panelmc::RunConfig cfg = flags.merge();
  const panelmc::RunArtifacts artifacts = panelmc::run_pipeline(cfg);
  std::cout << "wrote results to " << cfg.out_dir << "\n";
  if (artifacts.summary.contains("chosen_lambda"))
    std::cout << "chosen lambda: " << artifacts.summary["chosen_lambda"] << "\n";
  for (const auto& [tag, study] : artifacts.event_studies) {
    bool has_post = false;
    for (const auto& [k, e] : study.entries) has_post |= k >= 0;
    if (has_post)
      std::cout << tag << ": mean post-treatment effect "
                << panelmc::mean_post_effect(study) << "\n";
  }
  return 0;
}

int cmd_summarize(const CommonFlags& flags, const std::string& json_out) {
  panelmc::RunConfig cfg = flags.merge();
  panelmc::require(!cfg.input.empty(), panelmc::ErrorKind::Config,
                   "summarize: --input (or config.input) is required");
  std::ifstream in(cfg.input);
  panelmc::require(in.good(), panelmc::ErrorKind::Io, "cannot open input '", cfg.input, "'");
  const panelmc::Panel panel = panelmc::load_panel(in, cfg.schema);
  const panelmc::DataReport report = panelmc::summarize_data(panel, cfg.min_pre);

  std::cout << "units: " << report.n_units << ", periods: " << report.n_periods << " ("
            << report.first_label << ".." << report.last_label << ")\n";
  std::cout << "mean within-unit outcome range: " << report.mean_range << "\n";
  std::cout << "retained at min_pre=" << cfg.min_pre << ": " << report.retained_units
            << " (excluded " << report.excluded_units.size() << ")\n";
  if (report.first_adoption_label && report.last_adoption_label)
    std::cout << "adoption span among retained: " << *report.first_adoption_label << ".."
              << *report.last_adoption_label << "\n";
  std::cout << "unit,min,max,range,adoption\n";
  for (const panelmc::UnitSummary& u : report.units) {
    std::cout << u.unit << "," << u.min << "," << u.max << "," << u.range << ",";
    if (u.adoption_label) std::cout << *u.adoption_label;
    std::cout << "\n";
  }
  if (!json_out.empty()) {
    panelmc::write_file_atomic(json_out, [&](std::ostream& out) {
      out << panelmc::data_report_json(report).dump(2) << "\n";
    });
  }
  return 0;
}

int cmd_simulate(const panelmc::SimConfig& sim, const std::string& out_path,
                 const std::string& effects_path) {
  const panelmc::SimResult result = panelmc::simulate_panel(sim);
  panelmc::require(!out_path.empty(), panelmc::ErrorKind::Config,
                   "simulate: --out is required");
  panelmc::write_file_atomic(out_path, [&](std::ostream& out) {
    panelmc::write_panel(out, result.panel);
  });
  if (!effects_path.empty()) {
    panelmc::write_file_atomic(effects_path, [&](std::ostream& out) {
      out << "unit,period,true_effect\n";
      for (int i = 0; i < result.panel.n_units(); ++i)
        for (int j = 0; j < result.panel.n_periods(); ++j)
          out << result.panel.unit_ids[i] << "," << result.panel.period_labels[j] << ","
              << panelmc::format_double(result.true_effects(i, j)) << "\n";
    });
  }
  std::cout << "wrote " << result.panel.n_units() << "x" << result.panel.n_periods()
            << " panel to " << out_path << "\n";
  return 0;
}

int cmd_cv(const CommonFlags& flags) {
  const panelmc::RunConfig cfg = flags.merge();
  const panelmc::CVReport report = panelmc::run_cv(cfg);
  std::cout << "scheme: " << panelmc::cv_scheme_name(report.scheme) << "\n";
  std::cout << "chosen lambda: " << report.chosen_lambda << "\n";
  for (std::size_t l = 0; l < report.lambda_grid.size(); ++l)
    std::cout << "  lambda=" << report.lambda_grid[l]
              << " mean held-out error=" << report.mean_errors[l] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal panel estimation via nuclear-norm matrix completion"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "run the full estimation pipeline");
  run_flags.attach(run_cmd);

  CommonFlags sum_flags;
  std::string sum_json_out;
  CLI::App* sum_cmd = app.add_subcommand("summarize", "summarize the input panel");
  sum_flags.attach(sum_cmd, false);
  sum_cmd->add_option("--json-out", sum_json_out, "also write the report as JSON");

  panelmc::SimConfig sim;
  std::string sim_out, sim_effects_out, sim_adoption = "random-staggered",
                       sim_effect_shape = "constant";
  long long sim_seed = 0;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a synthetic panel");
  sim_cmd->add_option("--units", sim.n_units, "number of units");
  sim_cmd->add_option("--periods", sim.n_periods, "number of periods");
  sim_cmd->add_option("--rank", sim.rank, "latent factor rank");
  sim_cmd->add_option("--factor-scale", sim.factor_scale, "factor loading scale");
  sim_cmd->add_option("--noise", sim.noise_scale, "idiosyncratic noise scale");
  sim_cmd->add_option("--never-fraction", sim.never_fraction, "share of never-treated units");
  sim_cmd->add_option("--min-adoption", sim.min_adoption_period, "earliest adoption period");
  sim_cmd->add_option("--adoption-mechanism", sim_adoption,
                      "random-staggered or factor-selected");
  sim_cmd->add_option("--effect", sim.effect_base, "treatment effect at k=0");
  sim_cmd->add_option("--effect-slope", sim.effect_slope, "per-period effect ramp");
  sim_cmd->add_option("--effect-shape", sim_effect_shape, "constant or ramp");
  sim_cmd->add_option("--seed", sim_seed, "RNG seed");
  sim_cmd->add_option("--out", sim_out, "output panel CSV")->required();
  sim_cmd->add_option("--effects-out", sim_effects_out, "also write true effects CSV");

  CommonFlags cv_flags;
  CLI::App* cv_cmd = app.add_subcommand("cv", "cross-validate the regularization level");
  cv_flags.attach(cv_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags);
    if (sum_cmd->parsed()) return cmd_summarize(sum_flags, sum_json_out);
    if (sim_cmd->parsed()) {
      sim.seed = static_cast<std::uint64_t>(sim_seed);
      if (sim_adoption == "factor-selected")
        sim.adoption_mechanism = panelmc::AdoptionMechanism::FactorSelected;
      else
        panelmc::require(sim_adoption == "random-staggered", panelmc::ErrorKind::Config,
                         "unknown adoption mechanism '", sim_adoption, "'");
      if (sim_effect_shape == "ramp")
        sim.effect_shape = panelmc::EffectShape::Ramp;
      else
        panelmc::require(sim_effect_shape == "constant", panelmc::ErrorKind::Config,
                         "unknown effect shape '", sim_effect_shape, "'");
      return cmd_simulate(sim, sim_out, sim_effects_out);
    }
    if (cv_cmd->parsed()) return cmd_cv(cv_flags);
  } catch (const panelmc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
