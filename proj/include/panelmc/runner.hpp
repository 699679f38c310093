#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "panelmc/bootstrap.hpp"
#include "panelmc/cross_validate.hpp"
#include "panelmc/diagnostics.hpp"
#include "panelmc/panel_io.hpp"
#include "panelmc/pipeline.hpp"
#include "panelmc/simulate.hpp"
#include "panelmc/svg.hpp"
#include "panelmc/version.hpp"

namespace panelmc {

/*
 * Pipeline orchestration behind the CLI:
 *
 *   load -> min-pre filter -> (optional) fixed-effect residualization ->
 *   cross-validation -> estimators -> event/calendar aggregation ->
 *   bootstrap CIs -> diagnostics -> result files.
 *
 * Output files are written atomically (temp file + rename). All randomness
 * flows from config.seed through fixed stream offsets, so identical configs
 * produce byte-identical CSV outputs.
 */

struct LambdaGridSpec {
  int count = 20;
  double min_ratio = 1e-4;
  std::vector<double> explicit_values;  // overrides count/min_ratio when set
};

struct RunConfig {
  std::string input;
  CsvSchema schema;
  std::vector<EstimatorKind> estimators = {EstimatorKind::FullMc, EstimatorKind::Cy,
                                           EstimatorKind::Did};
  bool residualize = false;
  CvScheme cv_scheme = CvScheme::ObservedKfold;
  int cv_folds = 5;
  int cv_holdout = 3;
  LambdaGridSpec lambda_grid;
  std::optional<double> fixed_lambda;  // skip CV entirely when set
  int k_min = -20;
  int k_max = 10;
  int bootstrap_replicates = 200;  // 0 disables CIs
  double bootstrap_level = 0.95;
  int placebo_shift = 5;  // 0 disables the in-time placebo
  int group_size = 1;
  int min_pre = 1;
  std::uint64_t seed = 12345;
  std::string out_dir = "out";

  void validate() const {
    require(!input.empty(), ErrorKind::Config, "config: 'input' is required");
    require(!estimators.empty(), ErrorKind::Config,
            "config: at least one estimator must be requested");
    require(k_min <= k_max, ErrorKind::Config, "config: k_min > k_max");
    require(bootstrap_replicates >= 0, ErrorKind::Config, "config: bootstrap B < 0");
    require(bootstrap_level > 0.0 && bootstrap_level < 1.0, ErrorKind::Config,
            "config: bootstrap level must be in (0,1)");
    require(placebo_shift >= 0, ErrorKind::Config, "config: placebo shift < 0");
    require(min_pre >= 1, ErrorKind::Config, "config: min_pre must be >= 1");
    require(group_size >= 1, ErrorKind::Config, "config: group_size must be >= 1");
  }
};

// Derived random streams; recorded in summary.json.
inline constexpr std::uint64_t kCvStream = 101;
inline constexpr std::uint64_t kBootstrapStreamBase = 500;

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("input")) c.input = j.at("input").get<std::string>();
    if (j.contains("schema")) {
      const auto& s = j.at("schema");
      if (s.contains("unit")) c.schema.unit = s.at("unit").get<std::string>();
      if (s.contains("period")) c.schema.period = s.at("period").get<std::string>();
      if (s.contains("outcome")) c.schema.outcome = s.at("outcome").get<std::string>();
      if (s.contains("adoption")) c.schema.adoption = s.at("adoption").get<std::string>();
    }
    if (j.contains("estimators")) {
      c.estimators.clear();
      for (const auto& tag : j.at("estimators"))
        c.estimators.push_back(estimator_from_tag(tag.get<std::string>()));
    }
    if (j.contains("residualize")) c.residualize = j.at("residualize").get<bool>();
    if (j.contains("cv")) {
      const auto& cv = j.at("cv");
      if (cv.contains("scheme"))
        c.cv_scheme = cv_scheme_from_name(cv.at("scheme").get<std::string>());
      if (cv.contains("folds")) c.cv_folds = cv.at("folds").get<int>();
      if (cv.contains("holdout_periods")) c.cv_holdout = cv.at("holdout_periods").get<int>();
      if (cv.contains("lambda_grid")) {
        const auto& lg = cv.at("lambda_grid");
        if (lg.is_array()) {
          for (const auto& v : lg) c.lambda_grid.explicit_values.push_back(v.get<double>());
        } else {
          if (lg.contains("count")) c.lambda_grid.count = lg.at("count").get<int>();
          if (lg.contains("min_ratio"))
            c.lambda_grid.min_ratio = lg.at("min_ratio").get<double>();
        }
      }
      if (cv.contains("fixed_lambda")) c.fixed_lambda = cv.at("fixed_lambda").get<double>();
    }
    if (j.contains("k_min")) c.k_min = j.at("k_min").get<int>();
    if (j.contains("k_max")) c.k_max = j.at("k_max").get<int>();
    if (j.contains("bootstrap")) {
      const auto& b = j.at("bootstrap");
      if (b.contains("replicates")) c.bootstrap_replicates = b.at("replicates").get<int>();
      if (b.contains("level")) c.bootstrap_level = b.at("level").get<double>();
    }
    if (j.contains("placebo_shift")) c.placebo_shift = j.at("placebo_shift").get<int>();
    if (j.contains("group_size")) c.group_size = j.at("group_size").get<int>();
    if (j.contains("min_pre")) c.min_pre = j.at("min_pre").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, "config: ", e.what());
  }
  return c;
}

inline nlohmann::json config_echo(const RunConfig& c) {
  nlohmann::json j;
  j["input"] = c.input;
  j["schema"] = {{"unit", c.schema.unit},
                 {"period", c.schema.period},
                 {"outcome", c.schema.outcome},
                 {"adoption", c.schema.adoption}};
  std::vector<std::string> tags;
  for (EstimatorKind k : c.estimators) tags.push_back(estimator_tag(k));
  j["estimators"] = tags;
  j["residualize"] = c.residualize;
  j["cv"] = {{"scheme", cv_scheme_name(c.cv_scheme)},
             {"folds", c.cv_folds},
             {"holdout_periods", c.cv_holdout}};
  if (c.fixed_lambda)
    j["cv"]["fixed_lambda"] = *c.fixed_lambda;
  else if (!c.lambda_grid.explicit_values.empty())
    j["cv"]["lambda_grid"] = c.lambda_grid.explicit_values;
  else
    j["cv"]["lambda_grid"] = {{"count", c.lambda_grid.count},
                              {"min_ratio", c.lambda_grid.min_ratio}};
  j["k_min"] = c.k_min;
  j["k_max"] = c.k_max;
  j["bootstrap"] = {{"replicates", c.bootstrap_replicates}, {"level", c.bootstrap_level}};
  j["placebo_shift"] = c.placebo_shift;
  j["group_size"] = c.group_size;
  j["min_pre"] = c.min_pre;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

// ---------------------------------------------------------------------------
// Atomic file output

inline void write_file_atomic(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.parent_path() / (".tmp." + path.filename().string());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot open ", tmp.string(), " for writing");
    writer(out);
    out.flush();
    require(out.good(), ErrorKind::Io, "write failed for ", tmp.string());
  }
  fs::rename(tmp, path, ec);
  require(!ec, ErrorKind::Io, "rename ", tmp.string(), " -> ", path.string(), " failed: ",
          ec.message());
}

// ---------------------------------------------------------------------------
// Data summary (the `summarize` verb)

struct UnitSummary {
  std::string unit;
  double min = 0.0, max = 0.0, range = 0.0;
  std::optional<int> adoption_label;  // empty: never treated
};

struct DataReport {
  std::vector<UnitSummary> units;
  double mean_range = 0.0;
  int n_units = 0;
  int n_periods = 0;
  int first_label = 0, last_label = 0;
  int retained_units = 0;
  std::vector<std::string> excluded_units;
  std::optional<int> first_adoption_label;  // among retained, eventually treated
  std::optional<int> last_adoption_label;
};

inline DataReport summarize_data(const Panel& panel, int min_pre) {
  DataReport report;
  report.n_units = panel.n_units();
  report.n_periods = panel.n_periods();
  report.first_label = panel.period_labels.front();
  report.last_label = panel.period_labels.back();

  double acc_range = 0.0;
  for (int i = 0; i < panel.n_units(); ++i) {
    UnitSummary u;
    u.unit = panel.unit_ids[i];
    u.min = panel.outcomes.row(i).minCoeff();
    u.max = panel.outcomes.row(i).maxCoeff();
    u.range = u.max - u.min;
    if (panel.ever_treated(i))
      u.adoption_label = panel.period_labels[panel.adoption[i] - 1];
    acc_range += u.range;
    report.units.push_back(u);
  }
  report.mean_range = acc_range / panel.n_units();

  const FilterResult filtered = filter_min_pretreatment(panel, min_pre);
  report.retained_units = filtered.panel.n_units();
  report.excluded_units = filtered.excluded_units;
  for (int i = 0; i < filtered.panel.n_units(); ++i) {
    if (!filtered.panel.ever_treated(i)) continue;
    const int label = filtered.panel.period_labels[filtered.panel.adoption[i] - 1];
    if (!report.first_adoption_label || label < *report.first_adoption_label)
      report.first_adoption_label = label;
    if (!report.last_adoption_label || label > *report.last_adoption_label)
      report.last_adoption_label = label;
  }
  return report;
}

inline nlohmann::json data_report_json(const DataReport& r) {
  nlohmann::json j;
  j["n_units"] = r.n_units;
  j["n_periods"] = r.n_periods;
  j["period_range"] = {r.first_label, r.last_label};
  j["mean_within_unit_range"] = r.mean_range;
  j["retained_units"] = r.retained_units;
  j["excluded_units"] = r.excluded_units;
  if (r.first_adoption_label) j["first_adoption"] = *r.first_adoption_label;
  if (r.last_adoption_label) j["last_adoption"] = *r.last_adoption_label;
  nlohmann::json units = nlohmann::json::array();
  for (const UnitSummary& u : r.units) {
    nlohmann::json ju = {{"unit", u.unit}, {"min", u.min}, {"max", u.max}, {"range", u.range}};
    if (u.adoption_label) ju["adoption"] = *u.adoption_label;
    units.push_back(ju);
  }
  j["units"] = units;
  return j;
}

// ---------------------------------------------------------------------------
// The main pipeline

inline void write_cv_csv(std::ostream& out, const CVReport& report) {
  out << "lambda,fold,error\n";
  for (std::size_t l = 0; l < report.lambda_grid.size(); ++l)
    for (std::size_t f = 0; f < report.fold_errors[l].size(); ++f)
      out << format_double(report.lambda_grid[l]) << "," << f << ","
          << format_double(report.fold_errors[l][f]) << "\n";
}

inline nlohmann::json cv_summary_json(const CVReport& report) {
  return {{"chosen_lambda", report.chosen_lambda},
          {"scheme", cv_scheme_name(report.scheme)},
          {"seed", report.seed}};
}

struct RunArtifacts {
  Panel panel;  // after filtering (and residualization when requested)
  std::optional<CVReport> cv;
  std::map<std::string, EventStudy> event_studies;
  nlohmann::json summary;
};

inline bool needs_lambda(EstimatorKind kind) {
  return kind == EstimatorKind::FullMc || kind == EstimatorKind::Cy ||
         kind == EstimatorKind::CombineApply;
}

inline RunArtifacts run_pipeline(const RunConfig& config) {
  config.validate();
  namespace fs = std::filesystem;

  std::ifstream in(config.input);
  require(in.good(), ErrorKind::Io, "cannot open input '", config.input, "'");
  Panel raw = load_panel(in, config.schema);

  FilterResult filtered = filter_min_pretreatment(raw, config.min_pre);
  Panel panel = std::move(filtered.panel);

  nlohmann::json summary;
  summary["version"] = kVersion;
  summary["config"] = config_echo(config);
  summary["seeds"] = {{"root", config.seed},
                      {"cv", mix_seed(config.seed, kCvStream)},
                      {"bootstrap_base", mix_seed(config.seed, kBootstrapStreamBase)}};
  summary["excluded_units"] = filtered.excluded_units;
  summary["n_units"] = panel.n_units();
  summary["n_periods"] = panel.n_periods();

  if (config.residualize) {
    const TreatmentMask mask = build_mask(panel);
    const FixedEffects fe = fit_fixed_effects(panel, mask);
    panel = residualize(panel, fe);
    summary["residualized"] = true;
    summary["fixed_effects"] = {{"grand_mean", fe.grand_mean}};
  } else {
    summary["residualized"] = false;
  }

  const TreatmentMask mask = build_mask(panel);
  const InitFill init = config.residualize ? InitFill::Zeros : InitFill::ColumnMeans;

  bool any_mc = false;
  for (EstimatorKind kind : config.estimators) any_mc |= needs_lambda(kind);
  bool any_treated = mask.treated.any();

  RunArtifacts artifacts;
  double lambda = 0.0;
  if (any_mc && any_treated) {
    if (config.fixed_lambda) {
      lambda = *config.fixed_lambda;
      summary["chosen_lambda"] = lambda;
      summary["cv"] = nullptr;
    } else {
      BoolGrid observed = !mask.treated;
      std::vector<double> grid = config.lambda_grid.explicit_values;
      if (grid.empty())
        grid = default_lambda_grid(panel.outcomes, observed, config.lambda_grid.count,
                                   config.lambda_grid.min_ratio);
      CvOptions cv_opts;
      cv_opts.scheme = config.cv_scheme;
      cv_opts.folds = config.cv_folds;
      cv_opts.holdout_periods = config.cv_holdout;
      cv_opts.seed = mix_seed(config.seed, kCvStream);
      cv_opts.mc.init = init;
      artifacts.cv = cross_validate(panel.outcomes, observed, grid, cv_opts);
      lambda = artifacts.cv->chosen_lambda;
      summary["chosen_lambda"] = lambda;
      summary["cv"] = cv_summary_json(*artifacts.cv);
    }
  }

  nlohmann::json mean_post = nlohmann::json::object();
  nlohmann::json pretrends = nlohmann::json::object();
  nlohmann::json inestimable = nlohmann::json::object();
  nlohmann::json warnings = nlohmann::json::array();

  std::map<std::string, EffectGrid> grids;
  std::optional<MCFit> full_mc_fit;
  std::uint64_t boot_stream = kBootstrapStreamBase;
  for (EstimatorKind kind : config.estimators) {
    const std::string tag = estimator_tag(kind);
    EstimatorSpec spec;
    spec.kind = kind;
    spec.lambda = lambda;
    spec.group_size = config.group_size;
    spec.mc.init = init;

    if (kind == EstimatorKind::TwfePooled) {
      const double tau = fit_twfe_pooled(panel, mask);
      summary["twfe_pooled_tau"] = tau;
      artifacts.event_studies[tag] = twfe_event_study(panel, mask, config.k_min, config.k_max);
      mean_post[tag] = tau;
      continue;
    }

    EventStudy study;
    if (kind == EstimatorKind::CombineApply) {
      study = compute_event_study(panel, mask, spec, config.k_min, config.k_max);
    } else {
      EffectGrid grid;
      if (kind == EstimatorKind::FullMc && any_treated) {
        MCFit fit;
        grid = full_mc_estimate(panel, mask, lambda, spec.mc, nullptr, &fit);
        full_mc_fit = std::move(fit);
      } else {
        grid = compute_effect_grid(panel, mask, spec);
      }
      study = aggregate_event(grid, panel, config.k_min, config.k_max);
      inestimable[tag] = grid.inestimable.size();
      grids[tag] = std::move(grid);
    }

    if (config.bootstrap_replicates > 0 && !study.entries.empty()) {
      BootstrapOptions boot;
      boot.replicates = config.bootstrap_replicates;
      boot.level = config.bootstrap_level;
      boot.seed = mix_seed(config.seed, boot_stream);
      boot.k_min = config.k_min;
      boot.k_max = config.k_max;
      const BootstrapResult res = bootstrap_ci(panel, spec, boot);
      study = res.study;
      for (int k : res.suppressed_k)
        warnings.push_back("bootstrap[" + tag + "]: CI suppressed at k=" +
                           std::to_string(k) + " (too few valid replicates)");
      if (res.widened_intervals > 0)
        warnings.push_back("bootstrap[" + tag + "]: " +
                           std::to_string(res.widened_intervals) +
                           " interval(s) widened to contain the point estimate");
    }
    ++boot_stream;

    if (!study.entries.empty()) {
      bool has_post = false;
      bool has_pre = false;
      for (const auto& [k, e] : study.entries) {
        has_post |= k >= 0;
        has_pre |= k < 0;
      }
      if (has_post) mean_post[tag] = mean_post_effect(study);
      if (has_pre) {
        const auto [max_abs, mean_abs] = pretrend_summary(study);
        pretrends[tag] = {{"max_abs", max_abs}, {"mean_abs", mean_abs}};
      }
    }
    artifacts.event_studies[tag] = std::move(study);
  }

  // Condition number of the full-matrix fit at the chosen lambda.
  if (full_mc_fit) {
    try {
      summary["condition_number"] =
          condition_report(*full_mc_fit, default_condition_threshold(*full_mc_fit));
    } catch (const Error& e) {
      summary["condition_number"] = nullptr;
      warnings.push_back(std::string("condition_number: ") + e.what());
    }
  }

  // In-time placebo on the first requested per-cell estimator.
  if (config.placebo_shift >= 1) {
    for (EstimatorKind kind : config.estimators) {
      if (!is_per_cell(kind)) continue;
      EstimatorSpec spec;
      spec.kind = kind;
      spec.lambda = lambda;
      spec.group_size = config.group_size;
      spec.mc.init = init;
      try {
        const PlaceboReport placebo = in_time_placebo(panel, spec, config.placebo_shift);
        summary["in_time_placebo"] = {{"estimator", placebo.estimator_tag},
                                      {"shift", placebo.shift},
                                      {"mean_abs", placebo.mean_abs},
                                      {"max_abs", placebo.max_abs},
                                      {"excluded_units", placebo.excluded_units},
                                      {"inestimable_cells", placebo.inestimable_cells},
                                      {"caveat", placebo.caveat}};
        write_file_atomic(fs::path(config.out_dir) / "placebo_report.csv",
                          [&](std::ostream& out) { write_placebo_csv(out, placebo, panel); });
      } catch (const Error& e) {
        warnings.push_back(std::string("in_time_placebo: ") + e.what());
      }
      break;
    }
  }

  summary["mean_post_effect"] = mean_post;
  summary["pretrend"] = pretrends;
  summary["inestimable_cells"] = inestimable;
  summary["warnings"] = warnings;

  // Result files.
  for (const auto& [tag, grid] : grids) {
    write_file_atomic(fs::path(config.out_dir) / ("effects_" + tag + ".csv"),
                      [&](std::ostream& out) { write_effects_csv(out, grid, panel); });
  }
  for (const auto& [tag, study] : artifacts.event_studies) {
    write_file_atomic(fs::path(config.out_dir) / ("event_study_" + tag + ".csv"),
                      [&](std::ostream& out) { write_event_study_csv(out, study); });
  }
  if (artifacts.cv) {
    write_file_atomic(fs::path(config.out_dir) / "cv_report.csv",
                      [&](std::ostream& out) { write_cv_csv(out, *artifacts.cv); });
  }
  std::vector<EventStudy> studies;
  for (EstimatorKind kind : config.estimators) {
    auto it = artifacts.event_studies.find(estimator_tag(kind));
    if (it != artifacts.event_studies.end()) studies.push_back(it->second);
  }
  write_file_atomic(fs::path(config.out_dir) / "event_study.svg",
                    [&](std::ostream& out) { write_event_study_svg(out, studies); });
  write_file_atomic(fs::path(config.out_dir) / "summary.json",
                    [&](std::ostream& out) { out << summary.dump(2) << "\n"; });

  artifacts.panel = std::move(panel);
  artifacts.summary = std::move(summary);
  return artifacts;
}

// The `cv` verb: load, filter, optionally residualize, cross-validate, write
// cv_report.csv, and stop.
inline CVReport run_cv(const RunConfig& config) {
  std::ifstream in(config.input);
  require(in.good(), ErrorKind::Io, "cannot open input '", config.input, "'");
  Panel panel = filter_min_pretreatment(load_panel(in, config.schema), config.min_pre).panel;
  if (config.residualize) {
    const TreatmentMask mask = build_mask(panel);
    panel = residualize(panel, fit_fixed_effects(panel, mask));
  }
  const TreatmentMask mask = build_mask(panel);
  require(mask.treated.any(), ErrorKind::EmptyAggregate,
          "cv: the panel has no treated cells to mimic");
  BoolGrid observed = !mask.treated;
  std::vector<double> grid = config.lambda_grid.explicit_values;
  if (grid.empty())
    grid = default_lambda_grid(panel.outcomes, observed, config.lambda_grid.count,
                               config.lambda_grid.min_ratio);
  CvOptions opts;
  opts.scheme = config.cv_scheme;
  opts.folds = config.cv_folds;
  opts.holdout_periods = config.cv_holdout;
  opts.seed = mix_seed(config.seed, kCvStream);
  opts.mc.init = config.residualize ? InitFill::Zeros : InitFill::ColumnMeans;
  const CVReport report = cross_validate(panel.outcomes, observed, grid, opts);
  write_file_atomic(std::filesystem::path(config.out_dir) / "cv_report.csv",
                    [&](std::ostream& out) { write_cv_csv(out, report); });
  return report;
}

}  // namespace panelmc
