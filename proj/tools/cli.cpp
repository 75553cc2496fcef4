#include "cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "dogr/error.hpp"
#include "dogr/eval.hpp"
#include "dogr/format.hpp"
#include "dogr/inference.hpp"
#include "dogr/model.hpp"
#include "dogr/model_json.hpp"
#include "dogr/preprocess.hpp"
#include "dogr/selection.hpp"

namespace dogr::cli {

namespace {

struct FitFlags {
  FitConfig cfg;
  std::string init = "random";

  void add_to(CLI::App* app) {
    app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app->add_option("--max-iters", cfg.max_iterations, "EM iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--tol", cfg.rel_tolerance, "Relative log-likelihood tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--ridge", cfg.covariance_ridge, "Relative covariance ridge")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--restarts", cfg.n_restarts, "Random restarts")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--init", init, "Initialization")
        ->check(CLI::IsMember({"random", "kmeans"}))
        ->capture_default_str();
  }

  FitConfig resolved() const {
    FitConfig out = cfg;
    out.init_strategy =
        init == "kmeans" ? InitStrategy::kmeans_on_xy : InitStrategy::random_responsibilities;
    return out;
  }
};

PredictionMode parse_mode(const std::string& s) {
  return s == "global" ? PredictionMode::global_weights : PredictionMode::posterior_weights;
}

std::vector<std::size_t> k_range(std::size_t lo, std::size_t hi) {
  if (lo < 1 || hi < lo) {
    throw ConfigError("invalid K range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

std::string fit_summary(const Model& m, const Dataset& d, int precision) {
  std::ostringstream out;
  const auto p = static_cast<long long>(d.cols());
  out << "components: " << m.n_components() << "\n"
      << "iterations: " << m.iterations << "\n"
      << "converged: " << (m.converged ? "true" : "false") << "\n"
      << "log_likelihood: " << format_double(m.final_log_likelihood(), precision) << "\n"
      << "bic: "
      << format_double(bic(m.final_log_likelihood(), static_cast<long long>(m.n_components()), p,
                           d.rows()),
                       precision)
      << "\n";
  for (const auto& e : m.reseeds) {
    out << "reseeded component " << e.component << " at iteration " << e.iteration << "\n";
  }
  for (std::size_t k = 0; k < m.n_components(); ++k) {
    const Component& c = m.components[k];
    out << "component " << k << ": weight=" << format_double(c.weight, precision)
        << " intercept=" << format_double(c.coefficients(0), precision);
    for (Eigen::Index j = 0; j < c.dim(); ++j) {
      out << ' ' << m.feature_names[static_cast<std::size_t>(j)] << '='
          << format_double(c.coefficients(j + 1), precision);
    }
    out << " residual_variance=" << format_double(c.residual_variance, precision) << "\n";
  }
  return out.str();
}

// Feature columns for `m` from a numeric table; the model's outcome column is
// tolerated and ignored, anything else must match the feature names exactly.
Eigen::MatrixXd feature_columns(const NumericTable& table, const Model& m) {
  std::map<std::string, Eigen::Index> by_name;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    by_name[table.header[c]] = static_cast<Eigen::Index>(c);
  }
  std::vector<std::string> missing;
  std::vector<std::string> unexpected;
  const std::set<std::string> wanted(m.feature_names.begin(), m.feature_names.end());
  for (const auto& name : m.feature_names) {
    if (!by_name.contains(name)) missing.push_back(name);
  }
  for (const auto& name : table.header) {
    if (!wanted.contains(name) && name != m.outcome_name) unexpected.push_back(name);
  }
  if (!missing.empty() || !unexpected.empty()) {
    std::string msg = "CSV columns do not match the model's features;";
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
      return s;
    };
    if (!missing.empty()) msg += " missing: " + list(missing) + ";";
    if (!unexpected.empty()) msg += " unexpected: " + list(unexpected) + ";";
    throw DataError(msg);
  }
  Eigen::MatrixXd x(table.values.rows(), static_cast<Eigen::Index>(m.feature_names.size()));
  for (std::size_t j = 0; j < m.feature_names.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = table.values.col(by_name.at(m.feature_names[j]));
  }
  if (!x.allFinite()) throw DataError("non-finite feature value");
  return x;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint soft disaggregation and per-subgroup regression (DoGR)", "dogr"};
  app.require_subcommand(1);
  app.fallthrough();
  int precision = 17;
  app.add_option("--precision", precision, "Significant digits in numeric output")
      ->check(CLI::Range(1, 17))
      ->capture_default_str();
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker cap for select-k / evaluate (0 = all cores)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write the two-subgroup synthetic benchmark as CSV");
  SyntheticSpec spec;
  std::string synth_out;
  std::vector<std::size_t> sizes;
  std::vector<double> x_means, x_vars, intercepts, slopes;
  synth->add_option("--out", synth_out, "Output CSV")->required();
  synth->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  synth->add_option("--sizes", sizes, "Points per component");
  synth->add_option("--x-means", x_means, "x mean per component");
  synth->add_option("--x-variances", x_vars, "x variance per component");
  synth->add_option("--intercepts", intercepts, "Intercept per component");
  synth->add_option("--slopes", slopes, "Slope per component");
  synth->add_option("--residual-variance", spec.residual_variance, "Residual variance")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  // vif
  auto* vif = app.add_subcommand("vif", "Drop multicollinear features by iterative VIF pruning");
  std::string vif_in, vif_outcome, vif_out, vif_report;
  double threshold = 5.0;
  vif->add_option("--input", vif_in, "Input CSV")->required();
  vif->add_option("--outcome", vif_outcome, "Outcome column")->required();
  vif->add_option("--out", vif_out, "Reduced CSV")->required();
  vif->add_option("--report", vif_report, "VIF report JSON (default: stdout)");
  vif->add_option("--threshold", threshold, "Maximum VIF kept")->capture_default_str();

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit a model and write it as JSON");
  std::string fit_in, fit_outcome, fit_out;
  std::size_t fit_k = 0;
  FitFlags fit_flags;
  fitc->add_option("--input", fit_in, "Input CSV")->required();
  fitc->add_option("--outcome", fit_outcome, "Outcome column")->required();
  fitc->add_option("--out", fit_out, "Model JSON")->required();
  fitc->add_option("--k", fit_k, "Number of components")->required()->check(CLI::PositiveNumber);
  fit_flags.add_to(fitc);

  // predict
  auto* pred = app.add_subcommand("predict", "Predict outcomes for a feature CSV");
  std::string pred_model, pred_in, pred_out, pred_mode = "posterior";
  pred->add_option("--model", pred_model, "Model JSON")->required();
  pred->add_option("--input", pred_in, "Feature CSV")->required();
  pred->add_option("--out", pred_out, "Predictions CSV")->required();
  pred->add_option("--mode", pred_mode, "Component weighting")
      ->check(CLI::IsMember({"global", "posterior"}))
      ->capture_default_str();

  // select-k
  auto* sel = app.add_subcommand("select-k", "BIC sweep over the number of components");
  std::string sel_in, sel_outcome, sel_out;
  std::size_t sel_kmin = 1, sel_kmax = 6;
  FitFlags sel_flags;
  sel->add_option("--input", sel_in, "Input CSV")->required();
  sel->add_option("--outcome", sel_outcome, "Outcome column")->required();
  sel->add_option("--out", sel_out, "Sweep table (.json or CSV; default stdout CSV)");
  sel->add_option("--k-min", sel_kmin, "Smallest K")->capture_default_str();
  sel->add_option("--k-max", sel_kmax, "Largest K")->capture_default_str();
  sel_flags.add_to(sel);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Nested cross-validation against pooled MLR");
  std::string ev_in, ev_outcome, ev_out, ev_pred, ev_mode = "posterior";
  std::size_t ev_kmin = 1, ev_kmax = 6;
  CvConfig cv;
  FitFlags ev_flags;
  ev->add_option("--input", ev_in, "Input CSV")->required();
  ev->add_option("--outcome", ev_outcome, "Outcome column")->required();
  ev->add_option("--out", ev_out, "Report JSON");
  ev->add_option("--predictions", ev_pred, "Per-row out-of-fold predictions CSV");
  ev->add_option("--outer-folds", cv.outer_folds, "Outer folds")->capture_default_str();
  ev->add_option("--inner-folds", cv.inner_folds, "Inner folds")->capture_default_str();
  ev->add_option("--repeats", cv.repeats, "Repeats of the outer split")->capture_default_str();
  ev->add_option("--k-min", ev_kmin, "Smallest K in the grid")->capture_default_str();
  ev->add_option("--k-max", ev_kmax, "Largest K in the grid")->capture_default_str();
  ev->add_option("--mode", ev_mode, "Component weighting")
      ->check(CLI::IsMember({"global", "posterior"}))
      ->capture_default_str();
  ev_flags.add_to(ev);

  // report
  auto* rep = app.add_subcommand("report", "Coefficient tests and radar-chart data for a model");
  std::string rep_model, rep_in, rep_outcome, rep_coef, rep_radar;
  rep->add_option("--model", rep_model, "Model JSON")->required();
  auto* rep_in_opt = rep->add_option("--input", rep_in, "Training CSV (enables coefficient tests)");
  rep->add_option("--outcome", rep_outcome, "Outcome column (default: model's)");
  rep->add_option("--out-coef", rep_coef, "Coefficient report CSV")->needs(rep_in_opt);
  rep->add_option("--out-radar", rep_radar, "Radar JSON (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      auto override_1d = [&](const std::vector<double>& v, const char* flag, auto&& apply) {
        if (v.empty()) return;
        if (!sizes.empty() && v.size() != sizes.size()) {
          throw ConfigError(std::string(flag) + " needs one value per component");
        }
        apply(v);
      };
      if (!sizes.empty()) {
        // Changing the component count resizes every per-component list,
        // repeating the last default where no override is given.
        auto fit_len = [&](auto& list) {
          list.resize(sizes.size(), list.back());
        };
        spec.component_sizes = sizes;
        fit_len(spec.x_means);
        fit_len(spec.x_variances);
        fit_len(spec.intercepts);
        fit_len(spec.slopes);
      }
      auto to_vecs = [](const std::vector<double>& v) {
        std::vector<Eigen::VectorXd> out;
        for (double x : v) out.push_back(Eigen::VectorXd::Constant(1, x));
        return out;
      };
      override_1d(x_means, "--x-means", [&](const auto& v) { spec.x_means = to_vecs(v); });
      override_1d(x_vars, "--x-variances", [&](const auto& v) { spec.x_variances = to_vecs(v); });
      override_1d(intercepts, "--intercepts", [&](const auto& v) { spec.intercepts = v; });
      override_1d(slopes, "--slopes", [&](const auto& v) { spec.slopes = to_vecs(v); });
      const Dataset d = generate_synthetic(spec);
      save_csv(synth_out, d, precision);
      out << "wrote " << d.rows() << " rows to " << synth_out << "\n";
    } else if (vif->parsed()) {
      const Dataset d = load_csv(vif_in, vif_outcome);
      const auto [reduced, report] = vif_prune(d, threshold);
      save_csv(vif_out, reduced, precision);
      emit(vif_report, vif_report_json(report), out);
    } else if (fitc->parsed()) {
      const Dataset d = load_csv(fit_in, fit_outcome);
      FitConfig cfg = fit_flags.resolved();
      cfg.n_components = fit_k;
      const Model m = fit(d, cfg);
      save_model(fit_out, m);
      out << fit_summary(m, d, precision);
    } else if (pred->parsed()) {
      const Model m = load_model(pred_model);
      const NumericTable table = read_numeric_csv(pred_in);
      const Eigen::VectorXd yhat = predict_rows(m, feature_columns(table, m), parse_mode(pred_mode));
      std::ostringstream csv;
      csv << "row,prediction\n";
      for (Eigen::Index i = 0; i < yhat.size(); ++i) {
        csv << i << ',' << format_double(yhat(i), precision) << '\n';
      }
      write_file_atomic(pred_out, csv.str());
    } else if (sel->parsed()) {
      const Dataset d = load_csv(sel_in, sel_outcome);
      const auto result = sweep(d, k_range(sel_kmin, sel_kmax), sel_flags.resolved(), threads);
      const bool as_json = sel_out.size() > 5 && sel_out.ends_with(".json");
      emit(sel_out, as_json ? sweep_json(result) : sweep_csv(result, precision), out);
      if (!sel_out.empty()) out << "best K: " << result.best_k << "\n";
    } else if (ev->parsed()) {
      const Dataset d = load_csv(ev_in, ev_outcome);
      cv.k_grid = k_range(ev_kmin, ev_kmax);
      cv.seed = ev_flags.cfg.seed;
      cv.prediction_mode = parse_mode(ev_mode);
      cv.threads = threads;
      const EvalReport report = nested_cv(d, cv, ev_flags.resolved());
      if (!ev_out.empty()) write_file_atomic(ev_out, eval_report_json(report));
      if (!ev_pred.empty()) {
        write_file_atomic(ev_pred, predictions_csv(report, d, cv.outer_folds, precision));
      }
      out << eval_report_table(report);
    } else if (rep->parsed()) {
      const Model m = load_model(rep_model);
      if (!rep_in.empty()) {
        const std::string outcome = rep_outcome.empty() ? m.outcome_name : rep_outcome;
        const Dataset d = load_csv(rep_in, outcome).select_features(m.feature_names);
        if (!rep_coef.empty()) {
          write_file_atomic(rep_coef,
                            coefficient_report_csv(coefficient_report(m, pooled_regression(d)), precision));
        }
        emit(rep_radar, radar_json(radar_export(m, d)), out);
      } else {
        emit(rep_radar, radar_json(radar_export(m)), out);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace dogr::cli
