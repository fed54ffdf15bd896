#include "odsage/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "odsage/io.hpp"
#include "odsage/rng.hpp"
#include "odsage/stats.hpp"

namespace odsage {

std::pair<std::vector<int>, std::vector<int>> split_days(const std::vector<int>& all_days,
                                                         double test_fraction, uint64_t seed) {
  if (all_days.size() < 2) throw std::invalid_argument("need at least two days to split");
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
    throw std::invalid_argument("test fraction must be in (0,1)");
  std::vector<int> days = all_days;
  Rng rng(derive_seed(seed, 0x73706c6974));
  for (int i = static_cast<int>(days.size()) - 1; i > 0; --i)
    std::swap(days[i], days[rng.uniform_int(i + 1)]);
  int n_test = static_cast<int>(std::llround(test_fraction * static_cast<double>(days.size())));
  n_test = std::max(1, std::min(static_cast<int>(days.size()) - 1, n_test));
  std::vector<int> test(days.begin(), days.begin() + n_test);
  std::vector<int> train(days.begin() + n_test, days.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {train, test};
}

std::pair<double, double> rmse_mae(const std::vector<double>& pred,
                                   const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("length mismatch");
  if (pred.empty()) throw std::invalid_argument("empty inputs");
  double se = 0.0, ae = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - truth[i];
    se += r * r;
    ae += std::fabs(r);
  }
  const double n = static_cast<double>(pred.size());
  return {std::sqrt(se / n), ae / n};
}

std::string ScenarioSpec::name() const {
  switch (kind) {
    case ScenarioKind::all: return "all";
    case ScenarioKind::cancel_origin_gt0: return "cancel_origin_gt0";
    case ScenarioKind::cancel_dest_gt0: return "cancel_dest_gt0";
    case ScenarioKind::delay_origin_gt:
      return "delay_origin_gt" + std::to_string(static_cast<int>(threshold_s));
    case ScenarioKind::delay_dest_gt:
      return "delay_dest_gt" + std::to_string(static_cast<int>(threshold_s));
  }
  return "unknown";
}

std::vector<ScenarioSpec> standard_scenarios(const std::vector<double>& delay_thresholds) {
  std::vector<ScenarioSpec> specs;
  specs.push_back({ScenarioKind::all, 0.0});
  specs.push_back({ScenarioKind::cancel_origin_gt0, 0.0});
  specs.push_back({ScenarioKind::cancel_dest_gt0, 0.0});
  for (double t : delay_thresholds) specs.push_back({ScenarioKind::delay_origin_gt, t});
  for (double t : delay_thresholds) specs.push_back({ScenarioKind::delay_dest_gt, t});
  return specs;
}

std::vector<std::vector<char>> scenario_mask(const TrainIndex& trains,
                                             const std::vector<OdPair>& ods, const Network& net,
                                             const std::vector<int64_t>& prediction_times,
                                             const ScenarioSpec& spec) {
  const size_t n_samples = prediction_times.size();
  std::vector<std::vector<char>> mask(n_samples, std::vector<char>(ods.size(), 0));
  if (spec.kind == ScenarioKind::all) {
    for (auto& row : mask) std::fill(row.begin(), row.end(), 1);
    return mask;
  }
  const bool at_origin =
      spec.kind == ScenarioKind::cancel_origin_gt0 || spec.kind == ScenarioKind::delay_origin_gt;
  const bool cancel_kind =
      spec.kind == ScenarioKind::cancel_origin_gt0 || spec.kind == ScenarioKind::cancel_dest_gt0;

  // Relevant line sets are static per OD.
  std::vector<std::vector<LineDirection>> line_dirs(ods.size());
  for (size_t i = 0; i < ods.size(); ++i)
    line_dirs[i] = net.relevant_line_directions(ods[i], at_origin);

  for (size_t s = 0; s < n_samples; ++s) {
    const int64_t t = prediction_times[s];
    for (size_t i = 0; i < ods.size(); ++i) {
      const int station = at_origin ? ods[i].origin : ods[i].destination;
      double acc = 0.0;
      for (const auto& ld : line_dirs[i]) {
        const auto w = trains.window(station, ld.line, ld.direction, t);
        acc += cancel_kind ? static_cast<double>(w.cancelled) : w.mean_delay();
      }
      if (!line_dirs[i].empty()) acc /= static_cast<double>(line_dirs[i].size());
      const double threshold = cancel_kind ? 0.0 : spec.threshold_s;
      mask[s][i] = acc > threshold ? 1 : 0;
    }
  }
  return mask;
}

double paired_t_test(const std::vector<double>& errors_a, const std::vector<double>& errors_b) {
  if (errors_a.size() != errors_b.size()) throw std::invalid_argument("length mismatch");
  const size_t n = errors_a.size();
  if (n < 2) throw std::invalid_argument("need at least two pairs");
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += errors_a[i] - errors_b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = errors_a[i] - errors_b[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  if (var <= 0.0) {
    if (mean == 0.0) return 1.0;
    var = 1e-300;  // degenerate all-equal differences: p collapses to 0
  }
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  return student_t_two_sided_p(t, static_cast<double>(n - 1));
}

EvalReport build_report(const std::map<std::string, std::vector<double>>& method_predictions,
                        const std::vector<double>& truth, const ScenarioMasks& masks,
                        const std::string& reference) {
  EvalReport report;
  if (method_predictions.empty()) throw std::invalid_argument("no methods to report");
  for (const auto& [name, pred] : method_predictions)
    if (pred.size() != truth.size())
      throw std::invalid_argument("predictions for " + name + " not aligned with truth");

  for (size_t si = 0; si < masks.specs.size(); ++si) {
    const auto& flat = masks.flat[si];
    if (flat.size() != truth.size()) throw std::invalid_argument("mask not aligned with truth");
    std::vector<size_t> selected;
    for (size_t i = 0; i < flat.size(); ++i)
      if (flat[i]) selected.push_back(i);
    const std::string scenario = masks.specs[si].name();
    if (selected.empty()) {
      report.warnings.push_back("scenario " + scenario + " has no samples; row omitted");
      continue;
    }

    std::vector<double> t(selected.size());
    for (size_t i = 0; i < selected.size(); ++i) t[i] = truth[selected[i]];

    size_t first_row = report.rows.size();
    for (const auto& [name, pred] : method_predictions) {
      std::vector<double> p(selected.size());
      for (size_t i = 0; i < selected.size(); ++i) p[i] = pred[selected[i]];
      const auto [rmse, mae] = rmse_mae(p, t);
      report.rows.push_back({scenario, name, rmse, mae, static_cast<int64_t>(selected.size()),
                             false});
    }
    // Flag the best method in this scenario.
    size_t best = first_row;
    for (size_t r = first_row; r < report.rows.size(); ++r)
      if (report.rows[r].rmse < report.rows[best].rmse) best = r;
    report.rows[best].best = true;

    // Reference-vs-baseline significance on absolute errors.
    const auto ref_it = method_predictions.find(reference);
    if (ref_it != method_predictions.end() && method_predictions.size() > 1 &&
        selected.size() >= 2) {
      std::vector<double> ref_err(selected.size());
      for (size_t i = 0; i < selected.size(); ++i)
        ref_err[i] = std::fabs(ref_it->second[selected[i]] - truth[selected[i]]);
      for (const auto& [name, pred] : method_predictions) {
        if (name == reference) continue;
        std::vector<double> err(selected.size());
        for (size_t i = 0; i < selected.size(); ++i)
          err[i] = std::fabs(pred[selected[i]] - truth[selected[i]]);
        report.p_values.push_back({reference, name, scenario, paired_t_test(ref_err, err)});
      }
    }
  }
  return report;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "scenario,method,rmse,mae,n\n";
  for (const auto& row : report.rows)
    out << row.scenario << ',' << row.method << ',' << fmt_f6(row.rmse) << ',' << fmt_f6(row.mae)
        << ',' << row.n << '\n';
  return out.str();
}

std::string pvalues_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "method_a,method_b,scenario,p\n";
  for (const auto& row : report.p_values)
    out << row.method_a << ',' << row.method_b << ',' << row.scenario << ',' << fmt_e6(row.p)
        << '\n';
  return out.str();
}

}  // namespace odsage
