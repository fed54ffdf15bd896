#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "odsage/features.hpp"
#include "odsage/network.hpp"

namespace odsage {

// Seed-deterministic uniform day-level split. Test size is
// round(fraction * n), clamped to [1, n-1].
std::pair<std::vector<int>, std::vector<int>> split_days(const std::vector<int>& all_days,
                                                         double test_fraction, uint64_t seed);

std::pair<double, double> rmse_mae(const std::vector<double>& pred,
                                   const std::vector<double>& truth);

enum class ScenarioKind {
  all,
  cancel_origin_gt0,
  cancel_dest_gt0,
  delay_origin_gt,
  delay_dest_gt,
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::all;
  double threshold_s = 0.0;  // delay kinds only

  std::string name() const;
};

// The nine standard strata: all periods, cancellations at either endpoint,
// and mean-delay thresholds at either endpoint.
std::vector<ScenarioSpec> standard_scenarios(const std::vector<double>& delay_thresholds = {
                                                 60.0, 180.0, 300.0});

// Mask over (sample, od): last-hour mean cancellation count / mean delay
// at the OD endpoint, averaged across the OD's relevant lines, compared
// against the scenario. Windows match the reliability features.
std::vector<std::vector<char>> scenario_mask(const TrainIndex& trains,
                                             const std::vector<OdPair>& ods, const Network& net,
                                             const std::vector<int64_t>& prediction_times,
                                             const ScenarioSpec& spec);

// Two-sided paired t-test over aligned error vectors. Zero-variance
// differences yield p = 1 when the mean is zero and p -> 0 otherwise.
double paired_t_test(const std::vector<double>& errors_a, const std::vector<double>& errors_b);

struct MetricRow {
  std::string scenario;
  std::string method;
  double rmse = 0.0;
  double mae = 0.0;
  int64_t n = 0;
  bool best = false;  // lowest RMSE in its scenario
};

struct PValueRow {
  std::string method_a;
  std::string method_b;
  std::string scenario;
  double p = 0.0;
};

struct EvalReport {
  std::vector<MetricRow> rows;
  std::vector<PValueRow> p_values;
  std::vector<std::string> warnings;  // e.g. empty strata
};

// Predictions and truth are flattened over (sample, od) in sample-major
// order; masks index scenarios over the same flattened layout.
struct ScenarioMasks {
  std::vector<ScenarioSpec> specs;
  std::vector<std::vector<char>> flat;  // one per spec
};

// One metric row per populated (scenario, method); empty strata are
// dropped with a warning. p-values compare `reference` (when present)
// against every other method on per-sample absolute errors.
EvalReport build_report(const std::map<std::string, std::vector<double>>& method_predictions,
                        const std::vector<double>& truth, const ScenarioMasks& masks,
                        const std::string& reference = "mgraphsage");

// report.csv: scenario,method,rmse,mae,n
std::string report_to_csv(const EvalReport& report);
// pvalues.csv: method_a,method_b,scenario,p
std::string pvalues_to_csv(const EvalReport& report);

}  // namespace odsage
