#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "odsage/features.hpp"
#include "odsage/graphs.hpp"
#include "odsage/matrix.hpp"

namespace odsage {

// ----- ridge regression -----------------------------------------------------

struct RidgeModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double lambda = 0.0;
};

struct RidgeOptions {
  bool fit_intercept = true;  // centered solve with an unpenalized intercept
};

// Streaming normal-equation accumulator: rows never need to be held in
// memory at once. Solving factors (X'X + lambda I) by Cholesky.
class RidgeAccumulator {
 public:
  explicit RidgeAccumulator(int n_features);

  void add(const Matrix& x, const std::vector<double>& y);
  void add_row(const double* x, double y);

  // Throws std::invalid_argument for a singular system at lambda = 0.
  RidgeModel solve(double lambda, const RidgeOptions& options = {}) const;

  int64_t n_rows() const { return n_; }

 private:
  int f_;
  Matrix xtx_;
  std::vector<double> xty_;
  std::vector<double> sum_x_;
  double sum_y_ = 0.0;
  int64_t n_ = 0;
};

RidgeModel ridge_fit(const Matrix& x, const std::vector<double>& y, double lambda,
                     const RidgeOptions& options = {});

double ridge_predict_one(const RidgeModel& model, const double* row);
std::vector<double> ridge_predict(const RidgeModel& model, const Matrix& x);

// The regularization grid scanned during validation.
std::vector<double> ridge_lambda_grid();  // {1e-3 .. 1e-7}

void save_ridge(const RidgeModel& model, const std::string& path);
RidgeModel load_ridge(const std::string& path);

// ----- two-layer GCN --------------------------------------------------------

// Raised when the dense-propagation baseline is asked to handle a graph
// beyond its configured node limit.
struct ScalabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Csr {
  int n = 0;
  std::vector<int> ptr;
  std::vector<int> idx;
  std::vector<double> val;
};

// Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}.
Csr normalized_adjacency(const OdGraph& g);

struct GcnModel {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  std::vector<double> head_weight;
  double head_bias = 0.0;
  int feature_dim = 0;
  int hidden = 0;
};

struct GcnConfig {
  int hidden = 64;
  double learning_rate = 1e-4;
  int epochs = 10;
  int batch = 1;
  int max_nodes = 2000;
  uint64_t seed = 42;
};

// Whole-graph forward per gradient step (no neighbor sampling), MSE loss,
// plain SGD over prediction-time samples. Throws ScalabilityError when the
// graph exceeds config.max_nodes.
GcnModel gcn_train(const std::vector<SampleSet>& samples, const OdGraph& graph,
                   const GcnConfig& config, const std::vector<int>* sample_indices = nullptr,
                   std::vector<double>* epoch_losses = nullptr);

std::vector<double> gcn_predict(const GcnModel& model, const SampleSet& sample, const Csr& ahat);

void save_gcn(const GcnModel& model, const std::string& path);
GcnModel load_gcn(const std::string& path);

// ----- external predictions -------------------------------------------------

// predictions.csv rows `day,slot,od_index,prediction` keyed by (day, slot);
// third-party baselines are scored through the same report path.
std::map<std::pair<int, int>, std::vector<double>> load_external_predictions(
    const std::string& path, int n_ods);

}  // namespace odsage
