#include "odsage/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "odsage/calendar.hpp"
#include "odsage/io.hpp"
#include "odsage/rng.hpp"

namespace odsage {

RidgeAccumulator::RidgeAccumulator(int n_features)
    : f_(n_features), xtx_(n_features, n_features), xty_(n_features, 0.0),
      sum_x_(n_features, 0.0) {}

void RidgeAccumulator::add_row(const double* x, double y) {
  for (int i = 0; i < f_; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* row = xtx_.row(i);
    for (int j = i; j < f_; ++j) row[j] += xi * x[j];
    xty_[i] += xi * y;
    sum_x_[i] += xi;
  }
  sum_y_ += y;
  ++n_;
}

void RidgeAccumulator::add(const Matrix& x, const std::vector<double>& y) {
  if (x.cols != f_) throw std::invalid_argument("feature width mismatch");
  if (static_cast<size_t>(x.rows) != y.size())
    throw std::invalid_argument("row/target count mismatch");
  for (int r = 0; r < x.rows; ++r) add_row(x.row(r), y[r]);
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. `a` ends up
// diagonal (eigenvalues), `v` holds eigenvectors as columns.
void jacobi_eigen(Matrix& a, Matrix& v) {
  const int n = a.rows;
  v = Matrix(n, n);
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-26 * n * n) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p);
          const double akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k);
          const double aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v.at(k, p);
          const double vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
}

// Solve A w = b for the symmetric positive-(semi)definite normal-equation
// matrix through its eigendecomposition (Jacobi-scaled first). Exact column
// collinearity with a tiny ridge on a large Gram matrix sits below the
// Cholesky noise floor, so a spectral solve is used instead. When
// `regularized` the matrix is positive definite by construction and tiny
// computed eigenvalues are clamped; otherwise they flag a singular system
// and the function returns false.
bool spd_solve(Matrix a, std::vector<double> b, std::vector<double>& w, bool regularized) {
  const int n = a.rows;
  std::vector<double> scale(n);
  for (int i = 0; i < n; ++i) {
    const double d = a.at(i, i);
    if (!(d > 0.0)) return false;
    scale[i] = 1.0 / std::sqrt(d);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.at(i, j) *= scale[i] * scale[j];
  for (int i = 0; i < n; ++i) b[i] *= scale[i];

  Matrix v;
  jacobi_eigen(a, v);
  const double tol = 1e-14;  // relative to the unit-scaled diagonal
  if (!regularized) {
    for (int k = 0; k < n; ++k)
      if (a.at(k, k) <= tol) return false;
  }

  w.assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double proj = 0.0;
    for (int i = 0; i < n; ++i) proj += v.at(i, k) * b[i];
    proj /= std::max(a.at(k, k), tol);
    for (int i = 0; i < n; ++i) w[i] += proj * v.at(i, k);
  }
  for (int i = 0; i < n; ++i) w[i] *= scale[i];
  return true;
}

}  // namespace

RidgeModel RidgeAccumulator::solve(double lambda, const RidgeOptions& options) const {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (n_ == 0) throw std::invalid_argument("no rows accumulated");

  Matrix a(f_, f_);
  std::vector<double> b(f_, 0.0);
  const double n = static_cast<double>(n_);
  for (int i = 0; i < f_; ++i) {
    for (int j = i; j < f_; ++j) {
      double v = xtx_.at(i, j);
      if (options.fit_intercept) v -= sum_x_[i] * sum_x_[j] / n;
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
    b[i] = xty_[i] - (options.fit_intercept ? sum_x_[i] * sum_y_ / n : 0.0);
    a.at(i, i) += lambda;
  }

  RidgeModel model;
  model.lambda = lambda;
  if (!spd_solve(std::move(a), std::move(b), model.weights, lambda > 0.0))
    throw std::invalid_argument("singular normal equations; use lambda > 0");
  if (options.fit_intercept) {
    double dot = 0.0;
    for (int i = 0; i < f_; ++i) dot += model.weights[i] * sum_x_[i] / n;
    model.intercept = sum_y_ / n - dot;
  }
  return model;
}

RidgeModel ridge_fit(const Matrix& x, const std::vector<double>& y, double lambda,
                     const RidgeOptions& options) {
  if (x.rows < 1) throw std::invalid_argument("ridge needs at least one sample");
  RidgeAccumulator acc(x.cols);
  acc.add(x, y);
  return acc.solve(lambda, options);
}

double ridge_predict_one(const RidgeModel& model, const double* row) {
  double acc = model.intercept;
  for (size_t i = 0; i < model.weights.size(); ++i) acc += model.weights[i] * row[i];
  return acc;
}

std::vector<double> ridge_predict(const RidgeModel& model, const Matrix& x) {
  std::vector<double> out(x.rows);
  for (int r = 0; r < x.rows; ++r) out[r] = ridge_predict_one(model, x.row(r));
  return out;
}

std::vector<double> ridge_lambda_grid() { return {1e-3, 1e-4, 1e-5, 1e-6, 1e-7}; }

void save_ridge(const RidgeModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "odsage-ridge-1";
  j["lambda"] = model.lambda;
  auto dec = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto& w = j["weights"] = nlohmann::json::array();
  for (double v : model.weights) w.push_back(dec(v));
  j["intercept"] = dec(model.intercept);
  write_text_file(path, j.dump(2) + "\n");
}

RidgeModel load_ridge(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  RidgeModel model;
  model.lambda = j.at("lambda").get<double>();
  for (const auto& v : j.at("weights")) model.weights.push_back(std::stod(v.get<std::string>()));
  model.intercept = std::stod(j.at("intercept").get<std::string>());
  return model;
}

// ----- GCN -------------------------------------------------------------------

Csr normalized_adjacency(const OdGraph& g) {
  std::vector<std::vector<int>> neigh(g.n);
  for (const auto& [i, j] : g.edges) {
    neigh[i].push_back(j);
    neigh[j].push_back(i);
  }
  std::vector<double> inv_sqrt_deg(g.n);
  for (int v = 0; v < g.n; ++v)
    inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(neigh[v].size()) + 1.0);
  Csr csr;
  csr.n = g.n;
  csr.ptr.push_back(0);
  for (int v = 0; v < g.n; ++v) {
    auto row = neigh[v];
    row.push_back(v);  // self-loop
    std::sort(row.begin(), row.end());
    for (int u : row) {
      csr.idx.push_back(u);
      csr.val.push_back(inv_sqrt_deg[v] * inv_sqrt_deg[u]);
    }
    csr.ptr.push_back(static_cast<int>(csr.idx.size()));
  }
  return csr;
}

namespace {

// Y = Ahat * X
Matrix spmm(const Csr& a, const Matrix& x) {
  Matrix y(x.rows, x.cols);
  for (int i = 0; i < a.n; ++i) {
    double* yi = y.row(i);
    for (int p = a.ptr[i]; p < a.ptr[i + 1]; ++p) axpy(a.val[p], x.row(a.idx[p]), yi, x.cols);
  }
  return y;
}

struct GcnCache {
  Matrix s1, z1, h1, s2, z2;
};

std::vector<double> gcn_forward(const GcnModel& m, const Csr& ahat, const Matrix& x,
                                GcnCache* cache) {
  GcnCache local;
  GcnCache& c = cache != nullptr ? *cache : local;
  c.s1 = spmm(ahat, x);
  c.z1 = Matrix(x.rows, m.hidden);
  gemm_nt_add(c.s1, m.w1, c.z1);
  for (int v = 0; v < c.z1.rows; ++v)
    for (int j = 0; j < m.hidden; ++j) c.z1.at(v, j) += m.b1[j];
  c.h1 = c.z1;
  for (double& v : c.h1.data) v = v > 0.0 ? v : 0.0;
  c.s2 = spmm(ahat, c.h1);
  c.z2 = Matrix(x.rows, m.hidden);
  gemm_nt_add(c.s2, m.w2, c.z2);
  for (int v = 0; v < c.z2.rows; ++v)
    for (int j = 0; j < m.hidden; ++j) c.z2.at(v, j) += m.b2[j];
  std::vector<double> out(x.rows);
  for (int v = 0; v < x.rows; ++v) {
    double acc = m.head_bias;
    const double* row = c.z2.row(v);
    for (int j = 0; j < m.hidden; ++j) acc += row[j] * m.head_weight[j];
    out[v] = acc;
  }
  return out;
}

}  // namespace

GcnModel gcn_train(const std::vector<SampleSet>& samples, const OdGraph& graph,
                   const GcnConfig& config, const std::vector<int>* sample_indices,
                   std::vector<double>* epoch_losses) {
  if (graph.n > config.max_nodes)
    throw ScalabilityError("GCN not scalable at this size (N=" + std::to_string(graph.n) +
                           ", limit=" + std::to_string(config.max_nodes) + ")");
  if (samples.empty()) throw std::invalid_argument("training needs at least one sample");

  const int f = samples[0].features.cols;
  GcnModel m;
  m.feature_dim = f;
  m.hidden = config.hidden;
  Rng rng(derive_seed(config.seed, 0x67636e));
  auto glorot = [&](Matrix& w, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
  };
  m.w1 = Matrix(config.hidden, f);
  glorot(m.w1, f, config.hidden);
  m.b1.assign(config.hidden, 0.0);
  m.w2 = Matrix(config.hidden, config.hidden);
  glorot(m.w2, config.hidden, config.hidden);
  m.b2.assign(config.hidden, 0.0);
  m.head_weight.resize(config.hidden);
  const double hb = std::sqrt(6.0 / static_cast<double>(config.hidden + 1));
  for (double& v : m.head_weight) v = rng.uniform(-hb, hb);

  const Csr ahat = normalized_adjacency(graph);

  std::vector<int> order;
  if (sample_indices != nullptr)
    order = *sample_indices;
  else {
    order.resize(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) order[i] = static_cast<int>(i);
  }
  if (order.empty()) throw std::invalid_argument("training needs at least one sample");

  const int batch = std::max(1, config.batch);
  const int hidden = config.hidden;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    double epoch_loss = 0.0;
    int n_steps = 0;
    for (size_t pos = 0; pos < order.size(); pos += batch) {
      const size_t end = std::min(order.size(), pos + batch);
      const double inv = 1.0 / static_cast<double>(end - pos);
      Matrix gw1(hidden, f), gw2(hidden, hidden);
      std::vector<double> gb1(hidden, 0.0), gb2(hidden, 0.0), ghead(hidden, 0.0);
      double ghead_b = 0.0;
      double step_loss = 0.0;
      for (size_t b = pos; b < end; ++b) {
        const SampleSet& s = samples[order[b]];
        const int n = s.features.rows;
        GcnCache cache;
        const auto pred = gcn_forward(m, ahat, s.features, &cache);
        std::vector<double> dpred(n);
        double loss = 0.0;
        for (int v = 0; v < n; ++v) {
          const double r = pred[v] - s.targets[v];
          loss += r * r;
          dpred[v] = 2.0 * r / static_cast<double>(n);
        }
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss)) throw std::runtime_error("GCN training diverged");
        step_loss += loss * inv;

        Matrix dz2(n, hidden);
        for (int v = 0; v < n; ++v) {
          ghead_b += inv * dpred[v];
          const double* z2v = cache.z2.row(v);
          double* dzv = dz2.row(v);
          for (int j = 0; j < hidden; ++j) {
            ghead[j] += inv * dpred[v] * z2v[j];
            dzv[j] = dpred[v] * m.head_weight[j];
          }
        }
        for (int v = 0; v < n; ++v)
          for (int j = 0; j < hidden; ++j) gb2[j] += inv * dz2.at(v, j);
        {
          Matrix tmp(hidden, hidden);
          gemm_tn_add(dz2, cache.s2, tmp);
          for (size_t k = 0; k < tmp.data.size(); ++k) gw2.data[k] += inv * tmp.data[k];
        }
        Matrix ds2(n, hidden);
        gemm_nn_add(dz2, m.w2, ds2);
        Matrix dh1 = spmm(ahat, ds2);  // Ahat is symmetric
        for (int v = 0; v < n; ++v) {
          const double* z1v = cache.z1.row(v);
          double* dv = dh1.row(v);
          for (int j = 0; j < hidden; ++j)
            if (z1v[j] <= 0.0) dv[j] = 0.0;
        }
        for (int v = 0; v < n; ++v)
          for (int j = 0; j < hidden; ++j) gb1[j] += inv * dh1.at(v, j);
        {
          Matrix tmp(hidden, f);
          gemm_tn_add(dh1, cache.s1, tmp);
          for (size_t k = 0; k < tmp.data.size(); ++k) gw1.data[k] += inv * tmp.data[k];
        }
      }
      const double lr = config.learning_rate;
      for (size_t k = 0; k < m.w1.data.size(); ++k) m.w1.data[k] -= lr * gw1.data[k];
      for (int j = 0; j < hidden; ++j) m.b1[j] -= lr * gb1[j];
      for (size_t k = 0; k < m.w2.data.size(); ++k) m.w2.data[k] -= lr * gw2.data[k];
      for (int j = 0; j < hidden; ++j) m.b2[j] -= lr * gb2[j];
      for (int j = 0; j < hidden; ++j) m.head_weight[j] -= lr * ghead[j];
      m.head_bias -= lr * ghead_b;
      epoch_loss += step_loss;
      ++n_steps;
    }
    if (epoch_losses != nullptr) epoch_losses->push_back(epoch_loss / n_steps);
  }
  return m;
}

std::vector<double> gcn_predict(const GcnModel& model, const SampleSet& sample, const Csr& ahat) {
  if (sample.features.rows != ahat.n) throw std::invalid_argument("graph/feature mismatch");
  return gcn_forward(model, ahat, sample.features, nullptr);
}

void save_gcn(const GcnModel& model, const std::string& path) {
  auto dec = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto arr = [&](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(dec(x));
    return a;
  };
  nlohmann::json j;
  j["format"] = "odsage-gcn-1";
  j["feature_dim"] = model.feature_dim;
  j["hidden"] = model.hidden;
  j["w1"] = arr(model.w1.data);
  j["b1"] = arr(model.b1);
  j["w2"] = arr(model.w2.data);
  j["b2"] = arr(model.b2);
  j["head_weight"] = arr(model.head_weight);
  j["head_bias"] = dec(model.head_bias);
  write_text_file(path, j.dump(2) + "\n");
}

GcnModel load_gcn(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  GcnModel m;
  m.feature_dim = j.at("feature_dim").get<int>();
  m.hidden = j.at("hidden").get<int>();
  auto arr = [](const nlohmann::json& a) {
    std::vector<double> v;
    for (const auto& x : a) v.push_back(std::stod(x.get<std::string>()));
    return v;
  };
  m.w1 = Matrix(m.hidden, m.feature_dim);
  m.w1.data = arr(j.at("w1"));
  m.b1 = arr(j.at("b1"));
  m.w2 = Matrix(m.hidden, m.hidden);
  m.w2.data = arr(j.at("w2"));
  m.b2 = arr(j.at("b2"));
  m.head_weight = arr(j.at("head_weight"));
  m.head_bias = std::stod(j.at("head_bias").get<std::string>());
  return m;
}

std::map<std::pair<int, int>, std::vector<double>> load_external_predictions(
    const std::string& path, int n_ods) {
  std::map<std::pair<int, int>, std::vector<double>> out;
  for (const auto& row : read_csv_rows(path)) {
    const int day = parse_iso_date_to_day(row.at(0));
    const int slot = std::stoi(row.at(1));
    const int od = std::stoi(row.at(2));
    if (od < 0 || od >= n_ods) throw std::runtime_error("od_index out of range in " + path);
    auto& v = out[{day, slot}];
    if (v.empty()) v.assign(n_ods, 0.0);
    v[od] = std::stod(row.at(3));
  }
  return out;
}

}  // namespace odsage
