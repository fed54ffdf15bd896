#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace odsage {

// Dense row-major matrix of doubles. Deliberately minimal: the model and
// baselines only need storage plus a few cache-friendly GEMM kernels.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  void fill(double v) { data.assign(data.size(), v); }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
  }
};

// C(m x n) += A(m x k) * B(k x n)
inline void gemm_nn_add(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = ai[k];
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += av * bk[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T  — inner dot over contiguous rows.
inline void gemm_nt_add(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] += acc;
    }
  }
}

// C(k x n) += A(m x k)^T * B(m x n)
inline void gemm_tn_add(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  for (int m = 0; m < a.rows; ++m) {
    const double* am = a.row(m);
    const double* bm = b.row(m);
    for (int i = 0; i < a.cols; ++i) {
      const double av = am[i];
      if (av == 0.0) continue;
      double* ci = c.row(i);
      for (int j = 0; j < b.cols; ++j) ci[j] += av * bm[j];
    }
  }
}

inline void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace odsage
