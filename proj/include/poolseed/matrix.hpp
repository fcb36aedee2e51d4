#pragma once

#include <cstddef>
#include <vector>

namespace poolseed {

// Dense row-major double matrix. Deliberately minimal: the training kernels
// below are the only hot paths in the project.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && data == o.data; }
};

// Y = X * W + b  (X: n x in, W: in x out row-major, b: out)
void gemm_bias(const Matrix& x, const double* w, const double* b, Matrix& y);

// dX = dY * W^T
void gemm_nt(const Matrix& dy, const double* w, int in, Matrix& dx);

// dW += X^T * dY ; dB += column sums of dY
void gemm_tn_acc(const Matrix& x, const Matrix& dy, double* dw, double* db);

Matrix gather_rows(const Matrix& src, const std::vector<int>& rows);

double squared_distance(const double* a, const double* b, int n);

}  // namespace poolseed
