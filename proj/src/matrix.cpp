#include "poolseed/matrix.hpp"

#include <cstring>

namespace poolseed {

void gemm_bias(const Matrix& x, const double* w, const double* b, Matrix& y) {
  const int n = x.rows, in = x.cols, out = y.cols;
  for (int i = 0; i < n; ++i) {
    double* yi = y.row(i);
    std::memcpy(yi, b, sizeof(double) * out);
    const double* xi = x.row(i);
    for (int k = 0; k < in; ++k) {
      const double a = xi[k];
      if (a == 0.0) continue;
      const double* wk = w + static_cast<std::size_t>(k) * out;
      for (int j = 0; j < out; ++j) yi[j] += a * wk[j];
    }
  }
}

void gemm_nt(const Matrix& dy, const double* w, int in, Matrix& dx) {
  const int n = dy.rows, out = dy.cols;
  for (int i = 0; i < n; ++i) {
    const double* gi = dy.row(i);
    double* di = dx.row(i);
    for (int k = 0; k < in; ++k) {
      const double* wk = w + static_cast<std::size_t>(k) * out;
      double acc = 0.0;
      for (int j = 0; j < out; ++j) acc += gi[j] * wk[j];
      di[k] = acc;
    }
  }
}

void gemm_tn_acc(const Matrix& x, const Matrix& dy, double* dw, double* db) {
  const int n = x.rows, in = x.cols, out = dy.cols;
  for (int i = 0; i < n; ++i) {
    const double* xi = x.row(i);
    const double* gi = dy.row(i);
    for (int k = 0; k < in; ++k) {
      const double a = xi[k];
      if (a == 0.0) continue;
      double* wk = dw + static_cast<std::size_t>(k) * out;
      for (int j = 0; j < out; ++j) wk[j] += a * gi[j];
    }
    for (int j = 0; j < out; ++j) db[j] += gi[j];
  }
}

Matrix gather_rows(const Matrix& src, const std::vector<int>& rows) {
  Matrix out(static_cast<int>(rows.size()), src.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(out.row(static_cast<int>(i)), src.row(rows[i]), sizeof(double) * src.cols);
  return out;
}

double squared_distance(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace poolseed
