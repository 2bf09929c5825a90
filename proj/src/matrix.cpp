#include "cpsdet/matrix.hpp"

#include <cmath>
#include <string>

#include "cpsdet/errors.hpp"

namespace cpsdet {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(values_.size()) +
                     " does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) {
      throw ShapeError("ragged initializer for matrix");
    }
    values_.insert(values_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " times " +
                     std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  for (double v : out.values()) {
    if (!std::isfinite(v)) {
      throw NumericError("matmul produced a non-finite value");
    }
  }
  return out;
}

void add_matvec(const Matrix& a, const std::vector<double>& x,
                std::vector<double>& y) {
  if (a.cols() != x.size() || a.rows() != y.size()) {
    throw ShapeError("add_matvec: incompatible shapes");
  }
  const double* row = a.values().data();
  for (std::size_t i = 0; i < a.rows(); ++i, row += a.cols()) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

void add_matvec_transposed(const Matrix& a, const std::vector<double>& x,
                           std::vector<double>& y) {
  if (a.rows() != x.size() || a.cols() != y.size()) {
    throw ShapeError("add_matvec_transposed: incompatible shapes");
  }
  const double* row = a.values().data();
  for (std::size_t i = 0; i < a.rows(); ++i, row += a.cols()) {
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * xi;
  }
}

void add_outer(Matrix& g, const std::vector<double>& u,
               const std::vector<double>& v) {
  if (g.rows() != u.size() || g.cols() != v.size()) {
    throw ShapeError("add_outer: incompatible shapes");
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      g(i, j) += u[i] * v[j];
    }
  }
}

}  // namespace cpsdet
