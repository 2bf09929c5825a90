#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace cpsdet {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Standard matrix product. Throws ShapeError on a.cols() != b.rows() and
// NumericError if the result contains a non-finite value.
Matrix matmul(const Matrix& a, const Matrix& b);

// y += a * x   (a: m x n, x: n, y: m)
void add_matvec(const Matrix& a, const std::vector<double>& x,
                std::vector<double>& y);

// y += a^T * x   (a: m x n, x: m, y: n)
void add_matvec_transposed(const Matrix& a, const std::vector<double>& x,
                           std::vector<double>& y);

// g += u * v^T   (g: |u| x |v|)
void add_outer(Matrix& g, const std::vector<double>& u,
               const std::vector<double>& v);

}  // namespace cpsdet
