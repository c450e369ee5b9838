#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace hrlsched {

using cplx = std::complex<double>;

// Dense row-major complex matrix. Small sizes only (K, N_T <= a few dozen).
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static CMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const cplx> data() const { return data_; }
  std::span<cplx> data() { return data_; }

  // Conjugate transpose.
  CMatrix adjoint() const;

  // Submatrix made of the listed rows, in the listed order.
  CMatrix select_rows(std::span<const std::size_t> rows) const;

  bool all_finite() const;

  friend CMatrix operator*(const CMatrix& a, const CMatrix& b);
  friend bool operator==(const CMatrix& a, const CMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

// Solves A X = B for square A using Gaussian elimination with partial
// pivoting. Throws std::domain_error when a pivot vanishes.
CMatrix solve(CMatrix a, CMatrix b);

double frobenius_sq(const CMatrix& m);

}  // namespace hrlsched
