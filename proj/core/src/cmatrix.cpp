#include "hrlsched/cmatrix.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace hrlsched {

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::adjoint() const {
  CMatrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
  return out;
}

CMatrix CMatrix::select_rows(std::span<const std::size_t> rows) const {
  CMatrix out(rows.size(), cols_);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= rows_) throw std::out_of_range("select_rows: row index out of range");
    auto src = row(rows[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

bool CMatrix::all_finite() const {
  for (const auto& z : data_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: shape mismatch");
  CMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

CMatrix solve(CMatrix a, CMatrix b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw std::invalid_argument("solve: shape mismatch");

  // Scale-aware singularity threshold; channel gains can be ~1e-7 in amplitude.
  double scale = 0.0;
  for (const auto& z : a.data()) scale = std::max(scale, std::abs(z));
  const double tiny = scale * 1e-14 * static_cast<double>(n);

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a(r, col));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best <= tiny || best == 0.0) throw std::domain_error("solve: matrix is not invertible");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
      for (std::size_t c = 0; c < b.cols(); ++c) std::swap(b(col, c), b(piv, c));
    }
    const cplx inv = 1.0 / a(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const cplx f = a(r, col) * inv;
      if (f == cplx{}) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) -= f * b(col, c);
    }
  }
  CMatrix x(n, b.cols());
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t c = 0; c < b.cols(); ++c) {
      cplx acc = b(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) acc -= a(ii, k) * x(k, c);
      x(ii, c) = acc / a(ii, ii);
    }
  }
  return x;
}

double frobenius_sq(const CMatrix& m) {
  double s = 0.0;
  for (const auto& z : m.data()) s += std::norm(z);
  return s;
}

}  // namespace hrlsched
