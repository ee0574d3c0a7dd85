// Dense row-major matrices, induced matrix norms, sign splits, the offset
// ReLU, and the CSV interchange format.
#ifndef PURELU_MATRIX_HPP
#define PURELU_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "purelu/errors.hpp"

namespace purelu {

namespace detail {

// Pairwise (cascade) summation over a strided range. The reduction tree is a
// pure function of the element count, so the result never depends on
// traversal or thread order.
template <typename T, typename F>
T pairwise_sum(const T* data, std::size_t stride, std::size_t count, F&& f) {
  if (count <= 8) {
    T s = T(0);
    for (std::size_t k = 0; k < count; ++k) s += f(data[k * stride]);
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(data, stride, half, f) +
         pairwise_sum(data + half * stride, stride, count - half, f);
}

template <typename T>
T pairwise_sum(const T* data, std::size_t stride, std::size_t count) {
  return pairwise_sum(data, stride, count, [](T v) { return v; });
}

template <typename T>
T pairwise_abs_sum(const T* data, std::size_t stride, std::size_t count) {
  return pairwise_sum(data, stride, count, [](T v) { return std::abs(v); });
}

}  // namespace detail

/// Dense row-major matrix of 64-bit floats (templated scalar for reuse).
template <typename T = double>
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {
    if (rows == 0 || cols == 0) throw BadDims("matrix dims must be positive");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw BadDims("matrix dims must be positive");
    if (data_.size() != rows * cols)
      throw BadDims("entry count " + std::to_string(data_.size()) +
                    " does not match " + std::to_string(rows) + "x" +
                    std::to_string(cols));
    check_finite();
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  const std::vector<T>& entries() const { return data_; }

  const T* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<T> col(std::size_t j) const {
    std::vector<T> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  void set_col(std::size_t j, const std::vector<T>& c) {
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  void check_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) throw BadDims("non-finite matrix entry");
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = Matrix<double>;

/// The four norms tracked throughout: induced l1 (max column abs-sum),
/// induced l-infinity (max row abs-sum), their max, and the entrywise max.
struct NormReport {
  double col_norm = 0;
  double row_norm = 0;
  double sym_norm = 0;
  double max_norm = 0;
};

template <typename T>
T norm_col_induced(const Matrix<T>& m) {
  T best = T(0);
  for (std::size_t j = 0; j < m.cols(); ++j)
    best = std::max(best, detail::pairwise_abs_sum(m.data() + j, m.cols(), m.rows()));
  return best;
}

template <typename T>
T norm_row_induced(const Matrix<T>& m) {
  T best = T(0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    best = std::max(best, detail::pairwise_abs_sum(m.row_ptr(i), 1, m.cols()));
  return best;
}

template <typename T>
T norm_sym(const Matrix<T>& m) {
  return std::max(norm_col_induced(m), norm_row_induced(m));
}

template <typename T>
T norm_max(const Matrix<T>& m) {
  T best = T(0);
  for (std::size_t k = 0; k < m.size(); ++k)
    best = std::max(best, std::abs(m.data()[k]));
  return best;
}

template <typename T>
NormReport norm_report(const Matrix<T>& m) {
  NormReport r;
  r.col_norm = norm_col_induced(m);
  r.row_norm = norm_row_induced(m);
  r.sym_norm = std::max(r.col_norm, r.row_norm);
  r.max_norm = norm_max(m);
  return r;
}

/// Entrywise split M = M_plus - M_minus with both parts nonnegative and
/// disjoint supports.
template <typename T>
std::pair<Matrix<T>, Matrix<T>> split_pos_neg(const Matrix<T>& m) {
  Matrix<T> pos(m.rows(), m.cols());
  Matrix<T> neg(m.rows(), m.cols());
  for (std::size_t k = 0; k < m.size(); ++k) {
    const T v = m.data()[k];
    if (v > T(0))
      pos.data()[k] = v;
    else
      neg.data()[k] = -v;
  }
  return {std::move(pos), std::move(neg)};
}

/// Offset ReLU phi_alpha(v) = max(v - alpha, 0), applied elementwise.
template <typename T>
std::vector<T> relu_offset(const std::vector<T>& v, T alpha) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::max(v[i] - alpha, T(0));
  return out;
}

inline constexpr double kZeroColumnTol = 1e-12;

template <typename T>
T col_l1_norm(const Matrix<T>& m, std::size_t j) {
  return detail::pairwise_abs_sum(m.data() + j, m.cols(), m.rows());
}

/// Scale every column to unit l1 norm. Columns at or below the degeneracy
/// tolerance raise ZeroColumn.
template <typename T>
Matrix<T> col_normalize(const Matrix<T>& m) {
  Matrix<T> out = m;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    const T norm = col_l1_norm(m, j);
    if (norm <= T(kZeroColumnTol)) throw ZeroColumn(j);
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) /= norm;
  }
  return out;
}

// Vector helpers used across modules.
inline double vec_l1(const std::vector<double>& v) {
  return detail::pairwise_abs_sum(v.data(), 1, v.size());
}

inline double vec_l2(const std::vector<double>& v) {
  double s = detail::pairwise_sum(v.data(), std::size_t(1), v.size(),
                                  [](double x) { return x * x; });
  return std::sqrt(s);
}

inline double vec_linf(const std::vector<double>& v) {
  double best = 0;
  for (double x : v) best = std::max(best, std::abs(x));
  return best;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw BadDims("matmul shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline std::vector<double> matvec(const DenseMatrix& a,
                                  const std::vector<double>& x) {
  if (a.cols() != x.size()) throw BadDims("matvec shape mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0;
    const double* row = a.row_ptr(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

// CSV interchange: one row per line, comma separated, '.' decimal, no
// header. %.17g printing round-trips doubles exactly.
inline void write_csv(std::ostream& os, const DenseMatrix& m) {
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

inline std::string write_csv(const DenseMatrix& m) {
  std::ostringstream os;
  write_csv(os, m);
  return os.str();
}

inline void write_csv_file(const std::string& path, const DenseMatrix& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  write_csv(f, m);
}

inline DenseMatrix read_csv(std::istream& is) {
  std::vector<double> entries;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t this_cols = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw BadDims("bad CSV cell: '" + cell + "'");
      entries.push_back(v);
      ++this_cols;
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (rows == 0)
      cols = this_cols;
    else if (this_cols != cols)
      throw BadDims("ragged CSV: row " + std::to_string(rows) + " has " +
                  std::to_string(this_cols) + " cells, expected " +
                  std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw BadDims("empty CSV");
  return DenseMatrix(rows, cols, std::move(entries));
}

inline DenseMatrix read_csv(const std::string& text) {
  std::istringstream is(text);
  return read_csv(is);
}

inline DenseMatrix read_csv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for reading: " + path);
  return read_csv(f);
}

}  // namespace purelu

#endif  // PURELU_MATRIX_HPP
