// Minimum-infinity-norm left inverse via per-row l1-minimization LPs solved
// by a dense two-phase primal simplex, plus the least-squares pseudo-inverse
// and small square-matrix helpers.
#ifndef PURELU_PINV_HPP
#define PURELU_PINV_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"

namespace purelu {

namespace detail {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<const EMat>;

inline EMap emap(const DenseMatrix& m) {
  return EMap(m.data(), Eigen::Index(m.rows()), Eigen::Index(m.cols()));
}

inline DenseMatrix from_eigen(const EMat& e) {
  DenseMatrix m(std::size_t(e.rows()), std::size_t(e.cols()));
  EMat::Map(m.data(), e.rows(), e.cols()) = e;
  return m;
}

}  // namespace detail

inline constexpr double kRankTolFactor = 1e-10;

/// Full-column-rank test: pivoted Gram-Schmidt elimination with threshold
/// 1e-10 times the largest column l2 norm.
inline bool has_full_column_rank(const DenseMatrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m < n) return false;
  std::vector<std::vector<double>> cols(n);
  double max_norm = 0;
  for (std::size_t j = 0; j < n; ++j) {
    cols[j] = a.col(j);
    max_norm = std::max(max_norm, vec_l2(cols[j]));
  }
  if (max_norm == 0) return false;
  const double tol = kRankTolFactor * max_norm;
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = k;
    double best_norm = vec_l2(cols[order[k]]);
    for (std::size_t j = k + 1; j < n; ++j) {
      const double nj = vec_l2(cols[order[j]]);
      if (nj > best_norm) {
        best_norm = nj;
        best = j;
      }
    }
    std::swap(order[k], order[best]);
    if (best_norm < tol) return false;
    auto& pivot = cols[order[k]];
    for (double& v : pivot) v /= best_norm;
    for (std::size_t j = k + 1; j < n; ++j) {
      auto& cj = cols[order[j]];
      double dot = 0;
      for (std::size_t i = 0; i < m; ++i) dot += pivot[i] * cj[i];
      for (std::size_t i = 0; i < m; ++i) cj[i] -= dot * pivot[i];
    }
  }
  return true;
}

inline void require_full_column_rank(const DenseMatrix& a, long long iter = -1) {
  if (!has_full_column_rank(a))
    throw RankDeficient("matrix is not full column rank (" +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ")",
                        iter);
}

/// Least-squares pseudo-inverse (A^T A)^{-1} A^T.
inline DenseMatrix ls_pinv(const DenseMatrix& a) {
  require_full_column_rank(a);
  auto ea = detail::emap(a);
  detail::EMat gram = ea.transpose() * ea;
  Eigen::LDLT<detail::EMat> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw RankDeficient("normal equations factorization failed");
  detail::EMat pinv = ldlt.solve(ea.transpose());
  return detail::from_eigen(pinv);
}

/// Exact dense inverse of a square matrix; SingularMatrix on failure.
inline DenseMatrix invert_square(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw BadDims("invert_square needs a square matrix");
  auto ea = detail::emap(a);
  Eigen::FullPivLU<detail::EMat> lu(ea);
  if (!lu.isInvertible()) throw SingularMatrix("matrix is numerically singular");
  detail::EMat inv = lu.inverse();
  return detail::from_eigen(inv);
}

/// Result of min_inf_pinv: the n x m left inverse, its induced row norm, and
/// the per-row l1 norms that the LPs minimized.
struct PinvResult {
  DenseMatrix pinv;
  double inf_norm = 0;
  std::vector<double> per_row_l1;
};

namespace detail {

// Two-phase primal tableau simplex with Bland's rule, specialized to
//   min 1^T u + 1^T v  s.t.  A^T (u - v) = e_i,  u, v >= 0.
// Deterministic: fixed pivot rule, fixed traversal order.
class RowL1Simplex {
 public:
  RowL1Simplex(const DenseMatrix& a, std::size_t pivot_budget)
      : m_(a.rows()), n_(a.cols()), budget_(pivot_budget),
        tab_(n_, std::vector<double>(2 * m_ + n_ + 1, 0.0)), basis_(n_) {
    // Constraint rows: row r of A^T is column r of A.
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t k = 0; k < m_; ++k) {
        tab_[r][k] = a(k, r);
        tab_[r][m_ + k] = -a(k, r);
      }
  }

  std::vector<double> solve(std::size_t i) {
    const std::size_t ncols = 2 * m_ + n_;
    const std::size_t rhs = ncols;
    // Reset RHS, artificial block, and basis for target row e_i.
    for (std::size_t r = 0; r < n_; ++r) {
      for (std::size_t k = 0; k < n_; ++k) tab_[r][2 * m_ + k] = (r == k) ? 1.0 : 0.0;
      tab_[r][rhs] = (r == i) ? 1.0 : 0.0;
      basis_[r] = 2 * m_ + r;
    }
    pivots_ = 0;

    // Phase 1: minimize the artificial sum. Costs: 0 structural, 1
    // artificial; with the artificial basis the reduced-cost row is the
    // negated column sums over constraint rows.
    std::vector<double> obj(ncols + 1, 0.0);
    for (std::size_t j = 0; j < ncols; ++j) {
      double s = 0;
      for (std::size_t r = 0; r < n_; ++r) s += tab_[r][j];
      obj[j] = (j >= 2 * m_ ? 1.0 : 0.0) - s;
    }
    {
      double s = 0;
      for (std::size_t r = 0; r < n_; ++r) s += tab_[r][rhs];
      obj[rhs] = -s;
    }
    run_phase(obj, /*allow_artificial=*/true);
    if (-obj[rhs] > kFeasTol)
      throw RankDeficient("row LP infeasible: columns of A^T dependent");
    drive_out_artificials();

    // Phase 2: every structural variable has cost 1.
    for (std::size_t j = 0; j <= ncols; ++j) obj[j] = 0.0;
    for (std::size_t j = 0; j < 2 * m_; ++j) obj[j] = 1.0;
    for (std::size_t r = 0; r < n_; ++r) {
      // Eliminate the basic variable's cost from the objective row.
      const double c = obj[basis_[r]];
      if (c != 0.0)
        for (std::size_t j = 0; j <= ncols; ++j) obj[j] -= c * tab_[r][j];
    }
    run_phase(obj, /*allow_artificial=*/false);

    std::vector<double> z(m_, 0.0);
    for (std::size_t r = 0; r < n_; ++r) {
      if (basis_[r] < m_)
        z[basis_[r]] += tab_[r][rhs];
      else if (basis_[r] < 2 * m_)
        z[basis_[r] - m_] -= tab_[r][rhs];
    }
    return z;
  }

 private:
  static constexpr double kPivotTol = 1e-11;
  static constexpr double kFeasTol = 1e-9;
  // Reduced-cost drift after hundreds of pivots reaches well above machine
  // epsilon times the tableau scale; both phases are bounded by construction,
  // so a no-pivot column with reduced cost inside this band is noise.
  static constexpr double kNoiseTol = 1e-7;

  void run_phase(std::vector<double>& obj, bool allow_artificial) {
    const std::size_t ncols = 2 * m_ + n_;
    const std::size_t rhs = ncols;
    const std::size_t limit = allow_artificial ? ncols : 2 * m_;
    for (;;) {
      // Bland: entering = smallest index with negative reduced cost.
      std::size_t enter = limit;
      for (std::size_t j = 0; j < limit; ++j)
        if (obj[j] < -kPivotTol) {
          enter = j;
          break;
        }
      if (enter == limit) return;  // optimal
      // Ratio test; ties break on smallest basis variable index (Bland).
      std::size_t leave = n_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < n_; ++r) {
        const double a = tab_[r][enter];
        if (a > kPivotTol) {
          const double ratio = tab_[r][rhs] / a;
          if (ratio < best_ratio ||
              (ratio == best_ratio && leave != n_ && basis_[r] < basis_[leave])) {
            best_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave == n_) {
        // No positive pivot. For this LP (bounded by construction) that only
        // happens when the reduced cost is roundoff noise next to the column
        // scale; zero it and rescan rather than reporting an unbounded ray.
        double colmax = 0;
        for (std::size_t r = 0; r < n_; ++r)
          colmax = std::max(colmax, std::abs(tab_[r][enter]));
        if (obj[enter] >= -kNoiseTol * std::max(1.0, colmax)) {
          obj[enter] = 0.0;
          continue;
        }
        throw Error("row LP unbounded; input matrix is malformed");
      }
      pivot(leave, enter, obj);
    }
  }

  void pivot(std::size_t r, std::size_t c, std::vector<double>& obj) {
    if (++pivots_ > budget_) throw NoConvergence(pivots_);
    const std::size_t ncols = 2 * m_ + n_;
    auto& prow = tab_[r];
    const double p = prow[c];
    for (std::size_t j = 0; j <= ncols; ++j) prow[j] /= p;
    prow[c] = 1.0;
    for (std::size_t rr = 0; rr < n_; ++rr) {
      if (rr == r) continue;
      const double f = tab_[rr][c];
      if (f == 0.0) continue;
      auto& row = tab_[rr];
      for (std::size_t j = 0; j <= ncols; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
    const double f = obj[c];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= ncols; ++j) obj[j] -= f * prow[j];
      obj[c] = 0.0;
    }
    basis_[r] = c;
  }

  // Replace any artificial still basic (at zero level) by a structural
  // column; a fully zero row would mean dependent constraints.
  void drive_out_artificials() {
    std::vector<double> dummy(2 * m_ + n_ + 1, 0.0);
    for (std::size_t r = 0; r < n_; ++r) {
      if (basis_[r] < 2 * m_) continue;
      std::size_t c = 2 * m_;
      for (std::size_t j = 0; j < 2 * m_; ++j)
        if (std::abs(tab_[r][j]) > kPivotTol) {
          c = j;
          break;
        }
      if (c == 2 * m_)
        throw RankDeficient("redundant constraint row; A lacks full rank");
      pivot(r, c, dummy);
    }
  }

  std::size_t m_, n_, budget_;
  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
  std::size_t pivots_ = 0;
};

inline std::vector<double> min_l1_row_unchecked(const DenseMatrix& a,
                                                std::size_t i) {
  RowL1Simplex lp(a, 50 * (a.rows() + a.cols()));
  return lp.solve(i);
}

}  // namespace detail

/// z minimizing sum_k |z_k| subject to z^T A = e_i^T.
inline std::vector<double> min_l1_row(const DenseMatrix& a, std::size_t i) {
  if (i >= a.cols()) throw BadDims("row index out of range");
  require_full_column_rank(a);
  return detail::min_l1_row_unchecked(a, i);
}

/// Left inverse of A minimizing the induced row norm, assembled from the n
/// per-row LPs (the constraint z^T A = e_i^T touches only row i, so the
/// joint minimum decomposes row by row).
inline PinvResult min_inf_pinv(const DenseMatrix& a) {
  require_full_column_rank(a);
  const std::size_t m = a.rows(), n = a.cols();
  PinvResult res{DenseMatrix(n, m), 0.0, std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> z = detail::min_l1_row_unchecked(a, i);
    for (std::size_t k = 0; k < m; ++k) res.pinv(i, k) = z[k];
    res.per_row_l1[i] = vec_l1(z);
  }
  res.inf_norm = *std::max_element(res.per_row_l1.begin(), res.per_row_l1.end());
  return res;
}

}  // namespace purelu

#endif  // PURELU_PINV_HPP
