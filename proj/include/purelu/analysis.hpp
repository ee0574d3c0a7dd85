// Ground-truth-aware diagnostics: the (Sigma, E, N) decomposition, the
// coupled potential, numeric lemma checkers, exact-expectation oracles, and
// the recurrence bound solvers.
#ifndef PURELU_ANALYSIS_HPP
#define PURELU_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/model.hpp"
#include "purelu/pinv.hpp"
#include "purelu/rng.hpp"

namespace purelu {

/// Iterate expressed against the ground truth: A = A*(Sigma + E) + N with
/// Sigma diagonal, E zero-diagonal, and N orthogonal to col(A*).
struct Decomposition {
  std::vector<double> sigma;  // diag(Sigma), length n
  DenseMatrix e_mat;          // n x n, zero diagonal
  DenseMatrix n_mat;          // m x n, out-of-span component
};

/// Per-iteration diagnostics row (the frozen trajectory CSV schema).
struct IterRecord {
  std::size_t t = 0;
  double sigma_min = 0, sigma_max = 0;
  double e_pos_sym = 0, e_neg_sym = 0;
  double potential = 0;
  double n_inf = 0, n_l1 = 0;
  double col_err = 0;
};

inline constexpr const char* kTrajectoryHeader =
    "t,sigma_min,sigma_max,e_pos_sym,e_neg_sym,potential,n_inf,n_l1,col_err";

/// Coupling weight between the positive and negative contamination norms:
/// the positive root of beta^2 + 84 beta - 700 = 0.
inline const double kBeta = (std::sqrt(9856.0) - 84.0) / 2.0;

/// Orthogonal-projection decomposition: B = ls_pinv(A*) A gives the unique
/// in-span coefficients; the residual A - A* B is orthogonal to col(A*).
inline Decomposition decompose(const DenseMatrix& a, const DenseMatrix& a_star) {
  if (!a.same_shape(a_star)) throw BadDims("decompose shape mismatch");
  const DenseMatrix b = matmul(ls_pinv(a_star), a);  // n x n
  const std::size_t n = b.rows();
  Decomposition d;
  d.sigma.resize(n);
  d.e_mat = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        d.sigma[i] = b(i, j);
      else
        d.e_mat(i, j) = b(i, j);
    }
  const DenseMatrix back = matmul(a_star, b);
  d.n_mat = DenseMatrix(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k)
    d.n_mat.data()[k] = a.data()[k] - back.data()[k];
  return d;
}

/// Sigma + E reassembled as one square matrix.
inline DenseMatrix coeff_matrix(const Decomposition& d) {
  DenseMatrix c = d.e_mat;
  for (std::size_t i = 0; i < d.sigma.size(); ++i) c(i, i) = d.sigma[i];
  return c;
}

/// max_i || A_i / ||A_i||_1 - A*_i ||_1 (columns of A* assumed unit l1).
inline double col_error(const DenseMatrix& a, const DenseMatrix& a_star) {
  if (!a.same_shape(a_star)) throw BadDims("col_error shape mismatch");
  double worst = 0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const double norm = col_l1_norm(a, j);
    if (norm <= kZeroColumnTol) throw ZeroColumn(j);
    double err = 0;
    for (std::size_t i = 0; i < a.rows(); ++i)
      err += std::abs(a(i, j) / norm - a_star(i, j));
    worst = std::max(worst, err);
  }
  return worst;
}

/// ||E+||_s + beta ||E-||_s.
inline double coupled_potential(const Decomposition& d) {
  const auto [pos, neg] = split_pos_neg(d.e_mat);
  return norm_sym(pos) + kBeta * norm_sym(neg);
}

inline IterRecord iter_record(std::size_t t, const DenseMatrix& a,
                              const DenseMatrix& a_star) {
  const Decomposition d = decompose(a, a_star);
  IterRecord r;
  r.t = t;
  r.sigma_min = *std::min_element(d.sigma.begin(), d.sigma.end());
  r.sigma_max = *std::max_element(d.sigma.begin(), d.sigma.end());
  const auto [pos, neg] = split_pos_neg(d.e_mat);
  r.e_pos_sym = norm_sym(pos);
  r.e_neg_sym = norm_sym(neg);
  r.potential = r.e_pos_sym + kBeta * r.e_neg_sym;
  r.n_inf = norm_row_induced(d.n_mat);
  r.n_l1 = norm_col_induced(d.n_mat);
  r.col_err = col_error(a, a_star);
  return r;
}

// ---------------------------------------------------------------------------
// Lemma checkers.

/// Result of the four V = (Sigma+E)^{-1} - Sigma^{-1} norm bounds. slack is
/// bound minus attained value (nonnegative iff the inequality holds).
struct VBoundReport {
  bool pos_ok = false, neg_ok = false, sym_ok = false, diag_ok = false;
  double pos_slack = 0, neg_slack = 0, sym_slack = 0, diag_slack = 0;
  bool all_ok() const { return pos_ok && neg_ok && sym_ok && diag_ok; }
  double worst_slack() const {
    return std::min(std::min(pos_slack, neg_slack),
                    std::min(sym_slack, diag_slack));
  }
};

/// Check the four norm bounds on V under ||E||_s < ell_e and
/// Sigma >= (1 - ell) I. Writing V = -Sigma^-1 E Sigma^-1 + H with
/// ||H||_s <= ell_e ||E||_s / d, d = (1-ell)^2 (1-ell_e-ell), gives the
/// signed-part bounds with lead (1-ell)/d and cross ell_e/d, ||V||_s <=
/// ell_e (1-ell)/d, and |V_ii| <= ell_e^2/d. Sharper mixed ell/ell_e
/// numerators fail on admissible draws once ell_e exceeds ell, and the lead
/// here is exact for all-negative E at the ell = ell_e boundary.
inline VBoundReport check_v_bounds(const std::vector<double>& sigma,
                                   const DenseMatrix& e, double ell,
                                   double ell_e) {
  const std::size_t n = sigma.size();
  if (e.rows() != n || e.cols() != n) throw BadDims("check_v_bounds shapes");
  if (!(ell > 0 && ell < 1) || !(ell_e > 0) || !(ell_e + ell < 1))
    throw HypothesisViolated("need 0 < ell < 1, ell_e > 0, ell + ell_e < 1");
  const double e_sym = norm_sym(e);
  if (!(e_sym < ell_e))
    throw HypothesisViolated("||E||_s = " + std::to_string(e_sym) +
                             " not below ell_e = " + std::to_string(ell_e));
  for (double s : sigma)
    if (s < 1.0 - ell - 1e-15)
      throw HypothesisViolated("Sigma diagonal entry below 1 - ell");

  DenseMatrix se(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      se(i, j) = e(i, j) + (i == j ? sigma[i] : 0.0);
  const DenseMatrix z = invert_square(se);
  DenseMatrix v = z;
  for (std::size_t i = 0; i < n; ++i) v(i, i) -= 1.0 / sigma[i];

  const auto [vp, vn] = split_pos_neg(v);
  const auto [ep, en] = split_pos_neg(e);
  const double denom = (1.0 - ell) * (1.0 - ell) * (1.0 - ell_e - ell);
  const double k_lead = (1.0 - ell) / denom;
  const double k_cross = ell_e / denom;

  VBoundReport r;
  const double tol = 1e-12;
  const double b1 = k_lead * norm_sym(en) + k_cross * norm_sym(ep);
  r.pos_slack = b1 - norm_sym(vp);
  r.pos_ok = r.pos_slack >= -tol * std::max(1.0, b1);
  const double b2 = k_lead * norm_sym(ep) + k_cross * norm_sym(en);
  r.neg_slack = b2 - norm_sym(vn);
  r.neg_ok = r.neg_slack >= -tol * std::max(1.0, b2);
  const double b3 = ell_e * (1.0 - ell) / denom;
  r.sym_slack = b3 - norm_sym(v);
  r.sym_ok = r.sym_slack >= -tol * std::max(1.0, b3);
  const double b4 = ell_e * ell_e / denom;
  double diag_max = 0;
  for (std::size_t i = 0; i < n; ++i)
    diag_max = std::max(diag_max, std::abs(v(i, i)));
  r.diag_slack = b4 - diag_max;
  r.diag_ok = r.diag_slack >= -tol * std::max(1.0, b4);
  return r;
}

/// Result of the xi-bound check: gamma is the certified uniform bound on the
/// decode perturbation; holds reports whether every sampled xi obeyed it.
struct XiBoundResult {
  double gamma = 0;
  bool holds = false;
  double ell = 0;                  // contamination radius used
  double a_dagger_inf = 0;         // ||A^dagger||_inf
  double a_star_dagger_inf = 0;    // ||(A*)^dagger||_inf
  bool two_factor_applicable = false;  // ||N||_inf ||(A*)^dagger||_inf < 1/8
  bool two_factor_ok = false;      // ||A^dagger||_inf <= 2 ||(A*)^dagger||_inf
  bool simplified_gamma_ok = false;  // gamma <= 3 ||(A*)^dagger||_inf (...)
  double max_xi = 0;
};

/// Evaluate gamma = ||A^dagger||_inf (||N||_inf / (1 - 2 ell) + C_nu) and
/// verify |xi_i| <= gamma on a sampled batch, where
/// xi = -A^dagger N (Sigma+E)^{-1} x* + A^dagger nu.
inline XiBoundResult check_xi_bound(const DenseMatrix& a,
                                    const DenseMatrix& a_star,
                                    const Decomposition& d, double c_nu,
                                    const WeightDist& weights,
                                    const NoiseModel& noise,
                                    std::size_t n_samples, const Rng& rng) {
  const std::size_t n = d.sigma.size();
  double sigma_min = *std::min_element(d.sigma.begin(), d.sigma.end());
  const double e_sym = norm_sym(d.e_mat);
  const double ell = std::max(e_sym, 1.0 - sigma_min);
  if (!(ell <= 0.125 + 1e-15))
    throw HypothesisViolated(
        "need max(||E||_s, 1 - sigma_min) <= 1/8, got " + std::to_string(ell));

  XiBoundResult res;
  res.ell = ell;
  const PinvResult ap = min_inf_pinv(a);
  const PinvResult asp = min_inf_pinv(a_star);
  res.a_dagger_inf = ap.inf_norm;
  res.a_star_dagger_inf = asp.inf_norm;
  const double n_inf = norm_row_induced(d.n_mat);
  res.gamma = ap.inf_norm * n_inf / (1.0 - 2.0 * ell) + c_nu * ap.inf_norm;

  res.two_factor_applicable = n_inf * asp.inf_norm < 0.125;
  if (res.two_factor_applicable) {
    res.two_factor_ok = ap.inf_norm <= 2.0 * asp.inf_norm + 1e-12;
    res.simplified_gamma_ok =
        res.gamma <= 3.0 * asp.inf_norm * (n_inf + c_nu) + 1e-12;
  }

  const DenseMatrix z = invert_square(coeff_matrix(d));
  double max_xi = 0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const std::vector<double> x = sample_weights(weights, rng.sub(2 * k));
    const std::vector<double> nu =
        sample_noise(noise, x, a_star, &a, rng.sub(2 * k + 1));
    const std::vector<double> zx = matvec(z, x);
    std::vector<double> w = matvec(d.n_mat, zx);  // m
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = nu[i] - w[i];
    const std::vector<double> xi = matvec(ap.pinv, w);
    max_xi = std::max(max_xi, vec_linf(xi));
  }
  (void)n;
  res.max_xi = max_xi;
  res.holds = max_xi <= res.gamma + 1e-12;
  return res;
}

// ---------------------------------------------------------------------------
// Exact-expectation oracle.

/// Exact update expectation and the weight-side cross moment, both computed
/// by enumerating every weight-outcome pair with its probability.
struct ExactExpectation {
  DenseMatrix delta;         // m x n: E[(y - y')(x - x')^T]
  DenseMatrix weight_cross;  // n x n: E[(x* - x*')(x - x')^T]
};

inline ExactExpectation exact_enumeration(const ModelSpec& spec,
                                          const DenseMatrix& a, double alpha) {
  const std::size_t m = spec.ground_truth.rows();
  const std::size_t n = spec.ground_truth.cols();
  if (n > 12) throw SupportTooLarge("enumeration limited to n <= 12");
  if (a.rows() != m || a.cols() != n) throw BadDims("iterate shape mismatch");

  // Per-coordinate finite supports (at most 2 each).
  std::vector<std::vector<std::pair<double, double>>> supports(n);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    supports[i] = spec.weights.coord_support(i);
    if (supports[i].size() > 2)
      throw SupportTooLarge("coordinate support exceeds 2 points");
    total *= supports[i].size();
    if (total > 4096) throw SupportTooLarge("joint support exceeds 4096");
  }

  // Deterministic noise only (else the pair enumeration is not finite).
  std::vector<double> nu(m, 0.0);
  if (spec.noise.variant == NoiseModel::Variant::Adversarial &&
      spec.noise.level > 0) {
    if (spec.noise.strategy == NoiseModel::AdvStrategy::ConstantBias) {
      for (std::size_t i = 0; i < m; ++i) nu[i] = spec.noise.level;
    } else if (spec.noise.strategy == NoiseModel::AdvStrategy::SignAligned) {
      for (std::size_t i = 0; i < m; ++i) {
        double row_sum = 0;
        for (std::size_t j = 0; j < n; ++j) row_sum += a(i, j);
        nu[i] = row_sum >= 0 ? spec.noise.level : -spec.noise.level;
      }
    } else {
      throw SupportTooLarge("noise model is not finite-support");
    }
  } else if (spec.noise.variant == NoiseModel::Variant::Unbiased &&
             spec.noise.level > 0) {
    throw SupportTooLarge("noise model is not finite-support");
  }

  // Enumerate outcomes: weights, probability, y, decoded x.
  const PinvResult ap = min_inf_pinv(a);
  std::vector<std::vector<double>> ws(total), ys(total), xs(total);
  std::vector<double> probs(total);
  for (std::size_t o = 0; o < total; ++o) {
    std::vector<double> w(n);
    double prob = 1.0;
    std::size_t rem = o;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& sup = supports[i];
      const std::size_t pick = rem % sup.size();
      rem /= sup.size();
      w[i] = sup[pick].first;
      prob *= sup[pick].second;
    }
    std::vector<double> y = matvec(spec.ground_truth, w);
    for (std::size_t i = 0; i < m; ++i) y[i] += nu[i];
    xs[o] = relu_offset(matvec(ap.pinv, y), alpha);
    ws[o] = std::move(w);
    ys[o] = std::move(y);
    probs[o] = prob;
  }

  ExactExpectation res{DenseMatrix(m, n), DenseMatrix(n, n)};
  for (std::size_t o = 0; o < total; ++o) {
    if (probs[o] == 0) continue;
    for (std::size_t p = 0; p < total; ++p) {
      const double pr = probs[o] * probs[p];
      if (pr == 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double dx = xs[o][j] - xs[p][j];
        if (dx == 0) continue;
        for (std::size_t i = 0; i < m; ++i)
          res.delta(i, j) += pr * (ys[o][i] - ys[p][i]) * dx;
        for (std::size_t i = 0; i < n; ++i)
          res.weight_cross(i, j) += pr * (ws[o][i] - ws[p][i]) * dx;
      }
    }
  }
  return res;
}

inline DenseMatrix exact_update_expectation(const ModelSpec& spec,
                                            const DenseMatrix& a,
                                            double alpha) {
  return exact_enumeration(spec, a, alpha).delta;
}

// ---------------------------------------------------------------------------
// Contamination-update audit.

struct EBoundEntry {
  std::size_t i = 0, j = 0;  // indexes Z_{i,j} and E~_{j,i}
  bool negative_case = false;
  double e_tilde = 0;
  double lower = 0, upper = 0;
  double slack = 0;  // min distance to either bound; >= 0 iff inside
};

struct EBoundAudit {
  std::vector<EBoundEntry> entries;
  bool all_hold = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  double max_xi = 0;  // attained |xi| over the enumerated outcomes
};

/// Entrywise audit of the contamination-update bounds: the exact
/// E~_{j,i} = E[(x*_j - x*'_j)(x_i - x'_i)] from the enumeration oracle must
/// fall inside the case-split bounds driven by Z = (Sigma + E)^{-1}.
inline EBoundAudit audit_e_bound_lemma(const ModelSpec& spec,
                                       const DenseMatrix& a, double alpha,
                                       double rho) {
  if (!(rho >= 0 && rho < alpha))
    throw HypothesisViolated("need 0 <= rho < alpha");
  const Decomposition d = decompose(a, spec.ground_truth);
  const double sigma_min =
      *std::min_element(d.sigma.begin(), d.sigma.end());
  if (sigma_min < 0.5 - 1e-15)
    throw HypothesisViolated("decode hypothesis Sigma >= I/2 fails");
  if (!(norm_col_induced(d.e_mat) < 0.5))
    throw HypothesisViolated("decode hypothesis ||E||_1 < 1/2 fails");

  const std::size_t n = spec.ground_truth.cols();
  const DenseMatrix z = invert_square(coeff_matrix(d));
  const ExactExpectation ex = exact_enumeration(spec, a, alpha);

  // Verify |xi| <= rho over the whole (finite) outcome space.
  const PinvResult ap = min_inf_pinv(a);
  double max_xi = 0;
  {
    std::vector<std::vector<std::pair<double, double>>> supports(n);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
      supports[i] = spec.weights.coord_support(i);
      total *= supports[i].size();
    }
    std::vector<double> nu(spec.ground_truth.rows(), 0.0);
    if (spec.noise.variant == NoiseModel::Variant::Adversarial &&
        spec.noise.level > 0 &&
        spec.noise.strategy == NoiseModel::AdvStrategy::ConstantBias)
      for (double& v : nu) v = spec.noise.level;
    if (spec.noise.variant == NoiseModel::Variant::Adversarial &&
        spec.noise.level > 0 &&
        spec.noise.strategy == NoiseModel::AdvStrategy::SignAligned)
      for (std::size_t i = 0; i < nu.size(); ++i) {
        double rs = 0;
        for (std::size_t j = 0; j < n; ++j) rs += a(i, j);
        nu[i] = rs >= 0 ? spec.noise.level : -spec.noise.level;
      }
    for (std::size_t o = 0; o < total; ++o) {
      std::vector<double> w(n);
      std::size_t rem = o;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& sup = supports[i];
        w[i] = sup[rem % sup.size()].first;
        rem /= sup.size();
      }
      const std::vector<double> zx = matvec(z, w);
      std::vector<double> t = matvec(d.n_mat, zx);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = nu[i] - t[i];
      max_xi = std::max(max_xi, vec_linf(matvec(ap.pinv, t)));
    }
  }
  if (max_xi > rho + 1e-12)
    throw HypothesisViolated("attained |xi| = " + std::to_string(max_xi) +
                             " exceeds rho = " + std::to_string(rho));

  const Moments mom = moments(spec.weights);
  const double nn = double(n);
  EBoundAudit audit;
  audit.max_xi = max_xi;
  for (std::size_t i = 0; i < n; ++i) {
    const double z_row_l1 =
        detail::pairwise_abs_sum(z.row_ptr(i), 1, n);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      EBoundEntry e;
      e.i = i;
      e.j = j;
      e.e_tilde = ex.weight_cross(j, i);
      const double zij = z(i, j);
      const double tol = 1e-12;
      if (zij < 0) {
        e.negative_case = true;
        const double bound = 4.0 * mom.C1 * mom.C1 * z_row_l1 /
                             (nn * nn * (alpha - rho)) *
                             (std::abs(zij) + rho);
        e.lower = -bound;
        e.upper = bound;
      } else {
        const double wing = 8.0 * mom.C1 * rho / (nn * (alpha - rho)) *
                            (mom.C1 * z_row_l1 / nn + zij);
        e.lower = -wing - 2.0 * mom.C1 * mom.C1 / (nn * nn) * zij;
        e.upper =
            wing + 2.0 * spec.weights.coord_second_moment(j) * zij;
      }
      e.slack = std::min(e.e_tilde - e.lower, e.upper - e.e_tilde);
      audit.entries.push_back(e);
      if (e.slack < -tol * std::max(1.0, std::abs(e.upper) + std::abs(e.lower)))
        audit.all_hold = false;
      audit.worst_slack = std::min(audit.worst_slack, e.slack);
    }
  }
  if (audit.entries.empty()) audit.worst_slack = 0;
  return audit;
}

/// Bracket for the diagonal update entries: per-coordinate lower and upper
/// bounds on Sigma~_{i,i} = E[(x*_i - x*'_i)(x_i - x'_i)].
struct SigmaBoundAudit {
  std::vector<double> lower, upper, exact;
  bool all_hold = true;
  double worst_slack = std::numeric_limits<double>::infinity();
};

inline SigmaBoundAudit audit_sigma_bound_lemma(const ModelSpec& spec,
                                               const DenseMatrix& a,
                                               double alpha, double rho) {
  if (!(rho >= 0 && rho < alpha))
    throw HypothesisViolated("need 0 <= rho < alpha");
  const Decomposition d = decompose(a, spec.ground_truth);
  const double sigma_min = *std::min_element(d.sigma.begin(), d.sigma.end());
  if (sigma_min < 0.5 - 1e-15)
    throw HypothesisViolated("hypothesis Sigma >= I/2 fails");
  const std::size_t n = spec.ground_truth.cols();
  const DenseMatrix z = invert_square(coeff_matrix(d));
  DenseMatrix v = z;
  for (std::size_t i = 0; i < n; ++i) v(i, i) -= 1.0 / d.sigma[i];
  const ExactExpectation ex = exact_enumeration(spec, a, alpha);
  const Moments mom = moments(spec.weights);
  const double nn = double(n);

  SigmaBoundAudit audit;
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_sigma = 1.0 / d.sigma[i];
    const double vii = std::abs(v(i, i));
    const double v_row_l1 = detail::pairwise_abs_sum(v.row_ptr(i), 1, n);
    const double sm = spec.weights.coord_second_moment(i);
    const double lo =
        sm * (2.0 * inv_sigma - 2.0 * vii) -
        (2.0 * mom.C1 / nn) * (alpha + 2.0 * rho + (mom.C1 / nn) * inv_sigma +
                               (2.0 * mom.C1 / nn) * v_row_l1);
    const double hi = sm * (2.0 * inv_sigma + 2.0 * vii) +
                      (2.0 * mom.C1 / nn) * (rho + (mom.C1 / nn) * v_row_l1);
    const double exact = ex.weight_cross(i, i);
    audit.lower.push_back(lo);
    audit.upper.push_back(hi);
    audit.exact.push_back(exact);
    const double slack = std::min(exact - lo, hi - exact);
    audit.worst_slack = std::min(audit.worst_slack, slack);
    if (slack < -1e-12 * std::max(1.0, std::abs(hi)))
      audit.all_hold = false;
  }
  return audit;
}

/// Per-coordinate bracket on the decoded second moment E[x_i^2] from exact
/// (Sigma, V) quantities; hypotheses |xi| <= rho < alpha, Sigma >= I/2.
inline std::vector<std::pair<double, double>> second_moment_bounds(
    const Decomposition& d, const WeightDist& weights, double alpha,
    double rho) {
  if (!(rho >= 0 && rho < alpha))
    throw HypothesisViolated("need 0 <= rho < alpha");
  const double sigma_min = *std::min_element(d.sigma.begin(), d.sigma.end());
  if (sigma_min < 0.5 - 1e-15)
    throw HypothesisViolated("hypothesis Sigma >= I/2 fails");
  const std::size_t n = d.sigma.size();
  const DenseMatrix z = invert_square(coeff_matrix(d));
  DenseMatrix v = z;
  for (std::size_t i = 0; i < n; ++i) v(i, i) -= 1.0 / d.sigma[i];
  const Moments mom = moments(weights);
  double max_sm = 0;
  for (std::size_t j = 0; j < n; ++j)
    max_sm = std::max(max_sm, weights.coord_second_moment(j));
  const double nn = double(n);
  std::vector<std::pair<double, double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double inv_sigma = 1.0 / d.sigma[i];
    const double vii = std::abs(v(i, i));
    std::vector<double> row(n);
    for (std::size_t j = 0; j < n; ++j) row[j] = v(i, j);
    const double l1 = vec_l1(row);
    const double l2 = vec_l2(row);
    const double sm = weights.coord_second_moment(i);
    const double lo = (inv_sigma - vii) * (inv_sigma - vii) * sm -
                      l2 * l2 * max_sm -
                      (mom.C1 * mom.C1 / (nn * nn) * l1 * (l1 + 2.0 * inv_sigma) +
                       2.0 * (alpha + rho) * mom.C1 / nn * inv_sigma);
    const double hi = (inv_sigma + vii) * (inv_sigma + vii) * sm +
                      l2 * l2 * max_sm +
                      l1 * (l1 + 2.0 * inv_sigma) * mom.C1 * mom.C1 / (nn * nn);
    out[i] = {lo, hi};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recurrence lemma solvers.

/// Parameter bundle shared by the recurrence lemmas; each solver reads the
/// fields its lemma uses.
struct RecurrenceParams {
  double a0 = 0, b0 = 0;
  double eta = 0;
  double r = 0, R = 0;
  double s = 0;
  double h = 0, h1 = 0, h2 = 0;
};

/// a_t <= (1 - eta)^t a_0 + h, returned for t = 0..T.
inline std::vector<double> solve_simple_recursion(double a0, double eta,
                                                  double h, std::size_t T) {
  if (a0 < 0 || h < 0 || eta < 0 || eta > 1)
    throw BadParams("simple recursion needs a0, h >= 0 and eta in [0,1]");
  std::vector<double> out(T + 1);
  for (std::size_t t = 0; t <= T; ++t)
    out[t] = std::pow(1.0 - eta, double(t)) * a0 + h;
  return out;
}

/// Uniform bounds u_a = max(a0, h1), u_b = max(b0, h2 + s u_a).
inline std::pair<double, double> solve_simple_coupling(double a0, double b0,
                                                       double eta, double s,
                                                       double h1, double h2) {
  if (a0 < 0 || b0 < 0 || s < 0 || h1 < 0 || h2 < 0 || eta < 0 || eta > 1)
    throw BadParams("simple coupling needs nonnegative inputs, eta in [0,1]");
  const double ua = std::max(a0, h1);
  const double ub = std::max(b0, h2 + s * ua);
  return {ua, ub};
}

/// Output of the coupled-recurrence lemma: the uniform sum bound, the two
/// asymptotic tail levels, and the closed-form shifted trajectories.
struct CouplingSolution {
  double sum_bound = 0;        // a_t + b_t <= a0 + b0 + (Rr+2R+1)/(R-r) h
  double tail_a_level = 0;     // R(r+1)/(R-r) h
  double tail_b_level = 0;     // (R+1)/(R-r) h
  double c0 = 0, d0 = 0;       // shifted initial values
  std::vector<double> c_seq;   // closed form of the shifted equality system
  std::vector<double> d_seq;
  double eta = 0, r = 0, R = 0, h = 0;

  /// Steps after which a_t/b_t are within eps of their tail levels. The
  /// decoupled modes c +- sqrt(R/r) d contract by at least 1 - eta/2 per step
  /// (R > 4r makes sqrt(r/R) < 1/2), so t >= (2/eta) ln(M/eps) suffices with
  /// M = |c0| + sqrt(R/r)|d0|.
  double tail_time(double eps) const {
    if (eps <= 0) throw BadParams("tail_time needs eps > 0");
    const double m = std::abs(c0) + std::sqrt(R / r) * std::abs(d0);
    if (m <= eps || eta <= 0) return 0;
    return 2.0 / eta * std::log(m / eps);
  }
};

/// Closed-form solution of the coupled recurrences
/// a' <= (1-eta) a + eta r b + eta h, b' <= (1-eta) b + eta/R a + eta h
/// under R > 4r > 0, via the shift c = a - R(r+1)/(R-r) h,
/// d = b - (R+1)/(R-r) h and eigen-decoupling c +- sqrt(rR) d.
inline CouplingSolution solve_coupling(const RecurrenceParams& p,
                                       std::size_t T) {
  if (!(p.r > 0) || !(p.R > 4.0 * p.r))
    throw BadParams("coupling lemma needs R > 4r > 0");
  if (p.eta < 0 || p.eta > 1 || p.h < 0 || p.a0 < 0 || p.b0 < 0)
    throw BadParams("coupling lemma needs eta in [0,1], h, a0, b0 >= 0");
  CouplingSolution s;
  s.eta = p.eta;
  s.r = p.r;
  s.R = p.R;
  s.h = p.h;
  s.sum_bound = p.a0 + p.b0 +
                (p.R * p.r + 2.0 * p.R + 1.0) / (p.R - p.r) * p.h;
  s.tail_a_level = p.R * (p.r + 1.0) / (p.R - p.r) * p.h;
  s.tail_b_level = (p.R + 1.0) / (p.R - p.r) * p.h;
  s.c0 = p.a0 - s.tail_a_level;
  s.d0 = p.b0 - s.tail_b_level;
  const double w = std::sqrt(p.r / p.R);
  const double k = std::sqrt(p.r * p.R);
  const double lam_p = 1.0 - p.eta + p.eta * w;
  const double lam_m = 1.0 - p.eta - p.eta * w;
  s.c_seq.resize(T + 1);
  s.d_seq.resize(T + 1);
  for (std::size_t t = 0; t <= T; ++t) {
    const double pp = std::pow(lam_p, double(t));
    const double pm = std::pow(lam_m, double(t));
    s.c_seq[t] = 0.5 * (pp + pm) * s.c0 + 0.5 * k * (pp - pm) * s.d0;
    s.d_seq[t] = 0.5 / k * (pp - pm) * s.c0 + 0.5 * (pp + pm) * s.d0;
  }
  return s;
}

/// Result of checking a diagnostics trajectory against the proof's one-step
/// recurrences (a = ||E+||_s, b = ||E-||_s).
struct TrajectoryCheck {
  bool pair_holds = true;      // both per-norm recurrences at every step
  bool coupled_holds = true;   // potential recurrence at every step
  double worst_slack = std::numeric_limits<double>::infinity();
  long long first_violation_t = -1;
};

/// Check a_{t+1} <= (1 - 3/25 eta) a_t + 7 eta b_t + eta h + slack,
/// b_{t+1} <= (1 - 24/25 eta) b_t + eta/100 a_t + eta h + slack, and the
/// coupled p_{t+1} <= (1 - eta/25) p_t + 9 eta h + slack, for every
/// consecutive record pair. sampling_slack is caller-supplied (finite-batch
/// estimates cannot satisfy the population inequalities exactly).
inline TrajectoryCheck verify_trajectory_recurrence(
    const std::vector<IterRecord>& records, double eta, double h,
    double sampling_slack) {
  TrajectoryCheck res;
  if (records.size() < 2) {
    res.worst_slack = 0;
    return res;
  }
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const IterRecord& cur = records[k];
    const IterRecord& nxt = records[k + 1];
    const double a_bound = (1.0 - 3.0 / 25.0 * eta) * cur.e_pos_sym +
                           7.0 * eta * cur.e_neg_sym + eta * h + sampling_slack;
    const double b_bound = (1.0 - 24.0 / 25.0 * eta) * cur.e_neg_sym +
                           eta / 100.0 * cur.e_pos_sym + eta * h +
                           sampling_slack;
    const double p_bound =
        (1.0 - eta / 25.0) * cur.potential + 9.0 * eta * h + sampling_slack;
    const double slack = std::min(
        {a_bound - nxt.e_pos_sym, b_bound - nxt.e_neg_sym,
         p_bound - nxt.potential});
    if (nxt.e_pos_sym > a_bound || nxt.e_neg_sym > b_bound) {
      res.pair_holds = false;
      if (res.first_violation_t < 0) res.first_violation_t = (long long)cur.t;
    }
    if (nxt.potential > p_bound) {
      res.coupled_holds = false;
      if (res.first_violation_t < 0) res.first_violation_t = (long long)cur.t;
    }
    res.worst_slack = std::min(res.worst_slack, slack);
  }
  return res;
}

}  // namespace purelu

#endif  // PURELU_ANALYSIS_HPP
