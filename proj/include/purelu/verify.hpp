// Randomized self-check suites: each draws many random instances, evaluates
// an exact property or a certified bound, and reports violations.
#ifndef PURELU_VERIFY_HPP
#define PURELU_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "purelu/analysis.hpp"
#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/model.hpp"
#include "purelu/pinv.hpp"
#include "purelu/rng.hpp"

namespace purelu {

struct VerifyReport {
  std::string name;
  std::size_t draws = 0;
  std::size_t failures = 0;
  double worst_slack = std::numeric_limits<double>::infinity();

  void note(bool ok, double slack) {
    if (!ok) ++failures;
    worst_slack = std::min(worst_slack, slack);
  }
};

namespace detail {

inline DenseMatrix random_matrix(const Rng& rng, std::size_t m, std::size_t n,
                                 bool nonneg = false) {
  DenseMatrix a(m, n);
  for (std::size_t k = 0; k < m * n; ++k) {
    const double g = rng.normal(k);
    a.data()[k] = nonneg ? std::abs(g) : g;
  }
  return a;
}

}  // namespace detail

/// Norm identities: duality under transpose, the max characterization of the
/// symmetric norm, submultiplicativity, and the positive/negative split.
inline VerifyReport verify_norms(std::size_t draws, std::uint64_t seed) {
  VerifyReport rep{"norms"};
  const Rng root(seed, stream::kSweep);
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const std::size_t m = 1 + rng.index(0, 6);
    const std::size_t n = 1 + rng.index(1, 6);
    const DenseMatrix a = detail::random_matrix(rng.sub(10), m, n);
    ++rep.draws;

    const double scale = std::max(1.0, norm_max(a) * double(m + n));
    const double dual = std::abs(norm_col_induced(a) -
                                 norm_row_induced(a.transposed()));
    rep.note(dual <= 1e-12 * scale, 1e-12 * scale - dual);
    const double sym_diff = std::abs(
        norm_sym(a) - std::max(norm_col_induced(a), norm_row_induced(a)));
    rep.note(sym_diff == 0, -sym_diff);

    const auto [pos, neg] = split_pos_neg(a);
    bool exact = true;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (pos.data()[k] - neg.data()[k] != a.data()[k]) exact = false;
    rep.note(exact, exact ? 0.0 : -1.0);
    rep.note(norm_sym(pos) <= norm_sym(a) + 1e-12 * scale,
             norm_sym(a) - norm_sym(pos));

    const DenseMatrix b = detail::random_matrix(rng.sub(11), n, m);
    const DenseMatrix ab = matmul(a, b);
    const double sub1 =
        norm_col_induced(a) * norm_col_induced(b) - norm_col_induced(ab);
    rep.note(sub1 >= -1e-12 * scale * scale, sub1);
    const double sub2 =
        norm_row_induced(a) * norm_row_induced(b) - norm_row_induced(ab);
    rep.note(sub2 >= -1e-12 * scale * scale, sub2);
  }
  return rep;
}

/// Pseudo-inverse properties: left-inverse identity, and row-norm optimality
/// relative to the least-squares left inverse.
inline VerifyReport verify_pinv(std::size_t draws, std::uint64_t seed) {
  VerifyReport rep{"pinv"};
  const Rng root(seed, stream::kSweep);
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const std::size_t n = 2 + rng.index(0, 4);
    const std::size_t m = n + rng.index(1, 4);
    const DenseMatrix a = detail::random_matrix(rng.sub(10), m, n);
    ++rep.draws;
    PinvResult pr;
    DenseMatrix ls(1, 1);
    try {
      pr = min_inf_pinv(a);
      ls = ls_pinv(a);
    } catch (const Error&) {
      continue;  // degenerate draw
    }
    const DenseMatrix prod = matmul(pr.pinv, a);
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        worst = std::max(worst,
                         std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)));
    rep.note(worst <= 1e-8, 1e-8 - worst);
    for (std::size_t i = 0; i < n; ++i) {
      double ls_row = 0, opt_row = 0;
      for (std::size_t j = 0; j < m; ++j) {
        ls_row += std::abs(ls(i, j));
        opt_row += std::abs(pr.pinv(i, j));
      }
      rep.note(opt_row <= ls_row + 1e-9, ls_row - opt_row);
    }
    rep.note(pr.inf_norm <= norm_row_induced(ls) + 1e-9,
             norm_row_induced(ls) - pr.inf_norm);
  }
  return rep;
}

/// Decode identity: phi_alpha(A^dagger y) equals
/// phi_alpha((Sigma+E)^{-1} x* + xi) with xi = -A^dagger N Z x* + A^dagger nu,
/// exactly, for any left inverse.
inline VerifyReport verify_decode(std::size_t draws, std::uint64_t seed) {
  VerifyReport rep{"decode"};
  const Rng root(seed, stream::kSweep);
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const std::size_t n = 2 + rng.index(0, 4);
    const std::size_t m = n + 2;
    const DenseMatrix a_star = gen_ground_truth(
        GroundTruthKind::RandomNonnegUnitL1, m, n, seed ^ (d + 1));
    InitSpec init;
    init.ell = 0.2;
    init.sigma_lo = 0.85;
    init.sigma_hi = 1.2;
    init.n0_level = 0.1;
    const DenseMatrix a = gen_init(a_star, init, rng.sub(1));
    ++rep.draws;
    PinvResult pr;
    try {
      pr = min_inf_pinv(a);
    } catch (const Error&) {
      continue;
    }
    const Decomposition dec = decompose(a, a_star);
    const DenseMatrix z = invert_square(coeff_matrix(dec));
    std::vector<double> x_star(n), nu(m);
    for (std::size_t i = 0; i < n; ++i) x_star[i] = rng.u01(100 + i);
    for (std::size_t i = 0; i < m; ++i)
      nu[i] = 0.1 * (2.0 * rng.u01(200 + i) - 1.0);
    std::vector<double> y = matvec(a_star, x_star);
    for (std::size_t i = 0; i < m; ++i) y[i] += nu[i];
    const double alpha = 0.05 + 0.2 * rng.u01(300);

    const std::vector<double> lhs = relu_offset(matvec(pr.pinv, y), alpha);
    const std::vector<double> zx = matvec(z, x_star);
    std::vector<double> t = matvec(dec.n_mat, zx);
    for (std::size_t i = 0; i < m; ++i) t[i] = nu[i] - t[i];
    const std::vector<double> xi = matvec(pr.pinv, t);
    std::vector<double> arg(n);
    for (std::size_t i = 0; i < n; ++i) arg[i] = zx[i] + xi[i];
    const std::vector<double> rhs = relu_offset(arg, alpha);
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
    rep.note(worst <= 1e-9, 1e-9 - worst);
  }
  return rep;
}

/// The four inverse-perturbation norm bounds on random admissible (Sigma, E).
inline VerifyReport verify_v_bound(std::size_t draws, std::uint64_t seed) {
  VerifyReport rep{"v_bound"};
  const Rng root(seed, stream::kSweep);
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const std::size_t n = 2 + rng.index(0, 5);
    const double ell = rng.uniform(1, 0.05, 0.3);
    const double ell_e = rng.uniform(2, 0.02, 0.95 * (1.0 - ell));
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i)
      sigma[i] = rng.uniform(10 + i, 1.0 - ell, 1.0 + ell);
    DenseMatrix e(n, n);
    const int mode = int(rng.index(3, 3));  // mixed / nonneg / nonpos
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double g = rng.normal(100 + i * n + j);
        if (mode == 1) g = std::abs(g);
        if (mode == 2) g = -std::abs(g);
        e(i, j) = g;
      }
    const double s = norm_sym(e);
    if (s == 0) continue;
    const double target = ell_e * rng.uniform(4, 0.3, 0.999);
    for (std::size_t k = 0; k < e.size(); ++k) e.data()[k] *= target / s;
    ++rep.draws;
    try {
      const VBoundReport r = check_v_bounds(sigma, e, ell, ell_e);
      rep.note(r.all_ok(), r.worst_slack());
    } catch (const SingularMatrix&) {
      continue;
    }
  }
  return rep;
}

/// The decode-perturbation bound gamma on random warm starts with bounded
/// adversarial noise.
inline VerifyReport verify_xi_bound(std::size_t draws, std::uint64_t seed) {
  VerifyReport rep{"xi_bound"};
  const Rng root(seed, stream::kSweep);
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const std::size_t n = 2 + rng.index(0, 3);
    const std::size_t m = n + 2;
    ModelSpec spec;
    spec.ground_truth = gen_ground_truth(GroundTruthKind::RandomNonnegUnitL1,
                                         m, n, seed ^ (0x5eedu + d));
    spec.weights = WeightDist::bernoulli_uniform(n, 1.0 + rng.u01(0));
    const double c_nu = 0.02 * rng.u01(1);
    spec.noise = c_nu > 0
                     ? NoiseModel::adversarial(
                           c_nu, NoiseModel::AdvStrategy::ConstantBias)
                     : NoiseModel::none();
    spec.init.ell = rng.uniform(2, 0.01, 0.12);
    spec.init.sigma_lo = 1.0;
    spec.init.sigma_hi = 1.0 + 0.5 * spec.init.ell;
    spec.init.n0_level = 0.01 * rng.u01(3);
    const DenseMatrix a = gen_init(spec.ground_truth, spec.init, rng.sub(4));
    ++rep.draws;
    try {
      const Decomposition dec = decompose(a, spec.ground_truth);
      const XiBoundResult r =
          check_xi_bound(a, spec.ground_truth, dec, c_nu, spec.weights,
                         spec.noise, 64, rng.sub(5));
      rep.note(r.holds, r.gamma - r.max_xi);
      if (r.two_factor_applicable) {
        rep.note(r.two_factor_ok, 2.0 * r.a_star_dagger_inf - r.a_dagger_inf);
        rep.note(r.simplified_gamma_ok, 1.0);
      }
    } catch (const HypothesisViolated&) {
      continue;
    } catch (const Error&) {
      continue;
    }
  }
  return rep;
}

/// Entrywise bounds on the exact update expectation (off-diagonal bracket,
/// diagonal bracket, and the decoded second-moment bracket), on random
/// finite-support noiseless instances.
inline VerifyReport verify_update_bounds(std::size_t draws,
                                         std::uint64_t seed) {
  VerifyReport rep{"update_bounds"};
  const Rng root(seed, stream::kSweep);
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const std::size_t n = 2 + rng.index(0, 3);
    const std::size_t m = n + 1;
    ModelSpec spec;
    spec.ground_truth = gen_ground_truth(GroundTruthKind::RandomNonnegUnitL1,
                                         m, n, seed ^ (0xabcu + d));
    std::vector<Marginal> ms;
    for (std::size_t i = 0; i < n; ++i)
      ms.push_back(Marginal::bernoulli(rng.uniform(2 * i, 0.1, 0.9),
                                       rng.uniform(2 * i + 1, 0.3, 1.0)));
    spec.weights = WeightDist::independent(std::move(ms));
    spec.noise = NoiseModel::none();
    spec.init.ell = rng.uniform(100, 0.02, 0.1);
    spec.init.e_sign =
        rng.u01(101) < 0.5 ? InitSpec::ESign::Mixed : InitSpec::ESign::NonNegative;
    spec.init.n0_level = 0;
    const DenseMatrix a = gen_init(spec.ground_truth, spec.init, rng.sub(6));
    const double alpha = rng.uniform(102, 0.05, 0.2);
    ++rep.draws;
    try {
      const EBoundAudit ea = audit_e_bound_lemma(spec, a, alpha, 0.0);
      rep.note(ea.all_hold, ea.worst_slack);
      const SigmaBoundAudit sa = audit_sigma_bound_lemma(spec, a, alpha, 0.0);
      rep.note(sa.all_hold, sa.worst_slack);

      const Decomposition dec = decompose(a, spec.ground_truth);
      const auto bounds = second_moment_bounds(dec, spec.weights, alpha, 0.0);
      // Exact decoded second moments by outcome enumeration.
      const PinvResult ap = min_inf_pinv(a);
      std::vector<std::vector<std::pair<double, double>>> sup(n);
      std::size_t total = 1;
      for (std::size_t i = 0; i < n; ++i) {
        sup[i] = spec.weights.coord_support(i);
        total *= sup[i].size();
      }
      std::vector<double> sm(n, 0.0);
      for (std::size_t o = 0; o < total; ++o) {
        std::vector<double> w(n);
        double prob = 1;
        std::size_t rem = o;
        for (std::size_t i = 0; i < n; ++i) {
          w[i] = sup[i][rem % sup[i].size()].first;
          prob *= sup[i][rem % sup[i].size()].second;
          rem /= sup[i].size();
        }
        const std::vector<double> x =
            relu_offset(matvec(ap.pinv, matvec(spec.ground_truth, w)), alpha);
        for (std::size_t i = 0; i < n; ++i) sm[i] += prob * x[i] * x[i];
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double slack =
            std::min(sm[i] - bounds[i].first, bounds[i].second - sm[i]);
        rep.note(slack >= -1e-12, slack);
      }
    } catch (const HypothesisViolated&) {
      continue;
    } catch (const SupportTooLarge&) {
      continue;
    }
  }
  return rep;
}

/// Coupled-recurrence lemma against step-by-step simulation of the extremal
/// (equality) system.
inline VerifyReport verify_coupling(std::size_t draws, std::uint64_t seed) {
  VerifyReport rep{"coupling"};
  const Rng root(seed, stream::kSweep);
  const std::size_t T = 400;
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    RecurrenceParams p;
    p.r = rng.uniform(0, 0.1, 1.0);
    p.R = p.r * rng.uniform(1, 4.5, 16.0);
    p.eta = rng.uniform(2, 0.05, 0.5);
    p.a0 = rng.u01(3);
    p.b0 = rng.u01(4);
    p.h = 0.05 * rng.u01(5);
    ++rep.draws;
    const CouplingSolution sol = solve_coupling(p, T);
    double a = p.a0, b = p.b0;
    double worst_closed = 0;
    bool sum_ok = true, tail_ok = true;
    const double eps = 0.01;
    const double t_star = sol.tail_time(eps);
    for (std::size_t t = 0; t <= T; ++t) {
      if (a + b > sol.sum_bound + 1e-10) sum_ok = false;
      worst_closed = std::max(
          worst_closed, std::abs(a - (sol.tail_a_level + sol.c_seq[t])));
      worst_closed = std::max(
          worst_closed, std::abs(b - (sol.tail_b_level + sol.d_seq[t])));
      if (double(t) >= t_star) {
        if (a > sol.tail_a_level + eps + 1e-10) tail_ok = false;
        if (b > sol.tail_b_level + eps + 1e-10) tail_ok = false;
      }
      const double an = (1.0 - p.eta) * a + p.eta * p.r * b + p.eta * p.h;
      const double bn = (1.0 - p.eta) * b + p.eta / p.R * a + p.eta * p.h;
      a = an;
      b = bn;
    }
    rep.note(sum_ok, sum_ok ? 0.0 : -1.0);
    rep.note(tail_ok, tail_ok ? 0.0 : -1.0);
    rep.note(worst_closed <= 1e-10 * std::max(1.0, p.a0 + p.b0),
             1e-10 - worst_closed);
  }
  return rep;
}

/// The scalar recursion bound and the two-sequence uniform bound against
/// simulation of their extremal systems.
inline VerifyReport verify_simple_recurrences(std::size_t draws,
                                              std::uint64_t seed) {
  VerifyReport rep{"simple_recurrences"};
  const Rng root(seed, stream::kSweep);
  const std::size_t T = 200;
  for (std::size_t d = 0; d < draws; ++d) {
    const Rng rng = root.sub(d);
    const double eta = rng.uniform(0, 0.02, 0.9);
    const double a0 = rng.u01(1);
    const double h = 0.2 * rng.u01(2);
    ++rep.draws;
    const std::vector<double> bound = solve_simple_recursion(a0, eta, h, T);
    double a = a0;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t <= T; ++t) {
      worst = std::min(worst, bound[t] - a);
      a = (1.0 - eta) * a + eta * h;
    }
    rep.note(worst >= -1e-12, worst);

    const double b0 = rng.u01(3);
    const double s = 2.0 * rng.u01(4);
    const double h1 = rng.u01(5);
    const double h2 = rng.u01(6);
    const auto [ua, ub] = solve_simple_coupling(a0, b0, eta, s, h1, h2);
    double av = a0, bv = b0;
    double worst2 = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t <= T; ++t) {
      worst2 = std::min(worst2, std::min(ua - av, ub - bv));
      const double an = (1.0 - eta) * av + eta * h1;
      const double bn = (1.0 - eta) * bv + eta * (s * av + h2);
      av = an;
      bv = bn;
    }
    rep.note(worst2 >= -1e-12, worst2);
  }
  return rep;
}

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {
      "norms",    "pinv",          "decode",   "v_bound",
      "xi_bound", "update_bounds", "coupling", "simple_recurrences"};
  return names;
}

inline VerifyReport run_verify_suite(const std::string& name,
                                     std::size_t draws, std::uint64_t seed) {
  if (name == "norms") return verify_norms(draws, seed);
  if (name == "pinv") return verify_pinv(draws, seed);
  if (name == "decode") return verify_decode(draws, seed);
  if (name == "v_bound") return verify_v_bound(draws, seed);
  if (name == "xi_bound") return verify_xi_bound(draws, seed);
  if (name == "update_bounds") return verify_update_bounds(draws, seed);
  if (name == "coupling") return verify_coupling(draws, seed);
  if (name == "simple_recurrences")
    return verify_simple_recurrences(draws, seed);
  throw BadParams("unknown verify suite: " + name);
}

inline std::vector<VerifyReport> run_all_verify_suites(std::size_t draws,
                                                       std::uint64_t seed) {
  std::vector<VerifyReport> out;
  for (const std::string& name : verify_suite_names())
    out.push_back(run_verify_suite(name, draws, seed));
  return out;
}

}  // namespace purelu

#endif  // PURELU_VERIFY_HPP
