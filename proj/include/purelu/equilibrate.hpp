// Second-moment equilibration: repeatedly lower a bar lambda, rescale the
// already-settled columns, and admit columns whose decoded second moment
// reaches the bar, until every column is settled.
#ifndef PURELU_EQUILIBRATE_HPP
#define PURELU_EQUILIBRATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/model.hpp"
#include "purelu/purify.hpp"
#include "purelu/rng.hpp"

namespace purelu {

struct EquilParams {
  double alpha = 0;        // decode threshold
  double eta = 0;          // inner-update step size
  std::size_t T_inner = 1; // update iterations per pass
  double epsilon = 0;      // bar decay rate
  std::optional<double> lambda0;     // initial bar; default max m-hat / b
  std::size_t N = 0;       // samples per estimate / per update iteration
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_outer;  // cap on total passes

  void validate() const {
    if (!(alpha > 0)) throw BadParams("alpha must be positive");
    if (!(eta > 0 && eta <= 1)) throw BadParams("eta must be in (0, 1]");
    if (T_inner == 0) throw BadParams("T_inner must be positive");
    if (!(epsilon > 0 && epsilon < 1))
      throw BadParams("epsilon must be in (0, 1)");
    if (N < 2) throw BadParams("need at least 2 samples");
    if (lambda0 && !(*lambda0 > 0)) throw BadParams("lambda0 must be positive");
  }
};

/// Default-bar divisor and cap multiplier.
inline constexpr double kEquilBarDivisor = 0.75;
inline constexpr double kEquilCapFactor = 2.0;

struct EquilLogRow {
  std::size_t pass = 0;
  std::size_t set_size = 0;
  double lambda = 0;
  // max / min over j of the true weight second moments scaled by 1/d_j^2.
  double balance_ratio = 0;
};

struct EquilResult {
  DenseMatrix a;            // rescaled iterate
  std::vector<double> d;    // cumulative per-column scale factors
  std::vector<double> m_est;  // maintained moment estimates at exit
  std::size_t passes = 0;
  std::size_t draws = 0;  // batches consumed from the estimate stream
  std::vector<EquilLogRow> log;
};

/// Decode a fresh batch and return the per-coordinate mean of x_j^2.
inline std::vector<double> estimate_second_moments(const ModelSpec& spec,
                                                   const DenseMatrix& a,
                                                   double alpha, std::size_t N,
                                                   const Rng& rng,
                                                   std::size_t threads = 1) {
  const std::vector<Sample> batch = sample_batch(spec, N, &a, rng, threads);
  const auto xs = decode_batch(a, batch, alpha, threads);
  const std::size_t n = a.cols();
  std::vector<double> m(n, 0.0);
  for (const auto& x : xs)
    for (std::size_t j = 0; j < n; ++j) m[j] += x[j] * x[j];
  for (double& v : m) v /= double(N);
  return m;
}

/// T iterations of the pairwise-difference update applied only to the listed
/// columns (per-column gains r[j]); the other columns are left bit-exact.
/// With an empty selection this is the identity and consumes no randomness.
inline DenseMatrix column_update(const ModelSpec& spec, DenseMatrix a,
                                 double alpha, double eta,
                                 const std::vector<double>& ratios,
                                 std::size_t T,
                                 const std::vector<char>& selected,
                                 std::size_t N, const Rng& rng,
                                 std::size_t& draw_counter,
                                 std::size_t threads = 1) {
  const std::size_t n = a.cols();
  if (ratios.size() != n || selected.size() != n)
    throw BadDims("column_update ratio/selection length mismatch");
  if (std::find(selected.begin(), selected.end(), char(1)) == selected.end())
    return a;
  AlgoParams up;
  up.alpha = alpha;
  up.eta = eta;
  up.r = 1.0;  // per-column gains applied below
  up.N = N;
  up.T = T;
  for (std::size_t t = 0; t < T; ++t) {
    const std::vector<Sample> batch =
        sample_batch(spec, N, &a, rng.sub(draw_counter++), threads);
    const auto xs = decode_batch(a, batch, alpha, threads);
    const DenseMatrix delta = empirical_update(batch, xs, up, rng, threads);
    for (std::size_t j = 0; j < n; ++j) {
      if (!selected[j]) continue;
      for (std::size_t i = 0; i < a.rows(); ++i)
        a(i, j) = (1.0 - eta) * a(i, j) + ratios[j] * eta * delta(i, j);
    }
  }
  return a;
}

/// One rescale pass: the column update on the settled set, then the settled
/// columns scaled by 1 / (1 - epsilon).
inline DenseMatrix rescale(const ModelSpec& spec, const DenseMatrix& a,
                           const EquilParams& p,
                           const std::vector<double>& ratios,
                           const std::vector<char>& settled, const Rng& rng,
                           std::size_t& draw_counter, std::size_t threads = 1) {
  DenseMatrix next = column_update(spec, a, p.alpha, p.eta, ratios, p.T_inner,
                                   settled, p.N, rng, draw_counter, threads);
  const double scale = 1.0 / (1.0 - p.epsilon);
  for (std::size_t j = 0; j < next.cols(); ++j) {
    if (!settled[j]) continue;
    for (std::size_t i = 0; i < next.rows(); ++i) next(i, j) *= scale;
  }
  return next;
}

namespace detail {

inline double moment_ratio(const std::vector<double>& m) {
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  return *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Run the full equilibration. Scaling a column by 1/(1-epsilon) lowers its
/// decoded moment by (1-epsilon)^2, so the bar and the maintained estimates
/// of settled columns decay by the squared factor per pass; the unsettled
/// estimates are refreshed from data every pass.
inline EquilResult equilibration(const ModelSpec& spec, const DenseMatrix& a0,
                                 const EquilParams& params,
                                 std::size_t threads = 1) {
  params.validate();
  const std::size_t n = a0.cols();
  const Rng root(params.seed, stream::kEstimate);
  std::size_t draws = 0;

  EquilResult res;
  res.a = a0;
  res.d.assign(n, 1.0);
  std::vector<char> settled(n, 0);
  std::size_t n_settled = 0;

  std::vector<double> m = estimate_second_moments(
      spec, res.a, params.alpha, params.N, root.sub(draws++), threads);
  for (std::size_t j = 0; j < n; ++j)
    if (!(m[j] > 0)) throw ZeroColumn(j);  // coordinate never decodes above 0
  double lambda = params.lambda0
                      ? *params.lambda0
                      : *std::max_element(m.begin(), m.end()) / kEquilBarDivisor;
  std::size_t cap;
  if (params.max_outer) {
    cap = *params.max_outer;
  } else {
    // The bar travels from lambda0 down to roughly the smallest moment at
    // rate (1-eps)^2 per pass; budget twice that travel plus settle steps.
    const double min_m = *std::min_element(m.begin(), m.end());
    double travel = 0;
    if (min_m < lambda)
      travel = std::log(min_m / lambda) /
               (2.0 * std::log(1.0 - params.epsilon));
    cap = std::size_t(std::ceil(kEquilCapFactor * travel)) + n + 8;
  }

  const auto true_balance_ratio = [&]() {
    std::vector<double> scaled(n);
    for (std::size_t j = 0; j < n; ++j)
      scaled[j] = spec.weights.coord_second_moment(j) / (res.d[j] * res.d[j]);
    return detail::moment_ratio(scaled);
  };

  res.log.push_back({0, 0, lambda, true_balance_ratio()});
  const double decay = (1.0 - params.epsilon) * (1.0 - params.epsilon);

  while (true) {
    // Lower the bar until some unsettled column reaches it.
    while (true) {
      double best = -1;
      for (std::size_t j = 0; j < n; ++j)
        if (!settled[j]) best = std::max(best, m[j]);
      if (best < 0 || best >= lambda) break;

      if (++res.passes > cap)
        throw MaxOuterExceeded("pass budget " + std::to_string(cap) +
                               " exhausted");
      std::vector<double> ratios(n);
      for (std::size_t j = 0; j < n; ++j) ratios[j] = 3.0 / (5.0 * m[j]);
      res.a = rescale(spec, res.a, params, ratios, settled, root, draws,
                      threads);
      lambda *= decay;
      for (std::size_t j = 0; j < n; ++j)
        if (settled[j]) {
          res.d[j] /= 1.0 - params.epsilon;
          m[j] *= decay;
        }
      const std::vector<double> fresh = estimate_second_moments(
          spec, res.a, params.alpha, params.N, root.sub(draws++), threads);
      for (std::size_t j = 0; j < n; ++j)
        if (!settled[j]) m[j] = fresh[j];
      res.log.push_back({res.passes, n_settled, lambda,
                         true_balance_ratio()});
    }
    if (n_settled == n) break;

    for (std::size_t j = 0; j < n; ++j)
      if (!settled[j] && m[j] >= lambda) {
        settled[j] = 1;
        ++n_settled;
      }
    if (++res.passes > cap)
      throw MaxOuterExceeded("pass budget " + std::to_string(cap) +
                             " exhausted");
    res.log.push_back({res.passes, n_settled, lambda,
                       true_balance_ratio()});
    if (n_settled == n) break;

    const std::vector<double> fresh = estimate_second_moments(
        spec, res.a, params.alpha, params.N, root.sub(draws++), threads);
    for (std::size_t j = 0; j < n; ++j)
      if (!settled[j]) m[j] = fresh[j];
  }
  res.m_est = std::move(m);
  res.draws = draws;
  return res;
}

}  // namespace purelu

#endif  // PURELU_EQUILIBRATE_HPP
