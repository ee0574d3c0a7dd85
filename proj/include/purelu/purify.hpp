// The alternating decode / pairwise-difference update loop.
#ifndef PURELU_PURIFY_HPP
#define PURELU_PURIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "purelu/analysis.hpp"
#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/model.hpp"
#include "purelu/pinv.hpp"
#include "purelu/rng.hpp"
#include "purelu/threads.hpp"

namespace purelu {

enum class Pairing { ClosedFormAllPairs, RandomPairs };

struct AlgoParams {
  double alpha = 0;   // decode threshold
  double eta = 0;     // step size
  double r = 0;       // update gain
  std::size_t T = 0;  // iterations
  std::size_t N = 0;  // samples per iteration
  std::uint64_t seed = 0;
  Pairing pairing = Pairing::ClosedFormAllPairs;
  std::size_t p_pairs = 0;  // pair draws when pairing == RandomPairs

  void validate() const {
    if (!(alpha > 0)) throw BadParams("alpha must be positive");
    if (!(eta > 0 && eta <= 1)) throw BadParams("eta must be in (0, 1]");
    if (!(r > 0)) throw BadParams("r must be positive");
    if (N < 2) throw BadParams("need at least 2 samples per iteration");
    if (pairing == Pairing::RandomPairs && p_pairs == 0)
      throw BadParams("random pairing needs p_pairs > 0");
  }
};

/// alpha = c2 / (80 C1), r = n / c2, eta = ell / 6.
inline AlgoParams default_params(const Moments& mom, std::size_t n,
                                 double ell) {
  if (!(mom.C1 > 0) || !(mom.c2 > 0))
    throw BadParams("default_params needs positive C1 and c2");
  if (!(ell > 0)) throw BadParams("default_params needs ell > 0");
  AlgoParams p;
  p.alpha = mom.c2 / (80.0 * mom.C1);
  p.r = double(n) / mom.c2;
  p.eta = ell / 6.0;
  return p;
}

/// Threshold-decode a whole batch with one pseudo-inverse computation.
inline std::vector<std::vector<double>> decode_batch(
    const DenseMatrix& a, const std::vector<Sample>& batch, double alpha,
    std::size_t threads = 1) {
  const PinvResult ap = min_inf_pinv(a);
  std::vector<std::vector<double>> xs(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k)
      xs[k] = relu_offset(matvec(ap.pinv, batch[k].y), alpha);
  });
  return xs;
}

namespace detail {

struct UpdateAcc {
  std::vector<double> yx;  // m*n row-major
  std::vector<double> ysum, xsum;
};

}  // namespace detail

/// Empirical pairwise-difference update direction.
/// ClosedFormAllPairs: 2 (mean y x^T - ybar xbar^T), the closed form of the
/// all-pairs average of (y - y')(x - x')^T. RandomPairs: the average of
/// p_pairs independently drawn sample pairs.
inline DenseMatrix empirical_update(const std::vector<Sample>& batch,
                                    const std::vector<std::vector<double>>& xs,
                                    const AlgoParams& params, const Rng& rng,
                                    std::size_t threads = 1) {
  if (batch.size() != xs.size() || batch.size() < 2)
    throw BadDims("empirical_update needs matching batch/decodes, size >= 2");
  const std::size_t m = batch[0].y.size();
  const std::size_t n = xs[0].size();
  const double inv_n_samples = 1.0 / double(batch.size());

  if (params.pairing == Pairing::ClosedFormAllPairs) {
    auto acc = blocked_reduce<detail::UpdateAcc>(
        batch.size(), threads,
        [&] {
          detail::UpdateAcc a;
          a.yx.assign(m * n, 0.0);
          a.ysum.assign(m, 0.0);
          a.xsum.assign(n, 0.0);
          return a;
        },
        [&](detail::UpdateAcc& a, std::size_t k) {
          const std::vector<double>& y = batch[k].y;
          const std::vector<double>& x = xs[k];
          for (std::size_t i = 0; i < m; ++i) {
            const double yi = y[i];
            a.ysum[i] += yi;
            if (yi != 0) {
              double* row = a.yx.data() + i * n;
              for (std::size_t j = 0; j < n; ++j) row[j] += yi * x[j];
            }
          }
          for (std::size_t j = 0; j < n; ++j) a.xsum[j] += x[j];
        },
        [](detail::UpdateAcc& l, detail::UpdateAcc&& r2) {
          for (std::size_t i = 0; i < l.yx.size(); ++i) l.yx[i] += r2.yx[i];
          for (std::size_t i = 0; i < l.ysum.size(); ++i)
            l.ysum[i] += r2.ysum[i];
          for (std::size_t i = 0; i < l.xsum.size(); ++i)
            l.xsum[i] += r2.xsum[i];
        });
    DenseMatrix delta(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      const double ybar = acc.ysum[i] * inv_n_samples;
      for (std::size_t j = 0; j < n; ++j)
        delta(i, j) = 2.0 * (acc.yx[i * n + j] * inv_n_samples -
                             ybar * (acc.xsum[j] * inv_n_samples));
    }
    return delta;
  }

  // RandomPairs: pair p draws indexes via counters (2p, 2p + 1).
  const std::size_t pairs = params.p_pairs;
  auto acc = blocked_reduce<std::vector<double>>(
      pairs, threads, [&] { return std::vector<double>(m * n, 0.0); },
      [&](std::vector<double>& a, std::size_t p) {
        const std::size_t k = rng.index(2 * p, batch.size());
        const std::size_t l = rng.index(2 * p + 1, batch.size());
        const std::vector<double>& yk = batch[k].y;
        const std::vector<double>& yl = batch[l].y;
        const std::vector<double>& xk = xs[k];
        const std::vector<double>& xl = xs[l];
        for (std::size_t i = 0; i < m; ++i) {
          const double dy = yk[i] - yl[i];
          if (dy == 0) continue;
          double* row = a.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += dy * (xk[j] - xl[j]);
        }
      },
      [](std::vector<double>& l, std::vector<double>&& r2) {
        for (std::size_t i = 0; i < l.size(); ++i) l[i] += r2[i];
      });
  DenseMatrix delta(m, n);
  const double inv_pairs = 1.0 / double(pairs);
  for (std::size_t i = 0; i < m * n; ++i) delta.data()[i] = acc[i] * inv_pairs;
  return delta;
}

/// One iteration: decode the batch, form the update, and blend:
/// A <- (1 - eta) A + r eta Delta.
inline DenseMatrix purify_step(const DenseMatrix& a,
                               const std::vector<Sample>& batch,
                               const AlgoParams& params, const Rng& pair_rng,
                               std::size_t threads = 1) {
  const auto xs = decode_batch(a, batch, params.alpha, threads);
  const DenseMatrix delta = empirical_update(batch, xs, params, pair_rng, threads);
  DenseMatrix next(a.rows(), a.cols());
  const double keep = 1.0 - params.eta;
  const double gain = params.r * params.eta;
  for (std::size_t i = 0; i < a.size(); ++i)
    next.data()[i] = keep * a.data()[i] + gain * delta.data()[i];
  return next;
}

struct PurifyResult {
  DenseMatrix a_final;       // raw final iterate
  DenseMatrix a_normalized;  // unit-l1 columns
  std::vector<IterRecord> trajectory;  // t = 0..T
};

/// Full run: T iterations from the warm start (or an explicit a0), with a
/// fresh batch per iteration and a diagnostics record per visited iterate.
/// on_record, if set, sees each record as soon as it is produced, so callers
/// keep a partial trajectory when a later iteration throws.
inline PurifyResult run_purification(
    const ModelSpec& spec, const AlgoParams& params, std::size_t threads = 1,
    const std::optional<DenseMatrix>& a0 = std::nullopt,
    const std::function<void(const IterRecord&)>& on_record = {}) {
  params.validate();
  DenseMatrix a = a0 ? *a0
                     : gen_init(spec.ground_truth, spec.init,
                                Rng(params.seed, stream::kInit));
  if (a.rows() != spec.ground_truth.rows() ||
      a.cols() != spec.ground_truth.cols())
    throw BadDims("initial iterate shape mismatch");

  PurifyResult res;
  res.trajectory.reserve(params.T + 1);
  const Rng batch_root(params.seed, stream::kBatch);
  const Rng pair_root(params.seed, stream::kPairs);
  for (std::size_t t = 0; t < params.T; ++t) {
    require_full_column_rank(a, (long long)t);
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (col_l1_norm(a, j) <= kZeroColumnTol)
        throw ZeroColumn(j, (long long)t);
    res.trajectory.push_back(iter_record(t, a, spec.ground_truth));
    if (on_record) on_record(res.trajectory.back());
    const std::vector<Sample> batch =
        sample_batch(spec, params.N, &a, batch_root.sub(t), threads);
    a = purify_step(a, batch, params, pair_root.sub(t), threads);
  }
  require_full_column_rank(a, (long long)params.T);
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (col_l1_norm(a, j) <= kZeroColumnTol)
      throw ZeroColumn(j, (long long)params.T);
  res.trajectory.push_back(iter_record(params.T, a, spec.ground_truth));
  if (on_record) on_record(res.trajectory.back());
  res.a_final = a;
  res.a_normalized = col_normalize(a);
  return res;
}

}  // namespace purelu

#endif  // PURELU_PURIFY_HPP
