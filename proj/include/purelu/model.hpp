// Synthetic world construction: ground-truth feature matrices, independent
// bounded weight distributions, bounded noise models, and warm-start
// initializations.
#ifndef PURELU_MODEL_HPP
#define PURELU_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/pinv.hpp"
#include "purelu/rng.hpp"
#include "purelu/threads.hpp"

namespace purelu {

/// One coordinate's marginal: scaled Bernoulli (value v with probability p,
/// else 0) or uniform on [lo, hi]. Support must lie in [0, 1].
struct Marginal {
  enum class Kind { Bernoulli, Uniform };
  Kind kind = Kind::Bernoulli;
  double p = 0, v = 1;
  double lo = 0, hi = 0;

  static Marginal bernoulli(double p, double v) {
    Marginal m;
    m.kind = Kind::Bernoulli;
    m.p = p;
    m.v = v;
    if (p < 0 || p > 1) throw ConfigError("bernoulli p outside [0,1]");
    if (v < 0 || v > 1) throw ConfigError("bernoulli value outside [0,1]");
    return m;
  }
  static Marginal uniform(double lo, double hi) {
    Marginal m;
    m.kind = Kind::Uniform;
    m.lo = lo;
    m.hi = hi;
    if (!(0 <= lo && lo <= hi && hi <= 1))
      throw ConfigError("uniform marginal outside [0,1]");
    return m;
  }

  double mean() const {
    return kind == Kind::Bernoulli ? p * v : 0.5 * (lo + hi);
  }
  double second_moment() const {
    return kind == Kind::Bernoulli ? p * v * v
                                   : (lo * lo + lo * hi + hi * hi) / 3.0;
  }
  double sample(const Rng& rng, std::uint64_t ctr) const {
    const double u = rng.u01(ctr);
    if (kind == Kind::Bernoulli) return u < p ? v : 0.0;
    return lo + (hi - lo) * u;
  }
};

/// Independent weight coordinates in [0, 1]: either n i.i.d. Bernoulli(s/n)
/// coordinates with value 1, or an explicit per-coordinate marginal list.
struct WeightDist {
  enum class Variant { BernoulliUniform, IndependentBounded };
  Variant variant = Variant::BernoulliUniform;
  std::size_t n = 0;
  double s = 0;                     // BernoulliUniform sparsity
  std::vector<Marginal> marginals;  // IndependentBounded, size n

  static WeightDist bernoulli_uniform(std::size_t n, double s) {
    if (n == 0) throw ConfigError("weight dimension must be positive");
    if (s < 0 || s > double(n)) throw ConfigError("sparsity s outside [0,n]");
    WeightDist d;
    d.variant = Variant::BernoulliUniform;
    d.n = n;
    d.s = s;
    return d;
  }
  static WeightDist independent(std::vector<Marginal> ms) {
    if (ms.empty()) throw ConfigError("marginal list must be nonempty");
    WeightDist d;
    d.variant = Variant::IndependentBounded;
    d.n = ms.size();
    d.marginals = std::move(ms);
    return d;
  }

  double coord_mean(std::size_t i) const {
    return variant == Variant::BernoulliUniform ? s / double(n)
                                                : marginals[i].mean();
  }
  double coord_second_moment(std::size_t i) const {
    return variant == Variant::BernoulliUniform ? s / double(n)
                                                : marginals[i].second_moment();
  }

  double sample_coord(std::size_t i, const Rng& rng, std::uint64_t ctr) const {
    if (variant == Variant::BernoulliUniform)
      return rng.u01(ctr) < s / double(n) ? 1.0 : 0.0;
    return marginals[i].sample(rng, ctr);
  }

  /// Finite support of coordinate i as (value, probability) pairs; throws
  /// SupportTooLarge for continuous marginals.
  std::vector<std::pair<double, double>> coord_support(std::size_t i) const {
    if (variant == Variant::BernoulliUniform) {
      const double p = s / double(n);
      return {{0.0, 1.0 - p}, {1.0, p}};
    }
    const Marginal& m = marginals[i];
    if (m.kind == Marginal::Kind::Uniform) {
      if (m.lo == m.hi) return {{m.lo, 1.0}};
      throw SupportTooLarge("uniform marginal has continuous support");
    }
    if (m.p == 0.0) return {{0.0, 1.0}};
    if (m.p == 1.0) return {{m.v, 1.0}};
    return {{0.0, 1.0 - m.p}, {m.v, m.p}};
  }
};

/// Scale-free moment summary: C1 = n max E[x_i], c2 = n min E[x_i^2],
/// C2 = n max E[x_i^2], mu = C1/c2.
struct Moments {
  double C1 = 0, c2 = 0, C2 = 0, mu = 0;
};

inline Moments moments(const WeightDist& d) {
  Moments m;
  double max_mean = 0, min_sm = std::numeric_limits<double>::infinity(), max_sm = 0;
  for (std::size_t i = 0; i < d.n; ++i) {
    max_mean = std::max(max_mean, d.coord_mean(i));
    min_sm = std::min(min_sm, d.coord_second_moment(i));
    max_sm = std::max(max_sm, d.coord_second_moment(i));
  }
  m.C1 = double(d.n) * max_mean;
  m.c2 = double(d.n) * min_sm;
  m.C2 = double(d.n) * max_sm;
  m.mu = m.c2 > 0 ? m.C1 / m.c2 : 0;
  return m;
}

/// Per-entry bounded noise: none, three concrete bounded adversaries, or
/// conditionally zero-mean symmetric noise. Always |nu_i| <= level.
struct NoiseModel {
  enum class Variant { None, Adversarial, Unbiased };
  enum class AdvStrategy { ConstantBias, SignAligned, RandomBounded };
  enum class UnbDist { Rademacher, UniformSym };

  Variant variant = Variant::None;
  double level = 0;
  AdvStrategy strategy = AdvStrategy::SignAligned;
  UnbDist dist = UnbDist::Rademacher;

  static NoiseModel none() { return NoiseModel{}; }
  static NoiseModel adversarial(double level, AdvStrategy s) {
    if (level < 0) throw ConfigError("noise level must be >= 0");
    NoiseModel m;
    m.variant = Variant::Adversarial;
    m.level = level;
    m.strategy = s;
    return m;
  }
  static NoiseModel unbiased(double level, UnbDist d) {
    if (level < 0) throw ConfigError("noise level must be >= 0");
    NoiseModel m;
    m.variant = Variant::Unbiased;
    m.level = level;
    m.dist = d;
    return m;
  }
};

/// Warm-start specification for A(0) = A*(Sigma + E) + N.
struct InitSpec {
  double ell = 0.1;                 // contamination radius, in [0, 1/2)
  enum class ESign { Mixed, NonNegative };
  ESign e_sign = ESign::Mixed;
  double n0_level = 0;              // row-norm budget of the out-of-span part
  double sigma_lo = 1.0, sigma_hi = 1.0;

  void validate() const {
    if (ell < 0 || ell >= 0.5) throw ConfigError("init ell outside [0, 0.5)");
    if (n0_level < 0) throw ConfigError("init n0_level must be >= 0");
    if (!(sigma_lo <= sigma_hi)) throw ConfigError("init sigma range inverted");
    if (sigma_lo < 1.0 - ell - 1e-15)
      throw ConfigError("init sigma_lo below 1 - ell");
  }
};

struct ModelSpec {
  DenseMatrix ground_truth;  // m x n, full column rank
  WeightDist weights;
  NoiseModel noise;
  InitSpec init;
};

struct Sample {
  std::vector<double> y;
  std::vector<double> x_star;
  std::vector<double> nu;
};

enum class GroundTruthKind { Identity, RandomNonnegUnitL1, Overlapping };

/// Construct a full-column-rank ground truth. Random kinds have nonnegative
/// unit-l1 columns; Overlapping blends a shared direction with weight corr
/// into every column.
inline DenseMatrix gen_ground_truth(GroundTruthKind kind, std::size_t m,
                                    std::size_t n, std::uint64_t seed,
                                    double corr = 0.0) {
  if (m < n) throw BadDims("ground truth needs m >= n, got m=" +
                           std::to_string(m) + " n=" + std::to_string(n));
  if (n == 0) throw BadDims("ground truth needs n >= 1");
  DenseMatrix a(m, n);
  if (kind == GroundTruthKind::Identity) {
    for (std::size_t j = 0; j < n; ++j) a(j, j) = 1.0;
    return a;
  }
  if (corr < 0 || corr >= 1) throw ConfigError("overlap corr outside [0,1)");
  const Rng rng = Rng(seed, stream::kGroundTruth);
  std::vector<double> shared(m, 0.0);
  if (kind == GroundTruthKind::Overlapping) {
    const Rng rs = rng.sub(0);
    for (std::size_t i = 0; i < m; ++i) shared[i] = std::abs(rs.normal(i));
    const double s = vec_l1(shared);
    for (double& v : shared) v /= s;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const Rng rc = rng.sub(j + 1);
    std::vector<double> c(m);
    for (std::size_t i = 0; i < m; ++i) c[i] = std::abs(rc.normal(i));
    const double s = vec_l1(c);
    for (std::size_t i = 0; i < m; ++i) {
      c[i] /= s;
      if (kind == GroundTruthKind::Overlapping)
        c[i] = corr * shared[i] + (1.0 - corr) * c[i];
      a(i, j) = c[i];
    }
  }
  require_full_column_rank(a);
  return a;
}

inline std::vector<double> sample_weights(const WeightDist& d, const Rng& rng) {
  std::vector<double> x(d.n);
  for (std::size_t i = 0; i < d.n; ++i) x[i] = d.sample_coord(i, rng, i);
  return x;
}

/// Draw one noise vector. SignAligned reads the column-sum direction (vector
/// of row sums) of A_current when given, else of A_star; sign(0) counts as
/// positive. RandomBounded is uniform on [0, level] (a biased bounded
/// adversary); the unbiased variants are symmetric about 0.
inline std::vector<double> sample_noise(const NoiseModel& model,
                                        const std::vector<double>& /*x_star*/,
                                        const DenseMatrix& a_star,
                                        const DenseMatrix* a_current,
                                        const Rng& rng) {
  const std::size_t m = a_star.rows();
  std::vector<double> nu(m, 0.0);
  if (model.variant == NoiseModel::Variant::None || model.level == 0)
    return nu;
  if (model.variant == NoiseModel::Variant::Adversarial) {
    switch (model.strategy) {
      case NoiseModel::AdvStrategy::ConstantBias:
        for (std::size_t i = 0; i < m; ++i) nu[i] = model.level;
        break;
      case NoiseModel::AdvStrategy::SignAligned: {
        const DenseMatrix& ref = a_current ? *a_current : a_star;
        for (std::size_t i = 0; i < m; ++i) {
          double row_sum = 0;
          for (std::size_t j = 0; j < ref.cols(); ++j) row_sum += ref(i, j);
          nu[i] = row_sum >= 0 ? model.level : -model.level;
        }
        break;
      }
      case NoiseModel::AdvStrategy::RandomBounded:
        for (std::size_t i = 0; i < m; ++i) nu[i] = model.level * rng.u01(i);
        break;
    }
    return nu;
  }
  // Unbiased.
  if (model.dist == NoiseModel::UnbDist::Rademacher) {
    for (std::size_t i = 0; i < m; ++i)
      nu[i] = rng.u01(i) < 0.5 ? model.level : -model.level;
  } else {
    for (std::size_t i = 0; i < m; ++i)
      nu[i] = model.level * (2.0 * rng.u01(i) - 1.0);
  }
  return nu;
}

/// Warm start A(0) = A*(Sigma + E) + N with Sigma uniform in sigma_range,
/// ||E||_s scaled to exactly ell, and N orthogonal to col(A*) with
/// ||N||_inf scaled to exactly n0_level.
inline DenseMatrix gen_init(const DenseMatrix& a_star, const InitSpec& init,
                            const Rng& rng) {
  init.validate();
  require_full_column_rank(a_star);
  const std::size_t m = a_star.rows(), n = a_star.cols();
  DenseMatrix coeff(n, n);  // Sigma + E
  const Rng rs = rng.sub(0);
  for (std::size_t i = 0; i < n; ++i)
    coeff(i, i) = rs.uniform(i, init.sigma_lo, init.sigma_hi);
  if (init.ell > 0 && n > 1) {
    DenseMatrix e(n, n);
    const Rng re = rng.sub(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double g = re.normal(i * n + j);
        e(i, j) = init.e_sign == InitSpec::ESign::NonNegative ? std::abs(g) : g;
      }
    const double s = norm_sym(e);
    if (s > 0) {
      const double scale = init.ell / s;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) coeff(i, j) = e(i, j) * scale;
    }
  }
  DenseMatrix a0 = matmul(a_star, coeff);
  if (init.n0_level > 0) {
    if (m == n)
      throw BadDims("square ground truth leaves no out-of-span directions");
    const DenseMatrix proj = ls_pinv(a_star);  // n x m
    DenseMatrix nmat(m, n);
    const Rng rn = rng.sub(2);
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> v(m);
      for (std::size_t i = 0; i < m; ++i) v[i] = rn.normal(j * m + i);
      const std::vector<double> c = matvec(proj, v);
      const std::vector<double> back = matvec(a_star, c);
      for (std::size_t i = 0; i < m; ++i) nmat(i, j) = v[i] - back[i];
    }
    const double s = norm_row_induced(nmat);
    if (s <= 0) throw BadDims("out-of-span projection degenerate");
    const double scale = init.n0_level / s;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) a0(i, j) += nmat(i, j) * scale;
  }
  return a0;
}

/// Draw N independent samples. Each sample k owns the two child streams
/// rng.sub(2k) (weights) and rng.sub(2k + 1) (noise), so any execution
/// order, including parallel, yields identical bits.
inline std::vector<Sample> sample_batch(const ModelSpec& spec, std::size_t N,
                                        const DenseMatrix* a_current,
                                        const Rng& rng, unsigned threads = 1) {
  if (N < 2) throw ConfigError("batch size must be at least 2");
  std::vector<Sample> out(N);
  parallel_for(N, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      Sample& s = out[k];
      s.x_star = sample_weights(spec.weights, rng.sub(2 * k));
      s.nu = sample_noise(spec.noise, s.x_star, spec.ground_truth, a_current,
                          rng.sub(2 * k + 1));
      s.y = matvec(spec.ground_truth, s.x_star);
      for (std::size_t i = 0; i < s.y.size(); ++i) s.y[i] += s.nu[i];
    }
  });
  return out;
}

}  // namespace purelu

#endif  // PURELU_MODEL_HPP
