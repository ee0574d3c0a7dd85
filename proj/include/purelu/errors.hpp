// Exception hierarchy shared by all purelu components.
#ifndef PURELU_ERRORS_HPP
#define PURELU_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace purelu {

/// Base class for all purelu failures.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape mismatch or impossible dimensions (e.g. m < n for a ground truth).
struct BadDims : Error {
  explicit BadDims(const std::string& msg) : Error(msg) {}
};

/// A column's l1 norm fell below the degeneracy tolerance.
struct ZeroColumn : Error {
  std::size_t column;
  long long iteration;  // -1 when not tied to an iteration
  explicit ZeroColumn(std::size_t col, long long iter = -1)
      : Error("zero column " + std::to_string(col) +
              (iter >= 0 ? " at iteration " + std::to_string(iter) : "")),
        column(col),
        iteration(iter) {}
};

/// Matrix failed the full-column-rank check.
struct RankDeficient : Error {
  long long iteration;  // -1 when not tied to an iteration
  explicit RankDeficient(const std::string& msg, long long iter = -1)
      : Error(iter >= 0 ? msg + " at iteration " + std::to_string(iter) : msg),
        iteration(iter) {}
};

/// Simplex exceeded its pivot budget.
struct NoConvergence : Error {
  std::size_t iterations;
  explicit NoConvergence(std::size_t iters)
      : Error("simplex pivot budget exhausted after " + std::to_string(iters) +
              " pivots"),
        iterations(iters) {}
};

/// Square matrix inversion failed.
struct SingularMatrix : Error {
  explicit SingularMatrix(const std::string& msg) : Error(msg) {}
};

/// A lemma audit could not establish its hypotheses.
struct HypothesisViolated : Error {
  explicit HypothesisViolated(const std::string& msg) : Error(msg) {}
};

/// Exact-expectation oracle asked to enumerate too large a support.
struct SupportTooLarge : Error {
  explicit SupportTooLarge(const std::string& msg) : Error(msg) {}
};

/// Recurrence solver parameters outside a lemma's precondition.
struct BadParams : Error {
  explicit BadParams(const std::string& msg) : Error(msg) {}
};

/// Equilibration outer loop hit its safety cap.
struct MaxOuterExceeded : Error {
  explicit MaxOuterExceeded(const std::string& msg) : Error(msg) {}
};

/// Malformed or inconsistent run configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace purelu

#endif  // PURELU_ERRORS_HPP
