#pragma once

// Streaming per-class Gaussian state, updated once per mini-batch with the
// normal-inverse-Wishart conjugate posterior.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "btrip/distributions.hpp"
#include "btrip/matrix.hpp"

namespace btrip {

enum class CovMode {
  /// cov0 <- Upsilon / (n' + n0 - d - 1), the inverse-Wishart posterior mean.
  Standard,
  /// cov0 <- Upsilon^{-1} / (n' + n0 - d - 1). Inverse units, shrinks as data
  /// accumulates; kept for comparison runs.
  PaperLiteral,
};

/// Which branch produced the current cov0.
enum class UpdateBranch { InitialMle, Bayesian, MleFallback };

/// One class's accumulated state.
///
/// `scatter` carries the exact total scatter sum (x - mean)(x - mean)^T over
/// every consumed vector; it is the n0 * Sigma0 term of the pooled scatter.
/// `cov0` is the covariance the sampler draws from and depends on the update
/// mode and branch.
struct ClassState {
  int class_id = 0;
  Vector mean0;
  SymMatrix cov0;
  SymMatrix scatter;
  std::size_t n0 = 0;
  UpdateBranch last_branch = UpdateBranch::InitialMle;

  std::size_t dim() const noexcept { return mean0.size(); }
};

/// n' embedding rows of one class from the current mini-batch.
struct BatchSlice {
  int class_id = 0;
  Matrix vectors;
};

/// Sample mean, MLE covariance (divisor n') and count of one slice.
struct SliceStats {
  Vector mean;
  SymMatrix cov;
  std::size_t count = 0;
};

SliceStats slice_stats(const BatchSlice& slice);

ClassState init_mle(const BatchSlice& slice);

/// Conjugate update with nu'_1 = nu'_2 = n'. The Bayesian branch applies when
/// n' + n0 > d + 1; otherwise cov0 falls back to the batch MLE covariance.
/// Throws NotPositiveDefinite if PaperLiteral mode cannot invert Upsilon.
ClassState bayes_update(const ClassState& state, const BatchSlice& slice, CovMode mode);

/// Posterior hyper-statistics eta and Upsilon for a prior state and a new slice.
struct PosteriorStats {
  Vector eta;
  SymMatrix upsilon;
  std::size_t n_total = 0;
};

PosteriorStats posterior_stats(const ClassState& state, const SliceStats& slice);

/// Marginal posteriors of the mean (Student-t) and covariance (inverse
/// Wishart) for `state` updated with `slice`.
std::pair<MvtParams, InvWishartParams> posterior_marginals(const ClassState& state, const SliceStats& slice);

/// Holds the c class states and routes each mini-batch to init/update.
class ClassTracker {
 public:
  ClassTracker(std::size_t num_classes, std::size_t dim, CovMode mode);

  std::size_t num_classes() const noexcept { return states_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  CovMode mode() const noexcept { return mode_; }

  /// Updates every class present in the batch. `labels[i]` labels row i.
  void observe(const Matrix& embeddings, std::span<const int> labels);
  void observe(const BatchSlice& slice);

  bool initialized(int class_id) const;
  /// Throws UninitializedClass.
  const ClassState& state(int class_id) const;
  std::span<const std::optional<ClassState>> states() const noexcept { return states_; }

  /// Forget all accumulated statistics.
  void reset();

 private:
  std::size_t dim_;
  CovMode mode_;
  std::vector<std::optional<ClassState>> states_;
};

}  // namespace btrip
