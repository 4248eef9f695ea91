#include "btrip/class_tracker.hpp"

#include <algorithm>
#include <string>

#include "btrip/error.hpp"

namespace btrip {

SliceStats slice_stats(const BatchSlice& slice) {
  const Matrix& x = slice.vectors;
  if (x.rows() == 0) fail(ErrorCode::EmptySlice, "class " + std::to_string(slice.class_id) + " has no vectors");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  SliceStats s;
  s.count = n;
  s.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(r, j);
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  s.cov = SymMatrix(d);
  Vector diff(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) diff[j] = x(r, j) - s.mean[j];
    s.cov.add_outer(diff);
  }
  s.cov *= 1.0 / static_cast<double>(n);
  return s;
}

ClassState init_mle(const BatchSlice& slice) {
  SliceStats s = slice_stats(slice);
  ClassState st;
  st.class_id = slice.class_id;
  st.mean0 = std::move(s.mean);
  st.scatter = s.cov * static_cast<double>(s.count);
  st.cov0 = std::move(s.cov);
  st.n0 = s.count;
  st.last_branch = UpdateBranch::InitialMle;
  return st;
}

PosteriorStats posterior_stats(const ClassState& state, const SliceStats& slice) {
  const std::size_t d = state.dim();
  require_dims(slice.mean.size(), d, "posterior_stats slice mean");
  require_dims(slice.cov.dim(), d, "posterior_stats slice cov");
  if (state.n0 == 0) fail(ErrorCode::UninitializedClass, "posterior_stats: prior state has no data");
  const double n_new = static_cast<double>(slice.count);
  const double n_old = static_cast<double>(state.n0);
  const double n_tot = n_new + n_old;

  PosteriorStats p;
  p.n_total = slice.count + state.n0;
  p.eta.resize(d);
  Vector delta(d);
  for (std::size_t j = 0; j < d; ++j) {
    p.eta[j] = (n_new * slice.mean[j] + n_old * state.mean0[j]) / n_tot;
    delta[j] = state.mean0[j] - slice.mean[j];
  }
  p.upsilon = slice.cov * n_new;
  p.upsilon += state.scatter;
  p.upsilon.add_outer(delta, n_new * n_old / n_tot);
  return p;
}

ClassState bayes_update(const ClassState& state, const BatchSlice& slice, CovMode mode) {
  require_dims(slice.vectors.cols(), state.dim(), "bayes_update slice width");
  if (slice.class_id != state.class_id) {
    fail(ErrorCode::DimensionMismatch, "bayes_update: slice class " + std::to_string(slice.class_id) +
                                           " does not match state class " + std::to_string(state.class_id));
  }
  SliceStats s = slice_stats(slice);
  PosteriorStats post = posterior_stats(state, s);

  ClassState next;
  next.class_id = state.class_id;
  next.mean0 = std::move(post.eta);
  next.n0 = post.n_total;

  const double d = static_cast<double>(state.dim());
  const double n_tot = static_cast<double>(post.n_total);
  if (n_tot > d + 1.0) {
    const double denom = n_tot - d - 1.0;
    if (mode == CovMode::Standard) {
      next.cov0 = post.upsilon * (1.0 / denom);
    } else {
      next.cov0 = spd_inverse(cholesky(post.upsilon)) * (1.0 / denom);
    }
    next.last_branch = UpdateBranch::Bayesian;
  } else {
    next.cov0 = std::move(s.cov);
    next.last_branch = UpdateBranch::MleFallback;
  }
  next.scatter = std::move(post.upsilon);
  return next;
}

std::pair<MvtParams, InvWishartParams> posterior_marginals(const ClassState& state, const SliceStats& slice) {
  PosteriorStats post = posterior_stats(state, slice);
  const double d = static_cast<double>(state.dim());
  const double n_tot = static_cast<double>(post.n_total);
  const double t_dof = n_tot - d + 1.0;
  if (!(t_dof > 0.0)) {
    fail(ErrorCode::DomainError, "posterior_marginals: n' + n0 - d + 1 must be positive");
  }
  MvtParams mean_marginal{post.eta, post.upsilon * (1.0 / (n_tot * t_dof)), t_dof};
  InvWishartParams cov_marginal{spd_inverse(cholesky(post.upsilon)), n_tot};
  return {std::move(mean_marginal), std::move(cov_marginal)};
}

ClassTracker::ClassTracker(std::size_t num_classes, std::size_t dim, CovMode mode)
    : dim_(dim), mode_(mode), states_(num_classes) {
  if (num_classes == 0 || dim == 0) fail(ErrorCode::DomainError, "ClassTracker needs >= 1 class and dim >= 1");
}

void ClassTracker::observe(const BatchSlice& slice) {
  if (slice.class_id < 0 || static_cast<std::size_t>(slice.class_id) >= states_.size()) {
    fail(ErrorCode::IndexOutOfRange, "class id " + std::to_string(slice.class_id) + " out of range");
  }
  require_dims(slice.vectors.cols(), dim_, "ClassTracker::observe width");
  auto& slot = states_[static_cast<std::size_t>(slice.class_id)];
  if (!slot) {
    slot = init_mle(slice);
  } else {
    slot = bayes_update(*slot, slice, mode_);
  }
}

void ClassTracker::observe(const Matrix& embeddings, std::span<const int> labels) {
  require_dims(labels.size(), embeddings.rows(), "ClassTracker::observe labels");
  require_dims(embeddings.cols(), dim_, "ClassTracker::observe width");
  std::vector<std::size_t> counts(states_.size(), 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= states_.size()) {
      fail(ErrorCode::IndexOutOfRange, "label " + std::to_string(y) + " out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < states_.size(); ++c) {
    if (counts[c] == 0) continue;
    BatchSlice slice{static_cast<int>(c), Matrix(counts[c], dim_)};
    std::size_t r = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<std::size_t>(labels[i]) != c) continue;
      const auto src = embeddings.row(i);
      std::copy(src.begin(), src.end(), slice.vectors.row(r++).begin());
    }
    observe(slice);
  }
}

bool ClassTracker::initialized(int class_id) const {
  return class_id >= 0 && static_cast<std::size_t>(class_id) < states_.size() &&
         states_[static_cast<std::size_t>(class_id)].has_value();
}

const ClassState& ClassTracker::state(int class_id) const {
  if (!initialized(class_id)) {
    fail(ErrorCode::UninitializedClass, "class " + std::to_string(class_id) + " has no state yet");
  }
  return *states_[static_cast<std::size_t>(class_id)];
}

void ClassTracker::reset() {
  for (auto& s : states_) s.reset();
}

}  // namespace btrip
