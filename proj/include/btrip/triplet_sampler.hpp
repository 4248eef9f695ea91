#pragma once

// Draws positives and negatives from the tracked class Gaussians. Anchors are
// the real embeddings of the mini-batch; every other vector is synthetic.

#include <span>
#include <vector>

#include "btrip/class_tracker.hpp"
#include "btrip/distributions.hpp"
#include "btrip/matrix.hpp"

namespace btrip {

/// One anchor with c - 1 positives from its own class and one negative from
/// each other class (ascending class id).
struct AnchorGroup {
  Vector anchor;
  int anchor_label = 0;
  std::vector<Vector> positives;
  std::vector<Vector> negatives;
};

struct TripletBatch {
  std::vector<AnchorGroup> groups;

  std::size_t size() const noexcept { return groups.size(); }
  bool empty() const noexcept { return groups.empty(); }
};

struct SamplerOptions {
  /// Jitter passed to regularize_psd before factoring each class covariance.
  /// Zero disables regularization.
  double eps_scale = 1e-6;
};

/// Rows of `embeddings` are the anchors, in order. Every class in
/// [0, tracker.num_classes()) must already be initialized.
TripletBatch sample_triplets(const Matrix& embeddings, std::span<const int> labels, const ClassTracker& tracker,
                             Rng& rng, const SamplerOptions& options = {});

}  // namespace btrip
