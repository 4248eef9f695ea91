#pragma once

// Triplet hinge loss and the softmax (NCA) form over sampled triplet groups.
// Both reduce by plain summation.

#include <vector>

#include "btrip/matrix.hpp"
#include "btrip/triplet_sampler.hpp"

namespace btrip {

/// Gradients laid out exactly like the AnchorGroup they belong to.
struct GroupGrad {
  Vector anchor;
  std::vector<Vector> positives;
  std::vector<Vector> negatives;
};

struct LossOutput {
  double value = 0.0;
  std::vector<GroupGrad> grads;
};

enum class LossKind { Triplet, Nca };

/// sum_i sum_k sum_l [m + |a_i - p_k|^2 - |a_i - n_l|^2]_+ ; the subgradient
/// at a bracket of exactly zero is zero.
LossOutput triplet_loss(const TripletBatch& batch, double margin);

/// -sum_i sum_k ln( exp(-|a_i - p_k|^2) / sum_l exp(-|a_i - n_l|^2) )
/// The denominator runs over the negatives only.
LossOutput nca_loss(const TripletBatch& batch);

LossOutput compute_loss(LossKind kind, const TripletBatch& batch, double margin);

/// Anchor gradients stacked as a b x d matrix (the part that reaches the network).
Matrix anchor_gradients(const LossOutput& out);

}  // namespace btrip
