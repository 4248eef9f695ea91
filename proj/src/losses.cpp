#include "btrip/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "btrip/error.hpp"

namespace btrip {

namespace {

GroupGrad zero_grad_like(const AnchorGroup& g) {
  GroupGrad gg;
  gg.anchor.assign(g.anchor.size(), 0.0);
  gg.positives.assign(g.positives.size(), Vector(g.anchor.size(), 0.0));
  gg.negatives.assign(g.negatives.size(), Vector(g.anchor.size(), 0.0));
  return gg;
}

void check_group(const AnchorGroup& g) {
  const std::size_t d = g.anchor.size();
  for (const auto& p : g.positives) require_dims(p.size(), d, "loss positive width");
  for (const auto& n : g.negatives) require_dims(n.size(), d, "loss negative width");
}

}  // namespace

LossOutput triplet_loss(const TripletBatch& batch, double margin) {
  if (!(margin >= 0.0)) fail(ErrorCode::DomainError, "triplet_loss: margin must be non-negative");
  LossOutput out;
  out.grads.reserve(batch.size());
  for (const AnchorGroup& g : batch.groups) {
    check_group(g);
    GroupGrad gg = zero_grad_like(g);
    const std::size_t d = g.anchor.size();
    std::vector<double> d_neg(g.negatives.size());
    for (std::size_t l = 0; l < g.negatives.size(); ++l) d_neg[l] = squared_distance(g.anchor, g.negatives[l]);
    for (std::size_t k = 0; k < g.positives.size(); ++k) {
      const double d_pos = squared_distance(g.anchor, g.positives[k]);
      for (std::size_t l = 0; l < g.negatives.size(); ++l) {
        const double bracket = margin + d_pos - d_neg[l];
        if (!(bracket > 0.0)) continue;
        out.value += bracket;
        const Vector& p = g.positives[k];
        const Vector& n = g.negatives[l];
        for (std::size_t j = 0; j < d; ++j) {
          gg.anchor[j] += 2.0 * (n[j] - p[j]);
          gg.positives[k][j] -= 2.0 * (g.anchor[j] - p[j]);
          gg.negatives[l][j] += 2.0 * (g.anchor[j] - n[j]);
        }
      }
    }
    out.grads.push_back(std::move(gg));
  }
  return out;
}

LossOutput nca_loss(const TripletBatch& batch) {
  if (batch.empty()) fail(ErrorCode::DomainError, "nca_loss: empty batch");
  LossOutput out;
  out.grads.reserve(batch.size());
  for (const AnchorGroup& g : batch.groups) {
    check_group(g);
    if (g.negatives.empty()) fail(ErrorCode::DomainError, "nca_loss: anchor group without negatives");
    GroupGrad gg = zero_grad_like(g);
    const std::size_t d = g.anchor.size();
    const std::size_t num_neg = g.negatives.size();

    // log sum_l exp(-d_l), shifted by the largest logit
    std::vector<double> logits(num_neg);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < num_neg; ++l) {
      logits[l] = -squared_distance(g.anchor, g.negatives[l]);
      max_logit = std::max(max_logit, logits[l]);
    }
    double acc = 0.0;
    for (double z : logits) acc += std::exp(z - max_logit);
    const double lse = max_logit + std::log(acc);

    const double num_pos = static_cast<double>(g.positives.size());
    for (std::size_t k = 0; k < g.positives.size(); ++k) {
      const Vector& p = g.positives[k];
      out.value += squared_distance(g.anchor, p) + lse;
      for (std::size_t j = 0; j < d; ++j) {
        gg.anchor[j] += 2.0 * (g.anchor[j] - p[j]);
        gg.positives[k][j] -= 2.0 * (g.anchor[j] - p[j]);
      }
    }
    // Each positive contributes +lse, so every softmax weight is counted num_pos times.
    for (std::size_t l = 0; l < num_neg; ++l) {
      const double w = num_pos * std::exp(logits[l] - lse);
      const Vector& n = g.negatives[l];
      for (std::size_t j = 0; j < d; ++j) {
        const double t = 2.0 * w * (g.anchor[j] - n[j]);
        gg.anchor[j] -= t;
        gg.negatives[l][j] += t;
      }
    }
    out.grads.push_back(std::move(gg));
  }
  return out;
}

LossOutput compute_loss(LossKind kind, const TripletBatch& batch, double margin) {
  return kind == LossKind::Triplet ? triplet_loss(batch, margin) : nca_loss(batch);
}

Matrix anchor_gradients(const LossOutput& out) {
  if (out.grads.empty()) return {};
  Matrix m(out.grads.size(), out.grads.front().anchor.size());
  for (std::size_t i = 0; i < out.grads.size(); ++i) {
    std::copy(out.grads[i].anchor.begin(), out.grads[i].anchor.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace btrip
