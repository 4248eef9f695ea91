#include "btrip/triplet_sampler.hpp"

#include <cmath>
#include <string>

#include "btrip/error.hpp"

namespace btrip {

TripletBatch sample_triplets(const Matrix& embeddings, std::span<const int> labels, const ClassTracker& tracker,
                             Rng& rng, const SamplerOptions& options) {
  require_dims(labels.size(), embeddings.rows(), "sample_triplets labels");
  require_dims(embeddings.cols(), tracker.dim(), "sample_triplets width");
  const std::size_t c = tracker.num_classes();
  if (c < 2) fail(ErrorCode::DomainError, "sample_triplets needs at least two classes");

  // Factor each class covariance once per batch.
  std::vector<MvnSampler> samplers;
  samplers.reserve(c);
  for (std::size_t j = 0; j < c; ++j) {
    const ClassState& st = tracker.state(static_cast<int>(j));
    for (double v : st.cov0.data()) {
      if (!std::isfinite(v)) fail(ErrorCode::NumericFailure, "class " + std::to_string(j) + " covariance is not finite");
    }
    const SymMatrix cov = options.eps_scale > 0.0 ? regularize_psd(st.cov0, options.eps_scale) : st.cov0;
    samplers.emplace_back(st.mean0, cov);
  }

  TripletBatch batch;
  batch.groups.reserve(embeddings.rows());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      fail(ErrorCode::IndexOutOfRange, "anchor label " + std::to_string(y) + " out of range");
    }
    AnchorGroup g;
    const auto row = embeddings.row(i);
    g.anchor.assign(row.begin(), row.end());
    g.anchor_label = y;
    g.positives.reserve(c - 1);
    g.negatives.reserve(c - 1);
    for (std::size_t j = 0; j < c; ++j) {
      if (static_cast<int>(j) == y) {
        for (std::size_t k = 0; k + 1 < c; ++k) g.positives.push_back(samplers[j](rng));
      } else {
        g.negatives.push_back(samplers[j](rng));
      }
    }
    batch.groups.push_back(std::move(g));
  }
  return batch;
}

}  // namespace btrip
