#pragma once

// Fully connected embedding network: ReLU hidden layers, linear output layer,
// manual backpropagation and plain SGD.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "btrip/distributions.hpp"
#include "btrip/matrix.hpp"

namespace btrip {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

class MlpModel {
 public:
  MlpModel() = default;
  /// Zero-initialized parameters. dims = {q, hidden..., d}, at least two entries.
  explicit MlpModel(std::vector<std::size_t> layer_dims);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t num_parameters() const;

  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  /// Direct parameter access; bumps the generation so old traces go stale.
  DenseLayer& mutable_layer(std::size_t i);

  std::uint64_t generation() const noexcept { return generation_; }
  void touch() noexcept { ++generation_; }

  bool operator==(const MlpModel& o) const { return dims_ == o.dims_ && same_parameters(o); }

 private:
  bool same_parameters(const MlpModel& o) const;

  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
  std::uint64_t generation_ = 0;
};

/// Activations retained by forward() for the matching backward() call.
struct ForwardTrace {
  std::uint64_t generation = 0;
  std::vector<std::size_t> layer_dims;
  Matrix inputs;
  std::vector<Matrix> pre_activations;  // one per layer
  std::vector<Matrix> activations;      // one per layer; the last is the output
};

struct ForwardResult {
  Matrix embeddings;
  ForwardTrace trace;
};

struct ParamGrads {
  std::vector<DenseLayer> layers;
};

/// He-normal weights (variance 2 / fan_in), zero biases.
MlpModel init_params(const std::vector<std::size_t>& layer_dims, Rng& rng);

/// inputs is b x q. Throws DimensionMismatch.
ForwardResult forward(const MlpModel& model, const Matrix& inputs);
/// Forward pass without keeping the trace.
Matrix embed(const MlpModel& model, const Matrix& inputs);

/// Parameter gradients given d(loss)/d(embeddings). Throws StaleTrace if the
/// model changed since the trace was recorded.
ParamGrads backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& grad_embeddings);

/// p <- p - lr * grad(p); lr must be positive.
void sgd_step(MlpModel& model, const ParamGrads& grads, double lr);

/// Row-wise L2 normalization and its backward pass.
Matrix l2_normalize_rows(const Matrix& x);
Matrix l2_normalize_rows_backward(const Matrix& x, const Matrix& grad_normalized);

/// Checkpoint: "BTRP", u32 version, u32 layer count, u32 dims[layer count + 1],
/// f64 parameters (per layer: weight row-major, then bias), u64 FNV-1a checksum
/// of every preceding byte. All integers and floats little-endian.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
/// Throws BadMagic, TruncatedFile, ChecksumMismatch, IoError.
MlpModel load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace btrip
