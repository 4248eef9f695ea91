#include "btrip/embedder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "btrip/error.hpp"

namespace btrip {

namespace {

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) fail(ErrorCode::DomainError, "MlpModel needs at least input and output dims");
  for (std::size_t d : dims) {
    if (d == 0) fail(ErrorCode::DomainError, "MlpModel layer dims must be positive");
  }
}

// out(b x o) = in(b x i) W^T + bias
Matrix affine(const Matrix& in, const DenseLayer& layer) {
  const std::size_t o = layer.weight.rows();
  Matrix out(in.rows(), o);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t k = 0; k < o; ++k) y[k] = dot(x, layer.weight.row(k)) + layer.bias[k];
  }
  return out;
}

Matrix relu(const Matrix& z) {
  Matrix a = z;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  check_dims(dims_);
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back({Matrix(dims_[l + 1], dims_[l]), Vector(dims_[l + 1], 0.0)});
  }
}

std::size_t MlpModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.data().size() + l.bias.size();
  return n;
}

DenseLayer& MlpModel::mutable_layer(std::size_t i) {
  ++generation_;
  return layers_.at(i);
}

bool MlpModel::same_parameters(const MlpModel& o) const {
  if (layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (!(layers_[l].weight == o.layers_[l].weight) || layers_[l].bias != o.layers_[l].bias) return false;
  }
  return true;
}

MlpModel init_params(const std::vector<std::size_t>& layer_dims, Rng& rng) {
  MlpModel model(layer_dims);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    DenseLayer& layer = model.mutable_layer(l);
    const double stddev = std::sqrt(2.0 / static_cast<double>(layer.weight.cols()));
    for (double& w : layer.weight.data()) w = stddev * rng.normal();
  }
  return model;
}

ForwardResult forward(const MlpModel& model, const Matrix& inputs) {
  require_dims(inputs.cols(), model.input_dim(), "forward input width");
  ForwardResult res;
  ForwardTrace& t = res.trace;
  t.generation = model.generation();
  t.layer_dims = model.layer_dims();
  t.inputs = inputs;
  const Matrix* current = &t.inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    t.pre_activations.push_back(affine(*current, model.layer(l)));
    const bool last = l + 1 == model.num_layers();
    t.activations.push_back(last ? t.pre_activations.back() : relu(t.pre_activations.back()));
    current = &t.activations.back();
  }
  res.embeddings = t.activations.back();
  return res;
}

Matrix embed(const MlpModel& model, const Matrix& inputs) {
  require_dims(inputs.cols(), model.input_dim(), "embed input width");
  Matrix current = inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix z = affine(current, model.layer(l));
    current = l + 1 == model.num_layers() ? std::move(z) : relu(z);
  }
  return current;
}

ParamGrads backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& grad_embeddings) {
  if (trace.generation != model.generation() || trace.layer_dims != model.layer_dims()) {
    fail(ErrorCode::StaleTrace, "trace was recorded against a different model state");
  }
  require_dims(grad_embeddings.rows(), trace.inputs.rows(), "backward batch size");
  require_dims(grad_embeddings.cols(), model.output_dim(), "backward gradient width");

  const std::size_t b = trace.inputs.rows();
  ParamGrads grads;
  grads.layers.resize(model.num_layers());
  Matrix grad_out = grad_embeddings;  // d loss / d pre-activation of the current layer
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const DenseLayer& layer = model.layer(l);
    if (l + 1 != model.num_layers()) {
      const Matrix& z = trace.pre_activations[l];
      for (std::size_t k = 0; k < grad_out.data().size(); ++k) {
        if (!(z.data()[k] > 0.0)) grad_out.data()[k] = 0.0;
      }
    }
    const Matrix& in = l == 0 ? trace.inputs : trace.activations[l - 1];
    const std::size_t o = layer.weight.rows();
    const std::size_t i_dim = layer.weight.cols();

    DenseLayer& g = grads.layers[l];
    g.weight = Matrix(o, i_dim);
    g.bias.assign(o, 0.0);
    for (std::size_t r = 0; r < b; ++r) {
      const auto x = in.row(r);
      for (std::size_t k = 0; k < o; ++k) {
        const double go = grad_out(r, k);
        if (go == 0.0) continue;
        g.bias[k] += go;
        auto gw = g.weight.row(k);
        for (std::size_t j = 0; j < i_dim; ++j) gw[j] += go * x[j];
      }
    }
    if (l == 0) break;
    Matrix grad_in(b, i_dim);
    for (std::size_t r = 0; r < b; ++r) {
      auto gi = grad_in.row(r);
      for (std::size_t k = 0; k < o; ++k) {
        const double go = grad_out(r, k);
        if (go == 0.0) continue;
        const auto w = layer.weight.row(k);
        for (std::size_t j = 0; j < i_dim; ++j) gi[j] += go * w[j];
      }
    }
    grad_out = std::move(grad_in);
  }
  return grads;
}

void sgd_step(MlpModel& model, const ParamGrads& grads, double lr) {
  if (!(lr > 0.0)) fail(ErrorCode::DomainError, "sgd_step: learning rate must be positive");
  require_dims(grads.layers.size(), model.num_layers(), "sgd_step layer count");
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    DenseLayer& p = model.mutable_layer(l);
    const DenseLayer& g = grads.layers[l];
    require_dims(g.weight.data().size(), p.weight.data().size(), "sgd_step weight size");
    require_dims(g.bias.size(), p.bias.size(), "sgd_step bias size");
    auto w = p.weight.data();
    auto gw = g.weight.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * gw[k];
    for (std::size_t k = 0; k < p.bias.size(); ++k) p.bias[k] -= lr * g.bias[k];
  }
}

Matrix l2_normalize_rows(const Matrix& x) {
  Matrix y = x;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    const double norm = std::sqrt(dot(row, row));
    if (norm > 0.0) {
      for (double& v : row) v /= norm;
    }
  }
  return y;
}

Matrix l2_normalize_rows_backward(const Matrix& x, const Matrix& grad_normalized) {
  require_dims(grad_normalized.rows(), x.rows(), "l2_normalize_rows_backward rows");
  require_dims(grad_normalized.cols(), x.cols(), "l2_normalize_rows_backward cols");
  Matrix g(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    const auto gr = grad_normalized.row(r);
    const double norm = std::sqrt(dot(xr, xr));
    if (norm == 0.0) continue;
    // (I - u u^T) g / |x|
    const double proj = dot(xr, gr) / (norm * norm);
    auto out = g.row(r);
    for (std::size_t j = 0; j < xr.size(); ++j) out[j] = (gr[j] - proj * xr[j]) / norm;
  }
  return g;
}

namespace {

constexpr char kMagic[4] = {'B', 'T', 'R', 'P'};

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class U>
void put_le(std::vector<unsigned char>& out, U v) {
  for (std::size_t k = 0; k < sizeof(U); ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  template <class U>
  U get_le() {
    if (pos_ + sizeof(U) > bytes_.size()) fail(ErrorCode::TruncatedFile, "checkpoint ends early");
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(bytes_[pos_ + k]) << (8 * k);
    pos_ += sizeof(U);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  std::vector<unsigned char> buf(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(buf, kCheckpointVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(model.num_layers()));
  for (std::size_t d : model.layer_dims()) put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (double w : model.layer(l).weight.data()) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(w));
    for (double v : model.layer(l).bias) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));
  }
  put_le<std::uint64_t>(buf, fnv1a(buf));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing checkpoint: " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open checkpoint: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) fail(ErrorCode::TruncatedFile, "checkpoint shorter than its magic");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    fail(ErrorCode::BadMagic, "not a BTRP checkpoint: " + path.string());
  }
  ByteReader rd(bytes);
  for (int k = 0; k < 4; ++k) rd.get_le<std::uint8_t>();
  const auto version = rd.get_le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::BadMagic, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto layers = rd.get_le<std::uint32_t>();
  if (layers == 0 || layers > 1024) fail(ErrorCode::BadMagic, "implausible layer count in checkpoint");
  std::vector<std::size_t> dims(layers + 1);
  std::size_t expected_params = 0;
  for (auto& d : dims) d = rd.get_le<std::uint32_t>();
  for (std::size_t l = 0; l < layers; ++l) expected_params += dims[l + 1] * (dims[l] + 1);
  if (rd.pos() + 8 * expected_params + 8 > bytes.size()) fail(ErrorCode::TruncatedFile, "checkpoint ends early");

  MlpModel model(dims);
  for (std::size_t l = 0; l < layers; ++l) {
    DenseLayer& layer = model.mutable_layer(l);
    for (double& w : layer.weight.data()) w = rd.get_f64();
    for (double& v : layer.bias) v = rd.get_f64();
  }
  const std::size_t body = rd.pos();
  const auto stored = rd.get_le<std::uint64_t>();
  const std::vector<unsigned char> prefix(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(body));
  if (fnv1a(prefix) != stored) fail(ErrorCode::ChecksumMismatch, "checkpoint checksum mismatch: " + path.string());
  return model;
}

}  // namespace btrip
