#include "btrip/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "btrip/error.hpp"

namespace btrip {

namespace {

struct GzCloser {
  void operator()(gzFile f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

GzHandle open_for_read(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
  return f;
}

GzHandle open_for_write(const std::filesystem::path& path) {
  const char* mode = path.extension() == ".gz" ? "wb" : "wbT";
  GzHandle f(gzopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::IoError, "cannot create " + path.string());
  return f;
}

void read_exact(gzFile f, void* dst, std::size_t n, const std::filesystem::path& path) {
  auto* p = static_cast<unsigned char*>(dst);
  while (n > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int got = gzread(f, p, chunk);
    if (got < 0) fail(ErrorCode::IoError, "read error in " + path.string());
    if (got == 0) fail(ErrorCode::TruncatedFile, path.string() + " ends before its declared size");
    p += got;
    n -= static_cast<std::size_t>(got);
  }
}

std::uint32_t read_be32(gzFile f, const std::filesystem::path& path) {
  unsigned char b[4];
  read_exact(f, b, 4, path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_all(gzFile f, const void* src, std::size_t n, const std::filesystem::path& path) {
  if (n == 0) return;
  if (gzwrite(f, src, static_cast<unsigned>(n)) != static_cast<int>(n)) {
    fail(ErrorCode::IoError, "write error in " + path.string());
  }
}

void write_be32(gzFile f, std::uint32_t v, const std::filesystem::path& path) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  write_all(f, b, 4, path);
}

std::string hex(std::uint32_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s = "0x";
  for (int k = 7; k >= 0; --k) s += digits[(v >> (4 * k)) & 0xF];
  return s;
}

Matrix read_images(const std::filesystem::path& path) {
  GzHandle f = open_for_read(path);
  const std::uint32_t magic = read_be32(f.get(), path);
  if (magic == kIdxImagesMagic) {
    const std::size_t n = read_be32(f.get(), path);
    const std::size_t rows = read_be32(f.get(), path);
    const std::size_t cols = read_be32(f.get(), path);
    const std::size_t q = rows * cols;
    std::vector<unsigned char> pixels(n * q);
    read_exact(f.get(), pixels.data(), pixels.size(), path);
    Matrix m(n, q);
    for (std::size_t k = 0; k < pixels.size(); ++k) m.data()[k] = static_cast<double>(pixels[k]) / 255.0;
    return m;
  }
  if (magic == kIdxDoubleMatrixMagic) {
    const std::size_t n = read_be32(f.get(), path);
    const std::size_t q = read_be32(f.get(), path);
    std::vector<unsigned char> raw(n * q * 8);
    read_exact(f.get(), raw.data(), raw.size(), path);
    Matrix m(n, q);
    for (std::size_t k = 0; k < n * q; ++k) {
      std::uint64_t bits = 0;
      for (std::size_t b = 0; b < 8; ++b) bits = (bits << 8) | raw[8 * k + b];
      m.data()[k] = std::bit_cast<double>(bits);
    }
    return m;
  }
  fail(ErrorCode::BadMagic, path.string() + ": magic " + hex(magic) + " is not an IDX image file");
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  GzHandle f = open_for_read(path);
  const std::uint32_t magic = read_be32(f.get(), path);
  if (magic != kIdxLabelsMagic) {
    fail(ErrorCode::BadMagic, path.string() + ": magic " + hex(magic) + " is not an IDX label file");
  }
  const std::size_t n = read_be32(f.get(), path);
  std::vector<unsigned char> raw(n);
  read_exact(f.get(), raw.data(), raw.size(), path);
  return {raw.begin(), raw.end()};
}

std::size_t dense_class_count(const std::vector<int>& labels) {
  if (labels.empty()) return 0;
  const int max_label = *std::max_element(labels.begin(), labels.end());
  std::vector<bool> seen(static_cast<std::size_t>(max_label) + 1, false);
  for (int y : labels) seen[static_cast<std::size_t>(y)] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    fail(ErrorCode::CountMismatch, "label range is not dense: some class in [0, " + std::to_string(max_label) +
                                       "] has no instance");
  }
  return seen.size();
}

}  // namespace

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  Dataset ds;
  ds.inputs = read_images(images_path);
  ds.labels = read_labels(labels_path);
  if (ds.inputs.rows() != ds.labels.size()) {
    fail(ErrorCode::CountMismatch, std::to_string(ds.inputs.rows()) + " images but " +
                                       std::to_string(ds.labels.size()) + " labels");
  }
  ds.num_classes = dense_class_count(ds.labels);
  return ds;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               IdxPixelType type) {
  const std::size_t n = ds.size();
  const std::size_t q = ds.input_dim();
  require_dims(ds.inputs.rows(), n, "write_idx rows");
  for (int y : ds.labels) {
    if (y < 0 || y > 255) fail(ErrorCode::DomainError, "IDX labels must fit in one byte");
  }
  {
    GzHandle f = open_for_write(images_path);
    if (type == IdxPixelType::UByte) {
      write_be32(f.get(), kIdxImagesMagic, images_path);
      write_be32(f.get(), static_cast<std::uint32_t>(n), images_path);
      write_be32(f.get(), 1, images_path);
      write_be32(f.get(), static_cast<std::uint32_t>(q), images_path);
      std::vector<unsigned char> px(n * q);
      for (std::size_t k = 0; k < px.size(); ++k) {
        const double v = std::round(255.0 * ds.inputs.data()[k]);
        px[k] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
      }
      write_all(f.get(), px.data(), px.size(), images_path);
    } else {
      write_be32(f.get(), kIdxDoubleMatrixMagic, images_path);
      write_be32(f.get(), static_cast<std::uint32_t>(n), images_path);
      write_be32(f.get(), static_cast<std::uint32_t>(q), images_path);
      std::vector<unsigned char> raw;
      raw.reserve(n * q * 8);
      for (double v : ds.inputs.data()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 7; b >= 0; --b) raw.push_back(static_cast<unsigned char>(bits >> (8 * b)));
      }
      write_all(f.get(), raw.data(), raw.size(), images_path);
    }
  }
  GzHandle f = open_for_write(labels_path);
  write_be32(f.get(), kIdxLabelsMagic, labels_path);
  write_be32(f.get(), static_cast<std::uint32_t>(n), labels_path);
  std::vector<unsigned char> raw(ds.labels.begin(), ds.labels.end());
  write_all(f.get(), raw.data(), raw.size(), labels_path);
}

Dataset synth_blobs(std::size_t num_classes, std::size_t per_class, std::size_t input_dim, double spread, Rng& rng) {
  if (num_classes < 2) fail(ErrorCode::DomainError, "synth_blobs needs at least two classes");
  if (per_class < 1) fail(ErrorCode::DomainError, "synth_blobs needs at least one instance per class");
  if (num_classes > 2 * input_dim) fail(ErrorCode::DomainError, "synth_blobs supports at most 2q classes");
  if (!(spread >= 0.0)) fail(ErrorCode::DomainError, "synth_blobs spread must be non-negative");

  // +e_0, +e_1, ..., +e_{q-1}, -e_0, ... scaled so axis neighbours are `gap` apart.
  const double gap = 8.0 * std::max(spread, 1.0);
  const double radius = gap / std::sqrt(2.0);

  Dataset ds;
  ds.num_classes = num_classes;
  ds.inputs = Matrix(num_classes * per_class, input_dim);
  ds.labels.reserve(num_classes * per_class);
  std::size_t r = 0;
  for (std::size_t j = 0; j < num_classes; ++j) {
    const std::size_t axis = j % input_dim;
    const double sign = j < input_dim ? 1.0 : -1.0;
    for (std::size_t i = 0; i < per_class; ++i, ++r) {
      auto row = ds.inputs.row(r);
      for (double& v : row) v = spread * rng.normal();
      row[axis] += sign * radius;
      ds.labels.push_back(static_cast<int>(j));
    }
  }
  return ds;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.inputs = Matrix(indices.size(), ds.input_dim());
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= ds.size()) fail(ErrorCode::IndexOutOfRange, "subset index out of range");
    const auto src = ds.inputs.row(indices[k]);
    std::copy(src.begin(), src.end(), out.inputs.row(k).begin());
    out.labels.push_back(ds.labels[indices[k]]);
  }
  return out;
}

std::pair<Dataset, Dataset> split_stratified(const Dataset& ds, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) fail(ErrorCode::DomainError, "split fraction must lie in [0, 1]");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::vector<std::size_t> first, second;
  for (auto& idx : by_class) {
    shuffle(std::span<std::size_t>(idx), rng);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    first.insert(first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    second.insert(second.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  shuffle(std::span<std::size_t>(first), rng);
  shuffle(std::span<std::size_t>(second), rng);
  return {subset(ds, first), subset(ds, second)};
}

std::vector<std::vector<std::size_t>> balanced_batches(const Dataset& ds, std::size_t n_prime, Rng& rng) {
  if (n_prime == 0) fail(ErrorCode::DomainError, "balanced_batches: n' must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::size_t num_batches = std::numeric_limits<std::size_t>::max();
  for (std::size_t j = 0; j < by_class.size(); ++j) {
    if (by_class[j].size() < n_prime) {
      fail(ErrorCode::InsufficientClassInstances, "class " + std::to_string(j) + " has " +
                                                      std::to_string(by_class[j].size()) + " instances, n' = " +
                                                      std::to_string(n_prime));
    }
    num_batches = std::min(num_batches, by_class[j].size() / n_prime);
  }
  for (auto& idx : by_class) shuffle(std::span<std::size_t>(idx), rng);

  std::vector<std::vector<std::size_t>> batches(num_batches);
  for (std::size_t t = 0; t < num_batches; ++t) {
    auto& batch = batches[t];
    batch.reserve(n_prime * by_class.size());
    for (const auto& idx : by_class) {
      batch.insert(batch.end(), idx.begin() + static_cast<std::ptrdiff_t>(t * n_prime),
                   idx.begin() + static_cast<std::ptrdiff_t>((t + 1) * n_prime));
    }
  }
  return batches;
}

}  // namespace btrip
