#pragma once

// Datasets: IDX ingestion (plain or gzip), synthetic Gaussian blobs and
// class-balanced mini-batching.

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "btrip/distributions.hpp"
#include "btrip/matrix.hpp"

namespace btrip {

struct Dataset {
  Matrix inputs;            // n x q
  std::vector<int> labels;  // n, dense in [0, num_classes)
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t input_dim() const noexcept { return inputs.cols(); }
  std::vector<std::size_t> class_counts() const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;  // ubyte, n x rows x cols
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;  // ubyte, n
inline constexpr std::uint32_t kIdxDoubleMatrixMagic = 0x00000E02;  // f64, n x q

/// Reads an images/labels IDX pair. gzip-compressed files are read
/// transparently. ubyte pixels are scaled to [0, 1] by /255.
/// Throws BadMagic, TruncatedFile, CountMismatch, IoError.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

enum class IdxPixelType { UByte, Float64 };

/// Writes the pair; paths ending in ".gz" are gzip-compressed. UByte stores
/// round(255 * x) clamped to [0, 255] as a 1 x q image per row; Float64 stores
/// the inputs exactly.
void write_idx(const Dataset& ds, const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               IdxPixelType type);

/// Class j ~ N(center_j, spread^2 I). Centers sit on +/- coordinate axes with
/// pairwise distance at least 8 * max(spread, 1). Requires 2 <= c <= 2q.
Dataset synth_blobs(std::size_t num_classes, std::size_t per_class, std::size_t input_dim, double spread, Rng& rng);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Stratified split: round(fraction * count) instances of each class go to
/// the first part, in shuffled order.
std::pair<Dataset, Dataset> split_stratified(const Dataset& ds, double fraction, Rng& rng);

/// One epoch of class-balanced batches: each batch holds exactly n_prime
/// indices per class, laid out class by class. Instances are drawn without
/// replacement; leftovers are dropped. Throws InsufficientClassInstances.
std::vector<std::vector<std::size_t>> balanced_batches(const Dataset& ds, std::size_t n_prime, Rng& rng);

}  // namespace btrip
