#pragma once

// Exhaustive nearest-neighbour retrieval and Recall@k over an embedded set.

#include <map>
#include <span>
#include <vector>

#include "btrip/matrix.hpp"

namespace btrip {

struct EmbeddedSet {
  Matrix vectors;           // m x d
  std::vector<int> labels;  // m
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;  // Euclidean
};

/// Fraction of queries whose k nearest other points (Euclidean, ties by
/// ascending index, the query itself excluded) contain a same-label point.
/// Throws KTooLarge when max(ks) >= m.
std::map<int, double> recall_at_k(const EmbeddedSet& set, std::span<const int> ks);

/// The k nearest database rows to `query`, nearest first, ties by index.
/// Throws KTooLarge when k > m.
std::vector<Neighbor> retrieve_neighbors(const EmbeddedSet& set, std::span<const double> query, std::size_t k);

std::vector<std::size_t> retrieve_topk(const EmbeddedSet& set, std::span<const double> query, std::size_t k);

}  // namespace btrip
