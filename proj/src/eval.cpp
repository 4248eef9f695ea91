#include "btrip/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "btrip/error.hpp"

namespace btrip {

namespace {

struct Candidate {
  double dist2;
  std::size_t index;
  bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
};

void check_set(const EmbeddedSet& set) {
  require_dims(set.labels.size(), set.vectors.rows(), "EmbeddedSet labels");
  for (double v : set.vectors.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::NumericFailure, "embedded set contains non-finite values");
  }
}

}  // namespace

std::map<int, double> recall_at_k(const EmbeddedSet& set, std::span<const int> ks) {
  check_set(set);
  const std::size_t m = set.vectors.rows();
  if (m < 2) fail(ErrorCode::KTooLarge, "recall_at_k needs at least two points");
  if (ks.empty()) return {};
  int max_k = 0;
  for (int k : ks) {
    if (k < 1) fail(ErrorCode::DomainError, "recall_at_k: k must be positive");
    max_k = std::max(max_k, k);
  }
  if (static_cast<std::size_t>(max_k) >= m) {
    fail(ErrorCode::KTooLarge, "k = " + std::to_string(max_k) + " needs more than " + std::to_string(m) + " points");
  }

  // rank of the first same-label neighbour for each query (max_k if none within max_k)
  std::vector<std::size_t> hit_counts(static_cast<std::size_t>(max_k) + 1, 0);
  std::vector<Candidate> cands;
  cands.reserve(m - 1);
  const auto kk = static_cast<std::size_t>(max_k);
  for (std::size_t q = 0; q < m; ++q) {
    cands.clear();
    const auto qv = set.vectors.row(q);
    for (std::size_t i = 0; i < m; ++i) {
      if (i != q) cands.push_back({squared_distance(qv, set.vectors.row(i)), i});
    }
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(kk), cands.end());
    std::size_t rank = kk;
    for (std::size_t r = 0; r < kk; ++r) {
      if (set.labels[cands[r].index] == set.labels[q]) {
        rank = r;
        break;
      }
    }
    ++hit_counts[rank];
  }

  std::map<int, double> out;
  for (int k : ks) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < static_cast<std::size_t>(k); ++r) hits += hit_counts[r];
    out[k] = static_cast<double>(hits) / static_cast<double>(m);
  }
  return out;
}

std::vector<Neighbor> retrieve_neighbors(const EmbeddedSet& set, std::span<const double> query, std::size_t k) {
  check_set(set);
  const std::size_t m = set.vectors.rows();
  require_dims(query.size(), set.vectors.cols(), "retrieve query width");
  if (k > m) fail(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds database size " + std::to_string(m));
  std::vector<Candidate> cands;
  cands.reserve(m);
  for (std::size_t i = 0; i < m; ++i) cands.push_back({squared_distance(query, set.vectors.row(i)), i});
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end());
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t r = 0; r < k; ++r) out.push_back({cands[r].index, std::sqrt(cands[r].dist2)});
  return out;
}

std::vector<std::size_t> retrieve_topk(const EmbeddedSet& set, std::span<const double> query, std::size_t k) {
  std::vector<std::size_t> idx;
  for (const Neighbor& n : retrieve_neighbors(set, query, k)) idx.push_back(n.index);
  return idx;
}

}  // namespace btrip
