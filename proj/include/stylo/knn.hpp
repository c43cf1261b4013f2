#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/matrix.hpp"

namespace stylo {

// 1 - cos(a, b), using the full norms so non-unit inputs are handled.
inline double cosine_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_distance: dim mismatch");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_distance: zero vector");
  return 1.0 - dot(a, b) / (na * nb);
}

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_distance: dim mismatch");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_distance: zero vector");
  return 1.0 - dot(a, b) / (na * nb);
}

struct Neighbor {
  std::size_t index = 0;
  std::string id;
  double distance = 0.0;
};

// Exact flat index over unit-norm rows. Queries scan every row; ties on
// distance are broken by id so results never depend on insertion order.
class FlatIndex {
 public:
  explicit FlatIndex(EmbeddingMatrix vectors) : vectors_(std::move(vectors)) {
    if (!vectors_.rows_unit_norm(1e-6))
      throw std::invalid_argument("FlatIndex requires unit-norm rows (1e-6)");
  }

  std::size_t size() const { return vectors_.rows(); }
  const EmbeddingMatrix& vectors() const { return vectors_; }

  std::vector<Neighbor> query(std::span<const float> q, std::size_t k) const {
    if (vectors_.rows() == 0) throw std::invalid_argument("query on empty index");
    if (k == 0 || k > vectors_.rows())
      throw std::invalid_argument("k must be in [1, stored count]");
    if (q.size() != vectors_.dim) throw std::invalid_argument("query dim mismatch");
    const double qn = norm(q);
    if (qn == 0.0) throw std::invalid_argument("query is the zero vector");

    std::vector<Neighbor> all;
    all.reserve(vectors_.rows());
    for (std::size_t r = 0; r < vectors_.rows(); ++r) {
      // Stored rows are unit norm, so only the query norm divides the dot.
      const double d = 1.0 - dot(q, vectors_.row(r)) / qn;
      all.push_back({r, vectors_.ids[r], d});
    }
    auto cmp = [](const Neighbor& x, const Neighbor& y) {
      if (x.distance != y.distance) return x.distance < y.distance;
      return x.id < y.id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), cmp);
    all.resize(k);
    return all;
  }

 private:
  EmbeddingMatrix vectors_;
};

// k nearest neighbors of every row against all other rows (self excluded by
// index, so duplicate vectors still see each other).
inline std::vector<std::vector<Neighbor>> neighbors_excluding_self(const FlatIndex& index,
                                                                   std::size_t k) {
  if (index.size() < 2) throw std::invalid_argument("need at least 2 rows for a neighbor graph");
  if (k >= index.size())
    throw std::invalid_argument("k must be smaller than the row count for self-excluding search");
  const auto& m = index.vectors();
  std::vector<std::vector<Neighbor>> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto res = index.query(m.row(r), k + 1);
    std::erase_if(res, [&](const Neighbor& n) { return n.index == r; });
    if (res.size() > k) res.resize(k);
    out[r] = std::move(res);
  }
  return out;
}

}  // namespace stylo
