#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/errors.hpp"
#include "stylo/knn.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace stylo {

// ---------------------------------------------------------------------------
// Spherical k-means: cosine geometry throughout (max-dot assignment,
// normalized-mean centroids, inertia = sum of 1 - dot).

struct ClusterAssignment {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::size_t k = 0;
  double inertia = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> inertia_history;  // value after each iteration, non-increasing
  std::vector<float> centroids;         // row-major k x dim
};

namespace detail {

inline double dot_at(const EmbeddingMatrix& X, std::size_t row, const std::vector<double>& c,
                     std::size_t dim) {
  double s = 0.0;
  const auto r = X.row(row);
  for (std::size_t i = 0; i < dim; ++i) s += static_cast<double>(r[i]) * c[i];
  return s;
}

}  // namespace detail

inline ClusterAssignment spherical_kmeans(const EmbeddingMatrix& X, std::size_t k,
                                          std::uint64_t seed) {
  const std::size_t n = X.rows(), dim = X.dim;
  if (k == 0 || k > n) throw std::invalid_argument("k must be in [1, N]");
  if (!X.rows_unit_norm(1e-6))
    throw std::invalid_argument("spherical k-means requires unit-norm rows");
  Rng rng(derive_seed(seed, "cluster.kmeans"));

  // k-means++ on cosine distance; zero total mass falls back to the lowest
  // index not already a centroid.
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  {
    const std::size_t first = rng.index(n);
    chosen[first] = true;
    centroids.emplace_back(X.row(first).begin(), X.row(first).end());
    std::vector<double> best_d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      best_d[i] = 1.0 - detail::dot_at(X, i, centroids[0], dim);
    while (centroids.size() < k) {
      std::vector<double> cum(n);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double m = chosen[i] ? 0.0 : best_d[i] * best_d[i];
        total += m;
        cum[i] = total;
      }
      std::size_t pick = n;
      if (total > 0.0) {
        const double r = rng.uniform() * total;
        pick = static_cast<std::size_t>(
            std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
        if (pick >= n) pick = n - 1;
        while (pick < n && chosen[pick]) ++pick;  // landed on zero-mass slot
      }
      if (pick >= n) {
        pick = 0;
        while (pick < n && chosen[pick]) ++pick;
      }
      chosen[pick] = true;
      centroids.emplace_back(X.row(pick).begin(), X.row(pick).end());
      for (std::size_t i = 0; i < n; ++i)
        best_d[i] = std::min(best_d[i], 1.0 - detail::dot_at(X, i, centroids.back(), dim));
    }
  }

  std::vector<int> labels(n, -1);
  ClusterAssignment out;
  out.ids = X.ids;
  out.k = k;
  out.seed = seed;

  for (std::size_t iter = 0; iter < 200; ++iter) {
    // Assign: max dot product, ties to the lowest cluster index.
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_dot = detail::dot_at(X, i, centroids[0], dim);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = detail::dot_at(X, i, centroids[c], dim);
        if (d > best_dot) {
          best_dot = d;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }

    // Update: normalized member mean; a zero mean keeps the old centroid.
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(labels[i])];
      const auto r = X.row(i);
      auto& s = sums[static_cast<std::size_t>(labels[i])];
      for (std::size_t c = 0; c < dim; ++c) s[c] += r[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double sq = 0.0;
      for (double v : sums[c]) sq += v * v;
      if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] * inv;
      }
    }

    // Re-seed empty clusters, ascending, each stealing the point currently
    // farthest from its own centroid (lowest index on ties).
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t worst = n;
      double worst_dot = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t li = static_cast<std::size_t>(labels[i]);
        if (counts[li] <= 1) continue;  // don't empty another cluster
        const double d = detail::dot_at(X, i, centroids[li], dim);
        if (d < worst_dot) {
          worst_dot = d;
          worst = i;
        }
      }
      if (worst == n) break;  // every cluster is a singleton already
      --counts[static_cast<std::size_t>(labels[worst])];
      labels[worst] = static_cast<int>(c);
      counts[c] = 1;
      const auto r = X.row(worst);
      for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = r[d];
      changed = true;
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += 1.0 - detail::dot_at(X, i, centroids[static_cast<std::size_t>(labels[i])], dim);
    out.inertia_history.push_back(inertia);
    out.iterations = iter + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
  }

  out.labels = std::move(labels);
  out.inertia = out.inertia_history.back();
  out.centroids.resize(k * dim);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < dim; ++d)
      out.centroids[c * dim + d] = static_cast<float>(centroids[c][d]);
  return out;
}

// ---------------------------------------------------------------------------
// Silhouette over an arbitrary distance callback. Convention: points in
// singleton clusters contribute 0, and 0/0 counts as 0.

template <typename DistFn>
inline double silhouette_with(std::size_t n, const std::vector<int>& labels, DistFn&& dist) {
  if (labels.size() != n) throw std::invalid_argument("labels size mismatch");
  if (n == 0) throw std::invalid_argument("silhouette of empty set");
  int max_label = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("negative cluster label");
    max_label = std::max(max_label, l);
  }
  const std::size_t k = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  std::size_t nonempty = 0;
  for (auto c : counts) nonempty += c > 0 ? 1 : 0;
  if (nonempty < 2) throw std::invalid_argument("silhouette needs at least 2 clusters");

  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = static_cast<std::size_t>(labels[i]);
    if (counts[own] == 1) continue;  // contributes 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sums[static_cast<std::size_t>(labels[j])] += dist(i, j);
    }
    const double a = sums[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own || counts[c] == 0) continue;
      b = std::min(b, sums[c] / static_cast<double>(counts[c]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

enum class SilhouetteMetric { cosine, euclidean };

inline double silhouette(const EmbeddingMatrix& X, const std::vector<int>& labels,
                         SilhouetteMetric metric = SilhouetteMetric::cosine) {
  if (metric == SilhouetteMetric::cosine) {
    return silhouette_with(X.rows(), labels, [&](std::size_t i, std::size_t j) {
      return cosine_distance(X.row(i), X.row(j));
    });
  }
  return silhouette_with(X.rows(), labels, [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    const auto a = X.row(i), b = X.row(j);
    for (std::size_t c = 0; c < X.dim; ++c) {
      const double d = static_cast<double>(a[c]) - b[c];
      s += d * d;
    }
    return std::sqrt(s);
  });
}

// Euclidean silhouette directly over layout coordinates.
inline double silhouette_coords(const std::vector<double>& coords, std::size_t n, std::size_t dim,
                                const std::vector<int>& labels) {
  return silhouette_with(n, labels, [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double d = coords[i * dim + c] - coords[j * dim + c];
      s += d * d;
    }
    return std::sqrt(s);
  });
}

// ---------------------------------------------------------------------------
// Temporal changepoint: for each candidate year y, score how separated the
// groups {year <= y} and {year > y} are, then calibrate significance against
// permuted year labels.

struct ChangepointConfig {
  std::size_t min_group = 10;
  std::size_t permutations = 200;
  std::uint64_t seed = 0;
};

struct ChangepointReport {
  std::vector<int> candidate_years;
  std::vector<double> scores;
  std::pair<int, int> best_break = {0, 0};  // (y, y+1)
  double best_score = 0.0;
  bool significant = false;
  double threshold = 0.0;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
};

namespace detail {

// Scores every boundary of a year-sorted distance matrix in one O(N^2) pass.
// boundaries[b] = number of points in the "before" group.
struct SplitScorer {
  std::size_t n = 0;
  std::vector<double> dist;  // n x n, symmetric, zero diagonal

  double total = 0.0;            // sum over i<j
  std::vector<double> rowsums;   // per point

  template <typename Mat>
  explicit SplitScorer(const Mat& X) : n(X.rows()), dist(n * n, 0.0), rowsums(n, 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = cosine_distance(X.row(i), X.row(j));
        dist[i * n + j] = d;
        dist[j * n + i] = d;
        total += d;
        rowsums[i] += d;
        rowsums[j] += d;
      }
  }

  // order = point indices sorted by (year, tiebreak); score at each b in
  // boundaries, where before = order[0..b).
  std::vector<double> score_boundaries(const std::vector<std::size_t>& order,
                                       const std::vector<std::size_t>& boundaries) const {
    std::vector<double> out;
    out.reserve(boundaries.size());
    std::size_t bi = 0;
    double P = 0.0;   // intra-before sum
    double RS = 0.0;  // rowsums over before group
    for (std::size_t b = 0; b <= n && bi < boundaries.size(); ++b) {
      if (b > 0) {
        const std::size_t p = order[b - 1];
        for (std::size_t q = 0; q < b - 1; ++q) P += dist[p * n + order[q]];
        RS += rowsums[p];
      }
      if (boundaries[bi] != b) continue;
      ++bi;
      const std::size_t nb = b, na = n - b;
      const double inter = RS - 2.0 * P;
      const double intra_after = total - P - inter;
      const double mean_inter = inter / (static_cast<double>(nb) * static_cast<double>(na));
      const double mean_b = nb > 1 ? P / (0.5 * nb * (nb - 1.0)) : 0.0;
      const double mean_a = na > 1 ? intra_after / (0.5 * na * (na - 1.0)) : 0.0;
      out.push_back(mean_inter - 0.5 * (mean_b + mean_a));
    }
    return out;
  }
};

}  // namespace detail

// Mat is EmbeddingMatrix or DenseMatrixD (double precision for tests that
// check rotation invariance beyond f32 resolution).
template <typename Mat>
inline ChangepointReport detect_changepoint(const Mat& X, const std::vector<int>& years,
                                            const ChangepointConfig& cfg = {}) {
  const std::size_t n = X.rows();
  if (years.size() != n) throw std::invalid_argument("years size mismatch");
  if (cfg.min_group == 0) throw std::invalid_argument("min_group must be positive");
  if (n < 2 * cfg.min_group)
    throw InputError("changepoint needs at least " + std::to_string(2 * cfg.min_group) +
                     " documents, got " + std::to_string(n));
  if (std::all_of(years.begin(), years.end(), [&](int y) { return y == years[0]; }))
    throw InputError("changepoint needs nonconstant years");

  // Sort by (year, id) so order-preserving id relabelings cannot move points
  // across within-year positions the permutation null depends on.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (years[a] != years[b]) return years[a] < years[b];
    return X.ids[a] < X.ids[b];
  });

  // Candidate boundaries: between consecutive distinct years, both sides
  // holding at least min_group documents.
  std::vector<std::size_t> boundaries;
  std::vector<int> candidate_years;
  for (std::size_t b = 1; b < n; ++b) {
    if (years[order[b - 1]] == years[order[b]]) continue;
    if (b < cfg.min_group || n - b < cfg.min_group) continue;
    boundaries.push_back(b);
    candidate_years.push_back(years[order[b - 1]]);
  }
  if (boundaries.empty())
    throw InputError("no candidate split satisfies min_group = " + std::to_string(cfg.min_group));

  const detail::SplitScorer scorer(X);
  ChangepointReport rep;
  rep.candidate_years = candidate_years;
  rep.scores = scorer.score_boundaries(order, boundaries);
  rep.permutations = cfg.permutations;
  rep.seed = cfg.seed;

  std::size_t best = 0;
  for (std::size_t i = 1; i < rep.scores.size(); ++i)
    if (rep.scores[i] > rep.scores[best]) best = i;  // strict: ties keep the earliest year
  rep.best_score = rep.scores[best];
  rep.best_break = {candidate_years[best], candidate_years[best] + 1};

  // Null distribution: the max boundary score under random year-to-position
  // permutations. Year multiplicities are preserved, so the boundary set
  // stays valid.
  Rng rng(derive_seed(cfg.seed, "changepoint.permutation"));
  std::vector<double> null_max;
  null_max.reserve(cfg.permutations);
  std::vector<std::size_t> perm = order;
  for (std::size_t t = 0; t < cfg.permutations; ++t) {
    rng.shuffle(perm);
    const auto scores = scorer.score_boundaries(perm, boundaries);
    null_max.push_back(*std::max_element(scores.begin(), scores.end()));
  }
  double mean = 0.0;
  for (double v : null_max) mean += v;
  mean /= static_cast<double>(null_max.size());
  double var = 0.0;
  for (double v : null_max) var += (v - mean) * (v - mean);
  var = null_max.size() > 1 ? var / static_cast<double>(null_max.size() - 1) : 0.0;
  rep.threshold = mean + 3.0 * std::sqrt(var);
  rep.significant = rep.best_score > rep.threshold;
  return rep;
}

// Years parsed from the trailing _<digits> field of each doc id.
inline std::vector<int> years_from_ids(const std::vector<std::string>& ids) {
  std::vector<int> years;
  years.reserve(ids.size());
  for (const auto& id : ids) {
    const auto us = id.rfind('_');
    if (us == std::string::npos || us + 1 == id.size())
      throw InputError("cannot parse year from id: " + id);
    int y = 0;
    for (std::size_t i = us + 1; i < id.size(); ++i) {
      const char c = id[i];
      if (c < '0' || c > '9') throw InputError("cannot parse year from id: " + id);
      y = y * 10 + (c - '0');
    }
    years.push_back(y);
  }
  return years;
}

}  // namespace stylo
