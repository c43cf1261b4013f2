#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stylo/errors.hpp"
#include "stylo/knn.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace stylo {

enum class ReduceMethod { umap_like, trimap_like, pacmap_like };

inline std::string to_string(ReduceMethod m) {
  switch (m) {
    case ReduceMethod::umap_like: return "umap_like";
    case ReduceMethod::trimap_like: return "trimap_like";
    case ReduceMethod::pacmap_like: return "pacmap_like";
  }
  return "?";
}

inline ReduceMethod reduce_method_from_string(std::string_view s) {
  if (s == "umap_like") return ReduceMethod::umap_like;
  if (s == "trimap_like") return ReduceMethod::trimap_like;
  if (s == "pacmap_like") return ReduceMethod::pacmap_like;
  throw InputError("unknown reducer method: " + std::string(s));
}

struct ReducerConfig {
  ReduceMethod method = ReduceMethod::umap_like;
  int out_dim = 2;
  std::size_t n_neighbors = 15;
  std::size_t epochs = 450;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  double min_dist = 0.1;  // umap_like only

  void validate() const {
    if (out_dim != 2 && out_dim != 3) throw std::invalid_argument("out_dim must be 2 or 3");
    if (n_neighbors < 2) throw std::invalid_argument("n_neighbors must be >= 2");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (min_dist < 0.0) throw std::invalid_argument("min_dist must be nonnegative");
  }
};

struct Projection {
  std::vector<std::string> ids;
  std::size_t out_dim = 2;
  std::vector<double> coords;  // row-major N x out_dim
  std::string method;
  ReducerConfig config;
  std::uint64_t seed = 0;
  bool input_renormalized = false;
  // (epoch, objective) samples; always includes the first and last epoch.
  std::vector<std::pair<std::size_t, double>> loss_history;

  std::size_t rows() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(coords.data() + i * out_dim, out_dim);
  }
};

// Fits (a, b) so that 1/(1 + a x^(2b)) tracks the piecewise target that is 1
// up to min_dist and decays as exp(-(x - min_dist)/spread) beyond it.
// Levenberg-Marquardt on a 300-point grid over (0, 3*spread].
inline std::pair<double, double> fit_rational_curve(double min_dist, double spread = 1.0) {
  std::vector<double> xs, ys;
  for (int i = 1; i <= 300; ++i) {
    const double x = 3.0 * spread * i / 300.0;
    xs.push_back(x);
    ys.push_back(x <= min_dist ? 1.0 : std::exp(-(x - min_dist) / spread));
  }
  double a = 1.0, b = 1.0;
  auto sse = [&](double pa, double pb) {
    double s = 0.0;
    for (std::size_t m = 0; m < xs.size(); ++m) {
      const double q = 1.0 / (1.0 + pa * std::pow(xs[m], 2.0 * pb));
      const double r = q - ys[m];
      s += r * r;
    }
    return s;
  };
  double lambda = 1e-3;
  double cur = sse(a, b);
  for (int iter = 0; iter < 200; ++iter) {
    double jtj00 = 0, jtj01 = 0, jtj11 = 0, jtr0 = 0, jtr1 = 0;
    for (std::size_t m = 0; m < xs.size(); ++m) {
      const double xp = std::pow(xs[m], 2.0 * b);
      const double den = 1.0 + a * xp;
      const double q = 1.0 / den;
      const double r = q - ys[m];
      const double da = -xp / (den * den);
      const double db = -a * xp * 2.0 * std::log(xs[m]) / (den * den);
      jtj00 += da * da;
      jtj01 += da * db;
      jtj11 += db * db;
      jtr0 += da * r;
      jtr1 += db * r;
    }
    bool stepped = false;
    for (int tries = 0; tries < 16; ++tries) {
      const double m00 = jtj00 * (1.0 + lambda), m11 = jtj11 * (1.0 + lambda);
      const double det = m00 * m11 - jtj01 * jtj01;
      if (det == 0.0) break;
      const double d_a = (-jtr0 * m11 + jtr1 * jtj01) / det;
      const double d_b = (-jtr1 * m00 + jtr0 * jtj01) / det;
      const double na = std::max(1e-8, a + d_a);
      const double nb = std::max(1e-8, b + d_b);
      const double ns = sse(na, nb);
      if (ns < cur) {
        a = na;
        b = nb;
        cur = ns;
        lambda = std::max(1e-12, lambda / 3.0);
        stepped = true;
        if (std::abs(d_a) + std::abs(d_b) < 1e-12) iter = 200;
        break;
      }
      lambda *= 3.0;
    }
    if (!stepped) break;
  }
  return {a, b};
}

namespace detail {

// Solves sum_j exp(-max(0, d_j - rho)/sigma) = target by bisection; the sum
// is monotone increasing in sigma.
inline double smooth_knn_sigma(const std::vector<double>& dists, double rho, double target) {
  auto weight_sum = [&](double sigma) {
    double s = 0.0;
    for (double d : dists) s += std::exp(-std::max(0.0, d - rho) / sigma);
    return s;
  };
  double lo = 1e-12, hi = 1e4;
  for (int it = 0; it < 64; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (weight_sum(mid) > target)
      hi = mid;
    else
      lo = mid;
  }
  return std::max(0.5 * (lo + hi), 1e-10);
}

struct ReduceInput {
  std::vector<double> data;  // unit rows, row-major
  std::size_t n = 0;
  std::size_t dim = 0;
  bool renormalized = false;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data.data() + i * dim, dim);
  }
  double cosdist(std::size_t i, std::size_t j) const {
    double d = 0.0;
    const double* a = data.data() + i * dim;
    const double* b = data.data() + j * dim;
    for (std::size_t c = 0; c < dim; ++c) d += a[c] * b[c];
    return 1.0 - d;
  }
};

inline FlatIndex build_unit_index(const ReduceInput& in, const std::vector<std::string>& ids) {
  EmbeddingMatrix unit;
  unit.dim = in.dim;
  unit.normalized = true;
  for (std::size_t r = 0; r < in.n; ++r) {
    std::vector<float> row(in.dim);
    for (std::size_t c = 0; c < in.dim; ++c) row[c] = static_cast<float>(in.data[r * in.dim + c]);
    normalize_row(row);
    unit.add_row(ids[r], std::span<const float>(row));
  }
  return FlatIndex(std::move(unit));
}

inline ReduceInput prepare_input(const EmbeddingMatrix& X, const ReducerConfig& cfg) {
  cfg.validate();
  if (X.rows() < cfg.n_neighbors + 1)
    throw InputError("reducer needs at least n_neighbors + 1 = " +
                     std::to_string(cfg.n_neighbors + 1) + " rows, got " +
                     std::to_string(X.rows()));
  ReduceInput in;
  in.n = X.rows();
  in.dim = X.dim;
  in.data.resize(in.n * in.dim);
  in.renormalized = !X.rows_unit_norm(1e-6);
  for (std::size_t r = 0; r < in.n; ++r) {
    const auto row = X.row(r);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * v;
    if (sq == 0.0) throw InputError("reducer input has a zero row: " + X.ids[r]);
    // Always divide: the working copy is unit to double precision, so exact
    // scalar multiples of an input yield the same layout.
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t c = 0; c < in.dim; ++c)
      in.data[r * in.dim + c] = static_cast<double>(row[c]) * inv;
  }
  return in;
}

// Top-out_dim principal components via power iteration with deflation; the
// scores are sign-canonicalized and rescaled so the widest axis has standard
// deviation 1e-4. Degenerate inputs fall back to seeded Gaussian noise.
inline std::vector<double> pca_init(const ReduceInput& in, std::size_t out_dim, Rng& rng) {
  const std::size_t n = in.n, d = in.dim;
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) mean[c] += in.data[i * d + c];
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<std::vector<double>> comps;
  std::vector<double> lambdas;
  auto apply_cov = [&](const std::vector<double>& v, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double t = 0.0;
      const double* xi = in.data.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) t += (xi[c] - mean[c]) * v[c];
      for (std::size_t c = 0; c < d; ++c) out[c] += t * (xi[c] - mean[c]);
    }
    for (double& x : out) x /= static_cast<double>(n);
    for (std::size_t k = 0; k < comps.size(); ++k) {
      double proj = 0.0;
      for (std::size_t c = 0; c < d; ++c) proj += comps[k][c] * v[c];
      for (std::size_t c = 0; c < d; ++c) out[c] -= lambdas[k] * proj * comps[k][c];
    }
  };

  for (std::size_t k = 0; k < out_dim; ++k) {
    std::vector<double> v(d), w(d);
    for (double& x : v) x = rng.normal();
    for (int it = 0; it < 128; ++it) {
      apply_cov(v, w);
      double nrm = 0.0;
      for (double x : w) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm < 1e-300) break;
      for (std::size_t c = 0; c < d; ++c) v[c] = w[c] / nrm;
    }
    apply_cov(v, w);
    double lam = 0.0;
    for (std::size_t c = 0; c < d; ++c) lam += v[c] * w[c];
    std::size_t arg = 0;
    for (std::size_t c = 1; c < d; ++c)
      if (std::abs(v[c]) > std::abs(v[arg])) arg = c;
    if (v[arg] < 0.0)
      for (double& x : v) x = -x;
    comps.push_back(std::move(v));
    lambdas.push_back(std::max(lam, 0.0));
  }

  std::vector<double> coords(n * out_dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = in.data.data() + i * d;
    for (std::size_t k = 0; k < out_dim; ++k) {
      double t = 0.0;
      for (std::size_t c = 0; c < d; ++c) t += (xi[c] - mean[c]) * comps[k][c];
      coords[i * out_dim + k] = t;
    }
  }
  double max_sd = 0.0;
  for (std::size_t k = 0; k < out_dim; ++k) {
    double m = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += coords[i * out_dim + k];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = coords[i * out_dim + k] - m;
      sq += e * e;
    }
    max_sd = std::max(max_sd, std::sqrt(sq / static_cast<double>(n)));
  }
  if (max_sd < 1e-12) {
    for (double& x : coords) x = rng.normal() * 1e-4;
  } else {
    const double scale = 1e-4 / max_sd;
    for (double& x : coords) x *= scale;
  }
  return coords;
}

// Adds lr * disp to the coordinates, clipping each point's displacement to
// Euclidean norm 4 first.
inline void apply_displacements(std::vector<double>& coords, const std::vector<double>& disp,
                                std::size_t n, std::size_t dim, double lr) {
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = disp[i * dim + c];
      sq += v * v;
    }
    double scale = lr;
    if (sq > 16.0) scale = lr * 4.0 / std::sqrt(sq);
    for (std::size_t c = 0; c < dim; ++c) coords[i * dim + c] += scale * disp[i * dim + c];
  }
}

inline double sqdist(const std::vector<double>& coords, std::size_t dim, std::size_t i,
                     std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const double v = coords[i * dim + c] - coords[j * dim + c];
    s += v * v;
  }
  return s;
}

inline void center(std::vector<double>& coords, std::size_t n, std::size_t dim) {
  for (std::size_t c = 0; c < dim; ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += coords[i * dim + c];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) coords[i * dim + c] -= m;
  }
}

struct SymEdge {
  std::uint32_t i = 0, j = 0;  // i < j
  double w = 0.0;
};

// Directed fuzzy-neighbor weights symmetrized by probabilistic union:
// w + w' - w*w'. Edges come out sorted by (i, j).
inline std::vector<SymEdge> umap_graph(const ReduceInput& in, std::size_t n_neighbors,
                                       const std::vector<std::vector<Neighbor>>& knn) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<double, double>> directed;
  const double target = std::log2(static_cast<double>(n_neighbors));
  for (std::size_t i = 0; i < in.n; ++i) {
    std::vector<double> dists;
    dists.reserve(knn[i].size());
    for (const auto& nb : knn[i]) dists.push_back(nb.distance);
    const double rho = dists.front();
    const double sigma = smooth_knn_sigma(dists, rho, target);
    for (const auto& nb : knn[i]) {
      const double w = std::exp(-std::max(0.0, nb.distance - rho) / sigma);
      const std::uint32_t a = static_cast<std::uint32_t>(i);
      const std::uint32_t b = static_cast<std::uint32_t>(nb.index);
      const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto& slot = directed[key];
      (a < b ? slot.first : slot.second) = w;
    }
  }
  std::vector<SymEdge> edges;
  edges.reserve(directed.size());
  for (const auto& [key, ww] : directed) {
    const double w = ww.first + ww.second - ww.first * ww.second;
    if (w > 0.0) edges.push_back({key.first, key.second, w});
  }
  return edges;
}

// Cross-entropy between graph weights and the layout similarity
// q = 1/(1 + a D^b), summed over all pairs (off-graph pairs have w = 0).
inline double umap_full_loss(const std::vector<double>& coords, std::size_t n, std::size_t dim,
                             const std::vector<SymEdge>& edges, double a, double b) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> wmap;
  for (const auto& e : edges) wmap[{e.i, e.j}] = e.w;
  double loss = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      const double D = sqdist(coords, dim, i, j);
      double q = 1.0 / (1.0 + a * std::pow(D, b));
      q = std::clamp(q, 1e-12, 1.0 - 1e-12);
      double w = 0.0;
      if (auto it = wmap.find({i, j}); it != wmap.end()) w = it->second;
      if (w > 0.0) loss -= w * std::log(q);
      if (w < 1.0) loss -= (1.0 - w) * std::log(1.0 - q);
    }
  }
  return loss;
}

inline bool record_every_epoch(std::size_t n) { return n <= 400; }

}  // namespace detail

inline Projection fit_umap_like(const EmbeddingMatrix& X, const ReducerConfig& cfg) {
  const auto in = detail::prepare_input(X, cfg);
  const std::size_t n = in.n, dim = static_cast<std::size_t>(cfg.out_dim);
  Rng rng(derive_seed(cfg.seed, "reduce.umap_like"));

  const FlatIndex index = detail::build_unit_index(in, X.ids);
  const auto knn = neighbors_excluding_self(index, cfg.n_neighbors);
  const auto edges = detail::umap_graph(in, cfg.n_neighbors, knn);
  const auto [a, b] = fit_rational_curve(cfg.min_dist);

  std::vector<double> coords = detail::pca_init(in, dim, rng);

  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.w);
  std::vector<double> next_due(edges.size()), per_epoch(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    per_epoch[e] = max_w / edges[e].w;
    next_due[e] = per_epoch[e];
  }

  Projection out;
  out.ids = X.ids;
  out.out_dim = dim;
  out.method = to_string(ReduceMethod::umap_like);
  out.config = cfg;
  out.seed = cfg.seed;
  out.input_renormalized = in.renormalized;

  std::vector<double> disp(n * dim);
  const std::size_t E = cfg.epochs;
  for (std::size_t epoch = 1; epoch <= E; ++epoch) {
    std::fill(disp.begin(), disp.end(), 0.0);
    const double lr = cfg.learning_rate * (1.0 - static_cast<double>(epoch - 1) / E);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (next_due[e] > static_cast<double>(epoch)) continue;
      next_due[e] += per_epoch[e];
      const std::uint32_t i = edges[e].i, j = edges[e].j;
      const double D = detail::sqdist(coords, dim, i, j);
      if (D > 0.0) {
        const double coeff = (-2.0 * a * b * std::pow(D, b - 1.0)) / (1.0 + a * std::pow(D, b));
        for (std::size_t c = 0; c < dim; ++c) {
          const double g = coeff * (coords[i * dim + c] - coords[j * dim + c]);
          disp[i * dim + c] += g;
          disp[j * dim + c] -= g;
        }
      }
      for (int s = 0; s < 5; ++s) {
        const std::size_t k = rng.index(n);
        if (k == i || k == j) continue;
        const double Dn = detail::sqdist(coords, dim, i, k);
        const double coeff = 2.0 * b / ((0.001 + Dn) * (1.0 + a * std::pow(Dn, b)));
        for (std::size_t c = 0; c < dim; ++c)
          disp[i * dim + c] += coeff * (coords[i * dim + c] - coords[k * dim + c]);
      }
    }
    detail::apply_displacements(coords, disp, n, dim, lr);
    if (detail::record_every_epoch(n) || epoch == 1 || epoch == E)
      out.loss_history.emplace_back(epoch, detail::umap_full_loss(coords, n, dim, edges, a, b));
  }
  detail::center(coords, n, dim);
  out.coords = std::move(coords);
  return out;
}

namespace detail {

struct Triplet {
  std::uint32_t i = 0, j = 0, k = 0;  // j near i, k far from i
  double w = 0.0;
};

inline double trimap_loss(const std::vector<double>& coords, std::size_t dim,
                          const std::vector<Triplet>& triplets) {
  constexpr double eps = 1e-4;
  double loss = 0.0;
  for (const auto& t : triplets) {
    const double A = sqdist(coords, dim, t.i, t.j);
    const double B = sqdist(coords, dim, t.i, t.k);
    loss += t.w * A / (A + B + eps);
  }
  return loss;
}

}  // namespace detail

inline Projection fit_trimap_like(const EmbeddingMatrix& X, const ReducerConfig& cfg) {
  const auto in = detail::prepare_input(X, cfg);
  const std::size_t n = in.n, dim = static_cast<std::size_t>(cfg.out_dim);
  Rng rng(derive_seed(cfg.seed, "reduce.trimap_like"));

  const FlatIndex index = detail::build_unit_index(in, X.ids);
  const auto knn = neighbors_excluding_self(index, cfg.n_neighbors);

  // Two random-far triplets per (point, neighbor); weights grow with how much
  // farther k is than j in the input space, normalized to max 1.
  constexpr double delta = 1e-4;
  std::vector<detail::Triplet> triplets;
  triplets.reserve(n * cfg.n_neighbors * 2);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> is_near(n, false);
    is_near[i] = true;
    for (const auto& nb : knn[i]) is_near[nb.index] = true;
    for (const auto& nb : knn[i]) {
      const double dij = nb.distance;
      for (int s = 0; s < 2; ++s) {
        std::size_t k = rng.index(n);
        for (int tries = 0; tries < 64 && is_near[k]; ++tries) k = rng.index(n);
        if (is_near[k]) continue;  // degenerate graph; skip the triplet
        const double dik = in.cosdist(i, k);
        const double w = std::log1p((dik + delta) / (dij + delta));
        triplets.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(nb.index),
                            static_cast<std::uint32_t>(k), w});
      }
    }
  }
  double max_w = 0.0;
  for (const auto& t : triplets) max_w = std::max(max_w, t.w);
  if (max_w > 0.0)
    for (auto& t : triplets) t.w /= max_w;

  std::vector<double> coords = detail::pca_init(in, dim, rng);

  Projection out;
  out.ids = X.ids;
  out.out_dim = dim;
  out.method = to_string(ReduceMethod::trimap_like);
  out.config = cfg;
  out.seed = cfg.seed;
  out.input_renormalized = in.renormalized;

  constexpr double eps = 1e-4;
  std::vector<double> disp(n * dim);
  const std::size_t E = cfg.epochs;
  for (std::size_t epoch = 1; epoch <= E; ++epoch) {
    std::fill(disp.begin(), disp.end(), 0.0);
    const double lr = cfg.learning_rate * (1.0 - static_cast<double>(epoch - 1) / E);
    for (const auto& t : triplets) {
      const double A = detail::sqdist(coords, dim, t.i, t.j);
      const double B = detail::sqdist(coords, dim, t.i, t.k);
      const double S = A + B + eps;
      const double dA = t.w * (B + eps) / (S * S);
      const double dB = -t.w * A / (S * S);
      for (std::size_t c = 0; c < dim; ++c) {
        const double vij = coords[t.i * dim + c] - coords[t.j * dim + c];
        const double vik = coords[t.i * dim + c] - coords[t.k * dim + c];
        disp[t.i * dim + c] -= 2.0 * (dA * vij + dB * vik);
        disp[t.j * dim + c] += 2.0 * dA * vij;
        disp[t.k * dim + c] += 2.0 * dB * vik;
      }
    }
    detail::apply_displacements(coords, disp, n, dim, lr);
    out.loss_history.emplace_back(epoch, detail::trimap_loss(coords, dim, triplets));
  }
  detail::center(coords, n, dim);
  out.coords = std::move(coords);
  return out;
}

namespace detail {

enum class PairKind { neighbor, mid_near, far };

struct ScoredPair {
  std::uint32_t i = 0, j = 0;
  PairKind kind = PairKind::neighbor;
};

// Mid-near weight falls 1000 -> 3 over the first 2E/9 epochs, holds at 3
// until 4E/9, then drops to 0. Neighbor and far weights stay fixed.
inline double pacmap_mn_weight(std::size_t epoch, std::size_t total) {
  const std::size_t t1 = std::max<std::size_t>(1, 2 * total / 9);
  const std::size_t t2 = std::max(t1, 4 * total / 9);
  if (epoch <= t1) {
    const double p = static_cast<double>(epoch) / static_cast<double>(t1);
    return 1000.0 * (1.0 - p) + 3.0 * p;
  }
  if (epoch <= t2) return 3.0;
  return 0.0;
}

inline double pacmap_loss(const std::vector<double>& coords, std::size_t dim,
                          const std::vector<ScoredPair>& pairs, double w_mn) {
  double loss = 0.0;
  for (const auto& p : pairs) {
    const double dt = 1.0 + sqdist(coords, dim, p.i, p.j);
    switch (p.kind) {
      case PairKind::neighbor: loss += 2.0 * dt / (10.0 + dt); break;
      case PairKind::mid_near: loss += w_mn * dt / (10000.0 + dt); break;
      case PairKind::far: loss += 1.0 / (1.0 + dt); break;
    }
  }
  return loss;
}

}  // namespace detail

inline Projection fit_pacmap_like(const EmbeddingMatrix& X, const ReducerConfig& cfg) {
  const auto in = detail::prepare_input(X, cfg);
  const std::size_t n = in.n, dim = static_cast<std::size_t>(cfg.out_dim);
  Rng rng(derive_seed(cfg.seed, "reduce.pacmap_like"));

  const FlatIndex index = detail::build_unit_index(in, X.ids);
  const auto knn = neighbors_excluding_self(index, cfg.n_neighbors);

  // Pair budget per point: nn neighbor pairs, round(0.5*nn) mid-near pairs
  // (second-closest of 6 random candidates), 2*nn far pairs (non-neighbors).
  std::vector<detail::ScoredPair> pairs;
  const std::size_t n_mn = static_cast<std::size_t>(std::lround(0.5 * cfg.n_neighbors));
  const std::size_t n_fp = 2 * cfg.n_neighbors;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> is_near(n, false);
    is_near[i] = true;
    for (const auto& nb : knn[i]) is_near[nb.index] = true;
    for (const auto& nb : knn[i])
      pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(nb.index),
                       detail::PairKind::neighbor});
    // Candidate pool capped by the population: only n - 1 distinct rows
    // exist besides i, and prepare_input guarantees n >= 3.
    const std::size_t pool = std::min<std::size_t>(6, n - 1);
    for (std::size_t s = 0; s < n_mn; ++s) {
      std::vector<std::size_t> cand;
      while (cand.size() < pool) {
        const std::size_t c = rng.index(n);
        if (c == i || std::find(cand.begin(), cand.end(), c) != cand.end()) continue;
        cand.push_back(c);
      }
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t c : cand) scored.emplace_back(in.cosdist(i, c), c);
      std::sort(scored.begin(), scored.end());
      const std::size_t pick = std::min<std::size_t>(1, scored.size() - 1);
      pairs.push_back({static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(scored[pick].second),
                       detail::PairKind::mid_near});
    }
    for (std::size_t s = 0; s < n_fp; ++s) {
      std::size_t k = rng.index(n);
      for (int tries = 0; tries < 64 && is_near[k]; ++tries) k = rng.index(n);
      if (is_near[k]) continue;
      pairs.push_back(
          {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k), detail::PairKind::far});
    }
  }

  std::vector<double> coords = detail::pca_init(in, dim, rng);

  Projection out;
  out.ids = X.ids;
  out.out_dim = dim;
  out.method = to_string(ReduceMethod::pacmap_like);
  out.config = cfg;
  out.seed = cfg.seed;
  out.input_renormalized = in.renormalized;

  std::vector<double> disp(n * dim);
  const std::size_t E = cfg.epochs;
  for (std::size_t epoch = 1; epoch <= E; ++epoch) {
    std::fill(disp.begin(), disp.end(), 0.0);
    const double lr = cfg.learning_rate * (1.0 - static_cast<double>(epoch - 1) / E);
    const double w_mn = detail::pacmap_mn_weight(epoch, E);
    for (const auto& p : pairs) {
      const double dt = 1.0 + detail::sqdist(coords, dim, p.i, p.j);
      double dldd = 0.0;  // dL/d(dt)
      switch (p.kind) {
        case detail::PairKind::neighbor: dldd = 2.0 * 10.0 / ((10.0 + dt) * (10.0 + dt)); break;
        case detail::PairKind::mid_near:
          dldd = w_mn * 10000.0 / ((10000.0 + dt) * (10000.0 + dt));
          break;
        case detail::PairKind::far: dldd = -1.0 / ((1.0 + dt) * (1.0 + dt)); break;
      }
      for (std::size_t c = 0; c < dim; ++c) {
        const double g = dldd * 2.0 * (coords[p.i * dim + c] - coords[p.j * dim + c]);
        disp[p.i * dim + c] -= g;
        disp[p.j * dim + c] += g;
      }
    }
    detail::apply_displacements(coords, disp, n, dim, lr);
    out.loss_history.emplace_back(epoch, detail::pacmap_loss(coords, dim, pairs, w_mn));
  }
  detail::center(coords, n, dim);
  out.coords = std::move(coords);
  return out;
}

inline Projection fit_reducer(const EmbeddingMatrix& X, const ReducerConfig& cfg) {
  switch (cfg.method) {
    case ReduceMethod::umap_like: return fit_umap_like(X, cfg);
    case ReduceMethod::trimap_like: return fit_trimap_like(X, cfg);
    case ReduceMethod::pacmap_like: return fit_pacmap_like(X, cfg);
  }
  throw std::invalid_argument("unknown reducer method");
}

}  // namespace stylo
