#pragma once

// Synthetic data generators and independent oracles shared by the unit and
// acceptance suites. Everything here is deliberately naive: brute-force scans
// and textbook formulas the library implementations can be checked against.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/io.hpp"
#include "stylo/knn.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace testsupport {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("stylo-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_unit_vector(stylo::Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double& x : v) {
      x = rng.normal();
      sq += x * x;
    }
  } while (sq < 1e-12);
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

inline std::vector<double> unit_perturbation(stylo::Rng& rng, const std::vector<double>& center,
                                             double noise) {
  std::vector<double> v(center.size());
  double sq = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) {
    v[c] = center[c] + noise * rng.normal();
    sq += v[c] * v[c];
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

// Rows in double precision plus ids; converts to either matrix flavor.
struct RawData {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<std::vector<double>> rows;

  stylo::EmbeddingMatrix to_f32() const {
    stylo::EmbeddingMatrix m;
    m.dim = dim;
    m.normalized = true;
    for (std::size_t r = 0; r < rows.size(); ++r) m.add_row(ids[r], rows[r]);
    return m;
  }

  stylo::DenseMatrixD to_f64() const {
    stylo::DenseMatrixD m;
    m.dim = dim;
    for (std::size_t r = 0; r < rows.size(); ++r) m.add_row(ids[r], rows[r]);
    return m;
  }
};

// Two bundles of unit vectors around orthogonal centers; ids carry the bundle
// in the label-ish prefix ("a_...", "b_...") and a fake year so parsers work.
inline RawData two_cluster_data(std::size_t n_per, std::size_t dim, double noise,
                                std::uint64_t seed) {
  stylo::Rng rng(seed);
  const auto c0 = random_unit_vector(rng, dim);
  // Gram-Schmidt for an orthogonal second center.
  auto c1 = random_unit_vector(rng, dim);
  double proj = 0.0;
  for (std::size_t c = 0; c < dim; ++c) proj += c0[c] * c1[c];
  double sq = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    c1[c] -= proj * c0[c];
    sq += c1[c] * c1[c];
  }
  for (double& x : c1) x /= std::sqrt(sq);

  RawData out;
  out.dim = dim;
  for (std::size_t i = 0; i < n_per; ++i) {
    out.ids.push_back("a" + std::to_string(i) + "_1900");
    out.rows.push_back(unit_perturbation(rng, c0, noise));
  }
  for (std::size_t i = 0; i < n_per; ++i) {
    out.ids.push_back("b" + std::to_string(i) + "_1950");
    out.rows.push_back(unit_perturbation(rng, c1, noise));
  }
  return out;
}

// One document per year in [year_lo, year_hi]; the mean direction rotates by
// angle_deg after break_year. Ids are "Doc_<year>".
inline RawData year_break_data(int year_lo, int year_hi, int break_year, double angle_deg,
                               double noise_deg, std::size_t dim, std::uint64_t seed) {
  stylo::Rng rng(seed);
  const auto u = random_unit_vector(rng, dim);
  auto v = random_unit_vector(rng, dim);
  double proj = 0.0;
  for (std::size_t c = 0; c < dim; ++c) proj += u[c] * v[c];
  double sq = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    v[c] -= proj * u[c];
    sq += v[c] * v[c];
  }
  for (double& x : v) x /= std::sqrt(sq);

  const double angle = angle_deg * 3.14159265358979323846 / 180.0;
  std::vector<double> mu2(dim);
  for (std::size_t c = 0; c < dim; ++c) mu2[c] = std::cos(angle) * u[c] + std::sin(angle) * v[c];

  const double noise = std::tan(noise_deg * 3.14159265358979323846 / 180.0);
  RawData out;
  out.dim = dim;
  for (int y = year_lo; y <= year_hi; ++y) {
    out.ids.push_back("Doc_" + std::to_string(y));
    out.rows.push_back(unit_perturbation(rng, y <= break_year ? u : mu2, noise));
  }
  return out;
}

// n_authors orthogonal basis directions (requires dim >= n_authors), each with
// per-chunk angular noise. Returns chunk matrix + parallel author labels.
struct AuthorChunks {
  stylo::EmbeddingMatrix chunks;
  std::vector<std::string> authors;
  std::vector<std::string> doc_ids;
  std::vector<int> years;
};

inline AuthorChunks author_chunk_data(std::size_t n_authors, std::size_t docs_per_author,
                                      std::size_t chunks_per_doc, std::size_t dim, double noise,
                                      std::uint64_t seed, int year_lo = 1900) {
  stylo::Rng rng(seed);
  AuthorChunks out;
  out.chunks.dim = dim;
  out.chunks.normalized = true;
  for (std::size_t a = 0; a < n_authors; ++a) {
    std::vector<double> center(dim, 0.0);
    center[a % dim] = 1.0;
    const std::string author = "Writer" + std::to_string(a);
    for (std::size_t d = 0; d < docs_per_author; ++d) {
      const int year = year_lo + static_cast<int>(d);
      const std::string doc = author + "_" + std::to_string(year);
      for (std::size_t k = 0; k < chunks_per_doc; ++k) {
        out.chunks.add_row(stylo::chunk_id(doc, k), unit_perturbation(rng, center, noise));
        out.authors.push_back(author);
        out.doc_ids.push_back(doc);
        out.years.push_back(year);
      }
    }
  }
  return out;
}

// Chunks whose year is a linear function of a latent coordinate. The first
// two components encode the year exactly; the rest is noise-free filler, so a
// tiny network can recover the mapping.
inline AuthorChunks linear_year_data(int year_lo, int year_hi, std::size_t docs_per_year,
                                     std::size_t chunks_per_doc, std::size_t dim, double noise,
                                     std::uint64_t seed) {
  stylo::Rng rng(seed);
  AuthorChunks out;
  out.chunks.dim = dim;
  out.chunks.normalized = false;
  for (int y = year_lo; y <= year_hi; ++y) {
    const double t = static_cast<double>(y - year_lo) / (year_hi - year_lo);
    for (std::size_t d = 0; d < docs_per_year; ++d) {
      const std::string doc = "Writer" + std::to_string(d) + "_" + std::to_string(y);
      for (std::size_t k = 0; k < chunks_per_doc; ++k) {
        std::vector<double> v(dim);
        v[0] = t + noise * rng.normal();
        v[1] = 1.0 - t + noise * rng.normal();
        for (std::size_t c = 2; c < dim; ++c) v[c] = 0.1 * rng.normal();
        out.chunks.add_row(stylo::chunk_id(doc, k), v);
        out.authors.push_back("Writer" + std::to_string(d));
        out.doc_ids.push_back(doc);
        out.years.push_back(y);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracles.

struct BruteNeighbor {
  std::size_t index;
  std::string id;
  double distance;
};

// Full scan + full sort with the same (distance, id) tie order the index uses.
inline std::vector<BruteNeighbor> brute_force_knn(const stylo::EmbeddingMatrix& m,
                                                  std::span<const float> q, std::size_t k) {
  const double qn = stylo::norm(q);
  std::vector<BruteNeighbor> all;
  for (std::size_t r = 0; r < m.rows(); ++r)
    all.push_back({r, m.ids[r], 1.0 - stylo::dot(q, m.row(r)) / qn});
  std::sort(all.begin(), all.end(), [](const BruteNeighbor& a, const BruteNeighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  all.resize(k);
  return all;
}

// Trustworthiness of a layout: 1 - 2/(N k (2N - 3k - 1)) * sum over points of
// sum over layout-neighbors j not among the input k-NN of (input_rank(j) - k).
// Input ranks use cosine distance on the original rows, layout neighborhoods
// use Euclidean distance, ties broken by index.
inline double trustworthiness(const stylo::EmbeddingMatrix& input,
                              const std::vector<double>& coords, std::size_t out_dim,
                              std::size_t k) {
  const std::size_t n = input.rows();
  std::vector<std::vector<std::size_t>> input_rank(n, std::vector<std::size_t>(n, 0));
  std::vector<std::vector<std::size_t>> input_knn(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> ds;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      ds.emplace_back(stylo::cosine_distance(input.row(i), input.row(j)), j);
    }
    std::sort(ds.begin(), ds.end());
    for (std::size_t r = 0; r < ds.size(); ++r) input_rank[i][ds[r].second] = r + 1;
    for (std::size_t r = 0; r < k; ++r) input_knn[i].push_back(ds[r].second);
  }

  double penalty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> ds;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (std::size_t c = 0; c < out_dim; ++c) {
        const double d = coords[i * out_dim + c] - coords[j * out_dim + c];
        sq += d * d;
      }
      ds.emplace_back(sq, j);
    }
    std::sort(ds.begin(), ds.end());
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = ds[r].second;
      const bool was_neighbor =
          std::find(input_knn[i].begin(), input_knn[i].end(), j) != input_knn[i].end();
      if (!was_neighbor)
        penalty += static_cast<double>(input_rank[i][j]) - static_cast<double>(k);
    }
  }
  const double nf = static_cast<double>(n), kf = static_cast<double>(k);
  return 1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty;
}

// Split quality computed the slow way: all three pairwise means from scratch.
template <typename Mat>
inline double split_score_oracle(const Mat& X, const std::vector<std::size_t>& before,
                                 const std::vector<std::size_t>& after) {
  auto mean_over = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                       bool same) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = same ? i + 1 : 0; j < b.size(); ++j) {
        sum += stylo::cosine_distance(X.row(a[i]), X.row(b[j]));
        ++count;
      }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
  };
  const double inter = mean_over(before, after, false);
  const double intra_b = mean_over(before, before, true);
  const double intra_a = mean_over(after, after, true);
  return inter - 0.5 * (intra_b + intra_a);
}

// ---------------------------------------------------------------------------
// Tiny corpora on disk.

struct CorpusDoc {
  std::string author;
  int year;
  std::string split;  // "train" or "test"
  std::string text;
};

inline void write_corpus_tree(const std::filesystem::path& root,
                              const std::vector<CorpusDoc>& docs) {
  std::filesystem::create_directories(root / "train");
  std::filesystem::create_directories(root / "test");
  for (const auto& d : docs) {
    const auto path = root / d.split / stylo::make_doc_filename(d.author, d.year);
    stylo::write_text_file(path, d.text);
  }
}

// Author-flavored filler text: each author draws from a private vocabulary,
// so hashed n-gram vectors separate cleanly.
inline std::string synthetic_text(std::size_t author_idx, int year, std::size_t n_tokens,
                                  std::uint64_t seed) {
  stylo::Rng rng(seed ^ (author_idx * 7919) ^ static_cast<std::uint64_t>(year));
  std::string out;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (!out.empty()) out += ' ';
    out += "w" + std::to_string(author_idx) + "x" + std::to_string(rng.index(40));
  }
  return out;
}

}  // namespace testsupport
