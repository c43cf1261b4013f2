#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace stylo {

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const float> a) {
  double s = 0.0;
  for (float v : a) s += static_cast<double>(v) * v;
  return s;
}

inline double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm(std::span<const float> a) { return std::sqrt(squared_norm(a)); }
inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

// Scales the row to unit Euclidean norm. Returns false for a zero row.
inline bool normalize_row(std::span<float> a) {
  const double n = norm(a);
  if (n == 0.0) return false;
  const double inv = 1.0 / n;
  for (float& v : a) v = static_cast<float>(v * inv);
  return true;
}

// Dense row-major matrix of embedding vectors, one id per row. Vectors are
// stored as f32 so the binary file format round-trips bit-exactly.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<float> data;
  std::string provider;
  bool normalized = false;
  std::vector<std::uint32_t> zero_rows;  // rows that are all-zero (empty chunks)

  std::size_t rows() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data.data() + i * dim, dim);
  }
  std::span<float> row(std::size_t i) {
    return std::span<float>(data.data() + i * dim, dim);
  }

  void add_row(std::string id, std::span<const float> values) {
    if (dim == 0) dim = values.size();
    if (values.size() != dim)
      throw std::invalid_argument("row dimension mismatch for id " + id);
    ids.push_back(std::move(id));
    data.insert(data.end(), values.begin(), values.end());
  }

  void add_row(std::string id, const std::vector<double>& values) {
    std::vector<float> f(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
    add_row(std::move(id), std::span<const float>(f));
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t find(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return i;
    return npos;
  }

  std::unordered_map<std::string, std::size_t> id_index() const {
    std::unordered_map<std::string, std::size_t> m;
    m.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], i);
    return m;
  }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // True when every row has unit norm within tol (zero rows excluded).
  bool rows_unit_norm(double tol = 1e-6) const {
    for (std::size_t i = 0; i < rows(); ++i) {
      const double n = norm(row(i));
      if (n == 0.0) continue;
      if (std::abs(n - 1.0) > tol) return false;
    }
    return true;
  }
};

// Double-precision sibling of EmbeddingMatrix for computations whose
// verification tolerances are tighter than f32 storage allows.
struct DenseMatrixD {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t rows() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data.data() + i * dim, dim);
  }
  void add_row(std::string id, std::span<const double> values) {
    if (dim == 0) dim = values.size();
    if (values.size() != dim)
      throw std::invalid_argument("row dimension mismatch for id " + id);
    ids.push_back(std::move(id));
    data.insert(data.end(), values.begin(), values.end());
  }
};

}  // namespace stylo
