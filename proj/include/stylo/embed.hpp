#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylo/corpus.hpp"
#include "stylo/errors.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"

namespace stylo {

// ---------------------------------------------------------------------------
// Hashed n-gram embedder. A cheap, fully deterministic stand-in for
// transformer vectors: every token n-gram lands in one of `dim` buckets with
// a +/-1 sign (signed feature hashing), and the vector is L2-normalized.

struct HashedNgramConfig {
  std::size_t dim = 1024;
  std::size_t ngram_min = 1;
  std::size_t ngram_max = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim < 64) throw std::invalid_argument("hashed n-gram dim must be >= 64");
    if (ngram_min < 1 || ngram_min > ngram_max || ngram_max > 3)
      throw std::invalid_argument("n-gram orders must satisfy 1 <= min <= max <= 3");
  }
};

// 64-bit hash of one n-gram. Tokens are joined with a 0x1f separator (a byte
// that the tokenizer never emits inside a token), folded into a seeded FNV
// state, then finalized for avalanche. Exposed so tests can recompute bucket
// assignments independently of the embedding loop.
inline std::uint64_t ngram_hash(std::uint64_t seed, std::span<const std::string> tokens) {
  std::uint64_t basis = seed;
  basis = splitmix64(basis);
  std::uint64_t h = 0xcbf29ce484222325ull ^ basis;
  bool first = true;
  for (const auto& tok : tokens) {
    if (!first) {
      h ^= 0x1fu;
      h *= 0x100000001b3ull;
    }
    first = false;
    h = fnv1a64(tok, h);
  }
  std::uint64_t state = h;
  return splitmix64(state);
}

inline std::size_t ngram_bucket(std::uint64_t hash, std::size_t dim) { return hash % dim; }

// +1 when the hash has even bit parity, -1 when odd.
inline double ngram_sign(std::uint64_t hash) {
  return (std::popcount(hash) & 1u) ? -1.0 : 1.0;
}

inline std::vector<double> hashed_ngram_vector(std::span<const std::string> tokens,
                                               const HashedNgramConfig& cfg) {
  std::vector<double> acc(cfg.dim, 0.0);
  const std::size_t n = tokens.size();
  for (std::size_t order = cfg.ngram_min; order <= cfg.ngram_max; ++order) {
    if (n < order) continue;
    for (std::size_t i = 0; i + order <= n; ++i) {
      const std::uint64_t h = ngram_hash(cfg.seed, tokens.subspan(i, order));
      acc[ngram_bucket(h, cfg.dim)] += ngram_sign(h);
    }
  }
  double sq = 0.0;
  for (double v : acc) sq += v * v;
  if (sq > 0.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : acc) v *= inv;
  }
  return acc;
}

// One row per chunk, ids "<doc_id>#<index>". Empty chunks produce a zero row
// recorded in zero_rows rather than an error; callers decide how to react.
inline EmbeddingMatrix hashed_ngram_embed(const ChunkSet& chunks, const HashedNgramConfig& cfg) {
  cfg.validate();
  EmbeddingMatrix m;
  m.dim = cfg.dim;
  m.provider = "hashed-ngram";
  m.normalized = true;
  for (std::size_t i = 0; i < chunks.spans.size(); ++i) {
    const auto vec = hashed_ngram_vector(chunks.chunk_tokens(i), cfg);
    m.add_row(chunk_id(chunks.doc_id, i), vec);
    if (chunks.chunk_tokens(i).empty())
      m.zero_rows.push_back(static_cast<std::uint32_t>(m.rows() - 1));
  }
  return m;
}

inline EmbeddingMatrix hashed_ngram_embed_many(std::span<const ChunkSet> docs,
                                               const HashedNgramConfig& cfg) {
  cfg.validate();
  EmbeddingMatrix m;
  m.dim = cfg.dim;
  m.provider = "hashed-ngram";
  m.normalized = true;
  for (const auto& chunks : docs) {
    for (std::size_t i = 0; i < chunks.spans.size(); ++i) {
      const auto vec = hashed_ngram_vector(chunks.chunk_tokens(i), cfg);
      m.add_row(chunk_id(chunks.doc_id, i), vec);
      if (chunks.chunk_tokens(i).empty())
        m.zero_rows.push_back(static_cast<std::uint32_t>(m.rows() - 1));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// External embedding files. Two formats:
//   * binary: magic "EMB1", LE u32 dim, LE u32 rows, then per row a u16 id
//     length, the id bytes, and dim little-endian f32 values;
//   * JSONL: one {"id": ..., "v": [...]} object per line.
// The binary format round-trips bit-exactly.

namespace detail {

inline std::uint32_t read_le_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_le_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(p[0]) |
                                    (static_cast<std::uint16_t>(p[1]) << 8));
}

inline float read_le_f32(const unsigned char* p) {
  const std::uint32_t bits = read_le_u32(p);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

inline void write_le_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void write_le_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void write_le_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  write_le_u32(out, bits);
}

inline void check_row_finite(const EmbeddingMatrix& m, std::size_t row,
                             const std::string& where) {
  for (float v : m.row(row)) {
    if (!std::isfinite(v))
      throw InputError(where + ": non-finite value in row '" + m.ids[row] + "'");
  }
}

}  // namespace detail

inline EmbeddingMatrix load_embeddings_binary(const std::filesystem::path& path) {
  const std::string raw = read_text_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  const std::string where = path.string();
  if (raw.size() < 12 || std::memcmp(p, "EMB1", 4) != 0)
    throw InputError(where + ": not an EMB1 embedding file");
  const std::uint32_t dim = detail::read_le_u32(p + 4);
  const std::uint32_t rows = detail::read_le_u32(p + 8);
  if (dim == 0) throw InputError(where + ": embedding dim must be positive");

  EmbeddingMatrix m;
  m.dim = dim;
  m.provider = "external";
  m.ids.reserve(rows);
  m.data.reserve(static_cast<std::size_t>(rows) * dim);
  std::set<std::string> seen;
  std::size_t off = 12;
  for (std::uint32_t r = 0; r < rows; ++r) {
    if (off + 2 > raw.size()) throw InputError(where + ": truncated row header");
    const std::uint16_t idlen = detail::read_le_u16(p + off);
    off += 2;
    if (off + idlen + static_cast<std::size_t>(dim) * 4 > raw.size())
      throw InputError(where + ": truncated row " + std::to_string(r));
    std::string id(raw.data() + off, idlen);
    off += idlen;
    if (id.empty()) throw InputError(where + ": empty id in row " + std::to_string(r));
    if (!seen.insert(id).second) throw InputError(where + ": duplicate id '" + id + "'");
    m.ids.push_back(std::move(id));
    for (std::uint32_t c = 0; c < dim; ++c) {
      m.data.push_back(detail::read_le_f32(p + off));
      off += 4;
    }
    detail::check_row_finite(m, r, where);
  }
  if (off != raw.size())
    throw InputError(where + ": trailing bytes after last row");
  return m;
}

inline EmbeddingMatrix load_embeddings_jsonl(const std::filesystem::path& path) {
  const std::string raw = read_text_file(path);
  const std::string where = path.string();
  EmbeddingMatrix m;
  m.provider = "external";
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t eol = raw.find('\n', pos);
    if (eol == std::string::npos) eol = raw.size();
    std::string_view line(raw.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("v") || !obj["v"].is_array())
      throw InputError(where + ":" + std::to_string(line_no) +
                       ": expected {\"id\": string, \"v\": [numbers]}");
    std::string id = obj["id"].get<std::string>();
    if (id.empty())
      throw InputError(where + ":" + std::to_string(line_no) + ": empty id");
    if (!seen.insert(id).second) throw InputError(where + ": duplicate id '" + id + "'");
    std::vector<double> vec;
    vec.reserve(obj["v"].size());
    for (const auto& x : obj["v"]) {
      if (!x.is_number())
        throw InputError(where + ":" + std::to_string(line_no) + ": non-numeric entry in v");
      vec.push_back(x.get<double>());
    }
    if (m.ids.empty()) {
      if (vec.empty())
        throw InputError(where + ":" + std::to_string(line_no) + ": empty vector");
      m.dim = vec.size();
    } else if (vec.size() != m.dim) {
      throw InputError(where + ":" + std::to_string(line_no) + ": row dim " +
                       std::to_string(vec.size()) + " != " + std::to_string(m.dim));
    }
    m.add_row(std::move(id), vec);
    detail::check_row_finite(m, m.rows() - 1, where);
  }
  if (m.ids.empty()) throw InputError(where + ": no embedding rows");
  return m;
}

// Sniffs the format from the first bytes: "EMB1" magic = binary, else JSONL.
inline EmbeddingMatrix load_external_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open embedding file: " + path.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.close();
  if (std::memcmp(magic, "EMB1", 4) == 0) return load_embeddings_binary(path);
  return load_embeddings_jsonl(path);
}

inline void save_embeddings_binary(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  if (m.dim == 0 || m.dim > 0xFFFFFFFFull)
    throw std::invalid_argument("embedding dim out of range for binary format");
  std::string out;
  out.reserve(12 + m.rows() * (2 + 16 + m.dim * 4));
  out += "EMB1";
  detail::write_le_u32(out, static_cast<std::uint32_t>(m.dim));
  detail::write_le_u32(out, static_cast<std::uint32_t>(m.rows()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.ids[r].size() > 0xFFFF)
      throw std::invalid_argument("id too long for binary format: " + m.ids[r]);
    detail::write_le_u16(out, static_cast<std::uint16_t>(m.ids[r].size()));
    out += m.ids[r];
    for (float v : m.row(r)) detail::write_le_f32(out, v);
  }
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Mean pooling: document vector = mean of its chunk rows, renormalized.

inline std::vector<float> pool_document(const EmbeddingMatrix& chunk_vectors,
                                        const std::string& doc_id) {
  std::vector<double> acc(chunk_vectors.dim, 0.0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < chunk_vectors.rows(); ++r) {
    if (doc_of_chunk_id(chunk_vectors.ids[r]) != doc_id) continue;
    const auto row = chunk_vectors.row(r);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += row[c];
    ++count;
  }
  if (count == 0) throw InputError("no chunk rows for document '" + doc_id + "'");
  double sq = 0.0;
  for (double& v : acc) {
    v /= static_cast<double>(count);
    sq += v * v;
  }
  const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
  std::vector<float> out(acc.size());
  for (std::size_t c = 0; c < acc.size(); ++c)
    out[c] = static_cast<float>(acc[c] * inv);
  return out;
}

// Pools every document found in the chunk matrix, preserving first-appearance
// order of doc ids. Documents whose chunks are all zero rows yield a zero
// document row, recorded in zero_rows.
inline EmbeddingMatrix pool_documents(const EmbeddingMatrix& chunk_vectors) {
  EmbeddingMatrix m;
  m.dim = chunk_vectors.dim;
  m.provider = chunk_vectors.provider;
  m.normalized = true;
  std::set<std::string> seen;
  for (const auto& cid : chunk_vectors.ids) {
    std::string doc = doc_of_chunk_id(cid);
    if (!seen.insert(doc).second) continue;
    auto vec = pool_document(chunk_vectors, doc);
    double sq = 0.0;
    for (float v : vec) sq += static_cast<double>(v) * v;
    m.add_row(doc, std::span<const float>(vec));
    if (sq == 0.0) m.zero_rows.push_back(static_cast<std::uint32_t>(m.rows() - 1));
  }
  return m;
}

}  // namespace stylo
