#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stylo/errors.hpp"
#include "stylo/io.hpp"

namespace stylo {

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw InputError("unknown split tag: " + std::string(s));
}

struct DocumentRecord {
  std::string doc_id;  // "<split>/<Author>_<Year>", unique within a corpus
  std::string author;
  int year = 0;
  Split split = Split::train;
  std::string rel_path;  // relative to the corpus root
  std::string text;
};

struct CorpusWarning {
  std::string path;
  std::string reason;
};

struct Corpus {
  std::vector<DocumentRecord> docs;
  std::vector<CorpusWarning> warnings;
};

enum class SplitLayout { subdirs, manifest };

constexpr int kMinYear = 1700;
constexpr int kMaxYear = 2100;

struct ParsedName {
  std::string author;
  int year = 0;
};

// Filenames look like "<Author>_<Year>.txt". The author part may itself
// contain underscores; the year is the final underscore-separated field.
inline ParsedName parse_document_filename(std::string_view filename) {
  std::string_view stem = filename;
  if (auto dot = stem.rfind('.'); dot != std::string_view::npos) stem = stem.substr(0, dot);
  const auto us = stem.rfind('_');
  if (us == std::string_view::npos || us == 0 || us + 1 == stem.size())
    throw InputError("unparsable corpus filename: " + std::string(filename));
  const std::string_view year_part = stem.substr(us + 1);
  int year = 0;
  for (char c : year_part) {
    if (c < '0' || c > '9')
      throw InputError("unparsable corpus filename: " + std::string(filename));
    year = year * 10 + (c - '0');
  }
  if (year < kMinYear || year > kMaxYear)
    throw InputError("year out of range [1700, 2100] in filename: " + std::string(filename));
  return ParsedName{std::string(stem.substr(0, us)), year};
}

inline std::string make_doc_filename(const std::string& author, int year) {
  return author + "_" + std::to_string(year) + ".txt";
}

namespace detail {

inline std::vector<std::string> tokenize_whitespace(std::string_view text);

inline void append_record(Corpus& corpus, std::set<std::string>& seen_keys,
                          const std::filesystem::path& file, const std::string& rel_path,
                          const std::string& author, int year, Split split) {
  const std::string key = author + "\x1f" + std::to_string(year) + "\x1f" + to_string(split);
  if (!seen_keys.insert(key).second)
    throw InputError("duplicate (author, year, split): " + author + "_" +
                     std::to_string(year) + " [" + to_string(split) + "]");
  std::string text = read_text_file(file);
  if (text.empty() || tokenize_whitespace(text).empty()) {
    corpus.warnings.push_back({rel_path, "empty document, excluded"});
    return;
  }
  DocumentRecord rec;
  rec.doc_id = to_string(split) + "/" + author + "_" + std::to_string(year);
  rec.author = author;
  rec.year = year;
  rec.split = split;
  rec.rel_path = rel_path;
  rec.text = std::move(text);
  corpus.docs.push_back(std::move(rec));
}

}  // namespace detail

// Loads a corpus laid out as root/{train,test}/<Author>_<Year>.txt, or from
// root/manifest.csv with columns path,author,year,split. Files are visited in
// sorted path order so the result is deterministic.
inline Corpus load_corpus(const std::filesystem::path& root, SplitLayout layout) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw InputError("corpus directory not found: " + root.string());

  Corpus corpus;
  std::set<std::string> seen_keys;
  std::vector<std::string> bad_names;

  if (layout == SplitLayout::subdirs) {
    for (Split split : {Split::train, Split::test}) {
      const fs::path dir = root / to_string(split);
      if (!fs::is_directory(dir))
        throw InputError("corpus split directory not found: " + dir.string());
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
          files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& file : files) {
        const std::string rel = to_string(split) + "/" + file.filename().string();
        try {
          const ParsedName parsed = parse_document_filename(file.filename().string());
          detail::append_record(corpus, seen_keys, file, rel, parsed.author, parsed.year, split);
        } catch (const InputError& e) {
          if (std::string_view(e.what()).find("duplicate") == 0) throw;
          bad_names.push_back(rel + ": " + e.what());
        }
      }
    }
  } else {
    const fs::path manifest = root / "manifest.csv";
    if (!fs::is_regular_file(manifest))
      throw InputError("manifest not found: " + manifest.string());
    const auto rows = read_csv_rows(manifest);
    if (rows.empty()) throw InputError("empty manifest: " + manifest.string());
    const auto& header = rows.front();
    if (header.size() < 4 || header[0] != "path" || header[1] != "author" ||
        header[2] != "year" || header[3] != "split")
      throw InputError("manifest header must be path,author,year,split: " + manifest.string());
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() < 4) {
        bad_names.push_back(manifest.string() + ": short row " + std::to_string(r + 1));
        continue;
      }
      int year = 0;
      try {
        year = std::stoi(row[2]);
      } catch (...) {
        bad_names.push_back(row[0] + ": bad year '" + row[2] + "'");
        continue;
      }
      if (year < kMinYear || year > kMaxYear) {
        bad_names.push_back(row[0] + ": year out of range [1700, 2100]");
        continue;
      }
      if (row[1].empty()) {
        bad_names.push_back(row[0] + ": empty author");
        continue;
      }
      const Split split = split_from_string(row[3]);
      detail::append_record(corpus, seen_keys, root / row[0], row[0], row[1], year, split);
    }
  }

  if (!bad_names.empty()) {
    std::string msg = "unparsable corpus entries:";
    for (const auto& n : bad_names) msg += "\n  " + n;
    throw InputError(msg);
  }
  return corpus;
}

// Authors that are missing a train or a test document. Empty means every
// author is covered on both sides of the split.
inline std::vector<std::string> authors_missing_split(const Corpus& corpus) {
  std::set<std::string> authors, with_train, with_test;
  for (const auto& d : corpus.docs) {
    authors.insert(d.author);
    (d.split == Split::train ? with_train : with_test).insert(d.author);
  }
  std::vector<std::string> missing;
  for (const auto& a : authors)
    if (!with_train.count(a) || !with_test.count(a)) missing.push_back(a);
  return missing;
}

// ---------------------------------------------------------------------------
// Tokenizer: lowercase, split on whitespace, and split each maximal run of
// punctuation into its own token. ASCII-oriented; non-ASCII codepoints are
// treated as word characters apart from common Unicode spaces and typographic
// punctuation.

namespace detail {

enum class CharClass { space, punct, word };

// Decodes one UTF-8 codepoint starting at i; advances i past it. Invalid
// bytes are consumed one at a time and classified as word characters.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const unsigned char c = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t cp = c;
  if (c >= 0xF0) {
    len = 4;
    cp = c & 0x07u;
  } else if (c >= 0xE0) {
    len = 3;
    cp = c & 0x0Fu;
  } else if (c >= 0xC0) {
    len = 2;
    cp = c & 0x1Fu;
  }
  if (i + len > s.size()) len = 1;
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xC0u) != 0x80u) {
      len = 1;
      cp = c;
      break;
    }
    cp = (cp << 6) | (cc & 0x3Fu);
  }
  i += len;
  return cp;
}

inline bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case 0x0B: case 0x0C:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

inline bool is_punct_cp(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') ||
           (cp >= '[' && cp <= '`') || (cp >= '{' && cp <= '~');
  }
  // Typographic dashes, quotes, ellipsis, guillemets.
  if (cp >= 0x2010 && cp <= 0x2027) return true;
  if (cp >= 0x2030 && cp <= 0x205E) return true;
  return cp == 0xAB || cp == 0xBB || cp == 0xA1 || cp == 0xBF;
}

inline void append_cp(std::string& out, std::string_view src, std::size_t begin, std::size_t end) {
  out.append(src.substr(begin, end - begin));
}

inline std::vector<std::string> tokenize_whitespace(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = decode_utf8(text, i);
    if (is_unicode_space(cp)) {
      if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      append_cp(cur, text, start, i);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  bool cur_is_punct = false;

  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = detail::decode_utf8(text, i);
    if (detail::is_unicode_space(cp)) {
      flush();
      continue;
    }
    const bool punct = detail::is_punct_cp(cp);
    if (!cur.empty() && punct != cur_is_punct) flush();
    cur_is_punct = punct;
    if (cp < 0x80) {
      char c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      cur += c;
    } else {
      detail::append_cp(cur, text, start, i);
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Sliding-window chunker.

struct ChunkerConfig {
  std::size_t window = 512;
  std::size_t overlap = 128;

  std::size_t stride() const { return window - overlap; }

  void validate() const {
    if (window == 0) throw std::invalid_argument("chunker window must be positive");
    if (overlap >= window)
      throw std::invalid_argument("chunker overlap must be smaller than the window");
  }
};

struct ChunkSpan {
  std::size_t start = 0;  // half-open [start, end)
  std::size_t end = 0;
};

struct ChunkSet {
  std::string doc_id;
  std::vector<ChunkSpan> spans;
  std::vector<std::string> tokens;

  std::span<const std::string> chunk_tokens(std::size_t i) const {
    const auto& s = spans[i];
    return std::span<const std::string>(tokens.data() + s.start, s.end - s.start);
  }
};

// Closed-form span count: ceil((n - W) / stride) + 1 for n > W, else 1.
inline std::size_t expected_chunk_count(std::size_t n_tokens, const ChunkerConfig& cfg) {
  cfg.validate();
  if (n_tokens == 0) return 0;
  if (n_tokens <= cfg.window) return 1;
  const std::size_t stride = cfg.stride();
  return (n_tokens - cfg.window + stride - 1) / stride + 1;
}

// Spans start at 0, stride, 2*stride, ...; each is [s, min(s + W, n)).
// Generation stops with the first span whose end reaches n. The final span may
// be shorter than the window; no padding is added.
inline ChunkSet chunk(std::string doc_id, std::vector<std::string> tokens,
                      const ChunkerConfig& cfg) {
  cfg.validate();
  ChunkSet out;
  out.doc_id = std::move(doc_id);
  out.tokens = std::move(tokens);
  const std::size_t n = out.tokens.size();
  if (n == 0) return out;
  const std::size_t stride = cfg.stride();
  for (std::size_t s = 0;; s += stride) {
    const std::size_t e = std::min(s + cfg.window, n);
    out.spans.push_back({s, e});
    if (e >= n) break;
  }
  return out;
}

inline std::string chunk_id(const std::string& doc_id, std::size_t index) {
  char buf[24];  // "#" + up to 20 digits of a 64-bit index
  std::snprintf(buf, sizeof(buf), "#%04zu", index);
  return doc_id + buf;
}

// Inverse of chunk_id: the document part before the final '#'.
inline std::string doc_of_chunk_id(const std::string& chunk) {
  const auto pos = chunk.rfind('#');
  if (pos == std::string::npos) return chunk;
  return chunk.substr(0, pos);
}

// Groups chunk rows by their doc id, in first-appearance order.
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> group_chunks_by_doc(
    const std::vector<std::string>& chunk_doc_ids) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> at;
  for (std::size_t r = 0; r < chunk_doc_ids.size(); ++r) {
    auto it = at.find(chunk_doc_ids[r]);
    if (it == at.end()) {
      it = at.emplace(chunk_doc_ids[r], groups.size()).first;
      groups.emplace_back(chunk_doc_ids[r], std::vector<std::size_t>{});
    }
    groups[it->second].second.push_back(r);
  }
  return groups;
}

struct DocIdParts {
  std::string split;  // empty when the id has no split prefix
  std::string author;
  int year = 0;
};

// Doc ids look like "[<split>/]<Author>_<Year>"; author may itself contain
// underscores, the year is the final field.
inline DocIdParts parse_doc_id(const std::string& doc_id) {
  DocIdParts parts;
  std::string_view rest = doc_id;
  if (const auto slash = rest.find('/'); slash != std::string_view::npos) {
    parts.split = std::string(rest.substr(0, slash));
    rest = rest.substr(slash + 1);
  }
  const auto us = rest.rfind('_');
  if (us == std::string_view::npos || us == 0 || us + 1 == rest.size())
    throw InputError("unparsable doc id: " + doc_id);
  for (std::size_t i = us + 1; i < rest.size(); ++i) {
    const char c = rest[i];
    if (c < '0' || c > '9') throw InputError("unparsable doc id: " + doc_id);
    parts.year = parts.year * 10 + (c - '0');
  }
  parts.author = std::string(rest.substr(0, us));
  return parts;
}

}  // namespace stylo
