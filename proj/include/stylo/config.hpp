#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stylo/attribution.hpp"
#include "stylo/corpus.hpp"
#include "stylo/dateline.hpp"
#include "stylo/embed.hpp"
#include "stylo/errors.hpp"
#include "stylo/io.hpp"
#include "stylo/reduce.hpp"
#include "stylo/rng.hpp"
#include "stylo/temporal.hpp"

namespace stylo {

inline const std::vector<std::string>& all_stage_names() {
  static const std::vector<std::string> names = {"ingest",      "chunk",     "embed",
                                                 "reduce",      "cluster",   "changepoint",
                                                 "attribute",   "dateline",  "report"};
  return names;
}

// Everything the pipeline needs, with defaults suitable for a small corpus.
// Parsed from "key = value" lines; '#' starts a comment.
struct PipelineConfig {
  std::filesystem::path corpus_root = "corpus";
  SplitLayout corpus_layout = SplitLayout::subdirs;

  std::string embed_provider = "hashed-ngram";  // or "external:<path>"
  std::size_t embed_dim = 1024;
  std::size_t embed_ngram_min = 1;
  std::size_t embed_ngram_max = 2;

  ChunkerConfig chunker;  // window 512, overlap 128

  std::vector<ReduceMethod> reduce_methods = {ReduceMethod::umap_like, ReduceMethod::trimap_like,
                                              ReduceMethod::pacmap_like};
  int reduce_out_dim = 2;
  std::size_t reduce_n_neighbors = 15;
  std::size_t reduce_epochs = 450;
  double reduce_learning_rate = 1.0;
  double reduce_min_dist = 0.1;

  std::size_t cluster_k = 2;
  std::string cluster_input = "docs";  // "docs" or "projection:<method>"

  std::size_t changepoint_min_group = 10;
  std::size_t changepoint_permutations = 200;
  std::string changepoint_input = "docs";

  std::size_t attribution_epochs = 100;
  double attribution_lr = 0.5;

  std::vector<std::size_t> dateline_hidden_dims = {256, 64};
  double dateline_p = 3.0;
  std::size_t dateline_epochs = 200;
  double dateline_lr = 0.05;

  std::string report_method = "umap_like";
  std::string report_color_by = "year";  // year | author | cluster

  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 42;
  std::vector<std::string> stages = all_stage_names();
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InputError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw InputError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t comma = v.find(',', pos);
    if (comma == std::string::npos) comma = v.size();
    const std::string item = trim(std::string_view(v).substr(pos, comma - pos));
    if (!item.empty()) out.push_back(item);
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::parse_real;
  using detail::parse_u64;
  if (key == "corpus.root") {
    cfg.corpus_root = value;
  } else if (key == "corpus.layout") {
    if (value == "subdirs")
      cfg.corpus_layout = SplitLayout::subdirs;
    else if (value == "manifest")
      cfg.corpus_layout = SplitLayout::manifest;
    else
      throw InputError("config key 'corpus.layout': expected subdirs|manifest, got '" + value +
                       "'");
  } else if (key == "embed.provider") {
    if (value != "hashed-ngram" && value.rfind("external:", 0) != 0)
      throw InputError("config key 'embed.provider': expected hashed-ngram or external:<path>");
    cfg.embed_provider = value;
  } else if (key == "embed.dim") {
    cfg.embed_dim = parse_u64(key, value);
  } else if (key == "embed.ngram_min") {
    cfg.embed_ngram_min = parse_u64(key, value);
  } else if (key == "embed.ngram_max") {
    cfg.embed_ngram_max = parse_u64(key, value);
  } else if (key == "chunk.window") {
    cfg.chunker.window = parse_u64(key, value);
  } else if (key == "chunk.overlap") {
    cfg.chunker.overlap = parse_u64(key, value);
  } else if (key == "reduce.methods") {
    cfg.reduce_methods.clear();
    for (const auto& m : detail::split_list(value))
      cfg.reduce_methods.push_back(reduce_method_from_string(m));
    if (cfg.reduce_methods.empty())
      throw InputError("config key 'reduce.methods': needs at least one method");
  } else if (key == "reduce.out_dim") {
    cfg.reduce_out_dim = static_cast<int>(parse_u64(key, value));
  } else if (key == "reduce.n_neighbors") {
    cfg.reduce_n_neighbors = parse_u64(key, value);
  } else if (key == "reduce.epochs") {
    cfg.reduce_epochs = parse_u64(key, value);
  } else if (key == "reduce.learning_rate") {
    cfg.reduce_learning_rate = parse_real(key, value);
  } else if (key == "reduce.min_dist") {
    cfg.reduce_min_dist = parse_real(key, value);
  } else if (key == "cluster.k") {
    cfg.cluster_k = parse_u64(key, value);
  } else if (key == "cluster.input") {
    cfg.cluster_input = value;
  } else if (key == "changepoint.min_group") {
    cfg.changepoint_min_group = parse_u64(key, value);
  } else if (key == "changepoint.permutations") {
    cfg.changepoint_permutations = parse_u64(key, value);
  } else if (key == "changepoint.input") {
    cfg.changepoint_input = value;
  } else if (key == "attribution.epochs") {
    cfg.attribution_epochs = parse_u64(key, value);
  } else if (key == "attribution.lr") {
    cfg.attribution_lr = parse_real(key, value);
  } else if (key == "dateline.hidden_dims") {
    cfg.dateline_hidden_dims.clear();
    for (const auto& h : detail::split_list(value))
      cfg.dateline_hidden_dims.push_back(parse_u64(key, h));
    if (cfg.dateline_hidden_dims.empty())
      throw InputError("config key 'dateline.hidden_dims': needs at least one layer");
  } else if (key == "dateline.p") {
    cfg.dateline_p = parse_real(key, value);
  } else if (key == "dateline.epochs") {
    cfg.dateline_epochs = parse_u64(key, value);
  } else if (key == "dateline.lr") {
    cfg.dateline_lr = parse_real(key, value);
  } else if (key == "report.method") {
    cfg.report_method = value;
  } else if (key == "report.color_by") {
    if (value != "year" && value != "author" && value != "cluster")
      throw InputError("config key 'report.color_by': expected year|author|cluster");
    cfg.report_color_by = value;
  } else if (key == "out.dir") {
    cfg.out_dir = value;
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "stages") {
    cfg.stages.clear();
    for (const auto& s : detail::split_list(value)) {
      const auto& known = all_stage_names();
      if (std::find(known.begin(), known.end(), s) == known.end())
        throw InputError("config key 'stages': unknown stage '" + s + "'");
      cfg.stages.push_back(s);
    }
    if (cfg.stages.empty()) throw InputError("config key 'stages': needs at least one stage");
  } else {
    throw InputError("unknown config key: '" + key + "'");
  }
}

inline PipelineConfig parse_config_text(std::string_view text) {
  PipelineConfig cfg;
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(stripped).substr(0, eq));
    const std::string value = detail::trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty())
      throw InputError("config line " + std::to_string(line_no) + ": empty key");
    apply_config_entry(cfg, key, value);
  }
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path));
}

// The full effective configuration as sorted "key = value" lines. Hashing
// this text gives the config hash stamped into every artifact.
inline std::string canonical_config_text(const PipelineConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["corpus.root"] = cfg.corpus_root.string();
  kv["corpus.layout"] = cfg.corpus_layout == SplitLayout::subdirs ? "subdirs" : "manifest";
  kv["embed.provider"] = cfg.embed_provider;
  kv["embed.dim"] = std::to_string(cfg.embed_dim);
  kv["embed.ngram_min"] = std::to_string(cfg.embed_ngram_min);
  kv["embed.ngram_max"] = std::to_string(cfg.embed_ngram_max);
  kv["chunk.window"] = std::to_string(cfg.chunker.window);
  kv["chunk.overlap"] = std::to_string(cfg.chunker.overlap);
  {
    std::string m;
    for (const auto& method : cfg.reduce_methods) {
      if (!m.empty()) m += ",";
      m += to_string(method);
    }
    kv["reduce.methods"] = m;
  }
  kv["reduce.out_dim"] = std::to_string(cfg.reduce_out_dim);
  kv["reduce.n_neighbors"] = std::to_string(cfg.reduce_n_neighbors);
  kv["reduce.epochs"] = std::to_string(cfg.reduce_epochs);
  kv["reduce.learning_rate"] = format_double(cfg.reduce_learning_rate);
  kv["reduce.min_dist"] = format_double(cfg.reduce_min_dist);
  kv["cluster.k"] = std::to_string(cfg.cluster_k);
  kv["cluster.input"] = cfg.cluster_input;
  kv["changepoint.min_group"] = std::to_string(cfg.changepoint_min_group);
  kv["changepoint.permutations"] = std::to_string(cfg.changepoint_permutations);
  kv["changepoint.input"] = cfg.changepoint_input;
  kv["attribution.epochs"] = std::to_string(cfg.attribution_epochs);
  kv["attribution.lr"] = format_double(cfg.attribution_lr);
  {
    std::string h;
    for (std::size_t v : cfg.dateline_hidden_dims) {
      if (!h.empty()) h += ",";
      h += std::to_string(v);
    }
    kv["dateline.hidden_dims"] = h;
  }
  kv["dateline.p"] = format_double(cfg.dateline_p);
  kv["dateline.epochs"] = std::to_string(cfg.dateline_epochs);
  kv["dateline.lr"] = format_double(cfg.dateline_lr);
  kv["report.method"] = cfg.report_method;
  kv["report.color_by"] = cfg.report_color_by;
  kv["out.dir"] = cfg.out_dir.string();
  kv["seed"] = std::to_string(cfg.seed);
  {
    std::string s;
    for (const auto& st : cfg.stages) {
      if (!s.empty()) s += ",";
      s += st;
    }
    kv["stages"] = s;
  }
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

inline std::string config_hash(const PipelineConfig& cfg) {
  return hex64(fnv1a64(canonical_config_text(cfg)));
}

// A fully commented example, suitable for `stylo pipeline --config`.
inline std::string example_config_text() {
  return
      "# Corpus location and split layout.\n"
      "#   subdirs:  <root>/train/*.txt and <root>/test/*.txt\n"
      "#   manifest: <root>/manifest.csv with columns path,author,year,split\n"
      "corpus.root = corpus\n"
      "corpus.layout = subdirs\n"
      "\n"
      "# Embedding provider: the built-in hashed n-gram embedder, or\n"
      "# external:<path> pointing at a .emb / .jsonl file of chunk vectors.\n"
      "embed.provider = hashed-ngram\n"
      "embed.dim = 1024\n"
      "embed.ngram_min = 1\n"
      "embed.ngram_max = 2\n"
      "\n"
      "# Sliding token windows per document.\n"
      "chunk.window = 512\n"
      "chunk.overlap = 128\n"
      "\n"
      "# Dimension reduction over document vectors.\n"
      "reduce.methods = umap_like,trimap_like,pacmap_like\n"
      "reduce.out_dim = 2\n"
      "reduce.n_neighbors = 15\n"
      "reduce.epochs = 450\n"
      "reduce.learning_rate = 1\n"
      "reduce.min_dist = 0.1\n"
      "\n"
      "# Clustering and temporal discontinuity detection. input is 'docs' or\n"
      "# 'projection:<method>'.\n"
      "cluster.k = 2\n"
      "cluster.input = docs\n"
      "changepoint.min_group = 10\n"
      "changepoint.permutations = 200\n"
      "changepoint.input = docs\n"
      "\n"
      "# Authorship head over chunk embeddings.\n"
      "attribution.epochs = 100\n"
      "attribution.lr = 0.5\n"
      "\n"
      "# Year regression over chunk embeddings.\n"
      "dateline.hidden_dims = 256,64\n"
      "dateline.p = 3\n"
      "dateline.epochs = 200\n"
      "dateline.lr = 0.05\n"
      "\n"
      "# Scatter plot emitted by the report stage.\n"
      "report.method = umap_like\n"
      "report.color_by = year\n"
      "\n"
      "out.dir = out\n"
      "seed = 42\n"
      "stages = ingest,chunk,embed,reduce,cluster,changepoint,attribute,dateline,report\n";
}

}  // namespace stylo
