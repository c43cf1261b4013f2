#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylo/attribution.hpp"
#include "stylo/config.hpp"
#include "stylo/corpus.hpp"
#include "stylo/dateline.hpp"
#include "stylo/embed.hpp"
#include "stylo/errors.hpp"
#include "stylo/io.hpp"
#include "stylo/model_io.hpp"
#include "stylo/reduce.hpp"
#include "stylo/svg.hpp"
#include "stylo/temporal.hpp"

namespace stylo {

// Every stage reads its inputs from files under out_dir and writes its own
// artifacts there, so re-running one stage from persisted intermediates is
// the same as running it inside the full pipeline.

namespace detail {

inline void ensure_out_dir(const PipelineConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

inline nlohmann::json stamped_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  return j;
}

// A missing artifact gets the same hint as a malformed one: the fix for both
// is rerunning the stage that writes it.
inline std::vector<std::vector<std::string>> read_artifact_rows(const std::filesystem::path& path,
                                                                const char* producing_stage) {
  if (!std::filesystem::exists(path))
    throw InputError(path.string() + ": missing or malformed (run the " +
                     std::string(producing_stage) + " stage first)");
  return read_csv_rows(path);
}

}  // namespace detail

struct ManifestRow {
  std::string doc_id;
  std::string rel_path;
  std::string author;
  int year = 0;
  std::string split;
  std::size_t token_count = 0;
};

inline std::vector<ManifestRow> read_manifest_artifact(const std::filesystem::path& out_dir) {
  const auto path = out_dir / "manifest.csv";
  const auto rows = detail::read_artifact_rows(path, "ingest");
  if (rows.empty() || rows.front().size() < 6 || rows.front()[0] != "doc_id")
    throw InputError(path.string() + ": missing or malformed (run the ingest stage first)");
  std::vector<ManifestRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 6) throw InputError(path.string() + ": short row " + std::to_string(r + 1));
    out.push_back({row[0], row[1], row[2], std::stoi(row[3]), row[4],
                   static_cast<std::size_t>(std::stoull(row[5]))});
  }
  return out;
}

struct ChunkRow {
  std::string chunk_id;
  std::string doc_id;
  std::string author;
  int year = 0;
  std::string split;
  std::size_t start = 0;
  std::size_t end = 0;
};

inline std::vector<ChunkRow> read_chunks_artifact(const std::filesystem::path& out_dir) {
  const auto path = out_dir / "chunks.csv";
  const auto rows = detail::read_artifact_rows(path, "chunk");
  if (rows.empty() || rows.front().size() < 7 || rows.front()[0] != "chunk_id")
    throw InputError(path.string() + ": missing or malformed (run the chunk stage first)");
  std::vector<ChunkRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < 7) throw InputError(path.string() + ": short row " + std::to_string(r + 1));
    out.push_back({row[0], row[1], row[2], std::stoi(row[3]), row[4],
                   static_cast<std::size_t>(std::stoull(row[5])),
                   static_cast<std::size_t>(std::stoull(row[6]))});
  }
  return out;
}

struct ProjectionTable {
  Projection proj;
  std::vector<std::string> authors;
  std::vector<int> years;
};

inline ProjectionTable read_projection_artifact(const std::filesystem::path& out_dir,
                                                const std::string& method) {
  const auto path = out_dir / ("projection_" + method + ".csv");
  const auto rows = detail::read_artifact_rows(path, "reduce");
  if (rows.empty() || rows.front().size() < 6 || rows.front()[0] != "id")
    throw InputError(path.string() + ": missing or malformed (run the reduce stage first)");
  const bool has_z = rows.front()[4] == "z";
  ProjectionTable t;
  t.proj.out_dim = has_z ? 3 : 2;
  t.proj.method = method;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t want = has_z ? 8 : 7;
    if (row.size() < want) throw InputError(path.string() + ": short row " + std::to_string(r + 1));
    t.proj.ids.push_back(row[0]);
    t.authors.push_back(row[1]);
    t.years.push_back(std::stoi(row[2]));
    t.proj.coords.push_back(std::stod(row[3]));
    t.proj.coords.push_back(std::stod(row[4]));
    if (has_z) t.proj.coords.push_back(std::stod(row[5]));
    t.proj.seed = std::stoull(row[want - 1]);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Stages.

inline void run_ingest(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  const Corpus corpus = load_corpus(cfg.corpus_root, cfg.corpus_layout);
  if (corpus.docs.empty()) throw InputError("corpus has no usable documents");
  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);

  std::string csv = stamp + "\n";
  csv += "doc_id,path,author,year,split,token_count\n";
  std::set<std::string> authors;
  int year_lo = corpus.docs.front().year, year_hi = year_lo;
  std::size_t n_train = 0;
  for (const auto& d : corpus.docs) {
    const std::size_t n_tokens = tokenize(d.text).size();
    csv += csv_escape(d.doc_id) + "," + csv_escape(d.rel_path) + "," + csv_escape(d.author) +
           "," + std::to_string(d.year) + "," + to_string(d.split) + "," +
           std::to_string(n_tokens) + "\n";
    authors.insert(d.author);
    year_lo = std::min(year_lo, d.year);
    year_hi = std::max(year_hi, d.year);
    if (d.split == Split::train) ++n_train;
  }
  write_text_file(cfg.out_dir / "manifest.csv", csv);

  auto j = detail::stamped_json(cfg);
  j["n_docs"] = corpus.docs.size();
  j["n_train"] = n_train;
  j["n_test"] = corpus.docs.size() - n_train;
  j["n_authors"] = authors.size();
  j["authors"] = std::vector<std::string>(authors.begin(), authors.end());
  j["year_min"] = year_lo;
  j["year_max"] = year_hi;
  j["authors_missing_split"] = authors_missing_split(corpus);
  {
    nlohmann::json warn = nlohmann::json::array();
    for (const auto& w : corpus.warnings) warn.push_back({{"path", w.path}, {"reason", w.reason}});
    j["warnings"] = warn;
  }
  write_text_file(cfg.out_dir / "corpus_summary.json", j.dump(2) + "\n");
}

inline void run_chunk(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  cfg.chunker.validate();
  const auto manifest = read_manifest_artifact(cfg.out_dir);
  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);

  std::string csv = stamp + "\n";
  csv += "chunk_id,doc_id,author,year,split,start,end\n";
  for (const auto& d : manifest) {
    const std::string text = read_text_file(cfg.corpus_root / d.rel_path);
    const ChunkSet cs = chunk(d.doc_id, tokenize(text), cfg.chunker);
    for (std::size_t i = 0; i < cs.spans.size(); ++i) {
      csv += csv_escape(chunk_id(d.doc_id, i)) + "," + csv_escape(d.doc_id) + "," +
             csv_escape(d.author) + "," + std::to_string(d.year) + "," + d.split + "," +
             std::to_string(cs.spans[i].start) + "," + std::to_string(cs.spans[i].end) + "\n";
    }
  }
  write_text_file(cfg.out_dir / "chunks.csv", csv);
}

inline void run_embed(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  const auto manifest = read_manifest_artifact(cfg.out_dir);
  const auto chunk_rows = read_chunks_artifact(cfg.out_dir);
  auto meta = detail::stamped_json(cfg);
  meta["provider"] = cfg.embed_provider;

  EmbeddingMatrix chunks_emb;
  bool have_chunk_level = true;
  EmbeddingMatrix docs_emb;

  if (cfg.embed_provider == "hashed-ngram") {
    HashedNgramConfig hc;
    hc.dim = cfg.embed_dim;
    hc.ngram_min = cfg.embed_ngram_min;
    hc.ngram_max = cfg.embed_ngram_max;
    hc.seed = derive_seed(cfg.seed, "embed.hashed");
    hc.validate();
    chunks_emb.dim = hc.dim;
    chunks_emb.provider = "hashed-ngram";
    chunks_emb.normalized = true;

    std::map<std::string, const ManifestRow*> doc_at;
    for (const auto& d : manifest) doc_at[d.doc_id] = &d;
    std::string cur_doc;
    std::vector<std::string> tokens;
    for (const auto& c : chunk_rows) {
      if (c.doc_id != cur_doc) {
        const auto it = doc_at.find(c.doc_id);
        if (it == doc_at.end())
          throw InputError("chunks.csv references unknown doc '" + c.doc_id + "'");
        tokens = tokenize(read_text_file(cfg.corpus_root / it->second->rel_path));
        cur_doc = c.doc_id;
      }
      if (c.end > tokens.size() || c.start >= c.end)
        throw InputError("chunk span out of range for '" + c.chunk_id +
                         "' (corpus changed since the chunk stage?)");
      const auto vec = hashed_ngram_vector(
          std::span<const std::string>(tokens.data() + c.start, c.end - c.start), hc);
      chunks_emb.add_row(c.chunk_id, vec);
    }
    meta["dim"] = hc.dim;
    meta["ngram_min"] = hc.ngram_min;
    meta["ngram_max"] = hc.ngram_max;
  } else {
    if (cfg.embed_provider.rfind("external:", 0) != 0)
      throw InputError("embed.provider must be hashed-ngram or external:<path>, got '" +
                       cfg.embed_provider + "'");
    const std::filesystem::path src = cfg.embed_provider.substr(std::string("external:").size());
    EmbeddingMatrix ext = load_external_embeddings(src);
    meta["dim"] = ext.dim;
    meta["source"] = src.string();

    std::set<std::string> chunk_ids, doc_ids;
    for (const auto& c : chunk_rows) chunk_ids.insert(c.chunk_id);
    for (const auto& d : manifest) doc_ids.insert(d.doc_id);
    const std::set<std::string> ext_ids(ext.ids.begin(), ext.ids.end());

    bool renormalized = !ext.rows_unit_norm(1e-6);
    for (std::size_t r = 0; r < ext.rows(); ++r)
      if (!normalize_row(ext.row(r)))
        throw InputError("external embedding row is all zero: '" + ext.ids[r] + "'");
    ext.normalized = true;
    meta["renormalized"] = renormalized;

    const auto index = ext.id_index();
    if (ext_ids == chunk_ids) {
      chunks_emb.dim = ext.dim;
      chunks_emb.provider = "external";
      chunks_emb.normalized = true;
      for (const auto& c : chunk_rows) chunks_emb.add_row(c.chunk_id, ext.row(index.at(c.chunk_id)));
    } else if (ext_ids == doc_ids) {
      have_chunk_level = false;
      docs_emb.dim = ext.dim;
      docs_emb.provider = "external";
      docs_emb.normalized = true;
      for (const auto& d : manifest) docs_emb.add_row(d.doc_id, ext.row(index.at(d.doc_id)));
    } else {
      throw InputError("external embedding ids match neither the chunk ids nor the doc ids of "
                       "this corpus: " + src.string());
    }
  }

  if (have_chunk_level) {
    save_embeddings_binary(chunks_emb, cfg.out_dir / "chunks.emb");
    docs_emb = pool_documents(chunks_emb);
  }
  save_embeddings_binary(docs_emb, cfg.out_dir / "docs.emb");
  meta["level"] = have_chunk_level ? "chunk" : "document";
  meta["n_chunks"] = have_chunk_level ? chunks_emb.rows() : 0;
  meta["n_docs"] = docs_emb.rows();
  meta["zero_rows"] = have_chunk_level ? chunks_emb.zero_rows : docs_emb.zero_rows;
  write_text_file(cfg.out_dir / "embed_meta.json", meta.dump(2) + "\n");
}

namespace detail {

inline EmbeddingMatrix load_analysis_input(const PipelineConfig& cfg, const std::string& input,
                                           std::string* tag) {
  if (input == "docs") {
    if (tag) *tag = "docs";
    return load_embeddings_binary(cfg.out_dir / "docs.emb");
  }
  if (input.rfind("projection:", 0) == 0) {
    const std::string method = input.substr(std::string("projection:").size());
    const ProjectionTable t = read_projection_artifact(cfg.out_dir, method);
    if (tag) *tag = input;
    EmbeddingMatrix m;
    m.dim = t.proj.out_dim;
    m.provider = "projection:" + method;
    for (std::size_t i = 0; i < t.proj.rows(); ++i) {
      const auto row = t.proj.row(i);
      std::vector<float> f(row.begin(), row.end());
      m.add_row(t.proj.ids[i], std::span<const float>(f));
    }
    return m;
  }
  throw InputError("analysis input must be 'docs' or 'projection:<method>', got '" + input + "'");
}

}  // namespace detail

inline void run_reduce(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  const EmbeddingMatrix docs = load_embeddings_binary(cfg.out_dir / "docs.emb");
  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);

  auto summary = detail::stamped_json(cfg);
  summary["n_docs"] = docs.rows();
  nlohmann::json methods = nlohmann::json::object();
  for (const ReduceMethod method : cfg.reduce_methods) {
    ReducerConfig rc;
    rc.method = method;
    rc.out_dim = cfg.reduce_out_dim;
    rc.n_neighbors = cfg.reduce_n_neighbors;
    rc.epochs = cfg.reduce_epochs;
    rc.learning_rate = cfg.reduce_learning_rate;
    rc.min_dist = cfg.reduce_min_dist;
    rc.seed = cfg.seed;
    const Projection proj = fit_reducer(docs, rc);

    std::string csv = stamp + "\n";
    csv += proj.out_dim == 3 ? "id,author,year,x,y,z,method,seed\n"
                             : "id,author,year,x,y,method,seed\n";
    for (std::size_t i = 0; i < proj.rows(); ++i) {
      const DocIdParts parts = parse_doc_id(proj.ids[i]);
      const auto row = proj.row(i);
      csv += csv_escape(proj.ids[i]) + "," + csv_escape(parts.author) + "," +
             std::to_string(parts.year) + "," + format_double(row[0]) + "," +
             format_double(row[1]);
      if (proj.out_dim == 3) csv += "," + format_double(row[2]);
      csv += "," + proj.method + "," + std::to_string(proj.seed) + "\n";
    }
    write_text_file(cfg.out_dir / ("projection_" + proj.method + ".csv"), csv);

    nlohmann::json m;
    m["epochs"] = rc.epochs;
    m["n_neighbors"] = rc.n_neighbors;
    m["out_dim"] = rc.out_dim;
    m["learning_rate"] = rc.learning_rate;
    if (method == ReduceMethod::umap_like) m["min_dist"] = rc.min_dist;
    m["input_renormalized"] = proj.input_renormalized;
    m["first_epoch_loss"] = proj.loss_history.front().second;
    m["final_epoch_loss"] = proj.loss_history.back().second;
    methods[proj.method] = m;
  }
  summary["methods"] = methods;
  write_text_file(cfg.out_dir / "reduce_summary.json", summary.dump(2) + "\n");
}

inline void run_cluster(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  std::string tag;
  EmbeddingMatrix X = detail::load_analysis_input(cfg, cfg.cluster_input, &tag);
  bool renormalized = false;
  if (!X.rows_unit_norm(1e-6)) {
    renormalized = true;
    for (std::size_t r = 0; r < X.rows(); ++r)
      if (!normalize_row(X.row(r)))
        throw InputError("cluster input has a zero row: '" + X.ids[r] + "'");
  }
  if (cfg.cluster_k > X.rows())
    throw InputError("cluster.k exceeds the number of documents");
  const ClusterAssignment ca = spherical_kmeans(X, cfg.cluster_k, cfg.seed);

  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);
  std::string csv = stamp + "\n";
  csv += "doc_id,author,year,label\n";
  for (std::size_t i = 0; i < ca.ids.size(); ++i) {
    const DocIdParts parts = parse_doc_id(ca.ids[i]);
    csv += csv_escape(ca.ids[i]) + "," + csv_escape(parts.author) + "," +
           std::to_string(parts.year) + "," + std::to_string(ca.labels[i]) + "\n";
  }
  write_text_file(cfg.out_dir / "clusters.csv", csv);

  auto j = detail::stamped_json(cfg);
  j["input"] = tag;
  j["input_renormalized"] = renormalized;
  j["k"] = ca.k;
  j["inertia"] = ca.inertia;
  j["iterations"] = ca.iterations;
  j["converged"] = ca.converged;
  std::set<int> distinct(ca.labels.begin(), ca.labels.end());
  if (distinct.size() >= 2)
    j["silhouette_cosine"] = silhouette(X, ca.labels, SilhouetteMetric::cosine);
  else
    j["silhouette_cosine"] = nullptr;
  write_text_file(cfg.out_dir / "cluster_summary.json", j.dump(2) + "\n");
}

inline void run_changepoint(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  std::string tag;
  const EmbeddingMatrix X = detail::load_analysis_input(cfg, cfg.changepoint_input, &tag);
  const std::vector<int> years = years_from_ids(X.ids);
  ChangepointConfig cc;
  cc.min_group = cfg.changepoint_min_group;
  cc.permutations = cfg.changepoint_permutations;
  cc.seed = cfg.seed;
  const ChangepointReport rep = detect_changepoint(X, years, cc);

  auto j = detail::stamped_json(cfg);
  j["input"] = tag;
  j["n_docs"] = X.rows();
  j["candidate_years"] = rep.candidate_years;
  j["scores"] = rep.scores;
  j["best_break"] = {rep.best_break.first, rep.best_break.second};
  j["best_score"] = rep.best_score;
  j["significant"] = rep.significant;
  j["threshold"] = rep.threshold;
  j["permutations"] = rep.permutations;
  j["min_group"] = cc.min_group;
  write_text_file(cfg.out_dir / "changepoint.json", j.dump(2) + "\n");
}

namespace detail {

struct LabeledChunks {
  EmbeddingMatrix train, test;
  std::vector<std::string> train_authors, test_authors;
  std::vector<std::string> train_doc_ids, test_doc_ids;
  std::vector<int> train_years, test_years;
};

inline LabeledChunks load_labeled_chunks(const PipelineConfig& cfg) {
  const auto chunk_rows = read_chunks_artifact(cfg.out_dir);
  const auto path = cfg.out_dir / "chunks.emb";
  if (!std::filesystem::exists(path))
    throw InputError(path.string() +
                     ": chunk-level embeddings required (the embedding provider supplied "
                     "document-level vectors only)");
  const EmbeddingMatrix all = load_embeddings_binary(path);
  const auto index = all.id_index();
  LabeledChunks out;
  out.train.dim = out.test.dim = all.dim;
  out.train.normalized = out.test.normalized = all.normalized;
  for (const auto& c : chunk_rows) {
    const auto it = index.find(c.chunk_id);
    if (it == index.end())
      throw InputError("chunks.emb is missing row '" + c.chunk_id +
                       "' (re-run the embed stage)");
    const bool is_train = c.split == "train";
    auto& m = is_train ? out.train : out.test;
    m.add_row(c.chunk_id, all.row(it->second));
    (is_train ? out.train_authors : out.test_authors).push_back(c.author);
    (is_train ? out.train_doc_ids : out.test_doc_ids).push_back(c.doc_id);
    (is_train ? out.train_years : out.test_years).push_back(c.year);
  }
  if (out.train.rows() == 0) throw InputError("no training chunks (is the corpus split?)");
  return out;
}

}  // namespace detail

inline void run_attribute(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  const auto data = detail::load_labeled_chunks(cfg);
  AttributionTrainConfig tc;
  tc.epochs = cfg.attribution_epochs;
  tc.lr = cfg.attribution_lr;
  tc.seed = cfg.seed;
  const AttributionModel model = train_attribution(data.train, data.train_authors, tc);
  save_attribution_model(model, cfg.out_dir / "attribution_model.emb",
                         cfg.out_dir / "attribution_model.json", config_hash(cfg));

  auto j = detail::stamped_json(cfg);
  j["n_train_chunks"] = data.train.rows();
  j["n_classes"] = model.n_classes();
  j["initial_train_loss"] = model.loss_history.front();
  j["final_train_loss"] = model.loss_history.back();
  if (data.test.rows() == 0) {
    j["note"] = "no test documents; evaluation skipped";
    write_text_file(cfg.out_dir / "attribution_eval.json", j.dump(2) + "\n");
    return;
  }

  const EvalReport rep =
      evaluate_attribution(model, data.test, data.test_doc_ids, data.test_authors);
  j["per_chunk_accuracy"] = rep.per_chunk_accuracy;
  j["per_document_accuracy"] = rep.per_document_accuracy;
  j["n_docs"] = rep.n_docs;
  j["n_chunks"] = rep.n_chunks;
  j["n_unknown_class_docs"] = rep.n_unknown_class_docs;
  j["unknown_authors"] = rep.unknown_authors;
  {
    nlohmann::json preds = nlohmann::json::array();
    for (std::size_t d = 0; d < rep.doc_predictions.size(); ++d) {
      preds.push_back({{"doc_id", rep.doc_predictions[d].doc_id},
                       {"actual", rep.doc_true_authors[d]},
                       {"predicted", model.class_names[static_cast<std::size_t>(
                            rep.doc_predictions[d].predicted_class)]}});
    }
    j["documents"] = preds;
  }
  write_text_file(cfg.out_dir / "attribution_eval.json", j.dump(2) + "\n");

  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);
  std::string csv = stamp + "\n";
  csv += "true_author";
  for (const auto& c : model.class_names) csv += "," + csv_escape(c);
  csv += "\n";
  const std::size_t C = model.n_classes();
  for (std::size_t t = 0; t < C; ++t) {
    csv += csv_escape(model.class_names[t]);
    for (std::size_t p = 0; p < C; ++p) csv += "," + std::to_string(rep.confusion[t * C + p]);
    csv += "\n";
  }
  write_text_file(cfg.out_dir / "attribution_confusion.csv", csv);
}

inline void run_dateline(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  const auto data = detail::load_labeled_chunks(cfg);
  DatelineConfig dc;
  dc.hidden_dims = cfg.dateline_hidden_dims;
  dc.p = cfg.dateline_p;
  dc.epochs = cfg.dateline_epochs;
  dc.lr = cfg.dateline_lr;
  dc.seed = cfg.seed;
  const DatelineModel model = train_dateline(data.train, data.train_years, dc);
  save_dateline_model(model, cfg.out_dir / "dateline_model.json", config_hash(cfg));

  auto j = detail::stamped_json(cfg);
  j["n_train_chunks"] = data.train.rows();
  j["year_min"] = model.year_min;
  j["year_max"] = model.year_max;
  j["p"] = dc.p;
  j["initial_train_loss"] = model.loss_history.front();
  j["final_train_loss"] = model.loss_history.back();
  if (data.test.rows() == 0) {
    j["note"] = "no test documents; evaluation skipped";
    write_text_file(cfg.out_dir / "dateline_eval.json", j.dump(2) + "\n");
    return;
  }

  const DatelineEval ev = evaluate_dateline(model, data.test, data.test_doc_ids, data.test_years);
  j["chunk_rmse"] = ev.chunk_rmse;
  j["doc_rmse"] = ev.doc_rmse;
  j["n_docs"] = ev.n_docs;
  j["n_chunks"] = ev.n_chunks;
  j["n_out_of_range_chunks"] = ev.n_out_of_range_chunks;
  write_text_file(cfg.out_dir / "dateline_eval.json", j.dump(2) + "\n");

  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);
  std::string csv = stamp + "\n";
  csv += "doc_id,actual_year,predicted_year,residual\n";
  for (std::size_t d = 0; d < ev.doc_ids.size(); ++d) {
    csv += csv_escape(ev.doc_ids[d]) + "," + std::to_string(ev.doc_actual[d]) + "," +
           format_double(ev.doc_predicted[d]) + "," + format_double(ev.doc_residuals[d]) + "\n";
  }
  write_text_file(cfg.out_dir / "dateline_residuals.csv", csv);
}

inline void run_report(const PipelineConfig& cfg) {
  detail::ensure_out_dir(cfg);
  const ProjectionTable t = read_projection_artifact(cfg.out_dir, cfg.report_method);
  ColorBy color_by = ColorBy::year;
  if (cfg.report_color_by == "author") color_by = ColorBy::author;
  if (cfg.report_color_by == "cluster") color_by = ColorBy::cluster;

  std::vector<int> cluster_labels;
  if (color_by == ColorBy::cluster) {
    const auto rows = detail::read_artifact_rows(cfg.out_dir / "clusters.csv", "cluster");
    if (rows.empty() || rows.front().empty() || rows.front()[0] != "doc_id")
      throw InputError("clusters.csv missing or malformed (run the cluster stage first)");
    std::map<std::string, int> label_of;
    for (std::size_t r = 1; r < rows.size(); ++r)
      label_of[rows[r][0]] = std::stoi(rows[r][3]);
    for (const auto& id : t.proj.ids) {
      const auto it = label_of.find(id);
      if (it == label_of.end())
        throw InputError("clusters.csv has no label for '" + id + "'");
      cluster_labels.push_back(it->second);
    }
  }
  const std::string stamp = "stylo config=" + config_hash(cfg) + " seed=" +
                            std::to_string(cfg.seed);
  const std::string svg =
      render_scatter(t.proj, t.authors, t.years,
                     color_by == ColorBy::cluster ? &cluster_labels : nullptr, color_by, stamp);
  write_text_file(
      cfg.out_dir / ("scatter_" + cfg.report_method + "_" + cfg.report_color_by + ".svg"), svg);
}

inline void run_stage(const PipelineConfig& cfg, const std::string& stage) {
  if (stage == "ingest") return run_ingest(cfg);
  if (stage == "chunk") return run_chunk(cfg);
  if (stage == "embed") return run_embed(cfg);
  if (stage == "reduce") return run_reduce(cfg);
  if (stage == "cluster") return run_cluster(cfg);
  if (stage == "changepoint") return run_changepoint(cfg);
  if (stage == "attribute") return run_attribute(cfg);
  if (stage == "dateline") return run_dateline(cfg);
  if (stage == "report") return run_report(cfg);
  throw InputError("unknown stage: '" + stage + "'");
}

// Enabled stages in canonical order, regardless of their order in the config.
inline std::vector<std::string> enabled_stages_in_order(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& s : all_stage_names())
    if (std::find(cfg.stages.begin(), cfg.stages.end(), s) != cfg.stages.end()) out.push_back(s);
  return out;
}

inline void run_pipeline(const PipelineConfig& cfg) {
  for (const auto& stage : enabled_stages_in_order(cfg)) run_stage(cfg, stage);
}

}  // namespace stylo
