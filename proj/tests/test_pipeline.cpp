#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "stylo/pipeline.hpp"
#include "support.hpp"

using namespace stylo;
namespace fs = std::filesystem;

namespace {

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

// Three authors with disjoint vocabularies; docs_per_author years each, the
// last one per author held out as the test split.
std::vector<testsupport::CorpusDoc> small_corpus(std::size_t docs_per_author,
                                                 std::size_t n_tokens) {
  const std::vector<std::string> authors = {"Alpha", "Beta", "Gamma"};
  std::vector<testsupport::CorpusDoc> docs;
  int year = 1900;
  for (std::size_t a = 0; a < authors.size(); ++a) {
    for (std::size_t d = 0; d < docs_per_author; ++d, ++year) {
      const std::string split = d + 1 == docs_per_author ? "test" : "train";
      docs.push_back({authors[a], year, split, testsupport::synthetic_text(a, year, n_tokens, 9)});
    }
  }
  return docs;
}

std::string small_config_text(const fs::path& corpus_root, const fs::path& out_dir) {
  return "corpus.root = " + corpus_root.string() + "\n" +
         "out.dir = " + out_dir.string() + "\n" +
         "embed.dim = 256\n"
         "chunk.window = 64\n"
         "chunk.overlap = 16\n"
         "reduce.methods = umap_like,pacmap_like\n"
         "reduce.epochs = 40\n"
         "reduce.n_neighbors = 3\n"
         "cluster.k = 2\n"
         "cluster.input = projection:umap_like\n"
         "changepoint.min_group = 2\n"
         "changepoint.permutations = 50\n"
         "attribution.epochs = 30\n"
         "dateline.hidden_dims = 8\n"
         "dateline.epochs = 25\n"
         "report.method = umap_like\n"
         "report.color_by = cluster\n"
         "seed = 42\n";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STYLO_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

}  // namespace

TEST_CASE("config text parses, defaults hold, and hashing is canonical") {
  const PipelineConfig def;
  const PipelineConfig empty = parse_config_text("");
  CHECK(empty.seed == 42);
  CHECK(empty.chunker.window == 512);
  CHECK(empty.chunker.overlap == 128);
  CHECK(empty.out_dir == def.out_dir);
  CHECK(config_hash(empty) == config_hash(def));

  const PipelineConfig cfg = parse_config_text(
      "# a comment\n"
      "seed = 7   # trailing comment\n"
      "\n"
      "reduce.methods = pacmap_like\n"
      "dateline.hidden_dims = 32, 16\n"
      "stages = ingest, chunk\n");
  CHECK(cfg.seed == 7);
  CHECK(cfg.reduce_methods == std::vector<ReduceMethod>{ReduceMethod::pacmap_like});
  CHECK(cfg.dateline_hidden_dims == std::vector<std::size_t>{32, 16});
  CHECK(cfg.stages == std::vector<std::string>{"ingest", "chunk"});

  // Canonical text round-trips to the same hash, and the annotated example
  // describes exactly the defaults.
  CHECK(config_hash(parse_config_text(canonical_config_text(cfg))) == config_hash(cfg));
  CHECK(config_hash(parse_config_text(example_config_text())) == config_hash(def));

  PipelineConfig reseeded = def;
  reseeded.seed = 43;
  CHECK(config_hash(reseeded) != config_hash(def));
  PipelineConfig moved = def;
  moved.out_dir = "elsewhere";
  CHECK(config_hash(moved) != config_hash(def));

  CHECK_THROWS_AS(parse_config_text("seed = x"), InputError);
  CHECK_THROWS_AS(parse_config_text("bogus = 1"), InputError);
  CHECK_THROWS_AS(parse_config_text("seed = 1\nseed = 2\nnot a pair\n"), InputError);
  CHECK_THROWS_WITH(parse_config_text("seed = 1\nseed = 2\nnot a pair\n"),
                    Catch::Matchers::ContainsSubstring("line 3"));
  CHECK_THROWS_AS(parse_config_text("stages = warp"), InputError);
  CHECK_THROWS_AS(parse_config_text("corpus.layout = zigzag"), InputError);
  CHECK_THROWS_AS(parse_config_text("report.color_by = mood"), InputError);
  CHECK_THROWS_AS(parse_config_text("reduce.methods = tsne"), InputError);
  CHECK_THROWS_AS(parse_config_text("embed.provider = usb"), InputError);

  // Stage scheduling ignores config order and keeps only enabled stages.
  PipelineConfig scheduled = def;
  scheduled.stages = {"report", "ingest", "embed"};
  CHECK(enabled_stages_in_order(scheduled) ==
        std::vector<std::string>{"ingest", "embed", "report"});
}

TEST_CASE("the pipeline emits a consistent, rerun-stable artifact tree") {
  testsupport::TempDir dir("pipe-full");
  const auto corpus_root = dir.path() / "corpus";
  const auto out_dir = dir.path() / "out";
  testsupport::write_corpus_tree(corpus_root, small_corpus(4, 150));

  const PipelineConfig cfg = parse_config_text(small_config_text(corpus_root, out_dir));
  run_pipeline(cfg);

  const std::vector<std::string> artifacts = {
      "manifest.csv",         "corpus_summary.json",      "chunks.csv",
      "chunks.emb",           "docs.emb",                 "embed_meta.json",
      "projection_umap_like.csv", "projection_pacmap_like.csv", "reduce_summary.json",
      "clusters.csv",         "cluster_summary.json",     "changepoint.json",
      "attribution_model.emb", "attribution_model.json",  "attribution_eval.json",
      "attribution_confusion.csv", "dateline_model.json", "dateline_eval.json",
      "dateline_residuals.csv", "scatter_umap_like_cluster.svg"};
  for (const auto& name : artifacts) {
    INFO(name);
    CHECK(fs::exists(out_dir / name));
  }

  // Stamping: every textual artifact opens with the config hash and seed.
  const std::string stamp = artifact_stamp_comment(config_hash(cfg), cfg.seed);
  for (const auto* name : {"manifest.csv", "chunks.csv", "clusters.csv",
                           "projection_umap_like.csv", "dateline_residuals.csv"}) {
    const std::string text = read_text_file(out_dir / name);
    INFO(name);
    CHECK(text.substr(0, stamp.size()) == stamp);
  }

  // 12 docs, 150 tokens at window 64 / overlap 16 = 3 chunks each.
  const auto manifest = read_manifest_artifact(out_dir);
  REQUIRE(manifest.size() == 12);
  CHECK(manifest.front().doc_id == "train/Alpha_1900");
  CHECK(manifest.front().rel_path == "train/Alpha_1900.txt");
  CHECK(manifest.front().token_count == 150);
  const auto chunk_rows = read_chunks_artifact(out_dir);
  REQUIRE(chunk_rows.size() == 36);
  CHECK(chunk_rows.front().chunk_id == "train/Alpha_1900#0000");
  CHECK(chunk_rows.front().start == 0);
  CHECK(chunk_rows.front().end == 64);
  CHECK(chunk_rows[2].end == 150);

  const auto summary = nlohmann::json::parse(read_text_file(out_dir / "corpus_summary.json"));
  CHECK(summary["n_docs"] == 12);
  CHECK(summary["n_train"] == 9);
  CHECK(summary["n_test"] == 3);
  CHECK(summary["n_authors"] == 3);
  CHECK(summary["year_min"] == 1900);
  CHECK(summary["year_max"] == 1911);
  CHECK(summary["config_hash"] == config_hash(cfg));

  const auto emeta = nlohmann::json::parse(read_text_file(out_dir / "embed_meta.json"));
  CHECK(emeta["level"] == "chunk");
  CHECK(emeta["n_chunks"] == 36);
  CHECK(emeta["n_docs"] == 12);
  CHECK(emeta["provider"] == "hashed-ngram");

  const auto table = read_projection_artifact(out_dir, "umap_like");
  REQUIRE(table.proj.rows() == 12);
  CHECK(table.proj.seed == 42);
  CHECK(table.authors[0] == "Alpha");
  CHECK(table.years[0] == 1900);

  const auto csummary = nlohmann::json::parse(read_text_file(out_dir / "cluster_summary.json"));
  CHECK(csummary["k"] == 2);
  CHECK(csummary["input"] == "projection:umap_like");
  CHECK(csummary["input_renormalized"] == true);  // layout coords are not unit vectors
  CHECK(csummary["silhouette_cosine"].is_number());

  const auto cp = nlohmann::json::parse(read_text_file(out_dir / "changepoint.json"));
  REQUIRE(cp["candidate_years"].size() == cp["scores"].size());
  CHECK(cp["candidate_years"].size() > 0);
  CHECK(cp["best_break"].size() == 2);
  const int break_lo = cp["best_break"][0].get<int>();
  CHECK(break_lo >= 1900);
  CHECK(break_lo < 1911);
  CHECK(cp["best_break"][1].get<int>() == break_lo + 1);
  CHECK(cp["permutations"] == 50);

  // Disjoint author vocabularies: held-out attribution is exact.
  const auto aeval = nlohmann::json::parse(read_text_file(out_dir / "attribution_eval.json"));
  CHECK(aeval["n_docs"] == 3);
  CHECK(aeval["per_document_accuracy"] == 1.0);
  CHECK(aeval["n_unknown_class_docs"] == 0);
  REQUIRE(aeval["documents"].size() == 3);
  for (const auto& d : aeval["documents"]) CHECK(d["actual"] == d["predicted"]);
  const std::string confusion = read_text_file(out_dir / "attribution_confusion.csv");
  CHECK(confusion.find("true_author,Alpha,Beta,Gamma") != std::string::npos);

  const auto deval = nlohmann::json::parse(read_text_file(out_dir / "dateline_eval.json"));
  CHECK(deval["n_docs"] == 3);
  CHECK(deval["doc_rmse"].is_number());
  CHECK(deval["p"] == 3.0);
  const auto residual_rows = read_csv_rows(out_dir / "dateline_residuals.csv");
  REQUIRE(residual_rows.size() == 4);  // header + 3 docs
  CHECK(residual_rows[0] ==
        std::vector<std::string>{"doc_id", "actual_year", "predicted_year", "residual"});

  const std::string svg = read_text_file(out_dir / "scatter_umap_like_cluster.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("stylo config=" + config_hash(cfg)) != std::string::npos);
  CHECK(count_occurrences(svg, "<circle") == 12);
  CHECK(svg.find("cluster 0") != std::string::npos);

  // Re-running the whole pipeline into the same directory reproduces every
  // artifact byte for byte.
  std::map<std::string, std::string> before;
  for (const auto& name : artifacts) before[name] = read_text_file(out_dir / name);
  run_pipeline(cfg);
  for (const auto& name : artifacts) {
    INFO(name);
    CHECK(read_text_file(out_dir / name) == before[name]);
  }
}

TEST_CASE("stages refuse to run without their inputs") {
  testsupport::TempDir dir("pipe-missing");
  PipelineConfig cfg;
  cfg.out_dir = dir.path() / "out";
  fs::create_directories(cfg.out_dir);

  CHECK_THROWS_WITH(run_chunk(cfg), Catch::Matchers::ContainsSubstring("ingest stage"));
  CHECK_THROWS_AS(run_embed(cfg), InputError);
  CHECK_THROWS_AS(run_reduce(cfg), InputError);
  CHECK_THROWS_AS(run_cluster(cfg), InputError);
  CHECK_THROWS_AS(run_attribute(cfg), InputError);
  CHECK_THROWS_AS(run_dateline(cfg), InputError);
  CHECK_THROWS_WITH(run_report(cfg), Catch::Matchers::ContainsSubstring("reduce stage"));
  CHECK_THROWS_AS(run_stage(cfg, "warp"), InputError);

  PipelineConfig bad_input = cfg;
  bad_input.cluster_input = "nonsense";
  CHECK_THROWS_WITH(run_cluster(bad_input),
                    Catch::Matchers::ContainsSubstring("'docs' or 'projection:<method>'"));

  // An empty corpus is rejected at ingest.
  PipelineConfig empty_corpus = cfg;
  empty_corpus.corpus_root = dir.path() / "corpus";
  fs::create_directories(empty_corpus.corpus_root / "train");
  fs::create_directories(empty_corpus.corpus_root / "test");
  CHECK_THROWS_WITH(run_ingest(empty_corpus),
                    Catch::Matchers::ContainsSubstring("no usable documents"));
}

TEST_CASE("report with cluster coloring requires the cluster stage") {
  testsupport::TempDir dir("pipe-nocluster");
  const auto corpus_root = dir.path() / "corpus";
  testsupport::write_corpus_tree(corpus_root, small_corpus(2, 150));

  PipelineConfig cfg = parse_config_text(small_config_text(corpus_root, dir.path() / "out"));
  cfg.reduce_epochs = 15;
  cfg.stages = {"ingest", "chunk", "embed", "reduce"};
  run_pipeline(cfg);
  CHECK_THROWS_WITH(run_report(cfg), Catch::Matchers::ContainsSubstring("clusters.csv"));

  // Year coloring needs no cluster labels.
  cfg.report_color_by = "year";
  run_report(cfg);
  CHECK(fs::exists(cfg.out_dir / "scatter_umap_like_year.svg"));
}

TEST_CASE("external embeddings drive chunk-level and document-level flows") {
  testsupport::TempDir dir("pipe-ext");
  const auto corpus_root = dir.path() / "corpus";
  testsupport::write_corpus_tree(corpus_root, small_corpus(2, 150));

  // Reference run with the built-in embedder.
  PipelineConfig base = parse_config_text(small_config_text(corpus_root, dir.path() / "ref"));
  base.stages = {"ingest", "chunk", "embed"};
  run_pipeline(base);

  // Document-keyed vectors: accepted, but chunk-level consumers must refuse.
  EmbeddingMatrix docs = load_embeddings_binary(base.out_dir / "docs.emb");
  const auto ext_docs = dir.path() / "ext_docs.emb";
  save_embeddings_binary(docs, ext_docs);
  PipelineConfig doc_cfg = base;
  doc_cfg.out_dir = dir.path() / "doc-level";
  doc_cfg.embed_provider = "external:" + ext_docs.string();
  run_ingest(doc_cfg);
  run_chunk(doc_cfg);
  run_embed(doc_cfg);
  CHECK(fs::exists(doc_cfg.out_dir / "docs.emb"));
  CHECK(!fs::exists(doc_cfg.out_dir / "chunks.emb"));
  const auto dmeta = nlohmann::json::parse(read_text_file(doc_cfg.out_dir / "embed_meta.json"));
  CHECK(dmeta["level"] == "document");
  CHECK(dmeta["renormalized"] == false);
  CHECK_THROWS_WITH(run_attribute(doc_cfg),
                    Catch::Matchers::ContainsSubstring("chunk-level embeddings required"));
  run_reduce(doc_cfg);  // document-level analyses still work
  CHECK(fs::exists(doc_cfg.out_dir / "projection_umap_like.csv"));

  // Chunk-keyed vectors with non-unit norms: renormalized on ingestion.
  EmbeddingMatrix chunks = load_embeddings_binary(base.out_dir / "chunks.emb");
  for (std::size_t r = 0; r < chunks.rows(); ++r)
    for (float& v : chunks.row(r)) v *= 2.5f;
  const auto ext_chunks = dir.path() / "ext_chunks.emb";
  save_embeddings_binary(chunks, ext_chunks);
  PipelineConfig chunk_cfg = base;
  chunk_cfg.out_dir = dir.path() / "chunk-level";
  chunk_cfg.embed_provider = "external:" + ext_chunks.string();
  run_ingest(chunk_cfg);
  run_chunk(chunk_cfg);
  run_embed(chunk_cfg);
  const auto cmeta = nlohmann::json::parse(read_text_file(chunk_cfg.out_dir / "embed_meta.json"));
  CHECK(cmeta["level"] == "chunk");
  CHECK(cmeta["renormalized"] == true);
  CHECK(fs::exists(chunk_cfg.out_dir / "chunks.emb"));
  const EmbeddingMatrix round = load_embeddings_binary(chunk_cfg.out_dir / "chunks.emb");
  CHECK(round.rows_unit_norm(1e-5));

  // Ids that match neither chunks nor documents are an error.
  EmbeddingMatrix stranger;
  stranger.dim = 4;
  stranger.add_row("Nobody_1900", std::vector<double>{1.0, 0.0, 0.0, 0.0});
  const auto ext_bad = dir.path() / "ext_bad.emb";
  save_embeddings_binary(stranger, ext_bad);
  PipelineConfig bad_cfg = base;
  bad_cfg.out_dir = dir.path() / "bad-level";
  bad_cfg.embed_provider = "external:" + ext_bad.string();
  run_ingest(bad_cfg);
  run_chunk(bad_cfg);
  CHECK_THROWS_WITH(run_embed(bad_cfg),
                    Catch::Matchers::ContainsSubstring("neither the chunk ids nor the doc ids"));

  // A provider string that slipped past config validation still fails cleanly.
  PipelineConfig weird = base;
  weird.embed_provider = "telepathy";
  CHECK_THROWS_AS(run_embed(weird), InputError);
}

TEST_CASE("the command line maps outcomes to exit codes") {
  testsupport::TempDir dir("pipe-cli");
  const auto corpus_root = dir.path() / "corpus";
  const auto out_dir = dir.path() / "out";
  testsupport::write_corpus_tree(corpus_root, small_corpus(2, 150));

  std::string text = small_config_text(corpus_root, out_dir);
  text += "reduce.methods = umap_like\n";  // later entries win
  text += "reduce.epochs = 20\n";
  text += "report.color_by = year\n";
  const auto cfg_file = dir.path() / "stylo.cfg";
  write_text_file(cfg_file, text);
  const PipelineConfig cfg = parse_config_text(text);

  CHECK(run_cli("pipeline --config " + cfg_file.string() + " 2> /dev/null") == 0);
  CHECK(fs::exists(out_dir / "manifest.csv"));
  CHECK(fs::exists(out_dir / "scatter_umap_like_year.svg"));

  // Single-stage subcommand, with a seed override that restamps artifacts.
  CHECK(run_cli("ingest --config " + cfg_file.string() + " --seed 7") == 0);
  {
    const std::string manifest = read_text_file(out_dir / "manifest.csv");
    CHECK(manifest.find(" seed=7") != std::string::npos);
    PipelineConfig reseeded = cfg;
    reseeded.seed = 7;
    CHECK(manifest.find("config=" + config_hash(reseeded)) != std::string::npos);
  }
  CHECK(run_cli("ingest --config " + cfg_file.string() + " 2> /dev/null") == 0);  // restore

  // Missing inputs surface as exit 2 with the stage named on stderr.
  const auto errfile = dir.path() / "stderr.txt";
  CHECK(run_cli("reduce --config " + cfg_file.string() + " --out " +
                (dir.path() / "fresh").string() + " 2> " + errfile.string()) == 2);
  CHECK(read_text_file(errfile).find("stylo: stage reduce:") != std::string::npos);

  // A training blow-up is a stage failure: exit 1.
  CHECK(run_cli("dateline --config " + cfg_file.string() +
                " --set dateline.lr=1000000000 2> " + errfile.string()) == 1);
  CHECK(read_text_file(errfile).find("stylo: stage dateline failed:") != std::string::npos);

  // Bad configuration and bad usage are exit 2.
  CHECK(run_cli("pipeline --config " + cfg_file.string() + " --set bogus=1 2> /dev/null") == 2);
  CHECK(run_cli("teleport 2> /dev/null") == 2);
  CHECK(run_cli("2> /dev/null") == 2);

  // init-config emits a parseable config equal to the built-in defaults.
  const auto init_file = dir.path() / "init.cfg";
  CHECK(run_cli("init-config > " + init_file.string()) == 0);
  CHECK(config_hash(parse_config_text(read_text_file(init_file))) ==
        config_hash(PipelineConfig{}));
}
