#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "stylo/corpus.hpp"
#include "support.hpp"

using namespace stylo;

TEST_CASE("document filenames parse into author and year") {
  auto p = parse_document_filename("Mark_Twain_1885.txt");
  CHECK(p.author == "Mark_Twain");
  CHECK(p.year == 1885);

  p = parse_document_filename("Austen_1813.txt");
  CHECK(p.author == "Austen");
  CHECK(p.year == 1813);

  CHECK_THROWS_AS(parse_document_filename("NoYear.txt"), InputError);
  CHECK_THROWS_AS(parse_document_filename("Author_18x5.txt"), InputError);
  CHECK_THROWS_AS(parse_document_filename("_1885.txt"), InputError);
  CHECK_THROWS_AS(parse_document_filename("Author_.txt"), InputError);
  CHECK_THROWS_AS(parse_document_filename("Author_1492.txt"), InputError);  // before 1700
  CHECK_THROWS_AS(parse_document_filename("Author_2200.txt"), InputError);
}

TEST_CASE("doc ids parse with and without a split prefix") {
  auto p = parse_doc_id("train/Mark_Twain_1885");
  CHECK(p.split == "train");
  CHECK(p.author == "Mark_Twain");
  CHECK(p.year == 1885);

  p = parse_doc_id("Doc_1907");
  CHECK(p.split.empty());
  CHECK(p.author == "Doc");
  CHECK(p.year == 1907);

  CHECK_THROWS_AS(parse_doc_id("train/oops"), InputError);
}

TEST_CASE("tokenizer lowercases and splits punctuation runs") {
  const auto t = tokenize("Hello, World!  It's \"quoted\" -- done...");
  const std::vector<std::string> expect = {"hello", ",",  "world", "!",  "it", "'",
                                           "s",     "\"", "quoted", "\"", "--", "done",
                                           "..."};
  CHECK(t == expect);
}

TEST_CASE("tokenizer handles unicode spaces, typographic punctuation, CRLF") {
  CHECK(tokenize("a b") == std::vector<std::string>{"a", "b"});       // nbsp
  CHECK(tokenize("a b") == std::vector<std::string>{"a", "b"});       // em space
  CHECK(tokenize("one\r\ntwo") == std::vector<std::string>{"one", "two"});
  CHECK(tokenize("l’autre") == std::vector<std::string>{"l", "’", "autre"});
  CHECK(tokenize("a—b") == std::vector<std::string>{"a", "—", "b"});  // em dash
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t \n ").empty());
  // Accented word characters stay in one token (no ASCII-only splitting).
  CHECK(tokenize("café noir") == std::vector<std::string>{"café", "noir"});
}

TEST_CASE("tokenizer survives invalid utf-8 bytes") {
  std::string bad = "ok ";
  bad += static_cast<char>(0xC3);  // dangling lead byte
  bad += " fine";
  const auto t = tokenize(bad);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == "ok");
  CHECK(t[2] == "fine");
}

TEST_CASE("chunk spans tile the token stream") {
  ChunkerConfig cfg;  // 512 window, 128 overlap
  std::vector<std::string> tokens(1000, "t");
  const auto cs = chunk("d_1900", tokens, cfg);
  REQUIRE(cs.spans.size() == 3);
  CHECK(cs.spans[0].start == 0);
  CHECK(cs.spans[0].end == 512);
  CHECK(cs.spans[1].start == 384);
  CHECK(cs.spans[1].end == 896);
  CHECK(cs.spans[2].start == 768);
  CHECK(cs.spans[2].end == 1000);
}

TEST_CASE("chunk count matches the closed form on sampled sizes") {
  ChunkerConfig cfg;
  for (std::size_t n : {1u, 2u, 100u, 384u, 511u, 512u, 513u, 895u, 896u, 897u, 2048u, 4999u}) {
    std::vector<std::string> tokens(n, "t");
    const auto cs = chunk("d_1900", tokens, cfg);
    INFO("n = " << n);
    CHECK(cs.spans.size() == expected_chunk_count(n, cfg));
    // Tiling invariants: starts advance by the stride, the last span reaches
    // the end, spans never overrun.
    CHECK(cs.spans.front().start == 0);
    CHECK(cs.spans.back().end == n);
    for (std::size_t i = 0; i < cs.spans.size(); ++i) {
      CHECK(cs.spans[i].start == i * cfg.stride());
      CHECK(cs.spans[i].end <= n);
      CHECK(cs.spans[i].start < cs.spans[i].end);
    }
  }
  CHECK(expected_chunk_count(0, cfg) == 0);
  CHECK(chunk("d_1900", {}, cfg).spans.empty());
}

TEST_CASE("chunker rejects overlap >= window") {
  ChunkerConfig cfg;
  cfg.window = 100;
  cfg.overlap = 100;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.overlap = 150;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.window = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("chunk ids round-trip through doc_of_chunk_id") {
  CHECK(chunk_id("train/A_1900", 7) == "train/A_1900#0007");
  CHECK(doc_of_chunk_id("train/A_1900#0007") == "train/A_1900");
  CHECK(doc_of_chunk_id("plain") == "plain");
}

TEST_CASE("group_chunks_by_doc keeps first-appearance order") {
  const std::vector<std::string> docs = {"b", "b", "a", "b", "a", "c"};
  const auto groups = group_chunks_by_doc(docs);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].first == "b");
  CHECK(groups[0].second == std::vector<std::size_t>{0, 1, 3});
  CHECK(groups[1].first == "a");
  CHECK(groups[1].second == std::vector<std::size_t>{2, 4});
  CHECK(groups[2].first == "c");
  CHECK(groups[2].second == std::vector<std::size_t>{5});
}

TEST_CASE("corpus loads from split subdirectories in sorted order") {
  testsupport::TempDir tmp("corpus");
  testsupport::write_corpus_tree(tmp.path(), {
      {"Zed", 1900, "train", "zed writes this"},
      {"Abe", 1901, "train", "abe writes that"},
      {"Abe", 1902, "test", "abe again"},
  });
  const Corpus c = load_corpus(tmp.path(), SplitLayout::subdirs);
  REQUIRE(c.docs.size() == 3);
  CHECK(c.docs[0].doc_id == "train/Abe_1901");  // sorted within the split
  CHECK(c.docs[1].doc_id == "train/Zed_1900");
  CHECK(c.docs[2].doc_id == "test/Abe_1902");
  CHECK(c.docs[0].author == "Abe");
  CHECK(c.docs[0].year == 1901);
  CHECK(c.docs[0].split == Split::train);
  CHECK(c.docs[0].rel_path == "train/Abe_1901.txt");
  CHECK(c.warnings.empty());

  const auto missing = authors_missing_split(c);
  REQUIRE(missing.size() == 1);  // Zed has no test doc
  CHECK(missing[0] == "Zed");
}

TEST_CASE("empty documents are excluded with a warning") {
  testsupport::TempDir tmp("corpus-empty");
  testsupport::write_corpus_tree(tmp.path(), {
      {"Abe", 1901, "train", "some text"},
      {"Abe", 1950, "test", "more text"},
      {"Bo", 1902, "train", "   \n  "},
  });
  const Corpus c = load_corpus(tmp.path(), SplitLayout::subdirs);
  CHECK(c.docs.size() == 2);
  REQUIRE(c.warnings.size() == 1);
  CHECK(c.warnings[0].path == "train/Bo_1902.txt");
}

TEST_CASE("duplicate (author, year, split) is an error") {
  testsupport::TempDir tmp("corpus-dup");
  testsupport::write_corpus_tree(tmp.path(), {{"Abe", 1901, "train", "a"}});
  // A leading zero makes a distinct filename that parses to the same key.
  write_text_file(tmp.path() / "train" / "Abe_01901.txt", "b");
  CHECK_THROWS_AS(load_corpus(tmp.path(), SplitLayout::subdirs), InputError);

  testsupport::TempDir tmp2("corpus-dup-manifest");
  write_text_file(tmp2.path() / "one.txt", "a");
  write_text_file(tmp2.path() / "two.txt", "b");
  write_text_file(tmp2.path() / "manifest.csv",
                  "path,author,year,split\n"
                  "one.txt,A,1901,train\n"
                  "two.txt,A,1901,train\n");
  CHECK_THROWS_AS(load_corpus(tmp2.path(), SplitLayout::manifest), InputError);
}

TEST_CASE("bad filenames are collected into one error") {
  testsupport::TempDir tmp("corpus-bad");
  testsupport::write_corpus_tree(tmp.path(), {{"Abe", 1901, "train", "a"}});
  write_text_file(tmp.path() / "train" / "broken.txt", "text");
  write_text_file(tmp.path() / "test" / "also_bad_year_x.txt", "text");
  try {
    load_corpus(tmp.path(), SplitLayout::subdirs);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("broken.txt") != std::string::npos);
    CHECK(msg.find("also_bad_year_x.txt") != std::string::npos);
  }
}

TEST_CASE("corpus loads from a manifest") {
  testsupport::TempDir tmp("corpus-manifest");
  std::filesystem::create_directories(tmp.path() / "texts");
  write_text_file(tmp.path() / "texts" / "one.txt", "first document text");
  write_text_file(tmp.path() / "texts" / "two.txt", "second document text");
  write_text_file(tmp.path() / "manifest.csv",
                  "path,author,year,split\n"
                  "texts/one.txt,Early Writer,1801,train\n"
                  "texts/two.txt,Early Writer,1805,test\n");
  const Corpus c = load_corpus(tmp.path(), SplitLayout::manifest);
  REQUIRE(c.docs.size() == 2);
  CHECK(c.docs[0].doc_id == "train/Early Writer_1801");
  CHECK(c.docs[0].rel_path == "texts/one.txt");
  CHECK(c.docs[1].split == Split::test);
}

TEST_CASE("manifest with a bad header or bad rows is rejected") {
  testsupport::TempDir tmp("corpus-manifest-bad");
  write_text_file(tmp.path() / "manifest.csv", "file,writer\nx,y\n");
  CHECK_THROWS_AS(load_corpus(tmp.path(), SplitLayout::manifest), InputError);

  write_text_file(tmp.path() / "manifest.csv",
                  "path,author,year,split\n"
                  "missing.txt,A,notayear,train\n");
  CHECK_THROWS_AS(load_corpus(tmp.path(), SplitLayout::manifest), InputError);
}

TEST_CASE("missing split directory is an error") {
  testsupport::TempDir tmp("corpus-nosplit");
  std::filesystem::create_directories(tmp.path() / "train");
  CHECK_THROWS_AS(load_corpus(tmp.path(), SplitLayout::subdirs), InputError);
  CHECK_THROWS_AS(load_corpus(tmp.path() / "nope", SplitLayout::subdirs), InputError);
}
