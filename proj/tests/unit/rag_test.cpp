#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "surgraw/rag.hpp"
#include "surgraw/text.hpp"
#include "testing.hpp"

namespace surgraw::rag {
namespace {

std::string words(int from, int to) {
  std::string out;
  for (int i = from; i <= to; ++i) {
    if (i > from) out += ' ';
    out += "w" + std::to_string(i);
  }
  return out;
}

Document doc(std::string id, std::string body) { return Document{id, id, std::nullopt, std::move(body)}; }

TEST(Chunking, ShortDocumentIsOneChunk) {
  const auto chunks = chunk_document(doc("d", words(1, 100)));
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, words(1, 100));
  EXPECT_EQ(chunks[0].ordinal, 0);
}

TEST(Chunking, LongParagraphSplitsWithOverlap) {
  const auto chunks = chunk_document(doc("d", words(1, 260)), ChunkParams{250, 50});
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text, words(1, 250));
  EXPECT_EQ(chunks[1].text, words(201, 260));
}

TEST(Chunking, ParagraphsArePackedAndBoundariesKept) {
  const auto chunks = chunk_document(doc("d", words(1, 5) + "\n\n" + words(6, 8) + "\n\n" + words(9, 14)),
                                     ChunkParams{10, 2});
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].text, words(1, 5) + "\n\n" + words(6, 8));
  EXPECT_EQ(chunks[1].text, words(7, 8) + "\n\n" + words(9, 14));
}

TEST(Chunking, InvariantsOverRandomDocuments) {
  std::mt19937_64 rng(20261016);
  for (int round = 0; round < 200; ++round) {
    const auto docs = testing::random_corpus(rng, 1, 6, 40);
    const ChunkParams params{8 + static_cast<std::size_t>(round % 20), static_cast<std::size_t>(round % 7)};
    const auto chunks = chunk_document(docs[0], params);
    ASSERT_FALSE(chunks.empty());
    std::vector<std::string> covered;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto w = text::split_words(chunks[i].text);
      EXPECT_LE(w.size(), params.max_words);
      EXPECT_EQ(chunks[i].ordinal, static_cast<int>(i));
      if (i > 0) {
        const auto prev = text::split_words(chunks[i - 1].text);
        const std::size_t keep = std::min(params.overlap, prev.size());
        ASSERT_GT(w.size(), keep);
        EXPECT_TRUE(std::equal(prev.end() - keep, prev.end(), w.begin()));
        covered.insert(covered.end(), w.begin() + keep, w.end());
      } else {
        covered = w;
      }
    }
    EXPECT_EQ(covered, text::split_words(docs[0].body));
  }
}

TEST(Chunking, RejectsOverlapNotBelowMax) {
  EXPECT_THROW(chunk_document(doc("d", "a b"), ChunkParams{10, 10}), std::invalid_argument);
}

TEST(Documents, FrontMatterVariants) {
  const auto fenced = parse_document("---\nid: a\ntitle: Title A\nsource: http://x\n---\nBody text.\n", "a.md");
  EXPECT_EQ(fenced.id, "a");
  EXPECT_EQ(fenced.title, "Title A");
  EXPECT_EQ(fenced.source_url, "http://x");
  EXPECT_EQ(text::trim(fenced.body), "Body text.");
  const auto plain = parse_document("id: b\n\nJust a body.", "b.txt");
  EXPECT_EQ(plain.id, "b");
  EXPECT_EQ(plain.title, "b");
  EXPECT_THROW(parse_document("---\ntitle: no id\n---\nbody", "c.md"), DocumentParseError);
  EXPECT_THROW(parse_document("---\nid: e\n---\n   \n", "e.md"), DocumentParseError);
}

TEST(Index, FixtureCorpusStatistics) {
  const auto& idx = *testing::mini_index();
  EXPECT_EQ(idx.documents().size(), 3u);
  std::size_t total = 0;
  for (const auto& d : idx.documents()) total += chunk_document(d).size();
  EXPECT_EQ(idx.size(), total);
  for (const auto& d : idx.documents()) {
    for (const auto& term : tokenize(d.body)) EXPECT_TRUE(idx.doc_freq().count(term)) << term;
  }
}

TEST(Index, EmptyDirectoryAndDuplicateIds) {
  const auto dir = std::filesystem::temp_directory_path() / "surgraw_rag_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  EXPECT_THROW(Index::build_from_dir(dir), CorpusEmpty);
  std::ofstream(dir / "a.md") << "---\nid: same\n---\nalpha";
  std::ofstream(dir / "b.md") << "---\nid: same\n---\nbeta";
  EXPECT_THROW(Index::build_from_dir(dir), DocumentParseError);
  std::filesystem::remove_all(dir);
}

TEST(Index, IdfSpotValue) {
  const auto idx = Index::build({doc("a", "bladder x1"), doc("b", "bladder x2"), doc("c", "x3"), doc("d", "x4")});
  ASSERT_EQ(idx.size(), 4u);
  EXPECT_NEAR(idx.idf("bladder"), std::log(3.0), 1e-12);
  EXPECT_NEAR(idx.idf("bladder"), 1.098612, 1e-6);
  EXPECT_EQ(idx.idf("absent"), 0.0);
}

TEST(Retrieve, TermOnlyInSecondChunk) {
  const auto idx = Index::build({doc("d", words(1, 10) + "\n\n" + words(11, 19) + " suture")}, ChunkParams{10, 0});
  ASSERT_EQ(idx.size(), 2u);
  const auto hits = idx.retrieve("suture", 3);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].ordinal, 1);
}

TEST(Retrieve, BladderNeckDissectionMatchesHandTable) {
  // Scores computed by an independent brute-force script over the corpus
  // chunked at 40 words with 10 words of overlap.
  const auto idx = Index::build_from_dir(testing::fixture("mini/corpus"), ChunkParams{40, 10});
  ASSERT_EQ(idx.size(), 16u);
  EXPECT_EQ(idx.doc_freq().at("bladder"), 7);
  EXPECT_EQ(idx.doc_freq().at("neck"), 3);
  EXPECT_EQ(idx.doc_freq().at("dissection"), 2);
  const auto hits = idx.retrieve("bladder neck dissection", 3);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].doc_id, "prostatectomy");
  EXPECT_EQ(hits[0].ordinal, 1);
  EXPECT_NEAR(hits[0].score, 9.80902804579228, 1e-12);
  EXPECT_EQ(hits[1].doc_id, "hysterectomy");
  EXPECT_EQ(hits[1].ordinal, 1);
  EXPECT_NEAR(hits[1].score, 2.379168133747673, 1e-12);
}

TEST(Retrieve, EqualsBruteForceOracleOnRandomCorpora) {
  std::mt19937_64 rng(7);
  int checked = 0;
  while (checked < 100) {
    auto docs = testing::random_corpus(rng, 1 + static_cast<int>(rng() % 8), 4, 25);
    const auto idx = Index::build(docs, ChunkParams{12, 3});
    if (idx.size() > 50) continue;
    ++checked;
    for (int qn = 0; qn < 5; ++qn) {
      const std::string query = testing::random_query(rng, 8);
      const int k = 1 + static_cast<int>(rng() % 5);
      const auto expected = testing::brute_force_retrieve(idx.chunks(), query, k);
      const auto actual = idx.retrieve(query, k);
      ASSERT_EQ(actual.size(), expected.size()) << query;
      for (std::size_t i = 0; i < actual.size(); ++i) {
        EXPECT_EQ(actual[i].doc_id, expected[i].doc_id) << query;
        EXPECT_EQ(actual[i].ordinal, expected[i].ordinal) << query;
        EXPECT_EQ(actual[i].score, expected[i].score) << query;
      }
    }
  }
}

TEST(Retrieve, RejectsNonPositiveK) { EXPECT_THROW(testing::mini_index()->retrieve("x", 0), std::invalid_argument); }

TEST(Snapshot, RoundTripAndFormatErrors) {
  const auto& idx = *testing::mini_index();
  const std::string snap = idx.snapshot();
  EXPECT_EQ(snap.substr(0, 9), "SRAGIDX1\n");
  const auto back = Index::from_snapshot(snap);
  EXPECT_EQ(back.snapshot(), snap);
  EXPECT_EQ(back.size(), idx.size());
  EXPECT_EQ(back.retrieve("bladder neck", 3).size(), idx.retrieve("bladder neck", 3).size());
  EXPECT_THROW(Index::from_snapshot("NOTMAGIC\n{}"), IndexFormatError);
  EXPECT_THROW(Index::from_snapshot("SRAGIDX1\n{"), IndexFormatError);
}

TEST(FormatContext, BlocksInHitOrder) {
  const std::vector<RetrievalHit> hits = {{"a", 0, "Alpha", "line one\nline two", 2.0}, {"b", 1, "Beta", "x", 1.0}};
  const std::string ctx = format_context(hits);
  EXPECT_EQ(ctx, "[source: Alpha]\nline one\nline two\n\n[source: Beta]\nx");
  EXPECT_EQ(format_context({}), kNoContext);
}

TEST(RetrievalQuery, QuestionThenOptions) {
  const Query q = testing::make_query(TaskKind::OutcomeAssessment, {{'A', "leak"}, {'B', "stricture"}}, "Risk?");
  EXPECT_EQ(retrieval_query(q), "Risk? leak stricture");
}

}  // namespace
}  // namespace surgraw::rag
