#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "surgraw/core.hpp"

namespace surgraw::rag {

struct Document {
  std::string id;
  std::string title;
  std::optional<std::string> source_url;
  std::string body;
};

// Parses a corpus file: a front-matter header of `key: value` lines (id,
// title, source), optionally fenced by `---` lines, then the body.
// Throws DocumentParseError naming `origin`.
Document parse_document(std::string_view contents, const std::string& origin);

struct Chunk {
  std::string doc_id;
  int ordinal = 0;
  std::string text;
  std::map<std::string, int> term_counts;
};

struct ChunkParams {
  std::size_t max_words = 250;
  std::size_t overlap = 50;
};

// Lowercase, split on non-alphanumerics, drop single-character tokens.
std::vector<std::string> tokenize(std::string_view text);

// Paragraph-aware greedy packing. Paragraphs are appended while they fit in
// max_words; oversize paragraphs are split at word boundaries. Each chunk
// after the first starts with the trailing `overlap` words of its predecessor
// (or the whole predecessor, when it is shorter than that).
std::vector<Chunk> chunk_document(const Document& doc, ChunkParams params = {});

struct RetrievalHit {
  std::string doc_id;
  int ordinal = 0;
  std::string title;
  std::string text;
  double score = 0.0;
};

inline constexpr std::string_view kIndexMagic = "SRAGIDX1";
inline constexpr std::string_view kNoContext = "No relevant reference material was retrieved.";

// Lexical index over document chunks. Immutable once built; retrieval is
// safe from any number of threads.
class Index {
 public:
  static Index build(std::vector<Document> documents, ChunkParams params = {});
  // Reads every *.md / *.txt file in `dir` (sorted by file name).
  // Throws CorpusEmpty or DocumentParseError.
  static Index build_from_dir(const std::filesystem::path& dir, ChunkParams params = {});

  // Snapshot: the magic header line followed by a JSON body.
  std::string snapshot() const;
  static Index from_snapshot(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path);

  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<Chunk>& chunks() const { return chunks_; }
  const std::unordered_map<std::string, int>& doc_freq() const { return doc_freq_; }
  std::size_t size() const { return chunks_.size(); }
  const ChunkParams& params() const { return params_; }

  const Document* document(const std::string& id) const;
  // ln(1 + N / df); 0 for a term absent from the index.
  double idf(const std::string& term) const;

  std::vector<RetrievalHit> retrieve(std::string_view query, int k = 3) const;

 private:
  void finalize();

  ChunkParams params_;
  std::vector<Document> documents_;
  std::map<std::string, std::size_t> doc_pos_;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, int> doc_freq_;
  // term -> (chunk index, term frequency), chunk indices ascending
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
};

// Top-k chunks by summed tf * idf over the distinct query terms, at most one
// chunk per document, zero scores excluded. Ordered by score descending, then
// doc_id and ordinal ascending.
inline std::vector<RetrievalHit> retrieve(const Index& idx, std::string_view query, int k = 3) {
  return idx.retrieve(query, k);
}

std::string format_context(const std::vector<RetrievalHit>& hits);

// Question text followed by the option texts.
std::string retrieval_query(const Query& q);

}  // namespace surgraw::rag
