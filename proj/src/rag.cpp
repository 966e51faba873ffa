#include "surgraw/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "surgraw/text.hpp"

namespace surgraw::rag {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Document parse_document(std::string_view contents, const std::string& origin) {
  const auto lines = text::split_lines(contents);
  std::size_t i = 0;
  while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  const bool fenced = i < lines.size() && text::trim(lines[i]) == "---";
  if (fenced) ++i;

  Document doc;
  bool closed = false;
  for (; i < lines.size(); ++i) {
    const std::string line = text::trim(lines[i]);
    if (line == "---") {
      closed = true;
      ++i;
      break;
    }
    if (line.empty()) {
      if (fenced) continue;
      closed = true;
      ++i;
      break;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw DocumentParseError(origin + ": front-matter line without ':': " + line);
    }
    const std::string key = text::to_lower(text::trim(line.substr(0, colon)));
    const std::string value = text::trim(line.substr(colon + 1));
    if (key == "id") {
      doc.id = value;
    } else if (key == "title") {
      doc.title = value;
    } else if (key == "source") {
      if (!value.empty()) doc.source_url = value;
    }
  }
  if (!closed) throw DocumentParseError(origin + ": front matter is not terminated");
  if (doc.id.empty()) throw DocumentParseError(origin + ": missing id");
  if (doc.title.empty()) doc.title = doc.id;

  std::vector<std::string> rest(lines.begin() + static_cast<std::ptrdiff_t>(i), lines.end());
  doc.body = text::trim(text::join(rest, "\n"));
  if (doc.body.empty()) throw DocumentParseError(origin + ": empty body");
  return doc;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 128 && std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

namespace {

struct Word {
  std::string text;
  std::size_t paragraph;
};

std::vector<std::vector<std::string>> paragraphs_of(std::string_view body) {
  std::vector<std::vector<std::string>> paras;
  std::vector<std::string> cur;
  for (const auto& line : text::split_lines(body)) {
    if (text::trim(line).empty()) {
      if (!cur.empty()) paras.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    for (auto& w : text::split_words(line)) cur.push_back(std::move(w));
  }
  if (!cur.empty()) paras.push_back(std::move(cur));
  return paras;
}

std::map<std::string, int> count_terms(std::string_view s) {
  std::map<std::string, int> counts;
  for (const auto& t : tokenize(s)) ++counts[t];
  return counts;
}

}  // namespace

std::vector<Chunk> chunk_document(const Document& doc, ChunkParams params) {
  if (params.max_words == 0 || params.overlap >= params.max_words) {
    throw std::invalid_argument("chunk_document requires 0 <= overlap < max_words");
  }
  std::vector<Word> words;
  std::vector<std::pair<std::size_t, std::size_t>> para_ranges;
  const auto paras = paragraphs_of(doc.body);
  for (std::size_t p = 0; p < paras.size(); ++p) {
    const std::size_t begin = words.size();
    for (const auto& w : paras[p]) words.push_back(Word{w, p});
    para_ranges.emplace_back(begin, words.size());
  }

  std::vector<Chunk> chunks;
  std::vector<std::size_t> cur;  // word indices
  std::size_t fresh = 0;         // words in `cur` not shared with the previous chunk

  auto emit = [&] {
    Chunk c;
    c.doc_id = doc.id;
    c.ordinal = static_cast<int>(chunks.size());
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (i > 0) c.text += words[cur[i]].paragraph != words[cur[i - 1]].paragraph ? "\n\n" : " ";
      c.text += words[cur[i]].text;
    }
    c.term_counts = count_terms(c.text);
    chunks.push_back(std::move(c));
    const std::size_t keep = std::min(params.overlap, cur.size());
    cur.erase(cur.begin(), cur.end() - static_cast<std::ptrdiff_t>(keep));
    fresh = 0;
  };
  auto append = [&](std::size_t begin, std::size_t end) {
    for (std::size_t w = begin; w < end; ++w) cur.push_back(w);
    fresh += end - begin;
  };

  for (const auto& [begin, end] : para_ranges) {
    const std::size_t len = end - begin;
    if (cur.size() + len <= params.max_words) {
      append(begin, end);
      continue;
    }
    if (fresh > 0) emit();
    if (cur.size() + len <= params.max_words) {
      append(begin, end);
      continue;
    }
    for (std::size_t w = begin; w < end; ++w) {
      if (cur.size() == params.max_words) emit();
      append(w, w + 1);
    }
  }
  if (fresh > 0) emit();
  return chunks;
}

Index Index::build(std::vector<Document> documents, ChunkParams params) {
  Index idx;
  idx.params_ = params;
  std::set<std::string> ids;
  for (const auto& d : documents) {
    if (d.body.empty()) throw DocumentParseError(d.id + ": empty body");
    if (!ids.insert(d.id).second) throw DocumentParseError("duplicate document id '" + d.id + "'");
  }
  idx.documents_ = std::move(documents);
  for (const auto& d : idx.documents_) {
    for (auto& c : chunk_document(d, params)) idx.chunks_.push_back(std::move(c));
  }
  idx.finalize();
  return idx;
}

Index Index::build_from_dir(const std::filesystem::path& dir, ChunkParams params) {
  if (!std::filesystem::is_directory(dir)) throw CorpusEmpty("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    const auto ext = text::to_lower(entry.path().extension().string());
    if (name.empty() || name[0] == '.') continue;
    if (ext == ".md" || ext == ".txt") files.push_back(entry.path());
  }
  if (files.empty()) throw CorpusEmpty("no .md or .txt documents in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) {
    std::string body;
    try {
      body = text::read_file(f.string());
    } catch (const std::exception& e) {
      throw DocumentParseError(f.string() + ": " + e.what());
    }
    docs.push_back(parse_document(body, f.filename().string()));
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!ids.insert(docs[i].id).second) {
      throw DocumentParseError(files[i].filename().string() + ": duplicate document id '" +
                               docs[i].id + "'");
    }
  }
  return build(std::move(docs), params);
}

void Index::finalize() {
  doc_pos_.clear();
  for (std::size_t i = 0; i < documents_.size(); ++i) doc_pos_[documents_[i].id] = i;
  doc_freq_.clear();
  postings_.clear();
  for (std::size_t ci = 0; ci < chunks_.size(); ++ci) {
    auto& c = chunks_[ci];
    if (c.term_counts.empty()) c.term_counts = count_terms(c.text);
    for (const auto& [term, tf] : c.term_counts) {
      ++doc_freq_[term];
      postings_[term].emplace_back(ci, tf);
    }
  }
}

const Document* Index::document(const std::string& id) const {
  auto it = doc_pos_.find(id);
  return it == doc_pos_.end() ? nullptr : &documents_[it->second];
}

double Index::idf(const std::string& term) const {
  auto it = doc_freq_.find(term);
  if (it == doc_freq_.end() || it->second == 0) return 0.0;
  return std::log(1.0 + static_cast<double>(chunks_.size()) / static_cast<double>(it->second));
}

std::vector<RetrievalHit> Index::retrieve(std::string_view query, int k) const {
  if (k < 1) throw std::invalid_argument("retrieve requires k >= 1");
  const auto tokens = tokenize(query);
  const std::set<std::string> terms(tokens.begin(), tokens.end());

  std::vector<double> score(chunks_.size(), 0.0);
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const auto& [ci, tf] : it->second) score[ci] += static_cast<double>(tf) * w;
  }

  // Best chunk per document; on equal scores the lower ordinal wins.
  std::map<std::string, std::size_t> best;
  for (std::size_t ci = 0; ci < chunks_.size(); ++ci) {
    if (score[ci] <= 0.0) continue;
    auto [it, inserted] = best.emplace(chunks_[ci].doc_id, ci);
    if (!inserted) {
      const std::size_t prev = it->second;
      if (score[ci] > score[prev] ||
          (score[ci] == score[prev] && chunks_[ci].ordinal < chunks_[prev].ordinal)) {
        it->second = ci;
      }
    }
  }

  std::vector<std::size_t> order;
  for (const auto& [doc, ci] : best) order.push_back(ci);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    if (chunks_[a].doc_id != chunks_[b].doc_id) return chunks_[a].doc_id < chunks_[b].doc_id;
    return chunks_[a].ordinal < chunks_[b].ordinal;
  });
  if (order.size() > static_cast<std::size_t>(k)) order.resize(static_cast<std::size_t>(k));

  std::vector<RetrievalHit> hits;
  for (std::size_t ci : order) {
    const auto& c = chunks_[ci];
    const Document* d = document(c.doc_id);
    hits.push_back(RetrievalHit{c.doc_id, c.ordinal, d ? d->title : c.doc_id, c.text, score[ci]});
  }
  return hits;
}

std::string Index::snapshot() const {
  ordered_json doc;
  doc["format_version"] = 1;
  doc["max_words"] = params_.max_words;
  doc["overlap"] = params_.overlap;
  doc["documents"] = ordered_json::array();
  for (const auto& d : documents_) {
    ordered_json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["source"] = d.source_url ? ordered_json(*d.source_url) : ordered_json(nullptr);
    j["body"] = d.body;
    doc["documents"].push_back(std::move(j));
  }
  doc["chunks"] = ordered_json::array();
  for (const auto& c : chunks_) {
    ordered_json j;
    j["doc_id"] = c.doc_id;
    j["ordinal"] = c.ordinal;
    j["text"] = c.text;
    doc["chunks"].push_back(std::move(j));
  }
  return std::string(kIndexMagic) + "\n" +
         doc.dump(-1, ' ', false, ordered_json::error_handler_t::replace) + "\n";
}

Index Index::from_snapshot(std::string_view bytes) {
  if (bytes.substr(0, kIndexMagic.size()) != kIndexMagic) {
    throw IndexFormatError("missing SRAGIDX1 header");
  }
  json doc = json::parse(bytes.substr(kIndexMagic.size()), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw IndexFormatError("index body is not JSON");
  if (doc.value("format_version", 0) != 1) throw IndexFormatError("unsupported index version");
  Index idx;
  try {
    idx.params_.max_words = doc.at("max_words").get<std::size_t>();
    idx.params_.overlap = doc.at("overlap").get<std::size_t>();
    for (const auto& j : doc.at("documents")) {
      Document d;
      d.id = j.at("id").get<std::string>();
      d.title = j.at("title").get<std::string>();
      if (j.contains("source") && j["source"].is_string()) d.source_url = j["source"].get<std::string>();
      d.body = j.at("body").get<std::string>();
      idx.documents_.push_back(std::move(d));
    }
    for (const auto& j : doc.at("chunks")) {
      Chunk c;
      c.doc_id = j.at("doc_id").get<std::string>();
      c.ordinal = j.at("ordinal").get<int>();
      c.text = j.at("text").get<std::string>();
      idx.chunks_.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw IndexFormatError(std::string("malformed index: ") + e.what());
  }
  idx.finalize();
  return idx;
}

void Index::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IndexFormatError("cannot write " + path.string());
  out << snapshot();
}

Index Index::load(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = text::read_file(path.string());
  } catch (const std::exception& e) {
    throw IndexFormatError(e.what());
  }
  return from_snapshot(bytes);
}

std::string format_context(const std::vector<RetrievalHit>& hits) {
  if (hits.empty()) return std::string(kNoContext);
  std::string out;
  for (const auto& h : hits) {
    if (!out.empty()) out += "\n\n";
    out += "[source: " + h.title + "]\n" + h.text;
  }
  return out;
}

std::string retrieval_query(const Query& q) {
  std::string out = q.question;
  for (const auto& [letter, option] : q.options) out += " " + option;
  return out;
}

}  // namespace surgraw::rag
