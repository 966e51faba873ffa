#include "surgraw/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

#include "surgraw/text.hpp"
#include "surgraw/trace_json.hpp"

namespace surgraw::bench {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::optional<Perspective> infer_perspective(std::string_view question) {
  const std::string q = text::to_lower(question);
  const bool left = text::contains_word(q, "left");
  const bool right = text::contains_word(q, "right");
  if (left == right) return std::nullopt;
  return left ? Perspective::Left : Perspective::Right;
}

namespace {

std::string required_string(const json& rec, const char* key, std::size_t line) {
  if (!rec.contains(key)) throw DatasetParseError(line, std::string("missing field '") + key + "'");
  if (!rec[key].is_string()) throw DatasetParseError(line, std::string("field '") + key + "' is not a string");
  return rec[key].get<std::string>();
}

}  // namespace

std::vector<Query> parse_dataset(std::string_view jsonl, const std::filesystem::path& base_dir) {
  std::vector<Query> out;
  std::set<std::string> ids;
  std::map<std::string, std::shared_ptr<const std::string>> frames;
  const auto lines = text::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    const json rec = json::parse(lines[i], nullptr, false);
    if (rec.is_discarded()) throw DatasetParseError(line, "not valid JSON");
    if (!rec.is_object()) throw DatasetParseError(line, "record is not an object");

    Query q;
    q.id = required_string(rec, "id", line);
    q.question = required_string(rec, "question", line);
    const std::string task = required_string(rec, "task", line);
    const auto kind = task_from_name(task);
    if (!kind || *kind == TaskKind::Unknown) throw DatasetParseError(line, "unknown task '" + task + "'");
    q.task = *kind;
    if (rec.contains("procedure") && !rec["procedure"].is_null()) {
      q.procedure = required_string(rec, "procedure", line);
    }

    if (!rec.contains("options") || !rec["options"].is_object()) {
      throw DatasetParseError(line, "field 'options' is missing or not an object");
    }
    for (const auto& [key, value] : rec["options"].items()) {
      if (key.size() != 1 || key[0] < 'A' || key[0] > 'Z') {
        throw DatasetParseError(line, "option key '" + key + "' is not an uppercase letter");
      }
      if (!value.is_string()) throw DatasetParseError(line, "option " + key + " is not a string");
      q.options[key[0]] = value.get<std::string>();
    }

    const std::string answer = required_string(rec, "answer", line);
    try {
      q.truth = normalize_letter(answer);
    } catch (const NotALetter&) {
      throw DatasetParseError(line, "answer '" + answer + "' is not an option letter");
    }

    if (rec.contains("perspective") && !rec["perspective"].is_null()) {
      const std::string p = required_string(rec, "perspective", line);
      const auto persp = perspective_from_name(text::to_lower(p));
      if (!persp) throw DatasetParseError(line, "unknown perspective '" + p + "'");
      q.perspective = persp;
    } else if (q.task == TaskKind::ActionRecognition || q.task == TaskKind::InstrumentRecognition) {
      q.perspective = infer_perspective(q.question);
    }

    const std::string image = required_string(rec, "image", line);
    const std::filesystem::path path = (base_dir / image).lexically_normal();
    q.image.path = path;
    q.image.media_type = media_type_for(path);
    if (q.image.media_type.empty()) throw DatasetParseError(line, "unsupported image type '" + image + "'");
    auto& frame = frames[path.string()];
    if (!frame) {
      if (!std::filesystem::is_regular_file(path)) {
        throw MissingImage("line " + std::to_string(line) + ": image not found: " + path.string());
      }
      frame = std::make_shared<const std::string>(text::read_file(path.string()));
    }
    q.image.data = frame;

    try {
      validate_query(q);
    } catch (const MalformedQuery& e) {
      throw DatasetParseError(line, e.what());
    }
    if (!ids.insert(q.id).second) {
      throw DuplicateId("line " + std::to_string(line) + ": duplicate id '" + q.id + "'");
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Query> load_dataset(const std::filesystem::path& path) {
  std::string body;
  try {
    body = text::read_file(path.string());
  } catch (const std::exception& e) {
    throw DatasetParseError(0, e.what());
  }
  return parse_dataset(body, path.parent_path());
}

std::int64_t accuracy_hundredths(std::int64_t correct, std::int64_t total) {
  if (total <= 0) return 0;
  return (20000 * correct + total) / (2 * total);
}

std::int64_t macro_hundredths(const std::vector<Counts>& parts) {
  __int128 denom = 1;
  std::vector<const Counts*> used;
  for (const auto& c : parts) {
    if (c.total <= 0) continue;
    used.push_back(&c);
    denom *= c.total;
  }
  if (used.empty()) return 0;
  __int128 numer = 0;
  for (const Counts* c : used) numer += static_cast<__int128>(c->correct) * (denom / c->total);
  const __int128 n = static_cast<__int128>(used.size());
  // mean = numer / (n * denom); hundredths = round_half_up(10000 * mean)
  return static_cast<std::int64_t>((20000 * numer + n * denom) / (2 * n * denom));
}

std::string format_hundredths(std::int64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(h / 100),
                static_cast<long long>(h % 100));
  return buf;
}

EvalReport aggregate(std::vector<RecordResult> results, const EvalConfig& cfg) {
  std::sort(results.begin(), results.end(),
            [](const RecordResult& a, const RecordResult& b) { return a.index < b.index; });
  EvalReport r;
  r.config = cfg;
  for (TaskKind t : kAllTasks) r.per_task[t] = {};
  r.per_category[Category::VisualSemantic] = {};
  r.per_category[Category::CognitiveInference] = {};
  for (const auto& res : results) {
    auto bump = [&](Counts& c) {
      ++c.total;
      if (res.correct) ++c.correct;
      if (res.error) ++c.errored;
    };
    bump(r.per_task.at(res.task));
    bump(r.per_category.at(task_category(res.task)));
    bump(r.overall);
  }
  for (Category cat : {Category::VisualSemantic, Category::CognitiveInference}) {
    std::vector<Counts> parts;
    for (TaskKind t : kAllTasks) {
      if (task_category(t) == cat) parts.push_back(r.per_task.at(t));
    }
    r.macro_per_category[cat] = macro_hundredths(parts);
  }
  r.records = std::move(results);
  return r;
}

namespace {

ordered_json counts_to_json(const Counts& c) {
  ordered_json j;
  j["correct"] = c.correct;
  j["total"] = c.total;
  j["errored"] = c.errored;
  j["accuracy"] = static_cast<double>(accuracy_hundredths(c.correct, c.total)) / 100.0;
  return j;
}

Counts counts_from_json(const json& j) {
  Counts c;
  c.correct = j.at("correct").get<std::int64_t>();
  c.total = j.at("total").get<std::int64_t>();
  c.errored = j.at("errored").get<std::int64_t>();
  return c;
}

ordered_json letter_or_null(const std::optional<Letter>& l) {
  return l ? ordered_json(std::string(1, *l)) : ordered_json(nullptr);
}

std::optional<Letter> letter_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw ConfigError("bad letter '" + s + "'");
  return s[0];
}

ordered_json error_to_json(const RecordError& e) {
  ordered_json j;
  j["kind"] = e.kind;
  j["stage"] = e.stage;
  j["message"] = e.message;
  return j;
}

}  // namespace

ordered_json report_to_json(const EvalReport& r) {
  ordered_json j;
  j["config"] = config_to_json(r.config);
  j["overall"] = counts_to_json(r.overall);
  j["per_category"] = ordered_json::object();
  j["macro_per_category"] = ordered_json::object();
  for (Category cat : {Category::CognitiveInference, Category::VisualSemantic}) {
    const std::string name(category_name(cat));
    j["per_category"][name] = counts_to_json(r.per_category.count(cat) ? r.per_category.at(cat) : Counts{});
    const auto macro = r.macro_per_category.count(cat) ? r.macro_per_category.at(cat) : 0;
    j["macro_per_category"][name] = static_cast<double>(macro) / 100.0;
  }
  j["per_task"] = ordered_json::object();
  for (TaskKind t : kAllTasks) {
    j["per_task"][std::string(task_name(t))] = counts_to_json(r.per_task.count(t) ? r.per_task.at(t) : Counts{});
  }
  j["traces_path"] = r.traces_path ? ordered_json(*r.traces_path) : ordered_json(nullptr);
  j["records"] = ordered_json::array();
  j["errors"] = ordered_json::array();
  for (const auto& rec : r.records) {
    ordered_json rj;
    rj["index"] = rec.index;
    rj["id"] = rec.id;
    rj["task"] = task_name(rec.task);
    rj["truth"] = letter_or_null(rec.truth);
    rj["answer"] = letter_or_null(rec.answer);
    rj["correct"] = rec.correct;
    rj["error"] = rec.error ? error_to_json(*rec.error) : ordered_json(nullptr);
    j["records"].push_back(std::move(rj));
    if (rec.error) {
      ordered_json ej;
      ej["id"] = rec.id;
      ej.update(error_to_json(*rec.error));
      j["errors"].push_back(std::move(ej));
    }
  }
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  try {
    r.config = config_from_json(j.at("config"));
    r.overall = counts_from_json(j.at("overall"));
    for (Category cat : {Category::CognitiveInference, Category::VisualSemantic}) {
      const std::string name(category_name(cat));
      r.per_category[cat] = counts_from_json(j.at("per_category").at(name));
      r.macro_per_category[cat] =
          static_cast<std::int64_t>(std::llround(j.at("macro_per_category").at(name).get<double>() * 100.0));
    }
    for (TaskKind t : kAllTasks) r.per_task[t] = counts_from_json(j.at("per_task").at(std::string(task_name(t))));
    if (!j.at("traces_path").is_null()) r.traces_path = j.at("traces_path").get<std::string>();
    for (const auto& rj : j.at("records")) {
      RecordResult rec;
      rec.index = rj.at("index").get<std::size_t>();
      rec.id = rj.at("id").get<std::string>();
      const auto task = task_from_name(rj.at("task").get<std::string>());
      if (!task) throw ConfigError("unknown task in report");
      rec.task = *task;
      rec.truth = letter_from_json(rj.at("truth"));
      rec.answer = letter_from_json(rj.at("answer"));
      rec.correct = rj.at("correct").get<bool>();
      if (!rj.at("error").is_null()) {
        const auto& ej = rj.at("error");
        rec.error = RecordError{ej.at("kind").get<std::string>(), ej.at("stage").get<std::string>(),
                                ej.at("message").get<std::string>()};
      }
      r.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string dump_report(const EvalReport& r) {
  return report_to_json(r).dump(2, ' ', false, ordered_json::error_handler_t::replace) + "\n";
}

std::string render_table(const EvalReport& r) {
  auto pct = [](const Counts& c) { return format_hundredths(accuracy_hundredths(c.correct, c.total)); };
  auto task = [&](TaskKind t) { return r.per_task.count(t) ? r.per_task.at(t) : Counts{}; };
  auto cat = [&](Category c) { return r.per_category.count(c) ? r.per_category.at(c) : Counts{}; };
  auto macro = [&](Category c) {
    return format_hundredths(r.macro_per_category.count(c) ? r.macro_per_category.at(c) : 0);
  };

  std::string setting;
  if (r.config.no_cot) setting += "no-cot ";
  if (r.config.no_rag) setting += "no-rag ";
  if (r.config.no_panel) setting += "no-panel ";
  setting = setting.empty() ? "full" : text::trim(setting);

  const std::vector<std::string> head = {"Setting", "Overall", "ActPred", "Out",   "Pat",
                                         "CogAvg",  "ActRec",  "InstRec", "VisAvg"};
  const std::vector<std::string> row = {setting,
                                        pct(r.overall),
                                        pct(task(TaskKind::ActionPrediction)),
                                        pct(task(TaskKind::OutcomeAssessment)),
                                        pct(task(TaskKind::PatientData)),
                                        pct(cat(Category::CognitiveInference)),
                                        pct(task(TaskKind::ActionRecognition)),
                                        pct(task(TaskKind::InstrumentRecognition)),
                                        pct(cat(Category::VisualSemantic))};
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = std::max<std::size_t>({head[i].size(), row[i].size(), 6});

  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += " | ";
      const std::string pad(width[i] - cells[i].size(), ' ');
      out += i == 0 ? cells[i] + pad : pad + cells[i];
    }
    return out + "\n";
  };
  std::string out = line(head);
  std::string rule;
  for (std::size_t i = 0; i < width.size(); ++i) {
    if (i > 0) rule += "-+-";
    rule += std::string(width[i], '-');
  }
  out += rule + "\n";
  out += line(row);
  out += "macro averages: CogAvg " + macro(Category::CognitiveInference) + ", VisAvg " +
         macro(Category::VisualSemantic) + "; n=" + std::to_string(r.overall.total) +
         ", errored=" + std::to_string(r.overall.errored) + "\n";
  return out;
}

const Query* find_companion(const std::vector<Query>& records, std::size_t i) {
  const Query& q = records.at(i);
  TaskKind want;
  if (q.task == TaskKind::ActionRecognition) {
    want = TaskKind::InstrumentRecognition;
  } else if (q.task == TaskKind::InstrumentRecognition) {
    want = TaskKind::ActionRecognition;
  } else {
    return nullptr;
  }
  for (const auto& other : records) {
    if (other.task != want || other.perspective != q.perspective) continue;
    const bool same_frame = !q.image.path.empty() ? other.image.path == q.image.path
                                                   : (other.image.data && q.image.data &&
                                                      *other.image.data == *q.image.data);
    if (same_frame) return &other;
  }
  return nullptr;
}

std::string trace_file_name(std::size_t index, const std::string& id) {
  std::string safe;
  for (char c : id) {
    const auto u = static_cast<unsigned char>(c);
    safe.push_back(std::isalnum(u) || c == '-' || c == '_' || c == '.' ? c : '_');
  }
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%04zu_", index);
  return prefix + safe + ".json";
}

EvalRun evaluate(const std::vector<Query>& all, const EvalConfig& cfg, const orchestrator::Engine& engine,
                 const RunOptions& options) {
  if (cfg.limit && *cfg.limit < 1) throw ConfigError("limit must be >= 1");
  if (options.max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
  const std::size_t n = cfg.limit ? std::min<std::size_t>(all.size(), static_cast<std::size_t>(*cfg.limit))
                                  : all.size();
  const std::vector<Query> records(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));

  std::vector<RecordResult> results(n);
  std::vector<std::optional<Trace>> traces(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const Query& q = records[i];
      RecordResult& res = results[i];
      res.index = i;
      res.id = q.id;
      res.task = q.task;
      res.truth = q.truth;
      try {
        orchestrator::RunInput in;
        in.query = &q;
        in.companion = find_companion(records, i);
        Trace t = orchestrator::run_pipeline(in, cfg, engine);
        res.answer = t.final_answer;
        res.correct = q.truth && *q.truth == t.final_answer;
        traces[i] = std::move(t);
      } catch (const StageError& e) {
        res.error = RecordError{e.inner_kind(), e.stage(), e.what()};
      } catch (const Error& e) {
        res.error = RecordError{e.kind(), "", e.what()};
      } catch (const std::exception& e) {
        res.error = RecordError{"InternalError", "", e.what()};
      }
    }
  };
  const std::size_t width = std::min<std::size_t>(static_cast<std::size_t>(options.max_concurrency),
                                                  std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < width; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  EvalRun run;
  run.report = aggregate(std::move(results), cfg);
  if (options.traces_dir) {
    std::filesystem::create_directories(*options.traces_dir);
    run.report.traces_path = options.traces_dir->string();
    for (std::size_t i = 0; i < n; ++i) {
      if (!traces[i]) continue;
      std::ofstream out(*options.traces_dir / trace_file_name(i, records[i].id), std::ios::binary);
      if (!out) throw ConfigError("cannot write traces to " + options.traces_dir->string());
      out << dump_trace(*traces[i]);
    }
  }
  run.traces = std::move(traces);
  return run;
}

}  // namespace surgraw::bench
