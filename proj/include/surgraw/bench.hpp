#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "surgraw/answer.hpp"
#include "surgraw/core.hpp"
#include "surgraw/orchestrator.hpp"
#include "surgraw/trace.hpp"

namespace surgraw::bench {

// JSON-lines dataset: one object per line with id, image (relative to the
// dataset file), procedure, task, perspective ("left" | "right", optional),
// question, options (letter -> text) and answer. Frames referenced by several
// records are read once.
// Throws DatasetParseError, DuplicateId, MissingImage.
std::vector<Query> load_dataset(const std::filesystem::path& path);
std::vector<Query> parse_dataset(std::string_view jsonl, const std::filesystem::path& base_dir);

// "left" / "right" appearing as a word in the question (exactly one of them).
std::optional<Perspective> infer_perspective(std::string_view question);

struct Counts {
  std::int64_t correct = 0;
  std::int64_t total = 0;
  // Records whose pipeline failed; included in total, never in correct.
  std::int64_t errored = 0;

  bool operator==(const Counts&) const = default;
};

// 100 * correct / total in hundredths of a percent, rounded half-up; 0 when
// total is 0.
std::int64_t accuracy_hundredths(std::int64_t correct, std::int64_t total);
// Unweighted mean of the per-entry accuracies (entries with total 0 are
// skipped), computed exactly and then rounded half-up to hundredths.
std::int64_t macro_hundredths(const std::vector<Counts>& parts);
// "71.00"
std::string format_hundredths(std::int64_t hundredths);

struct RecordError {
  std::string kind;
  std::string stage;
  std::string message;

  bool operator==(const RecordError&) const = default;
};

struct RecordResult {
  std::size_t index = 0;
  std::string id;
  TaskKind task = TaskKind::Unknown;
  std::optional<Letter> truth;
  std::optional<Letter> answer;
  bool correct = false;
  std::optional<RecordError> error;

  bool operator==(const RecordResult&) const = default;
};

struct EvalReport {
  std::map<TaskKind, Counts> per_task;
  // Pooled over the category's tasks.
  std::map<Category, Counts> per_category;
  Counts overall;
  // Supplementary unweighted means of the task accuracies, in hundredths.
  std::map<Category, std::int64_t> macro_per_category;
  EvalConfig config;
  std::optional<std::string> traces_path;
  // Dataset order.
  std::vector<RecordResult> records;

  bool operator==(const EvalReport&) const = default;
};

// Order-independent: results are sorted by index before counting.
EvalReport aggregate(std::vector<RecordResult> results, const EvalConfig& cfg);

nlohmann::ordered_json report_to_json(const EvalReport& r);
// Inverse of report_to_json; throws ConfigError on malformed input.
EvalReport report_from_json(const nlohmann::json& j);
std::string dump_report(const EvalReport& r);

// Columns: Overall | ActPred | Out | Pat | CogAvg | ActRec | InstRec | VisAvg.
std::string render_table(const EvalReport& r);

// How a run is executed; none of it affects results.
struct RunOptions {
  int max_concurrency = 4;
  // Writes <traces_dir>/<NNNN>_<id>.json for every completed record.
  std::optional<std::filesystem::path> traces_dir;
};

struct EvalRun {
  EvalReport report;
  // Per record, dataset order; empty for records whose pipeline failed.
  std::vector<std::optional<Trace>> traces;
};

// The sibling record serving as panel companion for records[i]: same frame and
// perspective, the complementary visual task, first in dataset order.
const Query* find_companion(const std::vector<Query>& records, std::size_t i);

// Runs every record (the first cfg.limit when set) on a bounded worker pool.
// Pipeline failures are counted as incorrect and listed in the report.
EvalRun evaluate(const std::vector<Query>& records, const EvalConfig& cfg,
                 const orchestrator::Engine& engine, const RunOptions& options = {});

// File name used for a trace dump.
std::string trace_file_name(std::size_t index, const std::string& id);

}  // namespace surgraw::bench
