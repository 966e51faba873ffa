#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surgraw/core.hpp"

namespace surgraw::cot {

struct Stage {
  std::string label;
  std::string instruction;
};

struct StageProgram {
  TaskKind task = TaskKind::Unknown;
  std::vector<Stage> stages;

  std::vector<std::string> labels() const;
};

// Declared stage order every program of the category must follow.
const std::vector<std::string>& expected_labels(Category category);

// One prompt program loaded from `templates/<task>.txt`.
//
// File layout: `#` comment lines (a `# version: <v>` comment names the
// version), then sections introduced by `@system`, `@user` and one
// `@stage <Label>` per reasoning stage.
struct TaskTemplate {
  std::string version;
  std::string system_text;
  std::string user_text;
  StageProgram program;
};

// Free-form template (evaluator, coordinator): `@system` and `@user` only.
struct PlainTemplate {
  std::string version;
  std::string system_text;
  std::string user_text;
};

class TemplateSet {
 public:
  // Reads the five task templates plus evaluator.txt and coordinator.txt.
  // Throws TemplateError / UnknownPlaceholder on malformed files.
  static TemplateSet load(const std::filesystem::path& dir);
  static TemplateSet load_default();
  static std::filesystem::path default_dir();

  const TaskTemplate& task(TaskKind task) const;
  const PlainTemplate& evaluator() const { return evaluator_; }
  const PlainTemplate& coordinator() const { return coordinator_; }

 private:
  std::map<TaskKind, TaskTemplate> tasks_;
  PlainTemplate evaluator_;
  PlainTemplate coordinator_;
};

TaskTemplate parse_task_template(TaskKind task, std::string_view body);
PlainTemplate parse_plain_template(std::string_view body, const std::vector<std::string>& allowed);

inline constexpr std::string_view kAnswerDirective =
    "Respond with your reasoning for each numbered stage, then end with a line \"FINAL ANSWER: "
    "<letter>\".";

inline constexpr std::string_view kBareSystemText =
    "You answer multiple-choice questions about frames from robotic-assisted surgery videos.";

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
  bool placeholders_resolved = true;
  TaskKind task = TaskKind::Unknown;
  bool bare = false;
  std::vector<std::string> stage_labels;
};

// Renders the task's stage program for `q`. `context` must be present exactly
// when the task is cognitive-inference and retrieval is enabled.
RenderedPrompt render(const TemplateSet& templates, TaskKind task, const Query& q,
                      const std::optional<std::string>& context, bool rag_enabled);

// Question, option lines and answer directive only. Retrieved context, when
// given, is placed in the delimited block ahead of the question.
RenderedPrompt render_bare(const Query& q, const std::optional<std::string>& context = std::nullopt);

// Replaces {{name}} tokens from `values`. A line holding only a placeholder
// that expands to nothing is dropped. Unknown names throw UnknownPlaceholder.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string question_line(const Query& q);
std::string option_lines(const Query& q);
std::string perspective_clause(TaskKind task, std::optional<Perspective> perspective);
std::string context_block(std::string_view context);

// Labels of numbered "N. Label:" lines in a rendered prompt.
std::vector<std::string> prompt_stage_labels(std::string_view user_text);

// Program labels mentioned in a model response, ordered by first mention.
std::vector<std::string> response_stage_labels(std::string_view response,
                                               const std::vector<std::string>& labels);

bool has_unresolved_placeholder(std::string_view text);

}  // namespace surgraw::cot
