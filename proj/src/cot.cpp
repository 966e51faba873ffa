#include "surgraw/cot.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "surgraw/text.hpp"

namespace surgraw::cot {

namespace {

const std::vector<std::string> kVisualLabels = {"QuestionAnalysis", "ContextualExtraction",
                                                "Validation", "OptionElimination",
                                                "FinalSelection"};
const std::vector<std::string> kCognitiveLabels = {
    "QuestionDecomposition", "FeatureExtraction",        "TaskReasoning",
    "CrossReference",        "ContradictionElimination", "FinalSelection"};

const std::vector<std::string> kTaskPlaceholders = {"question", "options", "perspective", "context"};
const std::vector<std::string> kEvaluatorPlaceholders = {"action_cot", "instrument_cot", "kg_excerpt"};
const std::vector<std::string> kCoordinatorPlaceholders = {"question", "tasks"};

struct Section {
  std::string name;
  std::string argument;
  std::vector<std::string> lines;
};

struct ParsedFile {
  std::string version;
  std::vector<Section> sections;
};

std::string strip_blank_edges(const std::vector<std::string>& lines) {
  std::size_t begin = 0;
  std::size_t end = lines.size();
  while (begin < end && text::trim(lines[begin]).empty()) ++begin;
  while (end > begin && text::trim(lines[end - 1]).empty()) --end;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

ParsedFile parse_sections(std::string_view body) {
  ParsedFile file;
  for (const auto& raw : text::split_lines(body)) {
    if (raw.empty() == false && raw[0] == '@') {
      Section s;
      const auto words = text::split_words(raw.substr(1));
      if (words.empty()) throw TemplateError("empty section header");
      s.name = words[0];
      if (words.size() > 1) s.argument = words[1];
      if (words.size() > 2) throw TemplateError("section header has extra words: " + raw);
      file.sections.push_back(std::move(s));
      continue;
    }
    if (file.sections.empty()) {
      const std::string line = text::trim(raw);
      if (line.empty()) continue;
      if (line[0] != '#') throw TemplateError("text before the first section: " + line);
      const std::string comment = text::trim(line.substr(1));
      if (text::starts_with(comment, "version:")) file.version = text::trim(comment.substr(8));
      continue;
    }
    file.sections.back().lines.push_back(raw);
  }
  return file;
}

// Rejects placeholder names outside `allowed` at load time.
void check_placeholders(std::string_view tmpl, const std::vector<std::string>& allowed) {
  std::map<std::string, std::string> values;
  for (const auto& name : allowed) values[name] = "x";
  (void)substitute(tmpl, values);
}

std::string sanitize_value(std::string v) {
  v = text::replace_all(std::move(v), "{{", "{ {");
  return text::replace_all(std::move(v), "}}", "} }");
}

std::string collapse_blank_runs(const std::string& s) {
  std::string out;
  int newlines = 0;
  for (char c : s) {
    if (c == '\n') {
      if (++newlines > 2) continue;
    } else {
      newlines = 0;
    }
    out.push_back(c);
  }
  return out;
}

std::string one_line(std::string_view s) {
  std::string out = text::trim(s);
  for (char& c : out) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  }
  return out;
}

}  // namespace

std::vector<std::string> StageProgram::labels() const {
  std::vector<std::string> out;
  for (const auto& s : stages) out.push_back(s.label);
  return out;
}

const std::vector<std::string>& expected_labels(Category category) {
  return category == Category::VisualSemantic ? kVisualLabels : kCognitiveLabels;
}

TaskTemplate parse_task_template(TaskKind task, std::string_view body) {
  const ParsedFile file = parse_sections(body);
  TaskTemplate t;
  t.version = file.version;
  t.program.task = task;
  bool have_system = false;
  bool have_user = false;
  for (const auto& s : file.sections) {
    const std::string content = strip_blank_edges(s.lines);
    if (s.name == "system") {
      t.system_text = content;
      have_system = true;
    } else if (s.name == "user") {
      t.user_text = content;
      have_user = true;
    } else if (s.name == "stage") {
      if (s.argument.empty()) throw TemplateError("@stage without a label");
      if (content.empty()) throw TemplateError("stage " + s.argument + " has no instruction");
      t.program.stages.push_back(Stage{s.argument, one_line(content)});
    } else {
      throw TemplateError("unknown section @" + s.name);
    }
  }
  const std::string name(task_name(task));
  if (!have_system || !have_user) throw TemplateError(name + ": needs @system and @user sections");
  if (t.program.labels() != expected_labels(task_category(task))) {
    throw TemplateError(name + ": stage labels do not follow the declared program order");
  }
  check_placeholders(t.system_text, {});
  check_placeholders(t.user_text, kTaskPlaceholders);
  for (const auto& s : t.program.stages) check_placeholders(s.instruction, {});
  return t;
}

PlainTemplate parse_plain_template(std::string_view body, const std::vector<std::string>& allowed) {
  const ParsedFile file = parse_sections(body);
  PlainTemplate t;
  t.version = file.version;
  bool have_system = false;
  bool have_user = false;
  for (const auto& s : file.sections) {
    if (s.name == "system") {
      t.system_text = strip_blank_edges(s.lines);
      have_system = true;
    } else if (s.name == "user") {
      t.user_text = strip_blank_edges(s.lines);
      have_user = true;
    } else {
      throw TemplateError("unexpected section @" + s.name);
    }
  }
  if (!have_system || !have_user) throw TemplateError("template needs @system and @user sections");
  check_placeholders(t.system_text, {});
  check_placeholders(t.user_text, allowed);
  return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  auto read = [&](const std::string& file) {
    const auto path = dir / file;
    try {
      return text::read_file(path.string());
    } catch (const std::exception&) {
      throw TemplateError("cannot read template " + path.string());
    }
  };
  TemplateSet set;
  for (TaskKind task : kAllTasks) {
    const std::string file = std::string(task_name(task)) + ".txt";
    try {
      set.tasks_[task] = parse_task_template(task, read(file));
    } catch (const TemplateError& e) {
      throw TemplateError(file + ": " + e.what());
    }
  }
  set.evaluator_ = parse_plain_template(read("evaluator.txt"), kEvaluatorPlaceholders);
  set.coordinator_ = parse_plain_template(read("coordinator.txt"), kCoordinatorPlaceholders);
  return set;
}

std::filesystem::path TemplateSet::default_dir() {
#ifdef SURGRAW_DEFAULT_TEMPLATES_DIR
  return SURGRAW_DEFAULT_TEMPLATES_DIR;
#else
  return "templates";
#endif
}

TemplateSet TemplateSet::load_default() { return load(default_dir()); }

const TaskTemplate& TemplateSet::task(TaskKind task) const {
  auto it = tasks_.find(task);
  if (it == tasks_.end()) throw TemplateError("no template for task " + std::string(task_name(task)));
  return it->second;
}

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::vector<std::string> kept;
  for (const std::string& line : text::split_lines(tmpl)) {
    std::string rendered;
    bool had_literal_text = false;
    bool had_placeholder = false;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const std::size_t open = line.find("{{", pos);
      const std::size_t literal_end = open == std::string::npos ? line.size() : open;
      if (!text::trim(std::string_view(line).substr(pos, literal_end - pos)).empty()) {
        had_literal_text = true;
      }
      rendered.append(line, pos, literal_end - pos);
      if (open == std::string::npos) break;
      const std::size_t close = line.find("}}", open + 2);
      if (close == std::string::npos) throw UnknownPlaceholder("unterminated placeholder in: " + line);
      const std::string name = text::trim(std::string_view(line).substr(open + 2, close - open - 2));
      auto it = values.find(name);
      if (it == values.end()) throw UnknownPlaceholder("unknown placeholder {{" + name + "}}");
      rendered += sanitize_value(it->second);
      had_placeholder = true;
      pos = close + 2;
    }
    if (had_placeholder && !had_literal_text && text::trim(rendered).empty()) continue;
    kept.push_back(std::move(rendered));
  }
  return text::join(kept, "\n");
}

std::string question_line(const Query& q) { return "Question: " + one_line(q.question); }

std::string option_lines(const Query& q) {
  std::string out;
  for (const auto& [letter, option] : q.options) {
    if (!out.empty()) out.push_back('\n');
    out += std::string(1, letter) + ". " + one_line(option);
  }
  return out;
}

std::string perspective_clause(TaskKind task, std::optional<Perspective> perspective) {
  if (!perspective) return {};
  if (*perspective == Perspective::Whole) return "Consider the whole frame.";
  const char* subject = task == TaskKind::InstrumentRecognition ? "instrument" : "action";
  return std::string("Consider only the ") + subject + " on the " +
         std::string(perspective_name(*perspective)) + " side of the frame.";
}

std::string context_block(std::string_view context) {
  return "=== RETRIEVED CONTEXT ===\n" + text::trim(context) + "\n=== END RETRIEVED CONTEXT ===";
}

RenderedPrompt render(const TemplateSet& templates, TaskKind task, const Query& q,
                      const std::optional<std::string>& context, bool rag_enabled) {
  const Category category = task_category(task);
  if (category == Category::CognitiveInference && rag_enabled && !context) {
    throw MissingContext("cognitive task " + std::string(task_name(task)) +
                         " rendered with retrieval enabled but no context");
  }
  if (context && (category == Category::VisualSemantic || !rag_enabled)) {
    throw TemplateError("context supplied to a prompt that does not take retrieval context");
  }
  const TaskTemplate& tmpl = templates.task(task);

  std::map<std::string, std::string> values;
  values["question"] = one_line(q.question);
  values["options"] = option_lines(q);
  values["perspective"] =
      category == Category::VisualSemantic ? perspective_clause(task, q.perspective) : "";
  values["context"] = context ? context_block(*context) : "";

  std::string user = text::trim(substitute(tmpl.user_text, values));
  user += "\n\n";
  for (std::size_t i = 0; i < tmpl.program.stages.size(); ++i) {
    const auto& stage = tmpl.program.stages[i];
    user += std::to_string(i + 1) + ". " + stage.label + ": " + stage.instruction + "\n";
  }
  user += "\n";
  user += kAnswerDirective;

  RenderedPrompt out;
  out.system_text = substitute(tmpl.system_text, {});
  out.user_text = collapse_blank_runs(user);
  out.task = task;
  out.stage_labels = prompt_stage_labels(out.user_text);
  out.placeholders_resolved =
      !has_unresolved_placeholder(out.user_text) && !has_unresolved_placeholder(out.system_text);
  return out;
}

RenderedPrompt render_bare(const Query& q, const std::optional<std::string>& context) {
  RenderedPrompt out;
  out.system_text = std::string(kBareSystemText);
  if (context) out.user_text = sanitize_value(context_block(*context)) + "\n\n";
  out.user_text += sanitize_value(question_line(q) + "\nOptions:\n" + option_lines(q)) + "\n\n" +
                   std::string(kAnswerDirective);
  out.task = q.task;
  out.bare = true;
  return out;
}

std::vector<std::string> prompt_stage_labels(std::string_view user_text) {
  std::vector<std::string> labels;
  for (const auto& line : text::split_lines(user_text)) {
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i + 1 >= line.size() || line[i] != '.' || line[i + 1] != ' ') continue;
    const std::size_t start = i + 2;
    const std::size_t colon = line.find(':', start);
    if (colon == std::string::npos) continue;
    const std::string label = line.substr(start, colon - start);
    bool word = !label.empty();
    for (char c : label) word = word && std::isalnum(static_cast<unsigned char>(c));
    if (word) labels.push_back(label);
  }
  return labels;
}

std::vector<std::string> response_stage_labels(std::string_view response,
                                               const std::vector<std::string>& labels) {
  std::vector<std::pair<std::size_t, std::string>> found;
  for (const auto& label : labels) {
    std::size_t pos = response.find(label);
    while (pos != std::string_view::npos) {
      const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(response[pos - 1]));
      const std::size_t end = pos + label.size();
      const bool right_ok =
          end == response.size() || !std::isalnum(static_cast<unsigned char>(response[end]));
      if (left_ok && right_ok) {
        found.emplace_back(pos, label);
        break;
      }
      pos = response.find(label, pos + 1);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (auto& [pos, label] : found) out.push_back(std::move(label));
  return out;
}

bool has_unresolved_placeholder(std::string_view s) {
  const auto open = s.find("{{");
  return open != std::string_view::npos && s.find("}}", open) != std::string_view::npos;
}

}  // namespace surgraw::cot
