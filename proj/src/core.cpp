#include "surgraw/core.hpp"

#include <cctype>

#include "surgraw/text.hpp"
#include "surgraw/trace.hpp"

namespace surgraw {

namespace {

struct TaskRow {
  TaskKind task;
  std::string_view name;
  AgentId agent;
};

constexpr std::array<TaskRow, 5> kTaskRows = {{
    {TaskKind::ActionRecognition, "action_recognition", AgentId::ActionInterpreter},
    {TaskKind::InstrumentRecognition, "instrument_recognition", AgentId::InstrumentSpecialist},
    {TaskKind::ActionPrediction, "action_prediction", AgentId::ActionPredictor},
    {TaskKind::OutcomeAssessment, "outcome_assessment", AgentId::OutcomeAnalyst},
    {TaskKind::PatientData, "patient_data", AgentId::PatientAdvocate},
}};

struct AgentRow {
  AgentId agent;
  std::string_view name;
  std::string_view title;
};

constexpr std::array<AgentRow, 9> kAgentRows = {{
    {AgentId::DepartmentCoordinator, "department_coordinator", "Department Coordinator"},
    {AgentId::VisualSemanticHead, "visual_semantic_head", "Visual-Semantic Department Head"},
    {AgentId::CognitiveInferenceHead, "cognitive_inference_head",
     "Cognitive-Inference Department Head"},
    {AgentId::ActionInterpreter, "action_interpreter", "Action Interpreter"},
    {AgentId::ActionPredictor, "action_predictor", "Action Predictor"},
    {AgentId::InstrumentSpecialist, "instrument_specialist", "Instrument Specialist"},
    {AgentId::OutcomeAnalyst, "outcome_analyst", "Outcome Analyst"},
    {AgentId::PatientAdvocate, "patient_advocate", "Patient Advocate"},
    {AgentId::ActionEvaluator, "action_evaluator", "Action Evaluator"},
}};

}  // namespace

std::string_view task_name(TaskKind task) {
  for (const auto& row : kTaskRows) {
    if (row.task == task) return row.name;
  }
  return "unknown";
}

std::optional<TaskKind> task_from_name(std::string_view name) {
  for (const auto& row : kTaskRows) {
    if (row.name == name) return row.task;
  }
  if (name == "unknown") return TaskKind::Unknown;
  return std::nullopt;
}

std::string_view category_name(Category category) {
  return category == Category::VisualSemantic ? "visual_semantic" : "cognitive_inference";
}

std::optional<Category> category_from_name(std::string_view name) {
  if (name == "visual_semantic") return Category::VisualSemantic;
  if (name == "cognitive_inference") return Category::CognitiveInference;
  return std::nullopt;
}

std::string_view agent_name(AgentId agent) {
  for (const auto& row : kAgentRows) {
    if (row.agent == agent) return row.name;
  }
  return "unknown";
}

std::string_view agent_title(AgentId agent) {
  for (const auto& row : kAgentRows) {
    if (row.agent == agent) return row.title;
  }
  return "Unknown";
}

std::optional<AgentId> agent_from_name(std::string_view name) {
  for (const auto& row : kAgentRows) {
    if (row.name == name) return row.agent;
  }
  return std::nullopt;
}

std::string_view perspective_name(Perspective p) {
  switch (p) {
    case Perspective::Left: return "left";
    case Perspective::Right: return "right";
    case Perspective::Whole: return "whole";
  }
  return "whole";
}

std::optional<Perspective> perspective_from_name(std::string_view name) {
  if (name == "left") return Perspective::Left;
  if (name == "right") return Perspective::Right;
  if (name == "whole") return Perspective::Whole;
  return std::nullopt;
}

Category task_category(TaskKind task) {
  switch (task) {
    case TaskKind::ActionRecognition:
    case TaskKind::InstrumentRecognition:
      return Category::VisualSemantic;
    case TaskKind::ActionPrediction:
    case TaskKind::OutcomeAssessment:
    case TaskKind::PatientData:
      return Category::CognitiveInference;
    case TaskKind::Unknown:
      break;
  }
  throw MalformedQuery("task_category: task is unknown");
}

AgentId task_agent(TaskKind task) {
  for (const auto& row : kTaskRows) {
    if (row.task == task) return row.agent;
  }
  throw MalformedQuery("task_agent: no agent for unknown task");
}

std::optional<TaskKind> agent_task(AgentId agent) {
  for (const auto& row : kTaskRows) {
    if (row.agent == agent) return row.task;
  }
  return std::nullopt;
}

std::string Image::bytes() const {
  if (data) return *data;
  if (path.empty()) return {};
  if (!std::filesystem::is_regular_file(path)) throw MissingImage(path.string());
  return text::read_file(path.string());
}

Image Image::from_bytes(std::string media_type, std::string bytes) {
  Image img;
  img.media_type = std::move(media_type);
  img.data = std::make_shared<const std::string>(std::move(bytes));
  return img;
}

Image Image::from_file(const std::filesystem::path& path) {
  Image img;
  img.media_type = media_type_for(path);
  img.path = path;
  return img;
}

std::string media_type_for(const std::filesystem::path& path) {
  const std::string ext = text::to_lower(path.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return {};
}

const std::string& Query::option_text(Letter letter) const {
  auto it = options.find(letter);
  if (it == options.end()) {
    throw MalformedQuery(std::string("no option ") + letter + " in query " + id);
  }
  return it->second;
}

void validate_query(const Query& q) {
  if (q.id.empty()) throw MalformedQuery("empty id");
  if (text::trim(q.question).empty()) throw MalformedQuery("empty question");
  if (q.image.media_type.empty()) throw MalformedQuery("missing image media type");
  if (!q.image.data && q.image.path.empty()) throw MalformedQuery("missing image payload");
  if (q.options.size() < 2) throw MalformedQuery("fewer than two options");
  if (q.options.size() > kMaxOptions) throw MalformedQuery("more than five options");
  Letter expected = 'A';
  for (const auto& [letter, option] : q.options) {
    if (letter != expected) throw MalformedQuery("non-consecutive letters");
    if (text::trim(option).empty()) throw MalformedQuery(std::string("empty option ") + letter);
    ++expected;
  }
  if (q.truth && !q.has_option(*q.truth)) throw MalformedQuery("truth not among options");
  if (q.perspective && q.task != TaskKind::Unknown && q.task != TaskKind::ActionRecognition &&
      q.task != TaskKind::InstrumentRecognition) {
    throw MalformedQuery("perspective on cognitive task");
  }
}

Letter normalize_letter(std::string_view raw) {
  std::string kept;
  for (char c : raw) {
    auto u = static_cast<unsigned char>(c);
    if (std::isspace(u) || std::ispunct(u)) continue;
    kept.push_back(static_cast<char>(std::toupper(u)));
  }
  if (kept.size() != 1 || kept[0] < 'A' || kept[0] > 'E') {
    throw NotALetter("not an option letter: '" + std::string(raw) + "'");
  }
  return kept[0];
}

std::string_view routing_method_name(RoutingMethod m) {
  switch (m) {
    case RoutingMethod::MetadataMap: return "metadata_map";
    case RoutingMethod::CoordinatorModel: return "coordinator_model";
    case RoutingMethod::KeywordFallback: return "keyword_fallback";
  }
  return "metadata_map";
}

std::string_view parse_rule_name(ParseRule rule) {
  switch (rule) {
    case ParseRule::FinalAnswer: return "final_answer";
    case ParseRule::LoneLetter: return "lone_letter";
    case ParseRule::OptionText: return "option_text";
  }
  return "final_answer";
}

std::string_view answer_source_name(AnswerSource s) {
  switch (s) {
    case AnswerSource::Agent: return "agent";
    case AnswerSource::Panel: return "panel";
    case AnswerSource::PanelFallback: return "panel_fallback";
  }
  return "agent";
}

std::string_view event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::Routing: return "routing";
    case EventKind::Retrieval: return "retrieval";
    case EventKind::Prompt: return "prompt";
    case EventKind::AgentTurn: return "agent_turn";
    case EventKind::PanelRound: return "panel_round";
    case EventKind::Final: return "final";
  }
  return "final";
}

std::size_t Trace::count(EventKind kind) const {
  std::size_t n = 0;
  for (const auto& e : events) {
    if (e.kind() == kind) ++n;
  }
  return n;
}

}  // namespace surgraw
