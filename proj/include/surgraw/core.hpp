#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surgraw/errors.hpp"

namespace surgraw {

enum class TaskKind {
  ActionRecognition,
  InstrumentRecognition,
  ActionPrediction,
  OutcomeAssessment,
  PatientData,
  Unknown,
};

inline constexpr std::array<TaskKind, 5> kAllTasks = {
    TaskKind::ActionRecognition, TaskKind::InstrumentRecognition, TaskKind::ActionPrediction,
    TaskKind::OutcomeAssessment, TaskKind::PatientData};

enum class Category { VisualSemantic, CognitiveInference };

enum class AgentId {
  DepartmentCoordinator,
  VisualSemanticHead,
  CognitiveInferenceHead,
  ActionInterpreter,
  ActionPredictor,
  InstrumentSpecialist,
  OutcomeAnalyst,
  PatientAdvocate,
  ActionEvaluator,
};

enum class Perspective { Left, Right, Whole };

// snake_case wire names ("action_recognition", ...). Unknown maps to "unknown".
std::string_view task_name(TaskKind task);
std::optional<TaskKind> task_from_name(std::string_view name);

std::string_view category_name(Category category);
std::optional<Category> category_from_name(std::string_view name);

std::string_view agent_name(AgentId agent);
// Human-facing title, e.g. "Instrument Specialist".
std::string_view agent_title(AgentId agent);
std::optional<AgentId> agent_from_name(std::string_view name);

std::string_view perspective_name(Perspective p);
std::optional<Perspective> perspective_from_name(std::string_view name);

// ActionRecognition and InstrumentRecognition are visual-semantic; the three
// remaining tasks are cognitive-inference. Throws MalformedQuery for Unknown.
Category task_category(TaskKind task);

// One-to-one mapping between the five task kinds and the five task agents.
AgentId task_agent(TaskKind task);
std::optional<TaskKind> agent_task(AgentId agent);

using Letter = char;

// Frame payload. Either inline bytes (HTTP ask) or a file path resolved lazily
// (datasets reference frames shared by several queries).
struct Image {
  std::string media_type;
  std::shared_ptr<const std::string> data;
  std::filesystem::path path;

  // Returns the payload, reading `path` when no inline data is present.
  std::string bytes() const;

  static Image from_bytes(std::string media_type, std::string bytes);
  static Image from_file(const std::filesystem::path& path);
};

// Media type from a file extension; empty when unsupported.
std::string media_type_for(const std::filesystem::path& path);

struct Query {
  std::string id;
  Image image;
  TaskKind task = TaskKind::Unknown;
  std::optional<Perspective> perspective;
  std::string question;
  std::map<Letter, std::string> options;
  std::optional<Letter> truth;
  std::optional<std::string> procedure;

  const std::string& option_text(Letter letter) const;
  bool has_option(Letter letter) const { return options.count(letter) != 0; }
};

inline constexpr std::size_t kMaxOptions = 5;

// Throws MalformedQuery naming the violated invariant.
void validate_query(const Query& q);

// Strips whitespace, punctuation and case; returns 'A'..'E' or throws NotALetter.
Letter normalize_letter(std::string_view raw);

}  // namespace surgraw
