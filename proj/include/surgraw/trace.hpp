#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "surgraw/core.hpp"

namespace surgraw {

// Result-affecting run configuration; snapshotted into every Trace and report.
// Worker-pool width is deliberately not part of it (see bench::RunOptions).
struct EvalConfig {
  bool no_cot = false;
  bool no_rag = false;
  bool no_panel = false;
  std::string provider = "mock";
  std::string model = "gpt-4o";
  std::optional<int> limit;
  std::uint64_t seed = 0;

  bool operator==(const EvalConfig&) const = default;
};

enum class RoutingMethod { MetadataMap, CoordinatorModel, KeywordFallback };

std::string_view routing_method_name(RoutingMethod m);

struct RoutingDecision {
  Category category = Category::VisualSemantic;
  TaskKind task = TaskKind::ActionRecognition;
  AgentId agent = AgentId::ActionInterpreter;
  RoutingMethod method = RoutingMethod::MetadataMap;

  bool operator==(const RoutingDecision&) const = default;
};

struct RoutingEvent {
  RoutingDecision decision;
  std::optional<std::string> coordinator_fingerprint;
  std::optional<std::string> coordinator_response;
};

struct RetrievalHitRecord {
  std::string doc_id;
  int ordinal = 0;
  std::string title;
  double score = 0.0;
};

struct RetrievalEvent {
  std::string query_text;
  int k = 0;
  std::vector<RetrievalHitRecord> hits;
};

struct PromptEvent {
  AgentId agent = AgentId::ActionInterpreter;
  std::string query_id;
  int round = 1;
  bool bare = false;
  std::string fingerprint;
  std::string system_text;
  std::string user_text;
  std::vector<std::string> stage_labels;
};

enum class ParseRule { FinalAnswer, LoneLetter, OptionText };

std::string_view parse_rule_name(ParseRule rule);

struct AgentTurn {
  AgentId agent = AgentId::ActionInterpreter;
  std::string query_id;
  int round = 1;
  std::string prompt_fingerprint;
  std::string response_text;
  std::optional<Letter> parsed_answer;
  std::optional<ParseRule> parse_rule;
  std::vector<std::string> stage_labels;
  std::int64_t latency_ms = 0;

  bool parse_flagged() const { return parse_rule && *parse_rule != ParseRule::FinalAnswer; }
};

struct RubricScores {
  int coherence = 3;
  int synergy = 3;
  std::string feedback;
  // Set when the judge reply was clamped or unparseable.
  bool flagged = false;
  std::string flag_reason;

  bool operator==(const RubricScores&) const = default;
};

struct PanelEvent {
  int round = 1;
  Letter action_letter = 'A';
  Letter instrument_letter = 'A';
  std::string action_text;
  std::string instrument_text;
  bool consistent = false;
  RubricScores scores;
  std::string judge_fingerprint;
  std::string judge_response;
  int judge_attempts = 1;
  bool resolved = false;
  // Present only on the round that ended the discussion.
  bool final_round = false;
  bool fallback_used = false;
};

enum class AnswerSource { Agent, Panel, PanelFallback };

std::string_view answer_source_name(AnswerSource s);

struct FinalEvent {
  Letter answer = 'A';
  bool resolved = true;
  AnswerSource source = AnswerSource::Agent;
};

using EventPayload =
    std::variant<RoutingEvent, RetrievalEvent, PromptEvent, AgentTurn, PanelEvent, FinalEvent>;

enum class EventKind { Routing, Retrieval, Prompt, AgentTurn, PanelRound, Final };

std::string_view event_kind_name(EventKind kind);

struct TraceEvent {
  int seq = 0;
  EventPayload payload;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }
};

struct PanelSummary {
  int rounds_used = 0;
  bool resolved = false;
  Letter final_action_letter = 'A';
  Letter final_instrument_letter = 'A';
  bool fallback_used = false;
  std::string companion_query_id;
  bool companion_synthesized = false;
};

struct Trace {
  std::string query_id;
  TaskKind task = TaskKind::Unknown;
  Category category = Category::VisualSemantic;
  std::int64_t started_at_ms = 0;
  std::vector<TraceEvent> events;
  Letter final_answer = 'A';
  // True when the answer was accepted without an unresolved panel.
  bool resolved = true;
  std::optional<PanelSummary> panel;
  // Parser fallbacks and judge anomalies, in the order they occurred.
  std::vector<std::string> flags;
  EvalConfig config;

  std::size_t count(EventKind kind) const;
};

}  // namespace surgraw
