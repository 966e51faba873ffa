#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surgraw/agent.hpp"
#include "surgraw/core.hpp"
#include "surgraw/cot.hpp"
#include "surgraw/kgraph.hpp"
#include "surgraw/trace.hpp"

namespace surgraw::panel {

struct PanelConfig {
  int max_rounds = 2;
  int coherence_threshold = 4;
  int synergy_threshold = 4;
  kg::UnknownPolicy unknown_policy = kg::UnknownPolicy::StrictUnknownFails;

  // Throws ConfigError.
  void validate() const;
};

struct TranscriptEntry {
  int round = 1;
  AgentTurn action_turn;
  AgentTurn instrument_turn;
  RubricScores scores;
  bool consistent = false;
};

struct PanelOutcome {
  Letter final_action_letter = 'A';
  Letter final_instrument_letter = 'A';
  int rounds_used = 0;
  bool resolved = false;
  bool fallback_used = false;
  std::vector<TranscriptEntry> transcript;
};

// True iff the instrument-action pair is permissible in the graph.
bool check_consistency(std::string_view action_answer, std::string_view instrument_answer,
                       const kg::KnowledgeGraph& g, kg::UnknownPolicy policy);

// Parses a judge reply: the last fenced block, else the outermost braces.
// Scores are clamped to [1, 5]; clamping sets `flagged`. nullopt when no JSON
// object with numeric coherence and synergy is found.
std::optional<RubricScores> parse_judge_reply(std::string_view reply);

inline constexpr std::string_view kJudgeReminder =
    "Your previous reply could not be parsed. Reply with only a fenced JSON block of the form "
    "```json\n{\"coherence\": <integer 1-5>, \"synergy\": <integer 1-5>, \"feedback\": \"<text>\"}\n```";

inline constexpr std::string_view kJudgeUnparseable = "judge unparseable";

struct JudgeResult {
  RubricScores scores;
  std::string fingerprint;  // of the final judge request
  std::string response;     // final judge reply
  int attempts = 1;
};

// Graph facts shown to the judge for an (action, instrument) answer pair.
std::string kg_excerpt(const kg::KnowledgeGraph& g, std::string_view action_answer,
                       std::string_view instrument_answer, kg::UnknownPolicy policy);

// One logical judge call: a retry with kJudgeReminder when the first reply is
// unparseable, then the (3, 3, "judge unparseable") default, flagged.
JudgeResult score_rubrics(const agent::CallContext& ctx, const cot::TemplateSet& templates,
                          const AgentTurn& action_turn, const AgentTurn& instrument_turn,
                          const std::string& excerpt);

// Feedback message for the round-2 action prompt.
std::string revision_message(const std::string& feedback, const std::string& instrument_answer,
                             const std::vector<std::string>& permissible);

// Emits Prompt, AgentTurn and PanelRound payloads in trace order.
using Emit = std::function<void(EventPayload)>;

struct DiscussionInput {
  const Query* action_query = nullptr;
  const Query* instrument_query = nullptr;
  // ActionInterpreter or InstrumentSpecialist.
  AgentId primary = AgentId::ActionInterpreter;
  bool use_cot = true;
};

// Runs the bounded discussion. Round 1 calls both agents (concurrently) and the
// judge; later rounds re-prompt the Action Interpreter only. With the
// Instrument Specialist as primary a single round is run and no answer is
// revised. Throws StageError("panel", ...) on provider or parse failures.
PanelOutcome discuss(const DiscussionInput& in, const agent::CallContext& ctx,
                     const cot::TemplateSet& templates, const kg::KnowledgeGraph& g,
                     const PanelConfig& cfg, const Emit& emit);

// First option, in letter order, whose text the graph permits for the
// instrument; nullopt when none does.
std::optional<Letter> first_compatible_option(const Query& action_query,
                                              std::string_view instrument_answer,
                                              const kg::KnowledgeGraph& g);

}  // namespace surgraw::panel
