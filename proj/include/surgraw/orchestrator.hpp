#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "surgraw/agent.hpp"
#include "surgraw/core.hpp"
#include "surgraw/cot.hpp"
#include "surgraw/kgraph.hpp"
#include "surgraw/panel.hpp"
#include "surgraw/provider.hpp"
#include "surgraw/rag.hpp"
#include "surgraw/trace.hpp"

namespace surgraw::orchestrator {

using surgraw::task_category;

struct OrchestratorConfig {
  // Consult the coordinator model for queries without a task label.
  bool coordinator_model = true;
  bool keyword_fallback = true;
  int rag_k = 3;
  int max_tokens = 1024;
  double temperature = 0.0;
  panel::PanelConfig panel;
};

// Loaded, immutable resources shared by every pipeline run.
struct Engine {
  std::shared_ptr<provider::Provider> provider;
  std::shared_ptr<const cot::TemplateSet> templates;
  std::shared_ptr<const kg::KnowledgeGraph> graph;
  // Required only when retrieval is enabled.
  std::shared_ptr<const rag::Index> index;
  agent::Clock clock;
  OrchestratorConfig config;

  agent::CallContext call_context(const EvalConfig& cfg) const;
};

// Keyword table consulted when the coordinator reply names no task, scanned
// for the longest word-bounded match. Earlier entries win ties.
struct Keyword {
  std::string phrase;
  TaskKind task;
};
const std::vector<Keyword>& keyword_table();
RoutingDecision keyword_route(std::string_view question);

// The unique task name in a coordinator reply ("action_prediction" or
// "action prediction"); nullopt when zero or several are named.
std::optional<TaskKind> parse_coordinator_reply(std::string_view reply);

RoutingDecision route_for(TaskKind task, RoutingMethod method);

// Metadata path when q.task is set; otherwise the coordinator model, then the
// keyword fallback. Throws ClassificationFailed when both are disabled.
RoutingEvent classify(const Query& q, const Engine& engine, const EvalConfig& cfg);

struct PipelinePlan {
  AgentId primary_agent = AgentId::ActionInterpreter;
  std::optional<AgentId> companion_agent;
  bool use_rag = false;
  bool use_panel = false;
  bool use_cot = true;
};

PipelinePlan plan(const RoutingDecision& decision, const EvalConfig& cfg);

// Companion query for the panel when the dataset has no sibling record: the
// complementary visual task over the same frame and perspective, with options
// drawn from the knowledge graph (at most five). Throws StageError("panel")
// when fewer than two options can be formed.
Query synthesize_companion(const Query& primary, const kg::KnowledgeGraph& g);

using EventSink = std::function<void(const TraceEvent&)>;

struct RunInput {
  const Query* query = nullptr;
  // Sibling record used as the panel companion; synthesized when absent.
  const Query* companion = nullptr;
  EventSink sink;
};

// Full pipeline for one query. Events are numbered 1..n in emission order and
// forwarded to `sink` as they are appended. Failures surface as StageError
// (stage = routing | retrieval | render | agent | panel | parse).
Trace run_pipeline(const RunInput& in, const EvalConfig& cfg, const Engine& engine);

inline Trace run_pipeline(const Query& q, const EvalConfig& cfg, const Engine& engine) {
  return run_pipeline(RunInput{&q, nullptr, {}}, cfg, engine);
}

}  // namespace surgraw::orchestrator
