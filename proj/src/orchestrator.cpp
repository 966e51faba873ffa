#include "surgraw/orchestrator.hpp"

#include <algorithm>
#include <set>

#include "surgraw/text.hpp"

namespace surgraw::orchestrator {

agent::CallContext Engine::call_context(const EvalConfig& cfg) const {
  agent::CallContext ctx;
  ctx.provider = provider.get();
  ctx.model = cfg.model;
  ctx.max_tokens = config.max_tokens;
  ctx.temperature = config.temperature;
  ctx.clock = clock;
  return ctx;
}

const std::vector<Keyword>& keyword_table() {
  static const std::vector<Keyword> table = {
      {"instrument", TaskKind::InstrumentRecognition},
      {"tool", TaskKind::InstrumentRecognition},
      {"next step", TaskKind::ActionPrediction},
      {"plan", TaskKind::ActionPrediction},
      {"outcome", TaskKind::OutcomeAssessment},
      {"why", TaskKind::OutcomeAssessment},
      {"patient", TaskKind::PatientData},
      {"age", TaskKind::PatientData},
      {"gender", TaskKind::PatientData},
  };
  return table;
}

RoutingDecision route_for(TaskKind task, RoutingMethod method) {
  return RoutingDecision{task_category(task), task, task_agent(task), method};
}

RoutingDecision keyword_route(std::string_view question) {
  const std::string q = text::canonical_name(question);
  const Keyword* best = nullptr;
  for (const auto& k : keyword_table()) {
    if (!text::contains_word(q, k.phrase)) continue;
    if (!best || k.phrase.size() > best->phrase.size()) best = &k;
  }
  return route_for(best ? best->task : TaskKind::ActionRecognition, RoutingMethod::KeywordFallback);
}

std::optional<TaskKind> parse_coordinator_reply(std::string_view reply) {
  const std::string r = text::to_lower(reply);
  std::optional<TaskKind> found;
  for (TaskKind task : kAllTasks) {
    const std::string snake(task_name(task));
    const std::string spaced = text::replace_all(snake, "_", " ");
    if (!text::contains_word(r, snake) && !text::contains_word(r, spaced)) continue;
    if (found) return std::nullopt;
    found = task;
  }
  return found;
}

namespace {

std::string task_menu() {
  static const std::map<TaskKind, std::string> blurbs = {
      {TaskKind::ActionRecognition, "which surgical action is being performed in the frame"},
      {TaskKind::InstrumentRecognition, "which surgical instrument is visible or in use"},
      {TaskKind::ActionPrediction, "what the next surgical step will be"},
      {TaskKind::OutcomeAssessment, "why the current step matters and what it achieves"},
      {TaskKind::PatientData, "details about the patient such as age, sex or condition"},
  };
  std::string out;
  for (TaskKind task : kAllTasks) {
    if (!out.empty()) out += "\n";
    out += "- " + std::string(task_name(task)) + ": " + blurbs.at(task);
  }
  return out;
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.kind(), e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, "InternalError", e.what());
  }
}

}  // namespace

RoutingEvent classify(const Query& q, const Engine& engine, const EvalConfig& cfg) {
  RoutingEvent ev;
  if (q.task != TaskKind::Unknown) {
    ev.decision = route_for(q.task, RoutingMethod::MetadataMap);
    return ev;
  }
  const auto& oc = engine.config;
  if (!oc.coordinator_model && !oc.keyword_fallback) {
    throw ClassificationFailed("query " + q.id + " has no task and classification is disabled");
  }
  if (oc.coordinator_model) {
    if (!engine.provider || !engine.templates) throw ConfigError("coordinator needs a provider and templates");
    const auto& tmpl = engine.templates->coordinator();
    provider::ModelRequest req;
    req.model = cfg.model;
    req.temperature = oc.temperature;
    req.max_tokens = oc.max_tokens;
    req.messages.push_back(provider::ChatMessage::system(cot::substitute(tmpl.system_text, {})));
    req.messages.push_back(provider::ChatMessage::user(text::trim(
        cot::substitute(tmpl.user_text, {{"tasks", task_menu()}, {"question", text::trim(q.question)}}))));
    ev.coordinator_fingerprint = provider::fingerprint(req);
    ev.coordinator_response = engine.provider->complete(req).text;
    if (auto task = parse_coordinator_reply(*ev.coordinator_response)) {
      ev.decision = route_for(*task, RoutingMethod::CoordinatorModel);
      return ev;
    }
    if (!oc.keyword_fallback) {
      throw ClassificationFailed("coordinator reply names no single task and the keyword fallback is disabled");
    }
  }
  ev.decision = keyword_route(q.question);
  return ev;
}

PipelinePlan plan(const RoutingDecision& decision, const EvalConfig& cfg) {
  PipelinePlan p;
  p.primary_agent = decision.agent;
  p.use_cot = !cfg.no_cot;
  p.use_rag = decision.category == Category::CognitiveInference && !cfg.no_rag;
  p.use_panel = decision.category == Category::VisualSemantic && !cfg.no_panel;
  if (p.use_panel) {
    p.companion_agent = decision.agent == AgentId::ActionInterpreter ? AgentId::InstrumentSpecialist
                                                                      : AgentId::ActionInterpreter;
  }
  return p;
}

Query synthesize_companion(const Query& primary, const kg::KnowledgeGraph& g) {
  if (primary.task != TaskKind::ActionRecognition && primary.task != TaskKind::InstrumentRecognition) {
    throw StageError("panel", "MalformedQuery", "companion requested for a non-visual task");
  }
  const bool want_instrument = primary.task == TaskKind::ActionRecognition;
  std::set<std::string> preferred;
  std::set<std::string> universe;
  if (want_instrument) {
    for (const auto& [name, actions] : g.instruments) universe.insert(name);
    for (const auto& [letter, option] : primary.options) {
      const auto action = g.resolve_action(option);
      if (!action) continue;
      for (const auto& [name, actions] : g.instruments) {
        if (actions.count(*action)) preferred.insert(name);
      }
    }
  } else {
    universe = g.all_actions();
    for (const auto& [letter, option] : primary.options) {
      for (auto& a : kg::compatible_actions(g, option)) preferred.insert(std::move(a));
    }
  }
  std::vector<std::string> picked(preferred.begin(), preferred.end());
  for (const auto& name : universe) {
    if (!preferred.count(name)) picked.push_back(name);
  }
  if (picked.size() > kMaxOptions) picked.resize(kMaxOptions);
  if (picked.size() < 2) {
    throw StageError("panel", "MalformedQuery", "knowledge graph yields fewer than two companion options");
  }

  Query c;
  c.id = primary.id + "#companion";
  c.image = primary.image;
  c.task = want_instrument ? TaskKind::InstrumentRecognition : TaskKind::ActionRecognition;
  c.perspective = primary.perspective;
  c.procedure = primary.procedure;
  std::string where = "in the frame";
  if (primary.perspective && *primary.perspective != Perspective::Whole) {
    where = "on the " + std::string(perspective_name(*primary.perspective)) + " side of the frame";
  }
  c.question = want_instrument ? "Which instrument is " + where + "?"
                               : "What surgical action is being performed " + where + "?";
  Letter letter = 'A';
  for (const auto& name : picked) c.options[letter++] = name;
  return c;
}

namespace {

void collect_flags(Trace& t) {
  for (const auto& ev : t.events) {
    if (const auto* turn = std::get_if<AgentTurn>(&ev.payload)) {
      if (turn->parse_flagged()) {
        t.flags.push_back("round " + std::to_string(turn->round) + " " +
                          std::string(agent_name(turn->agent)) + ": answer parsed by " +
                          std::string(parse_rule_name(*turn->parse_rule)));
      }
    } else if (const auto* pe = std::get_if<PanelEvent>(&ev.payload)) {
      if (pe->scores.flagged) {
        t.flags.push_back("round " + std::to_string(pe->round) + " " +
                          std::string(agent_name(AgentId::ActionEvaluator)) + ": " + pe->scores.flag_reason);
      }
    }
  }
}

}  // namespace

Trace run_pipeline(const RunInput& in, const EvalConfig& cfg, const Engine& engine) {
  if (!in.query) throw ConfigError("run_pipeline needs a query");
  const Query& q = *in.query;
  validate_query(q);
  if (!engine.provider) throw ConfigError("no provider configured");
  if (!engine.templates) throw ConfigError("no templates loaded");

  Trace t;
  t.query_id = q.id;
  t.config = cfg;
  t.started_at_ms = engine.clock ? engine.clock() : agent::system_clock_ms();
  int seq = 0;
  auto append = [&](EventPayload payload) {
    t.events.push_back(TraceEvent{++seq, std::move(payload)});
    if (in.sink) in.sink(t.events.back());
  };

  const RoutingEvent routing = staged("routing", [&] { return classify(q, engine, cfg); });
  const RoutingDecision decision = routing.decision;
  append(routing);
  t.task = decision.task;
  t.category = decision.category;

  Query eq = q;
  eq.task = decision.task;
  if (decision.category == Category::CognitiveInference) eq.perspective.reset();

  const PipelinePlan p = plan(decision, cfg);
  const agent::CallContext ctx = engine.call_context(cfg);

  Letter answer = 'A';
  AnswerSource source = AnswerSource::Agent;
  if (!p.use_panel) {
    std::optional<std::string> context;
    if (p.use_rag) {
      staged("retrieval", [&] {
        if (!engine.index) throw ConfigError("retrieval enabled but no index loaded");
        RetrievalEvent ev;
        ev.query_text = rag::retrieval_query(eq);
        ev.k = engine.config.rag_k;
        const auto hits = engine.index->retrieve(ev.query_text, ev.k);
        for (const auto& h : hits) ev.hits.push_back(RetrievalHitRecord{h.doc_id, h.ordinal, h.title, h.score});
        context = rag::format_context(hits);
        append(std::move(ev));
        return 0;
      });
    }
    const auto prompt = staged("render", [&] {
      return p.use_cot ? cot::render(*engine.templates, eq.task, eq, context, p.use_rag)
                       : cot::render_bare(eq, context);
    });
    const auto req = agent::initial_request(ctx, prompt, eq);
    append(agent::prompt_event(p.primary_agent, eq, 1, prompt, req));
    const auto result =
        staged("agent", [&] { return agent::call(ctx, p.primary_agent, eq, 1, req, prompt.stage_labels); });
    append(result.turn);
    if (!result.turn.parsed_answer) {
      throw StageError("parse", "AnswerUnparseable",
                       std::string(agent_name(p.primary_agent)) + ": " + result.unparseable.value_or(""));
    }
    answer = *result.turn.parsed_answer;
  } else {
    if (!engine.graph) throw StageError("panel", "ConfigError", "panel enabled but no knowledge graph loaded");
    const Query companion =
        in.companion ? *in.companion : staged("panel", [&] { return synthesize_companion(eq, *engine.graph); });
    const bool action_primary = p.primary_agent == AgentId::ActionInterpreter;
    panel::DiscussionInput din;
    din.action_query = action_primary ? &eq : &companion;
    din.instrument_query = action_primary ? &companion : &eq;
    din.primary = p.primary_agent;
    din.use_cot = p.use_cot;
    const auto outcome = staged("panel", [&] {
      return panel::discuss(din, ctx, *engine.templates, *engine.graph, engine.config.panel,
                            [&](EventPayload payload) { append(std::move(payload)); });
    });
    answer = action_primary ? outcome.final_action_letter : outcome.final_instrument_letter;
    source = outcome.fallback_used ? AnswerSource::PanelFallback : AnswerSource::Panel;
    t.resolved = outcome.resolved;
    PanelSummary s;
    s.rounds_used = outcome.rounds_used;
    s.resolved = outcome.resolved;
    s.final_action_letter = outcome.final_action_letter;
    s.final_instrument_letter = outcome.final_instrument_letter;
    s.fallback_used = outcome.fallback_used;
    s.companion_query_id = companion.id;
    s.companion_synthesized = in.companion == nullptr;
    t.panel = s;
  }

  t.final_answer = answer;
  collect_flags(t);
  append(FinalEvent{answer, t.resolved, source});
  return t;
}

}  // namespace surgraw::orchestrator
