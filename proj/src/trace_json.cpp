#include "surgraw/trace_json.hpp"

namespace surgraw {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json letter(Letter l) { return std::string(1, l); }

template <class T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json strings(const std::vector<std::string>& v) {
  ordered_json a = ordered_json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

ordered_json scores_to_json(const RubricScores& s) {
  ordered_json j;
  j["coherence"] = s.coherence;
  j["synergy"] = s.synergy;
  j["feedback"] = s.feedback;
  j["flagged"] = s.flagged;
  j["flag_reason"] = s.flag_reason;
  return j;
}

ordered_json payload_to_json(const RoutingEvent& e) {
  ordered_json j = routing_to_json(e.decision);
  j["coordinator_fingerprint"] = opt(e.coordinator_fingerprint);
  j["coordinator_response"] = opt(e.coordinator_response);
  return j;
}

ordered_json payload_to_json(const RetrievalEvent& e) {
  ordered_json j;
  j["query_text"] = e.query_text;
  j["k"] = e.k;
  j["hits"] = ordered_json::array();
  for (const auto& h : e.hits) {
    ordered_json hj;
    hj["doc_id"] = h.doc_id;
    hj["ordinal"] = h.ordinal;
    hj["title"] = h.title;
    hj["score"] = h.score;
    j["hits"].push_back(std::move(hj));
  }
  return j;
}

ordered_json payload_to_json(const PromptEvent& e) {
  ordered_json j;
  j["agent"] = agent_name(e.agent);
  j["query_id"] = e.query_id;
  j["round"] = e.round;
  j["bare"] = e.bare;
  j["fingerprint"] = e.fingerprint;
  j["system_text"] = e.system_text;
  j["user_text"] = e.user_text;
  j["stage_labels"] = strings(e.stage_labels);
  return j;
}

ordered_json payload_to_json(const AgentTurn& e) {
  ordered_json j;
  j["agent"] = agent_name(e.agent);
  j["query_id"] = e.query_id;
  j["round"] = e.round;
  j["prompt_fingerprint"] = e.prompt_fingerprint;
  j["response_text"] = e.response_text;
  j["parsed_answer"] = e.parsed_answer ? letter(*e.parsed_answer) : ordered_json(nullptr);
  j["parse_rule"] = e.parse_rule ? ordered_json(parse_rule_name(*e.parse_rule)) : ordered_json(nullptr);
  j["parse_flagged"] = e.parse_flagged();
  j["stage_labels"] = strings(e.stage_labels);
  j["latency_ms"] = e.latency_ms;
  return j;
}

ordered_json payload_to_json(const PanelEvent& e) {
  ordered_json j;
  j["round"] = e.round;
  j["action_letter"] = letter(e.action_letter);
  j["action_text"] = e.action_text;
  j["instrument_letter"] = letter(e.instrument_letter);
  j["instrument_text"] = e.instrument_text;
  j["consistent"] = e.consistent;
  j["scores"] = scores_to_json(e.scores);
  j["judge_fingerprint"] = e.judge_fingerprint;
  j["judge_response"] = e.judge_response;
  j["judge_attempts"] = e.judge_attempts;
  j["resolved"] = e.resolved;
  j["final_round"] = e.final_round;
  j["fallback_used"] = e.fallback_used;
  return j;
}

ordered_json payload_to_json(const FinalEvent& e) {
  ordered_json j;
  j["answer"] = letter(e.answer);
  j["resolved"] = e.resolved;
  j["source"] = answer_source_name(e.source);
  return j;
}

}  // namespace

ordered_json config_to_json(const EvalConfig& cfg) {
  ordered_json j;
  j["no_cot"] = cfg.no_cot;
  j["no_rag"] = cfg.no_rag;
  j["no_panel"] = cfg.no_panel;
  j["provider"] = cfg.provider;
  j["model"] = cfg.model;
  j["limit"] = opt(cfg.limit);
  j["seed"] = cfg.seed;
  return j;
}

EvalConfig config_from_json(const json& j) {
  EvalConfig cfg;
  try {
    cfg.no_cot = j.at("no_cot").get<bool>();
    cfg.no_rag = j.at("no_rag").get<bool>();
    cfg.no_panel = j.at("no_panel").get<bool>();
    cfg.provider = j.at("provider").get<std::string>();
    cfg.model = j.at("model").get<std::string>();
    if (!j.at("limit").is_null()) cfg.limit = j.at("limit").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

ordered_json routing_to_json(const RoutingDecision& d) {
  ordered_json j;
  j["category"] = category_name(d.category);
  j["task"] = task_name(d.task);
  j["agent"] = agent_name(d.agent);
  j["method"] = routing_method_name(d.method);
  return j;
}

ordered_json event_to_json(const TraceEvent& ev) {
  ordered_json j;
  j["seq"] = ev.seq;
  j["kind"] = event_kind_name(ev.kind());
  j["payload"] = std::visit([](const auto& p) { return payload_to_json(p); }, ev.payload);
  return j;
}

ordered_json trace_to_json(const Trace& t) {
  ordered_json j;
  j["query_id"] = t.query_id;
  j["task"] = task_name(t.task);
  j["category"] = category_name(t.category);
  j["started_at_ms"] = t.started_at_ms;
  j["final_answer"] = letter(t.final_answer);
  j["resolved"] = t.resolved;
  if (t.panel) {
    ordered_json p;
    p["rounds_used"] = t.panel->rounds_used;
    p["resolved"] = t.panel->resolved;
    p["final_action_letter"] = letter(t.panel->final_action_letter);
    p["final_instrument_letter"] = letter(t.panel->final_instrument_letter);
    p["fallback_used"] = t.panel->fallback_used;
    p["companion_query_id"] = t.panel->companion_query_id;
    p["companion_synthesized"] = t.panel->companion_synthesized;
    j["panel"] = std::move(p);
  } else {
    j["panel"] = nullptr;
  }
  j["flags"] = strings(t.flags);
  j["config"] = config_to_json(t.config);
  j["events"] = ordered_json::array();
  for (const auto& ev : t.events) j["events"].push_back(event_to_json(ev));
  return j;
}

std::string dump_event(const TraceEvent& ev) {
  return event_to_json(ev).dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::string dump_trace(const Trace& t) {
  return trace_to_json(t).dump(2, ' ', false, ordered_json::error_handler_t::replace) + "\n";
}

}  // namespace surgraw
