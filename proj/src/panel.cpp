#include "surgraw/panel.hpp"

#include <cmath>
#include <exception>
#include <future>

#include <json.hpp>

#include "surgraw/text.hpp"

namespace surgraw::panel {

using json = nlohmann::json;

void PanelConfig::validate() const {
  if (max_rounds < 1) throw ConfigError("panel max_rounds must be >= 1");
  if (coherence_threshold < 1 || coherence_threshold > 5) {
    throw ConfigError("panel coherence_threshold must be within [1, 5]");
  }
  if (synergy_threshold < 1 || synergy_threshold > 5) {
    throw ConfigError("panel synergy_threshold must be within [1, 5]");
  }
}

bool check_consistency(std::string_view action_answer, std::string_view instrument_answer,
                       const kg::KnowledgeGraph& g, kg::UnknownPolicy policy) {
  return kg::is_permissible(g, instrument_answer, action_answer, policy);
}

namespace {

std::optional<std::string> last_fenced_block(std::string_view s) {
  std::optional<std::string> found;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = s.find("```", pos);
    if (open == std::string_view::npos) break;
    const std::size_t body = s.find('\n', open + 3);
    if (body == std::string_view::npos) break;
    const std::size_t close = s.find("```", body + 1);
    if (close == std::string_view::npos) break;
    found = std::string(s.substr(body + 1, close - body - 1));
    pos = close + 3;
  }
  return found;
}

std::optional<int> score_value(const json& obj, const char* key, bool& clamped) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj[key];
  double d = 0.0;
  if (v.is_number()) {
    d = v.get<double>();
  } else if (v.is_string()) {
    try {
      std::size_t used = 0;
      const std::string str = text::trim(v.get<std::string>());
      d = std::stod(str, &used);
      if (used != str.size()) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(d)) return std::nullopt;
  long r = std::lround(d);
  if (static_cast<double>(r) != d) clamped = true;
  if (r < 1) {
    r = 1;
    clamped = true;
  } else if (r > 5) {
    r = 5;
    clamped = true;
  }
  return static_cast<int>(r);
}

std::optional<RubricScores> parse_object(const std::string& candidate) {
  const json obj = json::parse(candidate, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) return std::nullopt;
  bool clamped = false;
  const auto coherence = score_value(obj, "coherence", clamped);
  const auto synergy = score_value(obj, "synergy", clamped);
  if (!coherence || !synergy) return std::nullopt;
  RubricScores s;
  s.coherence = *coherence;
  s.synergy = *synergy;
  if (obj.contains("feedback") && obj["feedback"].is_string()) {
    s.feedback = text::trim(obj["feedback"].get<std::string>());
  }
  if (clamped) {
    s.flagged = true;
    s.flag_reason = "score clamped";
  }
  return s;
}

}  // namespace

std::optional<RubricScores> parse_judge_reply(std::string_view reply) {
  if (auto block = last_fenced_block(reply)) {
    if (auto s = parse_object(*block)) return s;
  }
  const std::size_t open = reply.find('{');
  const std::size_t close = reply.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && open < close) {
    return parse_object(std::string(reply.substr(open, close - open + 1)));
  }
  return std::nullopt;
}

std::string kg_excerpt(const kg::KnowledgeGraph& g, std::string_view action_answer,
                       std::string_view instrument_answer, kg::UnknownPolicy policy) {
  const auto instrument = g.resolve_instrument(instrument_answer);
  const auto actions = kg::compatible_actions(g, instrument_answer);
  std::string out = "Instrument answer: " + text::trim(instrument_answer);
  out += instrument ? " (graph entry: " + *instrument + ")" : std::string(" (not in graph)");
  out += "\nPermissible actions for it: ";
  out += actions.empty() ? std::string("none known") : text::join(actions, ", ");
  out += "\nAction answer: " + text::trim(action_answer);
  out += "\nPair permissible: ";
  out += check_consistency(action_answer, instrument_answer, g, policy) ? "yes" : "no";
  return out;
}

JudgeResult score_rubrics(const agent::CallContext& ctx, const cot::TemplateSet& templates,
                          const AgentTurn& action_turn, const AgentTurn& instrument_turn,
                          const std::string& excerpt) {
  const auto& tmpl = templates.evaluator();
  provider::ModelRequest req;
  req.model = ctx.model;
  req.temperature = ctx.temperature;
  req.max_tokens = ctx.max_tokens;
  req.messages.push_back(provider::ChatMessage::system(cot::substitute(tmpl.system_text, {})));
  req.messages.push_back(provider::ChatMessage::user(
      text::trim(cot::substitute(tmpl.user_text, {{"action_cot", action_turn.response_text},
                                                  {"instrument_cot", instrument_turn.response_text},
                                                  {"kg_excerpt", excerpt}}))));

  JudgeResult out;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    out.attempts = attempt;
    out.fingerprint = provider::fingerprint(req);
    out.response = ctx.provider->complete(req).text;
    if (auto scores = parse_judge_reply(out.response)) {
      out.scores = *scores;
      return out;
    }
    req.messages.push_back(provider::ChatMessage::assistant(out.response));
    req.messages.push_back(provider::ChatMessage::user(std::string(kJudgeReminder)));
  }
  out.scores = RubricScores{3, 3, std::string(kJudgeUnparseable), true, std::string(kJudgeUnparseable)};
  return out;
}

std::string revision_message(const std::string& feedback, const std::string& instrument_answer,
                             const std::vector<std::string>& permissible) {
  return "Re-evaluate your stages given: " + feedback + "; the instrument identified is " +
         instrument_answer + "; permissible actions for it are " +
         (permissible.empty() ? std::string("none known") : text::join(permissible, ", ")) +
         ".\n\n" + std::string(cot::kAnswerDirective);
}

std::optional<Letter> first_compatible_option(const Query& action_query,
                                              std::string_view instrument_answer,
                                              const kg::KnowledgeGraph& g) {
  for (const auto& [letter, option] : action_query.options) {
    if (kg::is_permissible(g, instrument_answer, option, kg::UnknownPolicy::StrictUnknownFails)) {
      return letter;
    }
  }
  return std::nullopt;
}

namespace {

struct Side {
  AgentId agent;
  const Query* query;
  cot::RenderedPrompt prompt;
  provider::ModelRequest request;
};

[[noreturn]] void rethrow_staged(const std::string& where) {
  try {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("panel", e.kind(), where + ": " + e.what());
  } catch (const std::exception& e) {
    throw StageError("panel", "InternalError", where + ": " + e.what());
  }
}

std::string where(AgentId agent, int round) {
  return "round " + std::to_string(round) + " " + std::string(agent_name(agent));
}

Letter require_answer(const agent::CallResult& r) {
  if (!r.turn.parsed_answer) {
    throw StageError("panel", "AnswerUnparseable",
                     where(r.turn.agent, r.turn.round) + ": " + r.unparseable.value_or("unparseable"));
  }
  return *r.turn.parsed_answer;
}

}  // namespace

PanelOutcome discuss(const DiscussionInput& in, const agent::CallContext& ctx,
                     const cot::TemplateSet& templates, const kg::KnowledgeGraph& g,
                     const PanelConfig& cfg, const Emit& emit) {
  cfg.validate();
  if (!in.action_query || !in.instrument_query) throw ConfigError("panel needs both queries");
  if (in.primary != AgentId::ActionInterpreter && in.primary != AgentId::InstrumentSpecialist) {
    throw ConfigError("panel primary must be a visual-semantic agent");
  }
  const bool instrument_primary = in.primary == AgentId::InstrumentSpecialist;
  const int max_rounds = instrument_primary ? 1 : cfg.max_rounds;

  auto make_side = [&](AgentId agent, const Query* q) {
    Side s{agent, q, {}, {}};
    s.prompt = in.use_cot ? cot::render(templates, q->task, *q, std::nullopt, false) : cot::render_bare(*q);
    s.request = agent::initial_request(ctx, s.prompt, *q);
    return s;
  };
  Side action = make_side(AgentId::ActionInterpreter, in.action_query);
  Side instrument = make_side(AgentId::InstrumentSpecialist, in.instrument_query);
  Side* first = instrument_primary ? &instrument : &action;
  Side* second = instrument_primary ? &action : &instrument;

  emit(agent::prompt_event(first->agent, *first->query, 1, first->prompt, first->request));
  emit(agent::prompt_event(second->agent, *second->query, 1, second->prompt, second->request));

  auto run = [&ctx](const Side& s) {
    return agent::call(ctx, s.agent, *s.query, 1, s.request, s.prompt.stage_labels);
  };
  auto f_first = std::async(std::launch::async, run, std::cref(*first));
  auto f_second = std::async(std::launch::async, run, std::cref(*second));
  std::optional<agent::CallResult> r_first, r_second;
  std::exception_ptr e_first, e_second;
  try {
    r_first = f_first.get();
  } catch (...) {
    e_first = std::current_exception();
  }
  try {
    r_second = f_second.get();
  } catch (...) {
    e_second = std::current_exception();
  }
  for (auto [e, side] : {std::pair{e_first, first}, std::pair{e_second, second}}) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (...) {
      rethrow_staged(where(side->agent, 1));
    }
  }
  emit(r_first->turn);
  emit(r_second->turn);

  agent::CallResult action_result = instrument_primary ? *r_second : *r_first;
  const agent::CallResult& instrument_result = instrument_primary ? *r_first : *r_second;
  const Letter instrument_letter = require_answer(instrument_result);
  const std::string instrument_text = in.instrument_query->option_text(instrument_letter);

  PanelOutcome out;
  out.final_instrument_letter = instrument_letter;
  provider::ModelRequest action_request = action.request;

  for (int round = 1;; ++round) {
    const Letter action_letter = require_answer(action_result);
    const std::string action_text = in.action_query->option_text(action_letter);

    TranscriptEntry entry;
    entry.round = round;
    entry.action_turn = action_result.turn;
    entry.instrument_turn = instrument_result.turn;
    entry.consistent = check_consistency(action_text, instrument_text, g, cfg.unknown_policy);

    JudgeResult judge;
    try {
      judge = score_rubrics(ctx, templates, action_result.turn, instrument_result.turn,
                            kg_excerpt(g, action_text, instrument_text, cfg.unknown_policy));
    } catch (...) {
      rethrow_staged(where(AgentId::ActionEvaluator, round));
    }
    entry.scores = judge.scores;
    const bool scores_ok = entry.scores.coherence >= cfg.coherence_threshold &&
                           entry.scores.synergy >= cfg.synergy_threshold;
    if (entry.scores.feedback.empty() && (!scores_ok || !entry.consistent)) {
      entry.scores.feedback =
          entry.consistent ? "Reasoning scored below threshold; re-check each stage against the frame."
                           : "The chosen action is not permissible for the identified instrument.";
    }
    const bool resolved = entry.consistent && scores_ok;
    const bool last = resolved || round >= max_rounds;

    PanelEvent ev;
    ev.round = round;
    ev.action_letter = action_letter;
    ev.instrument_letter = instrument_letter;
    ev.action_text = action_text;
    ev.instrument_text = instrument_text;
    ev.consistent = entry.consistent;
    ev.scores = entry.scores;
    ev.judge_fingerprint = judge.fingerprint;
    ev.judge_response = judge.response;
    ev.judge_attempts = judge.attempts;
    ev.resolved = resolved;
    ev.final_round = last;

    out.transcript.push_back(entry);
    out.rounds_used = round;

    if (last) {
      out.resolved = resolved;
      out.final_action_letter = action_letter;
      if (!resolved && !instrument_primary) {
        out.fallback_used = true;
        if (auto pick = first_compatible_option(*in.action_query, instrument_text, g)) {
          out.final_action_letter = *pick;
        }
      }
      ev.fallback_used = out.fallback_used;
      emit(ev);
      return out;
    }
    emit(ev);

    const std::string message =
        revision_message(entry.scores.feedback, instrument_text, kg::compatible_actions(g, instrument_text));
    action_request.messages.push_back(provider::ChatMessage::assistant(action_result.turn.response_text));
    action_request.messages.push_back(provider::ChatMessage::user(message));

    PromptEvent pe;
    pe.agent = AgentId::ActionInterpreter;
    pe.query_id = in.action_query->id;
    pe.round = round + 1;
    pe.bare = action.prompt.bare;
    pe.fingerprint = provider::fingerprint(action_request);
    pe.system_text = action.prompt.system_text;
    pe.user_text = message;
    pe.stage_labels = action.prompt.stage_labels;
    emit(pe);

    try {
      action_result = agent::call(ctx, AgentId::ActionInterpreter, *in.action_query, round + 1,
                                  action_request, action.prompt.stage_labels);
    } catch (...) {
      rethrow_staged(where(AgentId::ActionInterpreter, round + 1));
    }
    emit(action_result.turn);
  }
}

}  // namespace surgraw::panel
