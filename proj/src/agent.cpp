#include "surgraw/agent.hpp"

#include <chrono>

#include "surgraw/answer.hpp"

namespace surgraw::agent {

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

provider::ModelRequest initial_request(const CallContext& ctx, const cot::RenderedPrompt& prompt,
                                       const Query& q) {
  provider::ModelRequest req;
  req.model = ctx.model;
  req.temperature = ctx.temperature;
  req.max_tokens = ctx.max_tokens;
  req.messages.push_back(provider::ChatMessage::system(prompt.system_text));
  auto payload = q.image.data ? q.image.data : std::make_shared<const std::string>(q.image.bytes());
  req.messages.push_back(
      provider::ChatMessage::user(prompt.user_text, provider::ImagePart{q.image.media_type, payload}));
  return req;
}

PromptEvent prompt_event(AgentId agent, const Query& q, int round, const cot::RenderedPrompt& prompt,
                         const provider::ModelRequest& req) {
  PromptEvent ev;
  ev.agent = agent;
  ev.query_id = q.id;
  ev.round = round;
  ev.bare = prompt.bare;
  ev.fingerprint = provider::fingerprint(req);
  ev.system_text = prompt.system_text;
  ev.user_text = prompt.user_text;
  ev.stage_labels = prompt.stage_labels;
  return ev;
}

CallResult call(const CallContext& ctx, AgentId agent, const Query& q, int round,
                const provider::ModelRequest& req, const std::vector<std::string>& program_labels) {
  CallResult out;
  auto& turn = out.turn;
  turn.agent = agent;
  turn.query_id = q.id;
  turn.round = round;
  turn.prompt_fingerprint = provider::fingerprint(req);

  const std::int64_t start = ctx.now();
  const auto response = ctx.provider->complete(req);
  turn.latency_ms = ctx.now() - start;
  turn.response_text = response.text;
  turn.stage_labels = cot::response_stage_labels(response.text, program_labels);
  try {
    const auto parsed = bench::parse_answer(response.text, q.options);
    turn.parsed_answer = parsed.letter;
    turn.parse_rule = parsed.rule;
  } catch (const AnswerUnparseable& e) {
    out.unparseable = e.what();
  }
  return out;
}

}  // namespace surgraw::agent
