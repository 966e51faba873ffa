#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surgraw/core.hpp"
#include "surgraw/cot.hpp"
#include "surgraw/provider.hpp"
#include "surgraw/trace.hpp"

namespace surgraw::agent {

using Clock = std::function<std::int64_t()>;

// Milliseconds since the epoch from the system clock.
std::int64_t system_clock_ms();

struct CallContext {
  provider::Provider* provider = nullptr;
  std::string model = "gpt-4o";
  int max_tokens = 1024;
  double temperature = 0.0;
  Clock clock;

  std::int64_t now() const { return clock ? clock() : system_clock_ms(); }
};

// [system, user(text + frame)].
provider::ModelRequest initial_request(const CallContext& ctx, const cot::RenderedPrompt& prompt,
                                       const Query& q);

PromptEvent prompt_event(AgentId agent, const Query& q, int round, const cot::RenderedPrompt& prompt,
                         const provider::ModelRequest& req);

// One model call. The answer is parsed against q.options; when no parse rule
// fires, parsed_answer stays empty and `unparseable` carries the reason.
struct CallResult {
  AgentTurn turn;
  std::optional<std::string> unparseable;
};

CallResult call(const CallContext& ctx, AgentId agent, const Query& q, int round,
                const provider::ModelRequest& req, const std::vector<std::string>& program_labels);

}  // namespace surgraw::agent
