#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "surgraw/orchestrator.hpp"
#include "surgraw/trace.hpp"

namespace surgraw::service {

inline constexpr std::size_t kMaxImageBytes = 8u << 20;

// Body of POST /api/ask and /api/ask/stream:
//   {"image": {"media_type": "image/png", "data": "<base64>"},
//    "question": "...", "options": {"A": "...", ...},
//    "task": "action_recognition"?, "perspective": "left"?, "id": "..."?,
//    "no_cot": false?, "no_rag": false?, "no_panel": false?}
struct AskRequest {
  Query query;
  bool no_cot = false;
  bool no_rag = false;
  bool no_panel = false;
};

// Throws InvalidRequest (malformed body or query) or PayloadTooLarge (decoded
// image above `max_image_bytes`).
AskRequest parse_ask_request(const nlohmann::json& body, std::size_t max_image_bytes = kMaxImageBytes);

struct ServiceOptions {
  std::string host = "127.0.0.1";
  // 0 binds an ephemeral port.
  int port = 8080;
  std::size_t max_image_bytes = kMaxImageBytes;
  // Provider, model and seed for every request; ablation flags come from the request.
  EvalConfig defaults;
  std::optional<std::string> api_base;
  bool api_key_set = false;
  std::string templates_dir;
};

// HTTP front end: GET /api/health, GET /api/config, POST /api/ask,
// POST /api/ask/stream (server-sent events, one `event: trace` frame per
// TraceEvent; a failure ends the stream with an `event: error` frame).
class Service {
 public:
  Service(orchestrator::Engine engine, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and returns the bound port; throws ConfigError when binding fails.
  int bind();
  // Blocks serving requests until stop().
  void listen();
  // Stops accepting connections; in-flight requests finish first.
  void stop();

  const nlohmann::ordered_json& config_document() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// SSE frame for one event: "event: trace\ndata: <json>\n\n".
std::string sse_frame(const TraceEvent& ev);
std::string sse_error_frame(const nlohmann::ordered_json& error);

// {"error": {"kind", "message", "stage"?, "inner_kind"?}} and its HTTP status.
struct ErrorReply {
  int status = 500;
  nlohmann::ordered_json body;
};
ErrorReply error_reply(std::exception_ptr e);

}  // namespace surgraw::service
