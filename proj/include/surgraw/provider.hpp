#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <variant>
#include <vector>

#include "surgraw/errors.hpp"

namespace surgraw::provider {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);

struct TextPart {
  std::string text;
};

struct ImagePart {
  std::string media_type;
  std::shared_ptr<const std::string> data;
};

using Part = std::variant<TextPart, ImagePart>;

struct ChatMessage {
  Role role = Role::User;
  std::vector<Part> parts;

  static ChatMessage system(std::string text);
  static ChatMessage user(std::string text);
  static ChatMessage user(std::string text, ImagePart image);
  static ChatMessage assistant(std::string text);

  // Concatenation of the text parts, newline-separated.
  std::string text() const;
};

struct ModelRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
};

// Throws InvalidRequest when a ModelRequest invariant does not hold.
void validate_request(const ModelRequest& req);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ModelResponse {
  std::string text;
  std::optional<Usage> usage;
  std::int64_t latency_ms = 0;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ModelResponse complete(const ModelRequest& req) = 0;
  virtual std::string name() const = 0;
};

// Length-prefixed canonical serialization hashed by fingerprint():
//
//   surgraw-request-v1\n
//   model <len>:<bytes>\n
//   temperature <printf %.17g>\n
//   max_tokens <decimal>\n
//   messages <count>\n
//   per message:  role <system|user|assistant>\n  parts <count>\n
//   per part:     text <len>:<bytes>\n
//             or  image <len>:<media type> <len>:<bytes>\n
std::string canonical_bytes(const ModelRequest& req);

// SHA-256 of canonical_bytes, 64 lowercase hex characters.
std::string fingerprint(const ModelRequest& req);

// ---------------------------------------------------------------------------
// Scripted mock

enum class MockMode { ByFingerprint, BySequence, HashChoice };

struct MockEntry {
  // ByFingerprint: hex prefix of the request fingerprint.
  std::string prefix;
  // BySequence: zero-based call index.
  std::optional<std::size_t> index;
  std::string response_text;
};

struct MockScript {
  MockMode mode = MockMode::HashChoice;
  std::vector<MockEntry> entries;

  // Throws MockScriptError (duplicate prefixes, wrong match types, ...).
  void validate() const;

  static MockScript parse(const std::string& json_text);
  static MockScript load(const std::filesystem::path& path);
  std::string dump() const;
};

// Deterministic stand-in for a vision-chat backend.
//
// ByFingerprint and HashChoice are pure functions of (script, request) and may
// be called concurrently. BySequence hands out entries in call order and is
// meant for a single consumer; concurrent callers get entries in an
// unspecified interleaving.
class MockProvider : public Provider {
 public:
  explicit MockProvider(MockScript script);

  ModelResponse complete(const ModelRequest& req) override;
  std::string name() const override { return "mock"; }

  const MockScript& script() const { return script_; }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::string hash_choice(const ModelRequest& req, const std::string& fp) const;

  MockScript script_;
  std::map<std::size_t, std::size_t> by_index_;
  std::atomic<std::size_t> cursor_{0};
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// OpenAI-compatible live adapter

struct HttpResult {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Raises TransportError on connection failure or timeout.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& path, const std::string& body,
                          const HttpHeaders& headers, std::chrono::milliseconds timeout) = 0;
};

// Transport over cpp-httplib; `base_url` is scheme://host[:port].
std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url);

struct LiveConfig {
  std::string endpoint;  // scheme://host[:port][/prefix]
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
  int max_concurrent = 4;
};

// Reads SURGRAW_API_BASE / SURGRAW_API_KEY; throws ConfigError when unset.
LiveConfig live_config_from_env();

// Request body for POST {endpoint}/v1/chat/completions. Bit-exact: compact
// JSON with keys in the order model, temperature, max_tokens, messages.
std::string serialize_chat_request(const ModelRequest& req);

// Extracts choices[0].message.content. Throws BackendError(200, ...) when the
// body does not have that shape.
std::string parse_chat_response(const std::string& body);
std::optional<Usage> parse_chat_usage(const std::string& body);

class OpenAiProvider : public Provider {
 public:
  explicit OpenAiProvider(LiveConfig config, std::shared_ptr<HttpTransport> transport = nullptr);

  ModelResponse complete(const ModelRequest& req) override;
  std::string name() const override { return "live"; }

  const std::string& request_path() const { return path_; }

 private:
  LiveConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::string path_;
  std::counting_semaphore<> slots_;
};

// ---------------------------------------------------------------------------
// Retries

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  double jitter = 0.2;
};

bool is_retryable_status(int status);

// base * multiplier^(attempt-1) scaled by (1 + jitter * unit), unit in [-1, 1].
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, double unit);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct RetryOutcome {
  ModelResponse response;
  int attempts = 0;
};

// Retries TransportError and retryable BackendErrors; anything else, or the
// final attempt's error, propagates unchanged. Jitter is drawn from a generator
// seeded by (seed, request fingerprint) so delays are replayable.
RetryOutcome retrying_complete(Provider& inner, const ModelRequest& req, const RetryPolicy& policy,
                               const Sleeper& sleep = {}, std::uint64_t seed = 0);

class RetryingProvider : public Provider {
 public:
  RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy, std::uint64_t seed = 0,
                   Sleeper sleep = {});

  ModelResponse complete(const ModelRequest& req) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Provider> inner_;
  RetryPolicy policy_;
  std::uint64_t seed_;
  Sleeper sleep_;
};

}  // namespace surgraw::provider
