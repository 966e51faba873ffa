#include "surgraw/provider.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "surgraw/digest.hpp"
#include "surgraw/text.hpp"

namespace surgraw::provider {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

ChatMessage ChatMessage::system(std::string text) {
  return ChatMessage{Role::System, {TextPart{std::move(text)}}};
}

ChatMessage ChatMessage::user(std::string text) {
  return ChatMessage{Role::User, {TextPart{std::move(text)}}};
}

ChatMessage ChatMessage::user(std::string text, ImagePart image) {
  return ChatMessage{Role::User, {TextPart{std::move(text)}, std::move(image)}};
}

ChatMessage ChatMessage::assistant(std::string text) {
  return ChatMessage{Role::Assistant, {TextPart{std::move(text)}}};
}

std::string ChatMessage::text() const {
  std::string out;
  for (const auto& part : parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      if (!out.empty()) out.push_back('\n');
      out += t->text;
    }
  }
  return out;
}

void validate_request(const ModelRequest& req) {
  if (req.messages.empty()) throw InvalidRequest("request has no messages");
  if (req.model.empty()) throw InvalidRequest("request has no model");
  if (!(req.temperature >= 0.0)) throw InvalidRequest("temperature must be >= 0");
  if (req.max_tokens <= 0) throw InvalidRequest("max_tokens must be positive");
  int images = 0;
  for (const auto& msg : req.messages) {
    for (const auto& part : msg.parts) {
      if (const auto* img = std::get_if<ImagePart>(&part)) {
        if (msg.role == Role::Assistant) throw InvalidRequest("assistant message carries an image");
        if (!img->data) throw InvalidRequest("image part without payload");
        ++images;
      }
    }
  }
  if (images > 1) throw InvalidRequest("more than one image in request");
}

namespace {

void append_field(std::string& out, std::string_view bytes) {
  out += std::to_string(bytes.size());
  out.push_back(':');
  out.append(bytes);
}

}  // namespace

std::string canonical_bytes(const ModelRequest& req) {
  std::string out = "surgraw-request-v1\n";
  out += "model ";
  append_field(out, req.model);
  out += "\n";
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", req.temperature);
  out += "temperature ";
  out += temp;
  out += "\nmax_tokens " + std::to_string(req.max_tokens) + "\n";
  out += "messages " + std::to_string(req.messages.size()) + "\n";
  for (const auto& msg : req.messages) {
    out += "role ";
    out += role_name(msg.role);
    out += "\nparts " + std::to_string(msg.parts.size()) + "\n";
    for (const auto& part : msg.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        out += "text ";
        append_field(out, t->text);
      } else {
        const auto& img = std::get<ImagePart>(part);
        out += "image ";
        append_field(out, img.media_type);
        out.push_back(' ');
        append_field(out, img.data ? std::string_view(*img.data) : std::string_view());
      }
      out += "\n";
    }
  }
  return out;
}

std::string fingerprint(const ModelRequest& req) { return digest::sha256_hex(canonical_bytes(req)); }

// ---------------------------------------------------------------------------
// MockScript

namespace {

std::string_view mode_name(MockMode mode) {
  switch (mode) {
    case MockMode::ByFingerprint: return "by_fingerprint";
    case MockMode::BySequence: return "by_sequence";
    case MockMode::HashChoice: return "hash_choice";
  }
  return "hash_choice";
}

MockMode mode_from_name(const std::string& name) {
  if (name == "by_fingerprint") return MockMode::ByFingerprint;
  if (name == "by_sequence") return MockMode::BySequence;
  if (name == "hash_choice") return MockMode::HashChoice;
  throw MockScriptError("unknown mock mode '" + name + "'");
}

bool is_hex(const std::string& s) {
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

}  // namespace

void MockScript::validate() const {
  std::set<std::string> prefixes;
  std::set<std::size_t> indices;
  for (const auto& e : entries) {
    switch (mode) {
      case MockMode::ByFingerprint:
        if (e.prefix.empty() || e.prefix.size() > 64 || !is_hex(e.prefix)) {
          throw MockScriptError("fingerprint match must be 1-64 lowercase hex chars: '" + e.prefix + "'");
        }
        if (!prefixes.insert(e.prefix).second) {
          throw MockScriptError("duplicate fingerprint prefix '" + e.prefix + "'");
        }
        break;
      case MockMode::BySequence:
        if (!e.index) throw MockScriptError("by_sequence entries need an integer match");
        if (!indices.insert(*e.index).second) {
          throw MockScriptError("duplicate sequence index " + std::to_string(*e.index));
        }
        break;
      case MockMode::HashChoice:
        break;
    }
  }
}

MockScript MockScript::parse(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw MockScriptError("mock script is not a JSON object");
  MockScript script;
  if (!doc.contains("mode") || !doc["mode"].is_string()) throw MockScriptError("missing 'mode'");
  script.mode = mode_from_name(doc["mode"].get<std::string>());
  if (doc.contains("entries")) {
    if (!doc["entries"].is_array()) throw MockScriptError("'entries' must be an array");
    for (const auto& item : doc["entries"]) {
      if (!item.is_object() || !item.contains("response_text") || !item["response_text"].is_string()) {
        throw MockScriptError("entry without string 'response_text'");
      }
      MockEntry entry;
      entry.response_text = item["response_text"].get<std::string>();
      if (item.contains("match")) {
        const auto& m = item["match"];
        if (m.is_string()) {
          entry.prefix = text::to_lower(m.get<std::string>());
        } else if (m.is_number_unsigned()) {
          entry.index = m.get<std::size_t>();
        } else {
          throw MockScriptError("'match' must be a hex string or a non-negative integer");
        }
      }
      script.entries.push_back(std::move(entry));
    }
  }
  script.validate();
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::string body;
  try {
    body = text::read_file(path.string());
  } catch (const std::exception& e) {
    throw MockScriptError(e.what());
  }
  return parse(body);
}

std::string MockScript::dump() const {
  ordered_json doc;
  doc["mode"] = mode_name(mode);
  doc["entries"] = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json item;
    if (e.index) {
      item["match"] = *e.index;
    } else if (!e.prefix.empty()) {
      item["match"] = e.prefix;
    }
    item["response_text"] = e.response_text;
    doc["entries"].push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// MockProvider

MockProvider::MockProvider(MockScript script) : script_(std::move(script)) {
  script_.validate();
  for (std::size_t i = 0; i < script_.entries.size(); ++i) {
    if (script_.entries[i].index) by_index_[*script_.entries[i].index] = i;
  }
}

ModelResponse MockProvider::complete(const ModelRequest& req) {
  validate_request(req);
  calls_.fetch_add(1);
  const std::string fp = fingerprint(req);
  ModelResponse resp;
  switch (script_.mode) {
    case MockMode::ByFingerprint: {
      const MockEntry* best = nullptr;
      for (const auto& e : script_.entries) {
        if (text::starts_with(fp, e.prefix) && (!best || e.prefix.size() > best->prefix.size())) {
          best = &e;
        }
      }
      if (!best) throw ScriptMiss("no mock entry matches fingerprint " + fp);
      resp.text = best->response_text;
      break;
    }
    case MockMode::BySequence: {
      const std::size_t n = cursor_.fetch_add(1);
      auto it = by_index_.find(n);
      if (it == by_index_.end()) throw ScriptMiss("no mock entry for call #" + std::to_string(n));
      resp.text = script_.entries[it->second].response_text;
      break;
    }
    case MockMode::HashChoice:
      resp.text = hash_choice(req, fp);
      break;
  }
  if (resp.text.empty()) throw EmptyCompletion("mock entry has empty response text");
  return resp;
}

std::string MockProvider::hash_choice(const ModelRequest& req, const std::string& fp) const {
  const std::uint64_t h = std::strtoull(fp.substr(0, 16).c_str(), nullptr, 16);
  std::string all_text;
  for (const auto& msg : req.messages) {
    if (msg.role != Role::Assistant) all_text += msg.text() + "\n";
  }
  // Judge prompts ask for rubric JSON.
  if (all_text.find("\"coherence\"") != std::string::npos &&
      all_text.find("\"synergy\"") != std::string::npos) {
    ordered_json j;
    j["coherence"] = static_cast<int>(3 + h % 3);
    j["synergy"] = static_cast<int>(3 + (h / 3) % 3);
    j["feedback"] = "hash-choice judge";
    return "```json\n" + j.dump() + "\n```";
  }
  std::vector<char> letters;
  bool in_options = false;
  for (const auto& line : text::split_lines(all_text)) {
    if (!in_options) {
      in_options = text::trim(line) == "Options:";
      continue;
    }
    if (line.size() >= 3 && line[0] >= 'A' && line[0] <= 'E' && line[1] == '.' && line[2] == ' ') {
      letters.push_back(line[0]);
    } else {
      break;
    }
  }
  if (letters.empty()) return "hash-choice mock: no options found";
  return std::string("FINAL ANSWER: ") + letters[h % letters.size()];
}

// ---------------------------------------------------------------------------
// Live adapter

LiveConfig live_config_from_env() {
  const char* base = std::getenv("SURGRAW_API_BASE");
  const char* key = std::getenv("SURGRAW_API_KEY");
  if (!base || !*base) throw ConfigError("SURGRAW_API_BASE is not set");
  if (!key || !*key) throw ConfigError("SURGRAW_API_KEY is not set");
  LiveConfig cfg;
  cfg.endpoint = base;
  cfg.api_key = key;
  return cfg;
}

std::string serialize_chat_request(const ModelRequest& req) {
  ordered_json body;
  body["model"] = req.model;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  body["messages"] = ordered_json::array();
  for (const auto& msg : req.messages) {
    ordered_json m;
    m["role"] = role_name(msg.role);
    m["content"] = ordered_json::array();
    for (const auto& part : msg.parts) {
      ordered_json p;
      if (const auto* t = std::get_if<TextPart>(&part)) {
        p["type"] = "text";
        p["text"] = t->text;
      } else {
        const auto& img = std::get<ImagePart>(part);
        p["type"] = "image_url";
        p["image_url"]["url"] =
            "data:" + img.media_type + ";base64," + digest::base64_encode(img.data ? *img.data : "");
      }
      m["content"].push_back(std::move(p));
    }
    body["messages"].push_back(std::move(m));
  }
  return body.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::string parse_chat_response(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw BackendError(200, "response is not JSON");
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw BackendError(200, "response has no choices");
  }
  const auto& message = doc["choices"][0].value("message", json::object());
  if (!message.contains("content")) throw BackendError(200, "choices[0].message.content missing");
  const auto& content = message["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  }
  if (content.is_null()) return {};
  throw BackendError(200, "choices[0].message.content has unexpected type");
}

std::optional<Usage> parse_chat_usage(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.contains("usage") || !doc["usage"].is_object()) return std::nullopt;
  Usage u;
  u.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
  u.completion_tokens = doc["usage"].value("completion_tokens", 0);
  return u;
}

namespace {

// Splits scheme://host[:port][/prefix] into base url and path prefix.
std::pair<std::string, std::string> split_endpoint(std::string endpoint) {
  while (!endpoint.empty() && endpoint.back() == '/') endpoint.pop_back();
  const auto scheme_end = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

OpenAiProvider::OpenAiProvider(LiveConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      slots_(std::max(1, config_.max_concurrent)) {
  auto [base, prefix] = split_endpoint(config_.endpoint);
  if (base.empty()) throw ConfigError("empty live endpoint");
  path_ = prefix + "/v1/chat/completions";
  if (!transport_) transport_ = make_http_transport(base);
}

ModelResponse OpenAiProvider::complete(const ModelRequest& req) {
  validate_request(req);
  const std::string body = serialize_chat_request(req);
  const HttpHeaders headers = {{"Authorization", "Bearer " + config_.api_key}};

  slots_.acquire();
  const auto start = std::chrono::steady_clock::now();
  HttpResult result;
  try {
    result = transport_->post(path_, body, headers, config_.timeout);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();
  const auto elapsed = std::chrono::steady_clock::now() - start;

  if (result.status < 200 || result.status >= 300) throw BackendError(result.status, result.body);
  ModelResponse resp;
  resp.text = parse_chat_response(result.body);
  resp.usage = parse_chat_usage(result.body);
  resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  if (text::trim(resp.text).empty()) throw EmptyCompletion("backend returned an empty completion");
  return resp;
}

// ---------------------------------------------------------------------------
// Retries

bool is_retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, double unit) {
  double base = static_cast<double>(policy.base_delay.count());
  for (int i = 1; i < attempt; ++i) base *= policy.multiplier;
  const double scaled = base * (1.0 + policy.jitter * std::clamp(unit, -1.0, 1.0));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, scaled)));
}

RetryOutcome retrying_complete(Provider& inner, const ModelRequest& req, const RetryPolicy& policy,
                               const Sleeper& sleep, std::uint64_t seed) {
  if (policy.max_attempts < 1) throw ConfigError("retry policy needs max_attempts >= 1");
  const std::string fp = fingerprint(req);
  const std::uint64_t h = std::strtoull(fp.substr(0, 16).c_str(), nullptr, 16);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  for (int attempt = 1;; ++attempt) {
    try {
      return RetryOutcome{inner.complete(req), attempt};
    } catch (const TransportError&) {
      if (attempt >= policy.max_attempts) throw;
    } catch (const BackendError& e) {
      if (!is_retryable_status(e.status()) || attempt >= policy.max_attempts) throw;
    }
    const auto delay = backoff_delay(policy, attempt, unit(rng));
    if (sleep) {
      sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }
}

RetryingProvider::RetryingProvider(std::shared_ptr<Provider> inner, RetryPolicy policy,
                                   std::uint64_t seed, Sleeper sleep)
    : inner_(std::move(inner)), policy_(policy), seed_(seed), sleep_(std::move(sleep)) {}

ModelResponse RetryingProvider::complete(const ModelRequest& req) {
  return retrying_complete(*inner_, req, policy_, sleep_, seed_).response;
}

}  // namespace surgraw::provider
