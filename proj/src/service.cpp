#include "surgraw/service.hpp"

#include <httplib.h>

#include "surgraw/digest.hpp"
#include "surgraw/kgraph.hpp"
#include "surgraw/text.hpp"
#include "surgraw/trace_json.hpp"

#ifndef SURGRAW_VERSION
#define SURGRAW_VERSION "0.0.0"
#endif

namespace surgraw::service {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

bool optional_flag(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return false;
  if (!body[key].is_boolean()) throw InvalidRequest(std::string("field '") + key + "' must be a boolean");
  return body[key].get<bool>();
}

std::string string_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw InvalidRequest(std::string("field '") + key + "' is missing or not a string");
  }
  return obj[key].get<std::string>();
}

}  // namespace

AskRequest parse_ask_request(const json& body, std::size_t max_image_bytes) {
  if (!body.is_object()) throw InvalidRequest("request body must be a JSON object");
  AskRequest req;
  Query& q = req.query;

  if (!body.contains("image") || !body["image"].is_object()) {
    throw InvalidRequest("field 'image' is missing or not an object");
  }
  const json& image = body["image"];
  const std::string media_type = string_field(image, "media_type");
  if (!text::starts_with(media_type, "image/")) throw InvalidRequest("image media_type must be image/*");
  const std::string encoded = string_field(image, "data");
  if (encoded.size() / 4 * 3 > max_image_bytes + 3) {
    throw PayloadTooLarge("image exceeds " + std::to_string(max_image_bytes) + " bytes");
  }
  auto decoded = digest::base64_decode(encoded);
  if (!decoded) throw InvalidRequest("image data is not valid base64");
  if (decoded->empty()) throw InvalidRequest("image data is empty");
  if (decoded->size() > max_image_bytes) {
    throw PayloadTooLarge("image exceeds " + std::to_string(max_image_bytes) + " bytes");
  }
  q.image = Image::from_bytes(media_type, std::move(*decoded));

  q.id = body.contains("id") ? string_field(body, "id") : "ask";
  q.question = string_field(body, "question");
  if (!body.contains("options") || !body["options"].is_object()) {
    throw InvalidRequest("field 'options' is missing or not an object");
  }
  for (const auto& [key, value] : body["options"].items()) {
    if (key.size() != 1 || key[0] < 'A' || key[0] > 'Z') {
      throw InvalidRequest("option key '" + key + "' is not an uppercase letter");
    }
    if (!value.is_string()) throw InvalidRequest("option " + key + " is not a string");
    q.options[key[0]] = value.get<std::string>();
  }
  if (body.contains("task") && !body["task"].is_null()) {
    const std::string name = string_field(body, "task");
    const auto task = task_from_name(name);
    if (!task) throw InvalidRequest("unknown task '" + name + "'");
    q.task = *task;
  }
  if (body.contains("perspective") && !body["perspective"].is_null()) {
    const std::string name = string_field(body, "perspective");
    const auto p = perspective_from_name(text::to_lower(name));
    if (!p) throw InvalidRequest("unknown perspective '" + name + "'");
    q.perspective = p;
  }
  req.no_cot = optional_flag(body, "no_cot");
  req.no_rag = optional_flag(body, "no_rag");
  req.no_panel = optional_flag(body, "no_panel");
  try {
    validate_query(q);
  } catch (const MalformedQuery& e) {
    throw InvalidRequest(e.what());
  }
  return req;
}

std::string sse_frame(const TraceEvent& ev) { return "event: trace\ndata: " + dump_event(ev) + "\n\n"; }

std::string sse_error_frame(const ordered_json& error) {
  return "event: error\ndata: " + error.dump(-1, ' ', false, ordered_json::error_handler_t::replace) + "\n\n";
}

ErrorReply error_reply(std::exception_ptr e) {
  ErrorReply r;
  ordered_json err;
  try {
    std::rethrow_exception(e);
  } catch (const StageError& se) {
    r.status = se.inner_kind() == "ConfigError" ? 500 : 502;
    err["kind"] = se.kind();
    err["stage"] = se.stage();
    err["inner_kind"] = se.inner_kind();
    err["message"] = se.what();
  } catch (const Error& ee) {
    const std::string& k = ee.kind();
    if (k == "InvalidRequest" || k == "MalformedQuery" || k == "NotALetter") {
      r.status = 400;
    } else if (k == "PayloadTooLarge") {
      r.status = 413;
    } else if (k == "ClassificationFailed") {
      r.status = 422;
    } else {
      r.status = 500;
    }
    err["kind"] = k;
    err["message"] = ee.what();
  } catch (const std::exception& se) {
    r.status = 500;
    err["kind"] = "InternalError";
    err["message"] = se.what();
  }
  r.body["error"] = std::move(err);
  return r;
}

struct Service::Impl {
  orchestrator::Engine engine;
  ServiceOptions options;
  ordered_json config_doc;
  httplib::Server server;
  int port = 0;

  EvalConfig config_for(const AskRequest& req) const {
    EvalConfig cfg = options.defaults;
    cfg.no_cot = req.no_cot;
    cfg.no_rag = req.no_rag;
    cfg.no_panel = req.no_panel;
    cfg.limit.reset();
    return cfg;
  }

  static void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, ordered_json::error_handler_t::replace), "application/json");
  }

  static void send_error(httplib::Response& res, std::exception_ptr e) {
    const auto reply = error_reply(e);
    send_json(res, reply.status, reply.body);
  }

  AskRequest read_request(const httplib::Request& req) const {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) throw InvalidRequest("request body is not valid JSON");
    return parse_ask_request(body, options.max_image_bytes);
  }

  void install() {
    server.set_payload_max_length(64u << 20);

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      ordered_json j;
      j["status"] = "ok";
      j["version"] = SURGRAW_VERSION;
      send_json(res, 200, j);
    });

    server.Get("/api/config", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, config_doc);
    });

    server.Post("/api/ask", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const AskRequest ask = read_request(req);
        const Trace t = orchestrator::run_pipeline(ask.query, config_for(ask), engine);
        send_json(res, 200, trace_to_json(t));
      } catch (...) {
        send_error(res, std::current_exception());
      }
    });

    server.Post("/api/ask/stream", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<AskRequest> ask;
      try {
        ask = std::make_shared<AskRequest>(read_request(req));
      } catch (...) {
        send_error(res, std::current_exception());
        return;
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [this, ask](std::size_t, httplib::DataSink& sink) {
            bool open = true;
            auto write = [&](const std::string& frame) {
              if (open && !sink.write(frame.data(), frame.size())) open = false;
            };
            try {
              orchestrator::RunInput in;
              in.query = &ask->query;
              in.sink = [&](const TraceEvent& ev) { write(sse_frame(ev)); };
              orchestrator::run_pipeline(in, config_for(*ask), engine);
            } catch (...) {
              write(sse_error_frame(error_reply(std::current_exception()).body));
            }
            sink.done();
            return true;
          });
    });
  }

  void build_config_doc() {
    ordered_json j;
    j["version"] = SURGRAW_VERSION;
    j["provider"] = options.defaults.provider;
    j["model"] = options.defaults.model;
    j["seed"] = options.defaults.seed;
    j["api_base"] = options.api_base ? ordered_json(*options.api_base) : ordered_json(nullptr);
    j["api_key"] = options.api_key_set ? ordered_json("<redacted>") : ordered_json(nullptr);
    j["templates_dir"] = options.templates_dir;
    j["kgraph_version"] = engine.graph ? ordered_json(engine.graph->version) : ordered_json(nullptr);
    j["index_chunks"] = engine.index ? ordered_json(engine.index->size()) : ordered_json(nullptr);
    j["rag_k"] = engine.config.rag_k;
    ordered_json p;
    p["max_rounds"] = engine.config.panel.max_rounds;
    p["coherence_threshold"] = engine.config.panel.coherence_threshold;
    p["synergy_threshold"] = engine.config.panel.synergy_threshold;
    p["unknown_policy"] = kg::policy_name(engine.config.panel.unknown_policy);
    j["panel"] = std::move(p);
    j["max_image_bytes"] = options.max_image_bytes;
    config_doc = std::move(j);
  }
};

Service::Service(orchestrator::Engine engine, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->engine = std::move(engine);
  impl_->options = std::move(options);
  impl_->build_config_doc();
  impl_->install();
}

Service::~Service() { stop(); }

int Service::bind() {
  auto& s = impl_->server;
  const auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = s.bind_to_any_port(o.host);
  } else {
    impl_->port = s.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) throw ConfigError("cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

const ordered_json& Service::config_document() const { return impl_->config_doc; }

}  // namespace surgraw::service
