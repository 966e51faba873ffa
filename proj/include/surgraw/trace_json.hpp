#pragma once

#include <string>

#include <json.hpp>

#include "surgraw/trace.hpp"

namespace surgraw {

// Trace wire form. Keys are emitted in a fixed order so serialized traces are
// byte-stable; optional fields are null when absent.
nlohmann::ordered_json config_to_json(const EvalConfig& cfg);
// Throws ConfigError on a malformed document.
EvalConfig config_from_json(const nlohmann::json& j);

nlohmann::ordered_json routing_to_json(const RoutingDecision& d);

// {"seq": n, "kind": "<event kind>", "payload": {...}}
nlohmann::ordered_json event_to_json(const TraceEvent& ev);
nlohmann::ordered_json trace_to_json(const Trace& t);

// Compact single-line event, as carried in an SSE data line.
std::string dump_event(const TraceEvent& ev);
// Indented document with a trailing newline.
std::string dump_trace(const Trace& t);

}  // namespace surgraw
