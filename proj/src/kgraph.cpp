#include "surgraw/kgraph.hpp"

#include <algorithm>

#include <json.hpp>

#include "surgraw/text.hpp"

namespace surgraw::kg {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view policy_name(UnknownPolicy policy) {
  return policy == UnknownPolicy::StrictUnknownFails ? "strict" : "lenient";
}

std::optional<UnknownPolicy> policy_from_name(std::string_view name) {
  if (name == "strict") return UnknownPolicy::StrictUnknownFails;
  if (name == "lenient") return UnknownPolicy::LenientUnknownPasses;
  return std::nullopt;
}

std::optional<std::string> KnowledgeGraph::resolve_instrument(std::string_view name) const {
  std::string key = text::canonical_name(name);
  if (auto a = aliases.find(key); a != aliases.end()) key = a->second;
  if (instruments.count(key)) return key;
  return std::nullopt;
}

std::optional<std::string> KnowledgeGraph::resolve_action(std::string_view name) const {
  std::string key = text::canonical_name(name);
  if (auto a = aliases.find(key); a != aliases.end()) key = a->second;
  for (const auto& [instrument, actions] : instruments) {
    if (actions.count(key)) return key;
  }
  return std::nullopt;
}

std::set<std::string> KnowledgeGraph::all_actions() const {
  std::set<std::string> out;
  for (const auto& [instrument, actions] : instruments) out.insert(actions.begin(), actions.end());
  return out;
}

void KnowledgeGraph::validate() const {
  const auto actions = all_actions();
  for (const auto& [instrument, set] : instruments) {
    if (set.empty()) throw EmptyActionSet("instrument '" + instrument + "' has no actions");
  }
  for (const auto& [alias, target] : aliases) {
    if (instruments.count(alias) || actions.count(alias)) {
      throw GraphParseError("field aliases." + alias + ": alias shadows a canonical name");
    }
    if (!instruments.count(target) && !actions.count(target)) {
      throw DanglingAlias("alias '" + alias + "' -> '" + target + "' has no canonical target");
    }
  }
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

KnowledgeGraph parse_graph(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw GraphParseError("line " + std::to_string(line_of(json_text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_object()) throw GraphParseError("line 1: top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "version" && key != "instruments" && key != "aliases" && key != "description") {
      throw GraphParseError("field " + key + ": unknown field");
    }
  }

  KnowledgeGraph g;
  if (!doc.contains("version") || !doc["version"].is_string()) {
    throw GraphParseError("field version: missing or not a string");
  }
  g.version = doc["version"].get<std::string>();

  if (!doc.contains("instruments") || !doc["instruments"].is_object()) {
    throw GraphParseError("field instruments: missing or not an object");
  }
  for (const auto& [name, actions] : doc["instruments"].items()) {
    const std::string instrument = text::canonical_name(name);
    if (instrument.empty()) throw GraphParseError("field instruments: empty instrument name");
    if (!actions.is_array()) throw GraphParseError("field instruments." + name + ": not an array");
    if (g.instruments.count(instrument)) {
      throw GraphParseError("field instruments." + name + ": duplicate after canonicalization");
    }
    auto& set = g.instruments[instrument];
    for (const auto& a : actions) {
      if (!a.is_string()) throw GraphParseError("field instruments." + name + ": non-string action");
      const std::string action = text::canonical_name(a.get<std::string>());
      if (action.empty()) throw GraphParseError("field instruments." + name + ": empty action");
      set.insert(action);
    }
  }

  if (doc.contains("aliases")) {
    if (!doc["aliases"].is_object()) throw GraphParseError("field aliases: not an object");
    for (const auto& [alias, target] : doc["aliases"].items()) {
      if (!target.is_string()) throw GraphParseError("field aliases." + alias + ": not a string");
      g.aliases[text::canonical_name(alias)] = text::canonical_name(target.get<std::string>());
    }
  }
  g.validate();
  return g;
}

KnowledgeGraph load(const std::filesystem::path& path) {
  std::string body;
  try {
    body = text::read_file(path.string());
  } catch (const std::exception& e) {
    throw GraphParseError(e.what());
  }
  return parse_graph(body);
}

std::string serialize(const KnowledgeGraph& g) {
  ordered_json doc;
  doc["version"] = g.version;
  doc["instruments"] = ordered_json::object();
  for (const auto& [instrument, actions] : g.instruments) {
    doc["instruments"][instrument] = std::vector<std::string>(actions.begin(), actions.end());
  }
  doc["aliases"] = ordered_json::object();
  for (const auto& [alias, target] : g.aliases) doc["aliases"][alias] = target;
  return doc.dump(2) + "\n";
}

bool is_permissible(const KnowledgeGraph& g, std::string_view instrument, std::string_view action,
                    UnknownPolicy policy) {
  const auto inst = g.resolve_instrument(instrument);
  const auto act = g.resolve_action(action);
  if (!inst || !act) return policy == UnknownPolicy::LenientUnknownPasses;
  return g.instruments.at(*inst).count(*act) != 0;
}

std::vector<std::string> compatible_actions(const KnowledgeGraph& g, std::string_view instrument) {
  const auto inst = g.resolve_instrument(instrument);
  if (!inst) return {};
  const auto& actions = g.instruments.at(*inst);
  return {actions.begin(), actions.end()};
}

}  // namespace surgraw::kg
