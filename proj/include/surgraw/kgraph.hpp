#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "surgraw/errors.hpp"

namespace surgraw::kg {

enum class UnknownPolicy { StrictUnknownFails, LenientUnknownPasses };

std::string_view policy_name(UnknownPolicy policy);
std::optional<UnknownPolicy> policy_from_name(std::string_view name);

// Permissible instrument -> action relations. All names are canonical:
// lowercase with single spaces. Immutable after load.
struct KnowledgeGraph {
  std::string version;
  std::map<std::string, std::set<std::string>> instruments;
  // alias -> canonical instrument or action name
  std::map<std::string, std::string> aliases;

  // Canonical instrument for a name or alias.
  std::optional<std::string> resolve_instrument(std::string_view name) const;
  // Canonical action for a name or alias.
  std::optional<std::string> resolve_action(std::string_view name) const;

  std::set<std::string> all_actions() const;

  // Throws DanglingAlias / EmptyActionSet / GraphParseError.
  void validate() const;

  bool operator==(const KnowledgeGraph&) const = default;
};

// JSON document: {"version": str, "instruments": {name: [action, ...]},
// "aliases": {alias: canonical}}; an optional "description" string is ignored.
KnowledgeGraph parse_graph(std::string_view json_text);
KnowledgeGraph load(const std::filesystem::path& path);
std::string serialize(const KnowledgeGraph& g);

bool is_permissible(const KnowledgeGraph& g, std::string_view instrument, std::string_view action,
                    UnknownPolicy policy);

// Alias-resolved action set, sorted; empty for an unknown instrument.
std::vector<std::string> compatible_actions(const KnowledgeGraph& g, std::string_view instrument);

}  // namespace surgraw::kg
