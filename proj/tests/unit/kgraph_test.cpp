#include <gtest/gtest.h>

#include "surgraw/kgraph.hpp"
#include "testing.hpp"

namespace surgraw::kg {
namespace {

const KnowledgeGraph& g() { return *testing::fixture_graph(); }

TEST(KnowledgeGraph, FixtureLoads) {
  EXPECT_GE(g().instruments.size(), 5u);
  EXPECT_EQ(g().version, "fixture-2026.1");
  EXPECT_NO_THROW(g().validate());
}

TEST(KnowledgeGraph, DanglingAliasRejected) {
  EXPECT_THROW(parse_graph(R"({"version":"1","instruments":{"needle driver":["suturing"]},
                               "aliases":{"mcs":"monopolar curved scissors"}})"),
               DanglingAlias);
}

TEST(KnowledgeGraph, EmptyActionSetRejected) {
  EXPECT_THROW(parse_graph(R"({"version":"1","instruments":{"needle driver":[]}})"), EmptyActionSet);
}

TEST(KnowledgeGraph, ParseErrors) {
  EXPECT_THROW(parse_graph("{"), GraphParseError);
  EXPECT_THROW(parse_graph(R"({"instruments":{}})"), GraphParseError);
  EXPECT_THROW(parse_graph(R"({"version":"1","instruments":{"a":"b"}})"), GraphParseError);
  EXPECT_THROW(parse_graph(R"({"version":"1","instruments":{},"extra":1})"), GraphParseError);
}

TEST(KnowledgeGraph, NamesAreCanonicalized) {
  const auto graph = parse_graph(R"({"version":"1","instruments":{"  Needle   Driver ":["Knot  Tying"]}})");
  EXPECT_TRUE(graph.instruments.count("needle driver"));
  EXPECT_TRUE(is_permissible(graph, "NEEDLE driver", "knot tying", UnknownPolicy::StrictUnknownFails));
}

TEST(IsPermissible, FixturePairs) {
  EXPECT_TRUE(is_permissible(g(), "needle driver", "suturing", UnknownPolicy::StrictUnknownFails));
  EXPECT_FALSE(is_permissible(g(), "needle driver", "cauterization", UnknownPolicy::StrictUnknownFails));
  EXPECT_FALSE(is_permissible(g(), "needle driver", "cauterization", UnknownPolicy::LenientUnknownPasses));
}

TEST(IsPermissible, UnknownPolicy) {
  EXPECT_FALSE(is_permissible(g(), "phaser", "suturing", UnknownPolicy::StrictUnknownFails));
  EXPECT_TRUE(is_permissible(g(), "phaser", "suturing", UnknownPolicy::LenientUnknownPasses));
  EXPECT_FALSE(is_permissible(g(), "needle driver", "teleporting", UnknownPolicy::StrictUnknownFails));
  EXPECT_TRUE(is_permissible(g(), "needle driver", "teleporting", UnknownPolicy::LenientUnknownPasses));
}

TEST(IsPermissible, AliasesResolveOnBothSides) {
  EXPECT_TRUE(is_permissible(g(), "hot shears", "cautery", UnknownPolicy::StrictUnknownFails));
  EXPECT_TRUE(is_permissible(g(), "Large Needle Driver", "suture", UnknownPolicy::StrictUnknownFails));
}

TEST(CompatibleActions, FixtureAndAliasTransparency) {
  EXPECT_EQ(compatible_actions(g(), "needle driver"),
            (std::vector<std::string>{"knot tying", "needle passing", "suturing"}));
  EXPECT_TRUE(compatible_actions(g(), "phaser").empty());
  for (const auto& [alias, target] : g().aliases) {
    if (!g().instruments.count(target)) continue;
    EXPECT_EQ(compatible_actions(g(), alias), compatible_actions(g(), target)) << alias;
  }
}

TEST(KnowledgeGraph, SerializeRoundTrip) {
  EXPECT_EQ(parse_graph(serialize(g())), g());
  EXPECT_EQ(policy_from_name(policy_name(UnknownPolicy::LenientUnknownPasses)), UnknownPolicy::LenientUnknownPasses);
}

TEST(KnowledgeGraph, DocumentedExampleLoads) {
  const std::string doc = testing::read(testing::source_path("docs/kgraph.md"));
  const auto start = doc.find("```json\n") + 8;
  const auto graph = parse_graph(doc.substr(start, doc.find("```", start) - start));
  EXPECT_EQ(compatible_actions(graph, "large needle driver"),
            (std::vector<std::string>{"knot tying", "needle passing", "suturing"}));
}

}  // namespace
}  // namespace surgraw::kg
