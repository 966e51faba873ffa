#include <gtest/gtest.h>

#include <set>

#include "surgraw/answer.hpp"
#include "surgraw/bench.hpp"
#include "surgraw/text.hpp"
#include "testing.hpp"

namespace surgraw::bench {
namespace {

const std::string kLine =
    R"({"id": "x1", "image": "frames/f1.png", "procedure": "p", "task": "action_prediction", "question": "Next?", "options": {"A": "a", "B": "b", "C": "c", "D": "d"}, "answer": "B"})";

std::string with(std::string line, const std::string& from, const std::string& to) {
  return text::replace_all(std::move(line), from, to);
}

std::vector<Query> parse(const std::string& jsonl) { return parse_dataset(jsonl, testing::fixture("mini")); }

TEST(Dataset, MiniBenchmarkLoads) {
  const auto& records = testing::mini_records();
  EXPECT_EQ(records.size(), 20u);
  std::set<TaskKind> tasks;
  for (const auto& q : records) {
    tasks.insert(q.task);
    EXPECT_NO_THROW(validate_query(q)) << q.id;
    EXPECT_TRUE(q.truth) << q.id;
  }
  EXPECT_EQ(tasks.size(), 5u);
  EXPECT_EQ(records[0].image.bytes(), testing::read(testing::fixture("mini/frames/f1.png")));
}

TEST(Dataset, TruthOutsideOptionsIsParseError) {
  try {
    parse(kLine + "\n" + with(with(kLine, "x1", "x2"), "\"answer\": \"B\"", "\"answer\": \"F\""));
    FAIL() << "expected DatasetParseError";
  } catch (const DatasetParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Dataset, MalformedLines) {
  EXPECT_THROW(parse("{not json"), DatasetParseError);
  EXPECT_THROW(parse(with(kLine, "\"task\": \"action_prediction\"", "\"task\": \"surgical_plan\"")), DatasetParseError);
  EXPECT_THROW(parse(with(kLine, "\"question\": \"Next?\", ", "")), DatasetParseError);
  EXPECT_THROW(parse(with(kLine, "\"task\": \"action_prediction\"", "\"task\": \"action_prediction\", \"perspective\": \"left\"")),
               DatasetParseError);
  EXPECT_THROW(parse(with(kLine, "\"C\": \"c\", ", "")), DatasetParseError);
}

TEST(Dataset, DuplicateIdAndMissingImage) {
  EXPECT_THROW(parse(kLine + "\n" + kLine), DuplicateId);
  EXPECT_THROW(parse(with(kLine, "frames/f1.png", "frames/nope.png")), MissingImage);
}

TEST(Dataset, BlankLinesSkippedAndPerspectiveInferred) {
  const auto recs = parse("\n" + kLine + "\n\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(infer_perspective("Which instrument is on the left side?"), Perspective::Left);
  EXPECT_FALSE(infer_perspective("left or right?"));
  EXPECT_FALSE(infer_perspective("What is leftover?"));
}

TEST(AnswerParser, CommittedCorpus) {
  const auto results = testing::run_parser_corpus();
  EXPECT_EQ(results.size(), 30u);
  for (const auto& r : results) EXPECT_EQ(r.detail, "") << r.name;
}

TEST(AnswerParser, SpecExamples) {
  const std::map<Letter, std::string> o = {{'A', "cutting"}, {'B', "suturing"}, {'C', "clipping"}, {'D', "suction"}};
  EXPECT_EQ(parse_answer("reasoning\nFINAL ANSWER: C", o).letter, 'C');
  EXPECT_EQ(parse_answer("FINAL ANSWER: a ... FINAL ANSWER: D", o).letter, 'D');
  const auto p = parse_answer("the scissors are used for cutting.", o);
  EXPECT_EQ(p.letter, 'A');
  EXPECT_TRUE(p.flagged());
}

TEST(Accuracy, HundredthsRounding) {
  EXPECT_EQ(accuracy_hundredths(3, 5), 6000);
  EXPECT_EQ(accuracy_hundredths(1, 3), 3333);
  EXPECT_EQ(accuracy_hundredths(2, 3), 6667);
  EXPECT_EQ(accuracy_hundredths(0, 0), 0);
  EXPECT_EQ(format_hundredths(7100), "71.00");
  EXPECT_EQ(format_hundredths(5), "0.05");
  for (std::int64_t t = 1; t <= 300; ++t) {
    for (std::int64_t c = 0; c <= t; ++c) ASSERT_EQ(accuracy_hundredths(c, t), testing::reference_hundredths(c, t));
  }
}

TEST(Aggregation, RandomizedIdentities) { EXPECT_EQ(testing::check_aggregation_identities(1234, 500), ""); }

TEST(Aggregation, TableOneAnchor) {
  const auto r = testing::table_one_anchor_report();
  EXPECT_EQ(format_hundredths(accuracy_hundredths(r.per_task.at(TaskKind::ActionPrediction).correct, 2000)), "68.95");
  EXPECT_EQ(format_hundredths(accuracy_hundredths(r.per_task.at(TaskKind::OutcomeAssessment).correct, 2000)), "44.05");
  EXPECT_EQ(format_hundredths(accuracy_hundredths(r.per_task.at(TaskKind::PatientData).correct, 2000)), "100.00");
  const auto& cog = r.per_category.at(Category::CognitiveInference);
  EXPECT_EQ(format_hundredths(accuracy_hundredths(cog.correct, cog.total)), "71.00");
  EXPECT_EQ(format_hundredths(r.macro_per_category.at(Category::CognitiveInference)), "71.00");
}

TEST(Aggregation, MacroSkipsEmptyAndRoundsExactly) {
  EXPECT_EQ(macro_hundredths({{1, 3, 0}, {0, 0, 0}, {2, 3, 0}}), 5000);
  EXPECT_EQ(macro_hundredths({{1, 3, 0}, {1, 6, 0}}), 2500);
  EXPECT_EQ(macro_hundredths({}), 0);
}

TEST(Table, AllZeroReport) {
  EvalReport r = aggregate({}, EvalConfig{});
  const std::string table = render_table(r);
  const auto lines = text::split_lines(table);
  ASSERT_GE(lines.size(), 3u);
  const auto cells = text::split_words(lines[2]);
  int numeric = 0;
  for (const auto& cell : cells) {
    if (cell == "|" || cell == "full") continue;
    EXPECT_EQ(cell, "0.00");
    ++numeric;
  }
  EXPECT_EQ(numeric, 8);
}

TEST(Table, CogAvgIsMeanUnderEqualCounts) {
  const auto r = testing::table_one_anchor_report();
  const auto lines = text::split_lines(render_table(r));
  std::vector<std::string> cells;
  for (const auto& c : text::split_words(lines[2])) {
    if (c != "|") cells.push_back(c);
  }
  ASSERT_EQ(cells.size(), 9u);
  EXPECT_EQ(text::split_words(lines[0])[0], "Setting");
  EXPECT_EQ(cells[2], "68.95");
  EXPECT_EQ(cells[3], "44.05");
  EXPECT_EQ(cells[4], "100.00");
  EXPECT_EQ(cells[5], "71.00");
  EXPECT_NE(lines[3].find("CogAvg 71.00"), std::string::npos);
}

TEST(Report, JsonRoundTrip) {
  const auto run = evaluate(testing::mini_records(), EvalConfig{}, testing::engine(testing::golden_provider()),
                            RunOptions{2, std::nullopt});
  EXPECT_EQ(report_from_json(nlohmann::json::parse(dump_report(run.report))), run.report);
  EXPECT_THROW(report_from_json(nlohmann::json::parse("{}")), ConfigError);
}

TEST(Evaluate, GoldenRunMatchesCommittedReport) {
  const auto run = testing::run_golden_bench(4);
  EXPECT_EQ(testing::check_golden(testing::fixture("mini/golden/report.json"), run.report), "");
  for (const auto& [name, body] : run.traces) {
    EXPECT_EQ(testing::check_golden(testing::fixture("mini/golden/traces/" + name), body), "");
  }
  const auto report = report_from_json(nlohmann::json::parse(run.report));
  EXPECT_EQ(report.overall, (Counts{16, 20, 1}));
  EXPECT_EQ(run.traces.size(), 19u);
}

TEST(Evaluate, ThreeOfFiveCorrect) {
  std::vector<Query> five;
  for (const auto& q : testing::mini_records()) {
    if (task_category(q.task) == Category::CognitiveInference && five.size() < 5) five.push_back(q);
  }
  ASSERT_EQ(five.size(), 5u);
  provider::MockScript script;
  script.mode = provider::MockMode::BySequence;
  for (std::size_t i = 0; i < five.size(); ++i) {
    const Letter truth = *five[i].truth;
    const Letter wrong = truth == 'A' ? 'B' : 'A';
    script.entries.push_back({"", i, std::string("FINAL ANSWER: ") + (i < 3 ? truth : wrong)});
  }
  EvalConfig cfg;
  cfg.no_cot = cfg.no_rag = cfg.no_panel = true;
  const auto run = evaluate(five, cfg, testing::engine(std::make_shared<provider::MockProvider>(script)),
                            RunOptions{1, std::nullopt});
  EXPECT_EQ(format_hundredths(accuracy_hundredths(run.report.overall.correct, run.report.overall.total)), "60.00");
}

TEST(Evaluate, LimitKeepsDatasetOrder) {
  EvalConfig cfg;
  cfg.limit = 2;
  const auto dir = std::filesystem::temp_directory_path() / "surgraw_limit_traces";
  std::filesystem::remove_all(dir);
  const auto run = evaluate(testing::mini_records(), cfg, testing::engine(testing::hash_choice_provider()),
                            RunOptions{4, dir});
  ASSERT_EQ(run.traces.size(), 2u);
  EXPECT_EQ(run.traces[0]->query_id, "f1-ar-left");
  EXPECT_EQ(run.traces[1]->query_id, "f1-ir-left");
  EXPECT_EQ(run.report.overall.total, 2);
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  EXPECT_EQ(files, (std::vector<std::string>{"0000_f1-ar-left.json", "0001_f1-ir-left.json"}));
  EXPECT_EQ(run.report.traces_path, dir.string());
  std::filesystem::remove_all(dir);
}

TEST(Evaluate, ErrorsAreCountedIncorrectAndListed) {
  const auto run = evaluate(testing::mini_records(), EvalConfig{}, testing::engine(testing::golden_provider()));
  std::size_t errors = 0;
  for (const auto& r : run.report.records) {
    if (!r.error) continue;
    ++errors;
    EXPECT_EQ(r.id, "f2-patient");
    EXPECT_FALSE(r.correct);
    EXPECT_EQ(r.error->stage, "parse");
    EXPECT_EQ(r.error->kind, "AnswerUnparseable");
  }
  EXPECT_EQ(errors, 1u);
}

TEST(Evaluate, CompanionLookup) {
  const auto& records = testing::mini_records();
  EXPECT_EQ(find_companion(records, 0)->id, "f1-ir-left");
  EXPECT_EQ(find_companion(records, 1)->id, "f1-ar-left");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id == "f3-ar-right") EXPECT_EQ(find_companion(records, i), nullptr);
    if (records[i].id == "f1-plan") EXPECT_EQ(find_companion(records, i), nullptr);
  }
  EXPECT_EQ(trace_file_name(7, "a/b c"), "0007_a_b_c.json");
}

}  // namespace
}  // namespace surgraw::bench
