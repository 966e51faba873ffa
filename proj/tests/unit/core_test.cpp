#include <gtest/gtest.h>

#include <set>

#include "surgraw/core.hpp"
#include "testing.hpp"

namespace surgraw {
namespace {

using testing::make_query;

std::map<Letter, std::string> abcd() {
  return {{'A', "cutting"}, {'B', "suturing"}, {'C', "clipping"}, {'D', "suction"}};
}

std::string malformed_reason(const Query& q) {
  try {
    validate_query(q);
  } catch (const MalformedQuery& e) {
    return e.what();
  }
  return "ok";
}

TEST(ValidateQuery, AcceptsWellFormedQuery) {
  Query q = make_query(TaskKind::ActionRecognition, abcd());
  q.truth = 'B';
  EXPECT_EQ(malformed_reason(q), "ok");
}

TEST(ValidateQuery, RejectsLetterGap) {
  Query q = make_query(TaskKind::ActionRecognition, {{'A', "cutting"}, {'C', "clipping"}});
  EXPECT_EQ(malformed_reason(q), "non-consecutive letters");
}

TEST(ValidateQuery, RejectsPerspectiveOnCognitiveTask) {
  Query q = make_query(TaskKind::ActionPrediction, abcd(), "What next?", Perspective::Left);
  EXPECT_EQ(malformed_reason(q), "perspective on cognitive task");
}

TEST(ValidateQuery, RejectsOtherBrokenInvariants) {
  EXPECT_EQ(malformed_reason(make_query(TaskKind::ActionRecognition, {{'A', "x"}})), "fewer than two options");
  Query q = make_query(TaskKind::ActionRecognition, abcd());
  q.truth = 'E';
  EXPECT_EQ(malformed_reason(q), "truth not among options");
  q = make_query(TaskKind::ActionRecognition, abcd(), "   ");
  EXPECT_EQ(malformed_reason(q), "empty question");
  q = make_query(TaskKind::ActionRecognition, {{'A', "a"}, {'B', "b"}, {'C', "c"}, {'D', "d"}, {'E', "e"}, {'F', "f"}});
  EXPECT_EQ(malformed_reason(q), "more than five options");
  q = make_query(TaskKind::ActionRecognition, abcd());
  q.options['B'] = " ";
  EXPECT_EQ(malformed_reason(q), "empty option B");
  q = make_query(TaskKind::ActionRecognition, abcd());
  q.id.clear();
  EXPECT_EQ(malformed_reason(q), "empty id");
}

TEST(NormalizeLetter, StripsCaseAndPunctuation) {
  EXPECT_EQ(normalize_letter("(c)"), 'C');
  EXPECT_EQ(normalize_letter(" b."), 'B');
  EXPECT_EQ(normalize_letter("**E**"), 'E');
}

TEST(NormalizeLetter, RejectsNonLetters) {
  EXPECT_THROW(normalize_letter("42"), NotALetter);
  EXPECT_THROW(normalize_letter("F"), NotALetter);
  EXPECT_THROW(normalize_letter("AB"), NotALetter);
  EXPECT_THROW(normalize_letter(""), NotALetter);
}

TEST(Taxonomy, TaskCategoryPartition) {
  EXPECT_EQ(task_category(TaskKind::ActionRecognition), Category::VisualSemantic);
  EXPECT_EQ(task_category(TaskKind::InstrumentRecognition), Category::VisualSemantic);
  EXPECT_EQ(task_category(TaskKind::ActionPrediction), Category::CognitiveInference);
  EXPECT_EQ(task_category(TaskKind::OutcomeAssessment), Category::CognitiveInference);
  EXPECT_EQ(task_category(TaskKind::PatientData), Category::CognitiveInference);
  EXPECT_THROW(task_category(TaskKind::Unknown), MalformedQuery);
}

TEST(Taxonomy, TaskAgentIsBijection) {
  std::set<AgentId> agents;
  for (TaskKind t : kAllTasks) {
    const AgentId a = task_agent(t);
    EXPECT_TRUE(agents.insert(a).second);
    EXPECT_EQ(agent_task(a), t);
  }
  EXPECT_EQ(agents.size(), 5u);
  EXPECT_FALSE(agent_task(AgentId::DepartmentCoordinator));
  EXPECT_FALSE(agent_task(AgentId::ActionEvaluator));
}

TEST(Taxonomy, NamesRoundTrip) {
  for (TaskKind t : kAllTasks) EXPECT_EQ(task_from_name(task_name(t)), t);
  for (int i = 0; i <= static_cast<int>(AgentId::ActionEvaluator); ++i) {
    const auto a = static_cast<AgentId>(i);
    EXPECT_EQ(agent_from_name(agent_name(a)), a);
  }
  for (Perspective p : {Perspective::Left, Perspective::Right, Perspective::Whole}) {
    EXPECT_EQ(perspective_from_name(perspective_name(p)), p);
  }
  EXPECT_EQ(agent_title(AgentId::InstrumentSpecialist), "Instrument Specialist");
  EXPECT_FALSE(task_from_name("surgical_plan"));
}

TEST(Image, MissingFileRaisesMissingImage) {
  const Image img = Image::from_file("/nonexistent/frame.png");
  EXPECT_EQ(img.media_type, "image/png");
  EXPECT_THROW(img.bytes(), MissingImage);
}

}  // namespace
}  // namespace surgraw
