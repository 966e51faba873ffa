#include <gtest/gtest.h>

#include <set>

#include "surgraw/provider.hpp"
#include "testing.hpp"

namespace surgraw::provider {
namespace {

ModelRequest sample_request(double temperature = 0.0) {
  ModelRequest req;
  req.model = "gpt-4o";
  req.temperature = temperature;
  req.max_tokens = 1024;
  req.messages.push_back(ChatMessage::system("You are a surgical assistant."));
  req.messages.push_back(ChatMessage::user(
      "Which instrument?\nA. needle driver",
      ImagePart{"image/png", std::make_shared<const std::string>(std::string("\x89PNG\r\n\x1a\nframe", 13))}));
  return req;
}

TEST(Fingerprint, MatchesReferenceDigests) {
  // Digests of the documented canonical layout computed with Python hashlib.
  EXPECT_EQ(fingerprint(sample_request(0.0)), "90834121677499e3847be33ba184285b81970211ce342d98e0a843373ce4473f");
  EXPECT_EQ(fingerprint(sample_request(0.5)), "522a4a78af8fa8bd464b375e3a122da75a0c7eaa74b5b752448489001fa50dd7");
}

TEST(Fingerprint, IdenticalRequestsIdenticalDigests) {
  EXPECT_EQ(fingerprint(sample_request()), fingerprint(sample_request()));
  EXPECT_EQ(fingerprint(sample_request()).size(), 64u);
}

TEST(Fingerprint, NoCollisionsOverTenThousandRequests) {
  std::set<std::string> seen;
  for (int i = 0; i < 10000; ++i) {
    ModelRequest req;
    req.model = "m";
    req.max_tokens = 1 + i % 7;
    req.messages.push_back(ChatMessage::user("q" + std::to_string(i / 7)));
    seen.insert(fingerprint(req));
  }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Fingerprint, FieldBoundariesAreUnambiguous) {
  ModelRequest a;
  a.model = "m";
  a.messages = {ChatMessage::user("ab"), ChatMessage::user("c")};
  ModelRequest b = a;
  b.messages = {ChatMessage::user("a"), ChatMessage::user("bc")};
  EXPECT_NE(fingerprint(a), fingerprint(b));
}

TEST(ValidateRequest, RejectsEmptyMessages) {
  ModelRequest req = sample_request();
  req.messages.clear();
  EXPECT_THROW(validate_request(req), InvalidRequest);
  MockProvider mock{MockScript{}};
  EXPECT_THROW(mock.complete(req), InvalidRequest);
  EXPECT_EQ(mock.calls(), 0u);
}

TEST(MockProvider, HashChoiceIsDeterministic) {
  MockProvider a{MockScript{}};
  MockProvider b{MockScript{}};
  const auto first = a.complete(sample_request()).text;
  EXPECT_EQ(first, a.complete(sample_request()).text);
  EXPECT_EQ(first, b.complete(sample_request()).text);
}

TEST(MockProvider, HashChoicePicksAnOfferedLetter) {
  MockProvider mock{MockScript{}};
  for (int i = 0; i < 50; ++i) {
    ModelRequest req;
    req.model = "m";
    req.messages.push_back(ChatMessage::user("Question " + std::to_string(i) + "\nOptions:\nA. x\nB. y\nC. z\n\nAnswer."));
    const auto text = mock.complete(req).text;
    ASSERT_TRUE(text == "FINAL ANSWER: A" || text == "FINAL ANSWER: B" || text == "FINAL ANSWER: C") << text;
  }
}

TEST(MockProvider, ByFingerprintLongestPrefixWins) {
  const std::string fp = fingerprint(sample_request());
  MockScript script;
  script.mode = MockMode::ByFingerprint;
  script.entries = {{fp.substr(0, 4), std::nullopt, "short"}, {fp.substr(0, 10), std::nullopt, "long"}};
  MockProvider mock{script};
  EXPECT_EQ(mock.complete(sample_request()).text, "long");
  EXPECT_THROW(mock.complete(sample_request(0.5)), ScriptMiss);
}

TEST(MockProvider, BySequenceHandsOutInOrder) {
  MockScript script = MockScript::parse(
      R"({"mode":"by_sequence","entries":[{"match":1,"response_text":"second"},{"match":0,"response_text":"first"}]})");
  MockProvider mock{script};
  EXPECT_EQ(mock.complete(sample_request()).text, "first");
  EXPECT_EQ(mock.complete(sample_request()).text, "second");
  EXPECT_THROW(mock.complete(sample_request()), ScriptMiss);
}

TEST(MockScript, RejectsInvalidScripts) {
  EXPECT_THROW(MockScript::parse("[]"), MockScriptError);
  EXPECT_THROW(MockScript::parse(R"({"mode":"psychic"})"), MockScriptError);
  EXPECT_THROW(MockScript::parse(
                   R"({"mode":"by_fingerprint","entries":[{"match":"ab","response_text":"x"},{"match":"ab","response_text":"y"}]})"),
               MockScriptError);
  EXPECT_THROW(MockScript::parse(R"({"mode":"by_fingerprint","entries":[{"match":"xyz","response_text":"x"}]})"),
               MockScriptError);
  EXPECT_THROW(MockScript::parse(R"({"mode":"by_sequence","entries":[{"response_text":"x"}]})"), MockScriptError);
}

TEST(MockScript, DumpParseRoundTrip) {
  const auto script = MockScript::load(testing::fixture("mini/mock_script.json"));
  EXPECT_EQ(script.mode, MockMode::ByFingerprint);
  EXPECT_EQ(MockScript::parse(script.dump()).dump(), script.dump());
  EXPECT_EQ(script.dump(), testing::read(testing::fixture("mini/mock_script.json")));
}

class FlakyProvider : public Provider {
 public:
  enum class Mode { FailThenSucceed, BadRequest, Timeout };
  FlakyProvider(Mode mode, int failures) : mode_(mode), failures_(failures) {}
  ModelResponse complete(const ModelRequest&) override {
    ++calls;
    if (mode_ == Mode::BadRequest) throw BackendError(400, "bad request");
    if (mode_ == Mode::Timeout) throw TransportError("timed out");
    if (calls <= failures_) throw BackendError(503, "unavailable");
    return ModelResponse{"FINAL ANSWER: A", std::nullopt, 0};
  }
  std::string name() const override { return "flaky"; }
  int calls = 0;

 private:
  Mode mode_;
  int failures_;
};

TEST(Retry, TwoServiceUnavailableThenSuccess) {
  FlakyProvider inner(FlakyProvider::Mode::FailThenSucceed, 2);
  std::vector<std::chrono::milliseconds> delays;
  const auto out = retrying_complete(inner, sample_request(), RetryPolicy{},
                                     [&](std::chrono::milliseconds d) { delays.push_back(d); });
  EXPECT_EQ(out.attempts, 3);
  EXPECT_EQ(out.response.text, "FINAL ANSWER: A");
  ASSERT_EQ(delays.size(), 2u);
  EXPECT_GE(delays[0].count(), 400);
  EXPECT_LE(delays[0].count(), 600);
  EXPECT_GE(delays[1].count(), 800);
  EXPECT_LE(delays[1].count(), 1200);
}

TEST(Retry, BadRequestIsNotRetried) {
  FlakyProvider inner(FlakyProvider::Mode::BadRequest, 0);
  int sleeps = 0;
  try {
    retrying_complete(inner, sample_request(), RetryPolicy{}, [&](auto) { ++sleeps; });
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_EQ(inner.calls, 1);
  EXPECT_EQ(sleeps, 0);
}

TEST(Retry, PersistentTimeoutGivesUpAfterThreeAttempts) {
  FlakyProvider inner(FlakyProvider::Mode::Timeout, 0);
  EXPECT_THROW(retrying_complete(inner, sample_request(), RetryPolicy{}, [](auto) {}), TransportError);
  EXPECT_EQ(inner.calls, 3);
}

TEST(Retry, JitterIsReplayable) {
  auto run = [](std::uint64_t seed) {
    FlakyProvider inner(FlakyProvider::Mode::FailThenSucceed, 2);
    std::vector<std::int64_t> delays;
    retrying_complete(inner, sample_request(), RetryPolicy{}, [&](auto d) { delays.push_back(d.count()); }, seed);
    return delays;
  };
  EXPECT_EQ(run(7), run(7));
}

TEST(Retry, BackoffDelayFormula) {
  const RetryPolicy p;
  EXPECT_EQ(backoff_delay(p, 1, 0.0).count(), 500);
  EXPECT_EQ(backoff_delay(p, 2, 0.0).count(), 1000);
  EXPECT_EQ(backoff_delay(p, 3, 1.0).count(), 2400);
  EXPECT_EQ(backoff_delay(p, 1, -1.0).count(), 400);
  EXPECT_TRUE(is_retryable_status(429));
  EXPECT_TRUE(is_retryable_status(503));
  EXPECT_FALSE(is_retryable_status(400));
  EXPECT_FALSE(is_retryable_status(401));
}

}  // namespace
}  // namespace surgraw::provider
