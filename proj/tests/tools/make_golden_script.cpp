// Regenerates tests/fixtures/mini/mock_script.json.
//
// A scripted responder plays every model role for the 20-record mini
// benchmark: it recognizes each request by frame and question (agents) or by
// the case tag embedded in the action reasoning (judge), answers from the
// scenario table below, and the recorded (fingerprint -> reply) pairs become a
// by_fingerprint mock script. The run is then replayed against the written
// script and the final answers are checked against the table.
//
// usage: make_golden_script <repo root>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>

#include "surgraw/bench.hpp"
#include "surgraw/text.hpp"

using namespace surgraw;

namespace {

enum class Style { Final, Lone, Text, Garbage, Messy, Double };

struct Reply {
  char letter;
  Style style = Style::Final;
};

// (record id, round) -> agent reply
const std::map<std::pair<std::string, int>, Reply> kAgent = {
    {{"f1-ar-left", 1}, {'B'}},
    {{"f1-ir-left", 1}, {'A'}},
    {{"f1-ar-right", 1}, {'B'}},
    {{"f1-ar-right", 2}, {'A'}},
    {{"f1-ir-right", 1}, {'B'}},
    {{"f1-plan", 1}, {'B'}},
    {{"f1-outcome", 1}, {'A'}},
    {{"f1-patient", 1}, {'D', Style::Lone}},
    {{"f2-ar-left", 1}, {'C'}},
    {{"f2-ar-left", 2}, {'C'}},
    {{"f2-ir-left", 1}, {'A'}},
    {{"f2-ar-right", 1}, {'A'}},
    {{"f2-ir-right", 1}, {'C'}},
    {{"f2-plan", 1}, {'D'}},
    {{"f2-outcome", 1}, {'C', Style::Text}},
    {{"f2-patient", 1}, {'A', Style::Garbage}},
    {{"f3-ar-left", 1}, {'A'}},
    {{"f3-ir-left", 1}, {'A'}},
    {{"f3-ar-right", 1}, {'A'}},
    {{"f3-ar-right#companion", 1}, {'E'}},
    {{"f3-plan", 1}, {'A'}},
    {{"f3-outcome", 1}, {'D', Style::Messy}},
    {{"f3-patient", 1}, {'B', Style::Double}},
};

// action case tag "<id> r<round>" -> judge reply
const std::map<std::string, std::string> kJudge = {
    {"f1-ar-left r1", R"({"coherence": 5, "synergy": 5, "feedback": "aligned"})"},
    {"f1-ar-right r1",
     R"({"coherence": 3, "synergy": 2, "feedback": "Prograsp forceps cannot cauterize; re-check whether the jaws are grasping tissue."})"},
    {"f1-ar-right r2", R"({"coherence": 4, "synergy": 4, "feedback": "consistent after revision"})"},
    {"f2-ar-left r1",
     R"({"coherence": 2, "synergy": 2, "feedback": "Suturing needs a needle driver; the left instrument is a clip applier."})"},
    {"f2-ar-left r2", R"({"coherence": 2, "synergy": 3, "feedback": "Still inconsistent with the clip applier."})"},
    {"f2-ar-right r1", R"({"coherence": 4, "synergy": 5, "feedback": "grasping forceps retracting tissue"})"},
    {"f3-ar-left r1", "PARSE-FAIL-ONCE"},
    {"f3-ar-right r1", R"({"coherence": 7, "synergy": 4, "feedback": "suction with the irrigator"})"},
};

const std::map<std::string, char> kExpectedFinal = {
    {"f1-ar-left", 'B'},  {"f1-ir-left", 'A'},  {"f1-ar-right", 'A'}, {"f1-ir-right", 'B'},
    {"f1-plan", 'B'},     {"f1-outcome", 'A'},  {"f1-patient", 'D'},  {"f2-ar-left", 'A'},
    {"f2-ir-left", 'A'},  {"f2-ar-right", 'A'}, {"f2-ir-right", 'C'}, {"f2-plan", 'D'},
    {"f2-outcome", 'C'},  {"f3-ar-left", 'A'},  {"f3-ir-left", 'A'},  {"f3-ar-right", 'A'},
    {"f3-plan", 'A'},     {"f3-outcome", 'D'},  {"f3-patient", 'B'},
};

std::string question_of(const std::string& user_text) {
  for (const auto& line : text::split_lines(user_text)) {
    if (text::starts_with(line, "Question: ")) return line.substr(10);
  }
  return {};
}

std::string agent_reply(const std::string& tag, const Query& q, const std::vector<std::string>& labels,
                        const Reply& r) {
  const std::string option = q.option_text(r.letter);
  if (r.style == Style::Garbage) return "Case: " + tag + "\nI cannot determine this from the frame.";
  std::string out = "Case: " + tag + "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i + 1) + ". " + labels[i] + ": ";
    out += i + 1 == labels.size() ? "The evidence supports option " + std::string(1, r.letter) + "."
                                  : "Observations recorded for this stage.";
    out += "\n";
  }
  switch (r.style) {
    case Style::Final: return out + "\nFINAL ANSWER: " + r.letter;
    case Style::Lone: return out + "\nMy choice is below.\n" + r.letter;
    case Style::Text: return out + "\nThe best answer is: " + text::to_lower(option) + ".";
    case Style::Messy: return out + "\n**Final Answer:** (" + static_cast<char>(std::tolower(r.letter)) + ")";
    case Style::Double: return out + "\nFINAL ANSWER: A\nOn reflection that is wrong.\nFINAL ANSWER: " + r.letter;
    default: return out;
  }
}

class Responder : public provider::Provider {
 public:
  Responder(const std::vector<Query>& records, std::map<std::string, std::string> frames)
      : records_(records), frames_(std::move(frames)) {}

  provider::ModelResponse complete(const provider::ModelRequest& req) override {
    const std::string text = respond(req);
    std::lock_guard<std::mutex> lock(mu_);
    recorded_[provider::fingerprint(req)] = text;
    return provider::ModelResponse{text, std::nullopt, 0};
  }
  std::string name() const override { return "scripted"; }

  const std::map<std::string, std::string>& recorded() const { return recorded_; }

 private:
  std::string respond(const provider::ModelRequest& req) {
    std::string first_user;
    std::string frame;
    int user_messages = 0;
    for (const auto& m : req.messages) {
      if (m.role != provider::Role::User) continue;
      if (++user_messages == 1) first_user = m.text();
      for (const auto& part : m.parts) {
        if (const auto* img = std::get_if<provider::ImagePart>(&part)) {
          for (const auto& [name, bytes] : frames_) {
            if (bytes == *img->data) frame = name;
          }
        }
      }
    }
    if (frame.empty()) return judge(first_user, user_messages);

    const std::string question = question_of(first_user);
    const Query* q = nullptr;
    for (const auto& r : records_) {
      if (r.image.path.filename().string() == frame && cot::question_line(r) == "Question: " + question) q = &r;
    }
    std::string id;
    Query companion;
    if (q) {
      id = q->id;
    } else {
      // Synthesized companion: identified through its primary on the same frame.
      for (const auto& r : records_) {
        if (r.image.path.filename().string() != frame || r.task != TaskKind::ActionRecognition) continue;
        if (!r.perspective) continue;
        const std::string side(perspective_name(*r.perspective));
        if (question.find(side) == std::string::npos) continue;
        if (!bench::find_companion(records_, static_cast<std::size_t>(&r - records_.data()))) {
          id = r.id + "#companion";
          companion = orchestrator::synthesize_companion(r, graph());
          q = &companion;
        }
      }
    }
    if (!q) fail("no record for frame " + frame + " question '" + question + "'");
    const int round = user_messages;
    const auto it = kAgent.find({id, round});
    if (it == kAgent.end()) fail("no scripted reply for " + id + " round " + std::to_string(round));
    return agent_reply(id + " r" + std::to_string(round), *q, cot::prompt_stage_labels(first_user), it->second);
  }

  std::string judge(const std::string& user, int user_messages) {
    const auto action_start = user.find("Action Interpreter reasoning:");
    const auto tag_start = user.find("Case: ", action_start);
    if (action_start == std::string::npos || tag_start == std::string::npos) fail("unrecognized request:\n" + user);
    const auto tag_end = user.find('\n', tag_start);
    const std::string tag = user.substr(tag_start + 6, tag_end - tag_start - 6);
    const auto it = kJudge.find(tag);
    if (it == kJudge.end()) fail("no judge reply for " + tag);
    if (it->second == "PARSE-FAIL-ONCE") {
      if (user_messages == 1) return "Both chains look fine to me.";
      return "```json\n{\"coherence\": 5, \"synergy\": 5, \"feedback\": \"monopolar scissors cauterizing, aligned\"}\n```";
    }
    return "```json\n" + it->second + "\n```";
  }

 public:
  static const kg::KnowledgeGraph& graph() {
    static const kg::KnowledgeGraph g = kg::load(std::string(SURGRAW_DEFAULT_KGRAPH));
    return g;
  }

 private:
  [[noreturn]] static void fail(const std::string& msg) {
    std::cerr << "make_golden_script: " << msg << "\n";
    std::exit(1);
  }

  const std::vector<Query>& records_;
  std::map<std::string, std::string> frames_;
  std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

orchestrator::Engine engine_with(std::shared_ptr<provider::Provider> p, const std::filesystem::path& root) {
  orchestrator::Engine e;
  e.provider = std::move(p);
  e.templates = std::make_shared<const cot::TemplateSet>(cot::TemplateSet::load(root / "templates"));
  e.graph = std::make_shared<const kg::KnowledgeGraph>(kg::load(root / "data/kgraph_fixture.json"));
  e.index = std::make_shared<const rag::Index>(rag::Index::build_from_dir(root / "tests/fixtures/mini/corpus"));
  e.clock = [] { return std::int64_t{0}; };
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden_script <repo root>\n";
    return 2;
  }
  const std::filesystem::path root = argv[1];
  const auto mini = root / "tests/fixtures/mini";
  const auto records = bench::load_dataset(mini / "mini_bench.jsonl");
  std::map<std::string, std::string> frames;
  for (const char* f : {"f1.png", "f2.png", "f3.png"}) frames[f] = text::read_file((mini / "frames" / f).string());

  auto responder = std::make_shared<Responder>(records, frames);
  EvalConfig cfg;
  bench::evaluate(records, cfg, engine_with(responder, root), bench::RunOptions{1, std::nullopt});

  // Shortest unique prefixes of at least 16 hex characters.
  std::size_t width = 16;
  for (;; ++width) {
    std::set<std::string> seen;
    bool unique = true;
    for (const auto& [fp, reply] : responder->recorded()) unique = unique && seen.insert(fp.substr(0, width)).second;
    if (unique) break;
  }
  provider::MockScript script;
  script.mode = provider::MockMode::ByFingerprint;
  for (const auto& [fp, reply] : responder->recorded()) {
    script.entries.push_back(provider::MockEntry{fp.substr(0, width), std::nullopt, reply});
  }
  std::ofstream(mini / "mock_script.json", std::ios::binary) << script.dump();

  auto replay = std::make_shared<provider::MockProvider>(provider::MockScript::load(mini / "mock_script.json"));
  const auto run = bench::evaluate(records, cfg, engine_with(replay, root), bench::RunOptions{1, std::nullopt});
  int mismatches = 0;
  for (const auto& rec : run.report.records) {
    const auto want = kExpectedFinal.find(rec.id);
    const bool expect_error = want == kExpectedFinal.end();
    const bool ok = expect_error ? rec.error.has_value() : (rec.answer && *rec.answer == want->second);
    if (!ok) {
      ++mismatches;
      std::cerr << "unexpected outcome for " << rec.id << (rec.error ? ": " + rec.error->message : "") << "\n";
    }
  }
  std::cout << "wrote " << script.entries.size() << " entries; " << run.report.overall.correct << "/"
            << run.report.overall.total << " correct\n";
  return mismatches == 0 ? 0 : 1;
}
