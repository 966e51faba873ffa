#include "surgraw/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "surgraw/bench.hpp"
#include "surgraw/kgraph.hpp"
#include "surgraw/orchestrator.hpp"
#include "surgraw/rag.hpp"
#include "surgraw/service.hpp"
#include "surgraw/text.hpp"
#include "surgraw/trace_json.hpp"

#ifndef SURGRAW_DEFAULT_KGRAPH
#define SURGRAW_DEFAULT_KGRAPH "data/kgraph_fixture.json"
#endif

namespace surgraw::cli {

std::shared_ptr<provider::Provider> make_provider(const std::string& name,
                                                  const std::optional<std::string>& mock_script,
                                                  std::uint64_t seed) {
  if (name == "mock") {
    provider::MockScript script;
    if (mock_script) script = provider::MockScript::load(*mock_script);
    return std::make_shared<provider::MockProvider>(std::move(script));
  }
  if (name == "live") {
    if (mock_script) throw ConfigError("--mock-script only applies to --provider mock");
    auto live = std::make_shared<provider::OpenAiProvider>(provider::live_config_from_env());
    return std::make_shared<provider::RetryingProvider>(live, provider::RetryPolicy{}, seed);
  }
  throw ConfigError("unknown provider '" + name + "' (expected live or mock)");
}

namespace {

struct ResourceFlags {
  std::string provider = "mock";
  std::optional<std::string> mock_script;
  std::string kgraph = SURGRAW_DEFAULT_KGRAPH;
  std::optional<std::string> index;
  std::optional<std::string> templates;
  std::string model = "gpt-4o";
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--provider", provider, "Model backend: live or mock")
        ->check(CLI::IsMember({"live", "mock"}));
    app->add_option("--mock-script", mock_script, "MockScript JSON for --provider mock");
    app->add_option("--kgraph", kgraph, "Instrument-action knowledge graph (JSON)");
    app->add_option("--index", index, "Retrieval index built by `corpus index`");
    app->add_option("--templates", templates, "Prompt template directory");
    app->add_option("--model", model, "Model identifier sent to the backend");
    app->add_option("--seed", seed, "Seed for retry jitter");
  }

  orchestrator::Engine engine() const {
    orchestrator::Engine e;
    e.provider = make_provider(provider, mock_script, seed);
    e.templates = std::make_shared<const cot::TemplateSet>(
        templates ? cot::TemplateSet::load(*templates) : cot::TemplateSet::load_default());
    e.graph = std::make_shared<const kg::KnowledgeGraph>(kg::load(kgraph));
    if (index) e.index = std::make_shared<const rag::Index>(rag::Index::load(*index));
    // Mock runs are replayed byte for byte, so they get a frozen clock.
    if (provider == "mock") e.clock = [] { return std::int64_t{0}; };
    return e;
  }

  EvalConfig eval_config() const {
    EvalConfig cfg;
    cfg.provider = provider;
    cfg.model = model;
    cfg.seed = seed;
    return cfg;
  }
};

bool is_input_error(const Error& e) {
  const std::string& k = e.kind();
  return k == "MalformedQuery" || k == "NotALetter" || k == "MissingImage" || k == "InvalidRequest" ||
         k == "DatasetParseError" || k == "DuplicateId" || k == "CorpusEmpty" || k == "DocumentParseError";
}

int exit_code_for(const Error& e) {
  if (const auto* se = dynamic_cast<const StageError*>(&e)) {
    return se->inner_kind() == "ConfigError" ? kConfigError : kProviderFailure;
  }
  if (is_input_error(e)) return kInvalidInput;
  return kConfigError;
}

void print_human(const Trace& t, std::ostream& out) {
  for (const auto& ev : t.events) {
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, RoutingEvent>) {
            out << "routing: " << category_name(p.decision.category) << " -> "
                << agent_title(p.decision.agent) << " (" << task_name(p.decision.task) << ", "
                << routing_method_name(p.decision.method) << ")\n";
          } else if constexpr (std::is_same_v<T, RetrievalEvent>) {
            out << "retrieval: k=" << p.k << ", " << p.hits.size() << " hit(s)\n";
            for (const auto& h : p.hits) {
              out << "  [source: " << h.title << "] " << h.doc_id << "#" << h.ordinal << " score "
                  << h.score << "\n";
            }
          } else if constexpr (std::is_same_v<T, PromptEvent>) {
            out << "prompt: " << agent_title(p.agent) << " round " << p.round << (p.bare ? " (bare MCQ)" : "");
            if (!p.stage_labels.empty()) out << " stages: " << text::join(p.stage_labels, ", ");
            out << "\n";
          } else if constexpr (std::is_same_v<T, AgentTurn>) {
            out << "turn: " << agent_title(p.agent) << " round " << p.round << " -> "
                << (p.parsed_answer ? std::string(1, *p.parsed_answer) : std::string("unparsed"));
            if (p.parse_flagged()) out << " (parsed by " << parse_rule_name(*p.parse_rule) << ")";
            out << "\n";
            for (const auto& line : text::split_lines(text::trim(p.response_text))) out << "  | " << line << "\n";
          } else if constexpr (std::is_same_v<T, PanelEvent>) {
            out << "panel round " << p.round << ": action " << p.action_letter << " (" << p.action_text
                << "), instrument " << p.instrument_letter << " (" << p.instrument_text << "), "
                << (p.consistent ? "consistent" : "inconsistent") << ", coherence " << p.scores.coherence
                << ", synergy " << p.scores.synergy << (p.resolved ? ", resolved" : "") << "\n";
            if (!p.scores.feedback.empty()) out << "  feedback: " << p.scores.feedback << "\n";
            if (p.fallback_used) out << "  unresolved: graph-compatible fallback applied\n";
          } else if constexpr (std::is_same_v<T, FinalEvent>) {
            out << "FINAL ANSWER: " << p.answer << "\n";
          }
        },
        ev.payload);
  }
}

int cmd_ask(const ResourceFlags& rf, const std::string& image, const std::string& question,
            const std::vector<std::string>& options, const std::optional<std::string>& task,
            const std::optional<std::string>& perspective, const std::string& id, bool no_cot, bool no_rag,
            bool no_panel, bool as_json, std::ostream& out, std::ostream& err) {
  Query q;
  q.id = id;
  q.question = question;
  if (!std::filesystem::is_regular_file(image)) {
    err << "error: image file not found: " << image << "\n";
    return kInvalidInput;
  }
  const std::string media_type = media_type_for(image);
  if (media_type.empty()) {
    err << "error: unsupported image type: " << image << "\n";
    return kInvalidInput;
  }
  q.image = Image::from_bytes(media_type, text::read_file(image));
  if (options.size() > kMaxOptions) {
    err << "error: at most " << kMaxOptions << " options\n";
    return kInvalidInput;
  }
  Letter letter = 'A';
  for (const auto& o : options) q.options[letter++] = o;
  if (task) {
    const auto t = task_from_name(*task);
    if (!t) {
      err << "error: unknown task '" << *task << "'\n";
      return kInvalidInput;
    }
    q.task = *t;
  }
  if (perspective) {
    const auto p = perspective_from_name(text::to_lower(*perspective));
    if (!p) {
      err << "error: unknown perspective '" << *perspective << "'\n";
      return kInvalidInput;
    }
    q.perspective = p;
  }
  validate_query(q);

  const auto engine = rf.engine();
  EvalConfig cfg = rf.eval_config();
  cfg.no_cot = no_cot;
  cfg.no_rag = no_rag;
  cfg.no_panel = no_panel;
  const Trace t = orchestrator::run_pipeline(q, cfg, engine);
  if (as_json) {
    out << dump_trace(t);
  } else {
    print_human(t, out);
  }
  return kOk;
}

bool needs_index(const std::vector<Query>& records, const EvalConfig& cfg) {
  if (cfg.no_rag) return false;
  const std::size_t n = cfg.limit ? std::min<std::size_t>(records.size(), *cfg.limit) : records.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].task != TaskKind::Unknown && task_category(records[i].task) == Category::CognitiveInference) {
      return true;
    }
  }
  return false;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent surgical visual question answering engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SURGRAW_VERSION);

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one question about a frame");
  ResourceFlags ask_rf;
  ask_rf.add_to(ask);
  std::string image, question, id = "ask";
  std::vector<std::string> options;
  std::optional<std::string> task, perspective;
  bool no_cot = false, no_rag = false, no_panel = false, as_json = false;
  ask->add_option("--image", image, "Frame image file")->required();
  ask->add_option("--question", question, "Question text")->required();
  ask->add_option("--option", options, "Option text, repeated; letters are assigned A, B, ...")->required();
  ask->add_option("--task", task, "Task name (snake_case); omitted tasks are classified");
  ask->add_option("--perspective", perspective, "left, right or whole");
  ask->add_option("--id", id, "Query id recorded in the trace");
  ask->add_flag("--no-cot", no_cot, "Bare MCQ prompt");
  ask->add_flag("--no-rag", no_rag, "Disable retrieval");
  ask->add_flag("--no-panel", no_panel, "Disable the panel discussion");
  ask->add_flag("--json", as_json, "Print the full trace as JSON");

  // bench run
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark harness");
  bench_cmd->require_subcommand(1);
  auto* run = bench_cmd->add_subcommand("run", "Evaluate a dataset");
  ResourceFlags bench_rf;
  bench_rf.add_to(run);
  std::string dataset, report_out;
  std::optional<std::string> traces_dir;
  std::optional<int> limit;
  int concurrency = 4;
  bool table = false, b_no_cot = false, b_no_rag = false, b_no_panel = false;
  run->add_option("--dataset", dataset, "JSON-lines dataset")->required();
  run->add_option("--out", report_out, "Report JSON output path")->required();
  run->add_flag("--table", table, "Print the accuracy table");
  run->add_option("--traces", traces_dir, "Directory for per-record traces");
  run->add_flag("--no-cot", b_no_cot, "Bare MCQ prompts");
  run->add_flag("--no-rag", b_no_rag, "Disable retrieval");
  run->add_flag("--no-panel", b_no_panel, "Disable the panel discussion");
  run->add_option("--limit", limit, "Evaluate only the first N records");
  run->add_option("--concurrency", concurrency, "Worker pool width")->check(CLI::PositiveNumber);

  // corpus index
  auto* corpus = app.add_subcommand("corpus", "Retrieval corpus tools");
  corpus->require_subcommand(1);
  auto* index_cmd = corpus->add_subcommand("index", "Build a retrieval index from a directory");
  std::string corpus_dir, index_out;
  rag::ChunkParams chunk;
  index_cmd->add_option("--dir", corpus_dir, "Directory of .md/.txt documents")->required();
  index_cmd->add_option("--out", index_out, "Index file to write")->required();
  index_cmd->add_option("--max-words", chunk.max_words, "Words per chunk");
  index_cmd->add_option("--overlap", chunk.overlap, "Words shared by consecutive chunks");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  ResourceFlags serve_rf;
  serve_rf.add_to(serve);
  service::ServiceOptions sopts;
  serve->add_option("--port", sopts.port, "Listen port (0 picks a free port)");
  serve->add_option("--host", sopts.host, "Listen address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ask) {
      return cmd_ask(ask_rf, image, question, options, task, perspective, id, no_cot, no_rag, no_panel, as_json,
                     out, err);
    }

    if (*run) {
      EvalConfig cfg = bench_rf.eval_config();
      cfg.no_cot = b_no_cot;
      cfg.no_rag = b_no_rag;
      cfg.no_panel = b_no_panel;
      if (limit && *limit < 1) throw ConfigError("--limit must be >= 1");
      cfg.limit = limit;
      const auto records = bench::load_dataset(dataset);
      const auto engine = bench_rf.engine();
      if (!engine.index && needs_index(records, cfg)) {
        throw ConfigError("retrieval is enabled and the dataset has cognitive records; pass --index or --no-rag");
      }
      bench::RunOptions ropts;
      ropts.max_concurrency = concurrency;
      if (traces_dir) ropts.traces_dir = *traces_dir;
      const auto result = bench::evaluate(records, cfg, engine, ropts);
      std::ofstream f(report_out, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + report_out);
      f << bench::dump_report(result.report);
      if (table) out << bench::render_table(result.report);
      for (const auto& rec : result.report.records) {
        if (rec.error) err << "record " << rec.id << " failed: " << rec.error->message << "\n";
      }
      return kOk;
    }

    if (*index_cmd) {
      const auto idx = rag::Index::build_from_dir(corpus_dir, chunk);
      idx.save(index_out);
      out << "indexed " << idx.documents().size() << " document(s), " << idx.size() << " chunk(s) -> "
          << index_out << "\n";
      return kOk;
    }

    if (*serve) {
      sopts.defaults = serve_rf.eval_config();
      sopts.templates_dir =
          serve_rf.templates ? *serve_rf.templates : cot::TemplateSet::default_dir().string();
      if (serve_rf.provider == "live") {
        const auto live = provider::live_config_from_env();
        sopts.api_base = live.endpoint;
        sopts.api_key_set = !live.api_key.empty();
      }
      service::Service svc(serve_rf.engine(), sopts);

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      const int port = svc.bind();
      out << "listening on http://" << sopts.host << ":" << port << std::endl;
      std::thread([&svc, signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        svc.stop();
      }).detach();
      svc.listen();
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kUsage;
}

}  // namespace surgraw::cli
