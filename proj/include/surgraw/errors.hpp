#pragma once

#include <stdexcept>
#include <string>

namespace surgraw {

// Root of every engine error. `kind()` is a stable machine-readable tag used in
// traces, HTTP error bodies and the bench errors appendix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SURGRAW_DEFINE_ERROR(Name)                                       \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// core
SURGRAW_DEFINE_ERROR(MalformedQuery);
SURGRAW_DEFINE_ERROR(NotALetter);

// provider
SURGRAW_DEFINE_ERROR(TransportError);
SURGRAW_DEFINE_ERROR(ScriptMiss);
SURGRAW_DEFINE_ERROR(EmptyCompletion);
SURGRAW_DEFINE_ERROR(InvalidRequest);
SURGRAW_DEFINE_ERROR(MockScriptError);

class BackendError : public Error {
 public:
  BackendError(int status, std::string body)
      : Error("BackendError", "backend returned HTTP " + std::to_string(status) + ": " + body),
        status_(status),
        body_(std::move(body)) {}

  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  int status_;
  std::string body_;
};

// cot
SURGRAW_DEFINE_ERROR(MissingContext);
SURGRAW_DEFINE_ERROR(UnknownPlaceholder);
SURGRAW_DEFINE_ERROR(TemplateError);

// kgraph
SURGRAW_DEFINE_ERROR(GraphParseError);
SURGRAW_DEFINE_ERROR(DanglingAlias);
SURGRAW_DEFINE_ERROR(EmptyActionSet);

// rag
SURGRAW_DEFINE_ERROR(CorpusEmpty);
SURGRAW_DEFINE_ERROR(DocumentParseError);
SURGRAW_DEFINE_ERROR(IndexFormatError);

// orchestrator / bench
SURGRAW_DEFINE_ERROR(ClassificationFailed);
SURGRAW_DEFINE_ERROR(AnswerUnparseable);
SURGRAW_DEFINE_ERROR(DuplicateId);
SURGRAW_DEFINE_ERROR(MissingImage);
SURGRAW_DEFINE_ERROR(ConfigError);

// service
SURGRAW_DEFINE_ERROR(PayloadTooLarge);

#undef SURGRAW_DEFINE_ERROR

class DatasetParseError : public Error {
 public:
  DatasetParseError(std::size_t line, const std::string& reason)
      : Error("DatasetParseError", "line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A failure inside run_pipeline, tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string inner_kind, const std::string& message)
      : Error("StageError", stage + ": " + inner_kind + ": " + message),
        stage_(std::move(stage)),
        inner_kind_(std::move(inner_kind)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& inner_kind() const noexcept { return inner_kind_; }

 private:
  std::string stage_;
  std::string inner_kind_;
};

}  // namespace surgraw
