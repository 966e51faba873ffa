#pragma once

#include <map>
#include <string_view>

#include "surgraw/core.hpp"
#include "surgraw/trace.hpp"

namespace surgraw::bench {

struct ParsedAnswer {
  Letter letter = 'A';
  ParseRule rule = ParseRule::FinalAnswer;

  bool flagged() const { return rule != ParseRule::FinalAnswer; }
};

// Rules, in order:
//   1. the last `FINAL ANSWER: <letter>` (any case, optional punctuation or
//      markdown emphasis) naming one of the options;
//   2. a lone letter on the final non-empty line;
//   3. exactly one option text appearing word-bounded, case-insensitively,
//      in the last 200 characters.
// Throws AnswerUnparseable when no rule fires or rule 3 is ambiguous.
ParsedAnswer parse_answer(std::string_view text, const std::map<Letter, std::string>& options);

inline constexpr std::size_t kOptionTextWindow = 200;

}  // namespace surgraw::bench
