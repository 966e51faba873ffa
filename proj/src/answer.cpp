#include "surgraw/answer.hpp"

#include <regex>
#include <vector>

#include "surgraw/text.hpp"

namespace surgraw::bench {

namespace {

const std::regex& final_answer_pattern() {
  static const std::regex re(R"(final[ \t_*]*answer[\s:*_\-.()\[\]"'`>=]*(?:(?:is|option)[\s:*(]+)?([a-e])(?![a-z0-9]))",
                             std::regex::icase | std::regex::ECMAScript);
  return re;
}

std::optional<Letter> by_final_answer(std::string_view s, const std::map<Letter, std::string>& options) {
  std::optional<Letter> found;
  const std::string str(s);
  for (std::sregex_iterator it(str.begin(), str.end(), final_answer_pattern()), end; it != end; ++it) {
    const Letter letter = static_cast<Letter>(std::toupper(static_cast<unsigned char>((*it)[1].str()[0])));
    if (options.count(letter)) found = letter;
  }
  return found;
}

std::optional<Letter> by_lone_letter(std::string_view s, const std::map<Letter, std::string>& options) {
  const auto lines = text::split_lines(s);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (text::trim(*it).empty()) continue;
    try {
      const Letter letter = normalize_letter(*it);
      if (options.count(letter)) return letter;
    } catch (const NotALetter&) {
    }
    return std::nullopt;
  }
  return std::nullopt;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

std::vector<Span> word_occurrences(const std::string& hay, const std::string& needle) {
  std::vector<Span> out;
  if (needle.empty()) return out;
  auto boundary = [&](std::size_t i) {
    return !std::isalnum(static_cast<unsigned char>(hay[i]));
  };
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    if ((pos == 0 || boundary(pos - 1)) && (end == hay.size() || boundary(end))) {
      out.push_back(Span{pos, end});
    }
  }
  return out;
}

std::optional<Letter> by_option_text(std::string_view s, const std::map<Letter, std::string>& options) {
  const std::size_t start = s.size() > kOptionTextWindow ? s.size() - kOptionTextWindow : 0;
  const std::string tail = text::to_lower(s.substr(start));

  std::map<Letter, std::vector<Span>> hits;
  for (const auto& [letter, option] : options) {
    auto spans = word_occurrences(tail, text::to_lower(text::trim(option)));
    if (!spans.empty()) hits[letter] = std::move(spans);
  }
  // An option whose every occurrence sits inside a longer matched option
  // ("cutting" inside "cutting and coagulation") is not a separate match.
  std::vector<Letter> distinct;
  for (const auto& [letter, spans] : hits) {
    bool covered_everywhere = true;
    for (const auto& sp : spans) {
      bool covered = false;
      for (const auto& [other, other_spans] : hits) {
        if (other == letter) continue;
        for (const auto& o : other_spans) {
          if (o.begin <= sp.begin && sp.end <= o.end && (o.end - o.begin) > (sp.end - sp.begin)) {
            covered = true;
          }
        }
      }
      covered_everywhere = covered_everywhere && covered;
    }
    if (!covered_everywhere) distinct.push_back(letter);
  }
  if (distinct.size() > 1) {
    std::string letters;
    for (Letter l : distinct) letters += l;
    throw AnswerUnparseable("option texts " + letters + " all appear at the end of the response");
  }
  if (distinct.empty()) return std::nullopt;
  return distinct.front();
}

}  // namespace

ParsedAnswer parse_answer(std::string_view text, const std::map<Letter, std::string>& options) {
  if (options.empty()) throw AnswerUnparseable("no options to parse against");
  if (auto l = by_final_answer(text, options)) return {*l, ParseRule::FinalAnswer};
  if (auto l = by_lone_letter(text, options)) return {*l, ParseRule::LoneLetter};
  if (auto l = by_option_text(text, options)) return {*l, ParseRule::OptionText};
  throw AnswerUnparseable("no FINAL ANSWER line, lone letter or option text found");
}

}  // namespace surgraw::bench
