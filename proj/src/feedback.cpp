#include "rmnav/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <regex>
#include <unordered_map>
#include <unordered_set>

namespace rmnav {

namespace {

constexpr int kMaxCount = 1000;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

struct Token {
  std::string text;  // lower-cased word, or a single punctuation character
  std::size_t offset;
  bool punct;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (std::isalnum(c) || c == '\'') {
      const std::size_t start = i;
      std::string word;
      while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '\''))
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i++]))));
      out.push_back({std::move(word), start, false});
    } else if (c == ',' || c == '.' || c == ';' || c == '!') {
      out.push_back({std::string(1, static_cast<char>(c)), i, true});
      ++i;
    } else {
      throw Unparseable(std::string("unexpected character '") + static_cast<char>(c) + "'", i);
    }
  }
  return out;
}

const std::unordered_map<std::string, int>& directionWords() {
  static const std::unordered_map<std::string, int> m = {
      {"up", 0},    {"upward", 0},    {"upwards", 0},   {"right", 1}, {"down", 2},
      {"downward", 2}, {"downwards", 2}, {"left", 3},
  };
  return m;
}

const std::unordered_map<std::string, int>& numberWords() {
  static const std::unordered_map<std::string, int> m = {
      {"one", 1},   {"two", 2},    {"three", 3},  {"four", 4},    {"five", 5},    {"six", 6},
      {"seven", 7}, {"eight", 8},  {"nine", 9},   {"ten", 10},    {"eleven", 11}, {"twelve", 12},
      {"a", 1},     {"an", 1},     {"single", 1},
  };
  return m;
}

const std::unordered_map<std::string, int>& adverbCounts() {
  static const std::unordered_map<std::string, int> m = {{"once", 1}, {"twice", 2}, {"thrice", 3}};
  return m;
}

bool isVerb(const std::string& w) {
  static const std::unordered_set<std::string> s = {"go", "move", "step", "walk", "head", "travel", "take", "turn"};
  return s.contains(w);
}

bool isFiller(const std::string& w) {
  static const std::unordered_set<std::string> s = {"to", "the", "towards", "toward"};
  return s.contains(w);
}

bool isUnit(const std::string& w) {
  static const std::unordered_set<std::string> s = {"time",  "times", "step",   "steps",  "cell", "cells",
                                                    "square", "squares", "space", "spaces", "block", "blocks"};
  return s.contains(w);
}

bool isSeparatorWord(const std::string& w) {
  static const std::unordered_set<std::string> s = {"then", "and", "finally", "next", "lastly", "afterwards"};
  return s.contains(w);
}

bool isAlternationWord(const std::string& w) {
  return w == "alternatively" || w == "alternately" || w == "alternating";
}

struct Clause {
  std::vector<int> directions;  // one entry, or two for an alternation
  int count = 0;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text), tokens_(tokenize(text)) {}

  std::vector<int> run() {
    skipSeparators();
    while (!atEnd()) {
      parseClause();
      if (!atEnd() && !peekSeparator()) fail("expected a separator such as 'then' or ','");
      skipSeparators();
    }
    std::vector<int> codes;
    for (const auto& c : clauses_)
      for (int i = 0; i < c.count; ++i) codes.insert(codes.end(), c.directions.begin(), c.directions.end());
    if (codes.empty()) throw Unparseable("instruction yields no actions", text_.size());
    return codes;
  }

 private:
  bool atEnd() const { return pos_ >= tokens_.size(); }
  const Token& cur() const { return tokens_[pos_]; }
  bool peekWord(const char* w, std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() && tokens_[pos_ + ahead].text == w;
  }
  bool peekSeparator() const { return cur().punct || isSeparatorWord(cur().text) || peekAfterThat(); }
  bool peekAfterThat() const { return peekWord("after") && peekWord("that", 1); }

  [[noreturn]] void fail(const std::string& what) const {
    throw Unparseable(what, atEnd() ? text_.size() : cur().offset);
  }

  void skipSeparators() {
    while (!atEnd()) {
      if (peekAfterThat()) {
        pos_ += 2;
      } else if (cur().punct || isSeparatorWord(cur().text)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::optional<int> direction() {
    while (!atEnd() && isFiller(cur().text)) ++pos_;
    if (atEnd()) return std::nullopt;
    const auto it = directionWords().find(cur().text);
    if (it == directionWords().end()) return std::nullopt;
    ++pos_;
    return it->second;
  }

  // Count phrase: "3 times", "two steps", "once". Returns nullopt and leaves
  // the position untouched when none is present.
  std::optional<int> count() {
    if (atEnd()) return std::nullopt;
    const std::string& w = cur().text;
    if (auto it = adverbCounts().find(w); it != adverbCounts().end()) {
      ++pos_;
      return it->second;
    }
    int value = 0;
    bool numeric = false;
    if (std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      const auto res = std::from_chars(w.data(), w.data() + w.size(), value);
      if (res.ec != std::errc() || value > kMaxCount) fail("count out of range");
      numeric = true;
    } else if (auto it = numberWords().find(w); it != numberWords().end()) {
      value = it->second;
      numeric = true;
    }
    if (!numeric) return std::nullopt;
    const bool article = (w == "a" || w == "an");
    ++pos_;
    if (!atEnd() && isUnit(cur().text)) {
      ++pos_;
    } else if (article) {
      --pos_;  // a bare article is not a count
      return std::nullopt;
    }
    return value;
  }

  bool backReferenceAhead() const {
    return peekWord("the") && peekWord("same", 1) &&
           ((peekWord("number", 2) && peekWord("of", 3)) || peekWord("amount", 2));
  }

  int backReference() {
    pos_ += 2;
    if (peekWord("number")) {
      pos_ += 2;
      if (!atEnd() && isUnit(cur().text)) ++pos_;
    } else {
      ++pos_;
      if (peekWord("of")) {
        ++pos_;
        if (!atEnd() && isUnit(cur().text)) ++pos_;
      }
    }
    while (peekWord("that") || peekWord("as")) ++pos_;
    if (peekWord("you") || peekWord("i") || peekWord("we")) ++pos_;
    static const std::unordered_set<std::string> verbs = {"went", "moved", "go", "move", "did", "stepped",
                                                          "walked", "traveled", "travelled", "headed"};
    if (!atEnd() && verbs.contains(cur().text)) ++pos_;
    const auto dir = direction();
    if (!dir) fail("expected a direction in the back-reference");
    for (auto it = clauses_.rbegin(); it != clauses_.rend(); ++it)
      if (std::find(it->directions.begin(), it->directions.end(), *dir) != it->directions.end()) return it->count;
    throw AmbiguousReference("no earlier clause moves " + std::string(actionWord(*dir)));
  }

  static std::string_view actionWord(int code) {
    static constexpr std::string_view names[] = {"up", "right", "down", "left"};
    return names[code];
  }

  void parseClause() {
    while (!atEnd() && isVerb(cur().text)) ++pos_;
    // Leading count: "two steps up".
    std::optional<int> leading = count();
    const auto first = direction();
    if (!first) fail("expected a direction");
    Clause clause;
    clause.directions.push_back(*first);

    if (!leading && peekWord("and") && pos_ + 1 < tokens_.size()) {
      const std::size_t save = pos_;
      ++pos_;
      const auto second = direction();
      if (second && !atEnd() && isAlternationWord(cur().text)) {
        ++pos_;
        const auto n = count();
        clause.directions.push_back(*second);
        clause.count = n.value_or(1);
        if (peekWord("each")) ++pos_;
        clauses_.push_back(clause);
        return;
      }
      pos_ = save;
    }

    if (leading) {
      clause.count = *leading;
    } else if (backReferenceAhead()) {
      clause.count = backReference();
    } else {
      clause.count = count().value_or(1);
    }
    clauses_.push_back(clause);
  }

  const std::string& text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<Clause> clauses_;
};

}  // namespace

Instruction::Instruction(std::string text, InstructionSource source) : text_(trim(text)), source_(source) {
  if (text_.empty()) throw EmptyInstruction("instruction is empty");
}

std::string_view provenanceName(Provenance p) {
  switch (p) {
    case Provenance::Grammar: return "grammar";
    case Provenance::LanguageModel: return "language_model";
    case Provenance::ScriptedOracle: return "scripted_oracle";
  }
  return "unknown";
}

ActionSequence ActionSequence::fromCodes(std::vector<int> codes, Provenance provenance) {
  if (codes.empty()) throw InvalidCodes("action sequence is empty");
  for (int c : codes)
    if (c < 0 || c > 3) throw InvalidCodes("action code " + std::to_string(c) + " is outside 0..3");
  return ActionSequence(std::move(codes), provenance);
}

ActionSequence parseGrammar(const Instruction& instruction) {
  Parser parser(instruction.text());
  return ActionSequence::fromCodes(parser.run(), Provenance::Grammar);
}

PromptTemplate PromptTemplate::defaults() {
  PromptTemplate t;
  t.preamble =
      "In a grid environment, an agent can take 4 actions: go up, go right, go down or go left. "
      "These actions are defined by integers as follows: \"go up = 0\", \"go right = 1\", "
      "\"go down = 2\", \"go left = 3\".";
  t.scaffold =
      "Convert the following instruction into the list of integers, written in square brackets "
      "and separated by commas.\nInstruction: {instruction}";
  return t;
}

std::string buildPrompt(const PromptTemplate& tmpl, const Instruction& instruction) {
  static const std::string placeholder = "{instruction}";
  std::string body = tmpl.scaffold;
  const auto at = body.find(placeholder);
  if (at == std::string::npos) {
    body += "\n" + instruction.text();
  } else {
    body.replace(at, placeholder.size(), instruction.text());
  }
  return tmpl.preamble + "\n\n" + body;
}

ActionSequence extractActionSequence(std::string_view text) {
  static const std::regex list(R"(\[\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*\])");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, list))
    throw MalformedResponse("response contains no bracketed integer list");
  std::vector<int> codes;
  static const std::regex number(R"(-?\d+)");
  const std::string inner = m[1].str();
  for (auto it = std::sregex_iterator(inner.begin(), inner.end(), number); it != std::sregex_iterator(); ++it) {
    long long v = 0;
    const std::string s = it->str();
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc()) throw InvalidCodes("action code " + s + " is outside 0..3");
    if (v < 0 || v > 3) throw InvalidCodes("action code " + s + " is outside 0..3");
    codes.push_back(static_cast<int>(v));
  }
  return ActionSequence::fromCodes(std::move(codes), Provenance::LanguageModel);
}

ActionSequence queryLanguageModel(LanguageModelClient& client, const std::string& prompt) {
  return extractActionSequence(client.complete(prompt));
}

Interpreter::Interpreter(PromptTemplate tmpl, std::shared_ptr<LanguageModelClient> client, bool grammarFirst)
    : template_(std::move(tmpl)), client_(std::move(client)), grammarFirst_(grammarFirst) {
  if (!grammarFirst_ && !client_) throw BadParam("model-only interpretation needs a language-model client");
}

ActionSequence Interpreter::interpret(const Instruction& instruction) const {
  if (!grammarFirst_) return queryLanguageModel(*client_, buildPrompt(template_, instruction));
  try {
    return parseGrammar(instruction);
  } catch (const Unparseable&) {
    if (!client_) throw;
  }
  return queryLanguageModel(*client_, buildPrompt(template_, instruction));
}

std::string describeActions(const std::vector<int>& codes) {
  static constexpr std::string_view names[] = {"up", "right", "down", "left"};
  std::string out;
  std::size_t i = 0;
  while (i < codes.size()) {
    const int c = codes[i];
    if (c < 0 || c > 3) throw InvalidCodes("action code " + std::to_string(c) + " is outside 0..3");
    std::size_t j = i;
    while (j < codes.size() && codes[j] == c) ++j;
    const std::size_t n = j - i;
    if (!out.empty()) out += ", then ";
    out += "go ";
    out += names[c];
    if (n == 1) {
      out += " once";
    } else if (n == 2) {
      out += " twice";
    } else {
      out += " " + std::to_string(n) + " times";
    }
    i = j;
  }
  return out;
}

}  // namespace rmnav
