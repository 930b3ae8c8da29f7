#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rmnav/errors.hpp"

namespace rmnav {

// Feedback-layer failures. The runner and the service treat all of them as
// "ask the operator again".
class FeedbackError : public Error {
 public:
  using Error::Error;
};

class Unparseable : public FeedbackError {
 public:
  Unparseable(const std::string& message, std::size_t position)
      : FeedbackError(message + " (at offset " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

#define RMNAV_FEEDBACK_ERROR(Name)   \
  class Name : public FeedbackError { \
   public:                            \
    using FeedbackError::FeedbackError; \
  }
RMNAV_FEEDBACK_ERROR(AmbiguousReference);
RMNAV_FEEDBACK_ERROR(InvalidCodes);
RMNAV_FEEDBACK_ERROR(Transport);
RMNAV_FEEDBACK_ERROR(MalformedResponse);
RMNAV_FEEDBACK_ERROR(EmptyInstruction);
#undef RMNAV_FEEDBACK_ERROR

enum class InstructionSource { Operator, Scripted };

class Instruction {
 public:
  /// Throws EmptyInstruction when `text` is blank.
  Instruction(std::string text, InstructionSource source = InstructionSource::Operator);
  const std::string& text() const { return text_; }
  InstructionSource source() const { return source_; }

 private:
  std::string text_;
  InstructionSource source_;
};

enum class Provenance { Grammar, LanguageModel, ScriptedOracle };
std::string_view provenanceName(Provenance p);

// Non-empty list of action codes, each in 0..3. The only way to build one is
// through fromCodes, which enforces that.
class ActionSequence {
 public:
  static ActionSequence fromCodes(std::vector<int> codes, Provenance provenance);
  const std::vector<int>& codes() const { return codes_; }
  Provenance provenance() const { return provenance_; }
  std::size_t size() const { return codes_.size(); }

 private:
  ActionSequence(std::vector<int> codes, Provenance p) : codes_(std::move(codes)), provenance_(p) {}
  std::vector<int> codes_;
  Provenance provenance_;
};

/// Deterministic parser for direction/count/sequencing instructions, e.g.
/// "go up 2 times then go left then go down the same number of times that
/// you went up" -> [0, 0, 3, 2, 2].
ActionSequence parseGrammar(const Instruction& instruction);

struct PromptTemplate {
  std::string preamble;
  std::string scaffold;  // contains "{instruction}"
  static PromptTemplate defaults();
  bool operator==(const PromptTemplate&) const = default;
};

std::string buildPrompt(const PromptTemplate& tmpl, const Instruction& instruction);

/// First bracketed, comma-separated integer list in `text`.
ActionSequence extractActionSequence(std::string_view text);

class LanguageModelClient {
 public:
  virtual ~LanguageModelClient() = default;
  /// Returns the model's reply text for one user message.
  virtual std::string complete(const std::string& prompt) = 0;
};

struct LlmConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model = "gpt-3.5-turbo";
  std::string tokenEnv = "REMOVE_LLM_TOKEN";
  double timeoutSeconds = 20.0;
};

// Chat-completion client over HTTP(S): one user message in, the first
// choice's content out.
class HttpChatClient : public LanguageModelClient {
 public:
  explicit HttpChatClient(LlmConfig config);
  std::string complete(const std::string& prompt) override;
  const LlmConfig& config() const { return config_; }

 private:
  LlmConfig config_;
};

ActionSequence queryLanguageModel(LanguageModelClient& client, const std::string& prompt);

// Grammar first; on Unparseable, the language model when one is configured.
// With grammarFirst off every instruction goes to the model.
class Interpreter {
 public:
  explicit Interpreter(PromptTemplate tmpl = PromptTemplate::defaults(),
                       std::shared_ptr<LanguageModelClient> client = nullptr, bool grammarFirst = true);
  ActionSequence interpret(const Instruction& instruction) const;
  bool hasClient() const { return client_ != nullptr; }
  const PromptTemplate& promptTemplate() const { return template_; }

 private:
  PromptTemplate template_;
  std::shared_ptr<LanguageModelClient> client_;
  bool grammarFirst_ = true;
};

/// Natural-language rendering of an action list ("go right 3 times, then go
/// down once"), grouping consecutive repeats. Parses back through parseGrammar.
std::string describeActions(const std::vector<int>& codes);

}  // namespace rmnav
