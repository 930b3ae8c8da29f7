#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmnav/changepoint.hpp"
#include "rmnav/feedback.hpp"
#include "rmnav/gridworld.hpp"
#include "rmnav/policy.hpp"
#include "rmnav/uncertainty.hpp"

namespace rmnav {

enum class Method { ReMove, ReMoveNoFeedback, PerceivedPlannerBaseline };
enum class Outcome { Success, Collision, Timeout, Frozen };
enum class StepSource { Policy, Feedback, Planner };

std::string_view methodName(Method m);
Method parseMethod(std::string_view text);  // remove | no_feedback | baseline
std::string_view outcomeName(Outcome o);
std::string_view stepSourceName(StepSource s);

struct StepRecord {
  int t = 0;
  Cell from;
  Cell to;
  int action = 0;
  StepSource source = StepSource::Policy;
  StepEvent event = StepEvent::Moved;
  std::string obsDigest;
  bool hasUncertainty = false;
  double I = 0.0;
  double H = 0.0;
  double Ebar = 0.0;
};

struct TriggerRecord {
  int t = 0;
  Cell position;
  int mapRunLength = 0;
  double shortRunMass = 0.0;
  double meanBefore = 0.0;
  double meanAfter = 0.0;
};

struct FeedbackEvent {
  int t = 0;
  std::string instruction;
  InstructionSource instructionSource = InstructionSource::Scripted;
  std::vector<int> actions;
  Provenance provenance = Provenance::Grammar;
  int attempts = 1;
  int executed = 0;  // actions actually taken before the sequence ended
};

struct EpisodeLog {
  std::string scenarioId;
  Method method = Method::ReMove;
  std::uint64_t seed = 0;
  Cell start;
  Cell goal;
  std::vector<StepRecord> steps;
  std::vector<TriggerRecord> triggers;
  std::vector<FeedbackEvent> feedbackEvents;
  std::vector<std::string> feedbackErrors;
  Outcome outcome = Outcome::Timeout;
  int collisions = 0;
  int pathLength = 0;
  double straightLine = 0.0;
  double normalizedLength = 0.0;

  nlohmann::ordered_json toJson() const;
  /// Compact single-line JSON; byte-stable for a given log.
  std::string dump() const;
};

/// 16-hex-digit FNV-1a digest of an observation vector's bytes.
std::string observationDigest(std::span<const double> values);

struct OracleConfig {
  bool fullPath = true;   // render the whole route; otherwise a prefix:
  int extraSteps = 1;     //   steps past the last deceptive cell crossed
  int openSteps = 5;      //   steps when the route crosses nothing deceptive
  double pliableCost = 10.0;
};

struct RunConfig {
  DetectorConfig detector;
  int frozenRepeats = 6;
  int maxFeedbackAttempts = 3;
  int startJitter = 1;
  int maxSteps = 0;  // 0 = the grid's own cap
  OracleConfig oracle;
};

struct FeedbackRequest {
  const Grid* grid = nullptr;
  AgentState state;
  int attempt = 1;
  std::string lastError;  // why the previous attempt was rejected
  const UncertaintyRecord* context = nullptr;
};

// What a feedback source hands back: the instruction, and optionally the
// sequence it already resolved (operator mode resolves and confirms it
// before replying).
struct FeedbackReply {
  Instruction instruction;
  std::optional<ActionSequence> resolved;
};

class FeedbackSource {
 public:
  virtual ~FeedbackSource() = default;
  /// nullopt means no help is available this time.
  virtual std::optional<FeedbackReply> request(const FeedbackRequest& req) = 0;
};

/// Cheapest route to the goal treating deceptive cells as free and pliable
/// ones as costly; solid obstacles and walls are impassable.
std::optional<std::vector<int>> oraclePath(const Grid& grid, Cell from, const OracleConfig& config);

/// Renders the oracle route in words, either whole or cut after the last
/// deceptive crossing.
class ScriptedOracleFeedback : public FeedbackSource {
 public:
  explicit ScriptedOracleFeedback(OracleConfig config = {}) : config_(config) {}
  std::optional<FeedbackReply> request(const FeedbackRequest& req) override;

 private:
  OracleConfig config_;
};

class EpisodeObserver {
 public:
  virtual ~EpisodeObserver() = default;
  virtual void onStep(const StepRecord&) {}
  virtual void onTrigger(const TriggerRecord&) {}
  virtual void onFeedbackRequested(int /*t*/, const UncertaintyRecord&) {}
  virtual void onSequenceAccepted(const FeedbackEvent&) {}
  virtual void onExecutionProgress(int /*index*/, const StepRecord&) {}
  virtual void onEnd(const EpisodeLog&) {}
};

/// Start cell for a seeded trial: uniform over free central cells within
/// Chebyshev radius `radius` of the declared start.
Cell jitteredStart(const Grid& grid, int radius, std::uint64_t seed);

struct EpisodeContext {
  const Grid* grid = nullptr;
  const EnsemblePolicy* policy = nullptr;
  FeedbackSource* feedback = nullptr;
  const Interpreter* interpreter = nullptr;
  EpisodeObserver* observer = nullptr;
};

EpisodeLog runEpisode(const EpisodeContext& ctx, Method method, const RunConfig& config, std::uint64_t seed);

/// Perceived-map planner: BFS over cells not seen as blocked (unseen cells
/// count as free), replanning every step; Frozen when no plan exists.
EpisodeLog runBaseline(const Grid& grid, const ObservationSpec& view, const RunConfig& config, std::uint64_t seed,
                       EpisodeObserver* observer = nullptr);

// Suites ---------------------------------------------------------------------

enum class FeedbackMode { Scripted, Operator, LanguageModel };
std::string_view feedbackModeName(FeedbackMode m);
FeedbackMode parseFeedbackMode(std::string_view text);

struct SuiteRow {
  std::string scenarioId;
  Method method = Method::ReMove;
  int trials = 0;
  int successes = 0;
  int collisions = 0;
  int timeouts = 0;
  int frozen = 0;
  double successRate = 0.0;
  double meanNormalizedLength = 0.0;
  double meanFeedbackEvents = 0.0;
  double meanTriggers = 0.0;
};

struct SuiteReport {
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<SuiteRow> rows;
  std::vector<EpisodeLog> episodes;  // scenario-major, then method, then trial

  const SuiteRow& row(std::string_view scenarioId, Method method) const;
  const EpisodeLog& episode(std::size_t scenario, std::size_t method, int trial) const;
  std::size_t scenarioCount = 0;
  std::size_t methodCount = 0;
};

struct SuiteSpec {
  std::vector<Grid> scenarios;
  std::vector<Method> methods;
  int trials = 10;
  std::uint64_t seed = 0;
  RunConfig config;
  // Factory so that every parallel trial owns its feedback source.
  std::function<std::unique_ptr<FeedbackSource>()> feedbackFactory;
  std::shared_ptr<const Interpreter> interpreter;
};

/// Trial i of every (scenario, method) pair uses the same derived seed.
/// Trials run in parallel; runSuiteSerial is the reference.
SuiteReport runSuite(const SuiteSpec& spec, const EnsemblePolicy& policy);
SuiteReport runSuiteSerial(const SuiteSpec& spec, const EnsemblePolicy& policy);

void writeSuiteCsv(const SuiteReport& report, std::ostream& out);
void writeSuiteTable(const SuiteReport& report, std::ostream& out);
void writeEpisodesJsonl(const SuiteReport& report, std::ostream& out);

// Run configuration file (JSON) ------------------------------------------------

struct RunConfigFile {
  std::vector<std::filesystem::path> scenarios;
  std::vector<Method> methods{Method::ReMove, Method::ReMoveNoFeedback, Method::PerceivedPlannerBaseline};
  std::filesystem::path policy;
  int trials = 10;
  std::uint64_t seed = 0;
  FeedbackMode feedbackMode = FeedbackMode::Scripted;
  bool forceModel = false;  // LanguageModel mode: skip the grammar
  int stepDelayMs = 150;    // operator sessions only
  RunConfig run;
  PromptTemplate promptTemplate = PromptTemplate::defaults();
  std::optional<LlmConfig> llm;
};

/// Relative paths are resolved against `baseDir`. Throws ConfigMismatch on
/// unknown keys or bad values.
RunConfigFile parseRunConfig(const nlohmann::json& j, const std::filesystem::path& baseDir = {});
RunConfigFile loadRunConfig(const std::filesystem::path& path);
nlohmann::ordered_json runConfigToJson(const RunConfigFile& config);

/// Builds the suite a config describes. Operator mode is rejected (it needs a
/// live session); llm mode uses `client` or, when null, an HTTP client built
/// from the config's llm block.
SuiteSpec suiteFromConfig(const RunConfigFile& config, std::shared_ptr<LanguageModelClient> client = nullptr);

DetectorConfig parseDetectorConfig(const nlohmann::json& j);
nlohmann::ordered_json detectorConfigToJson(const DetectorConfig& c);
PromptTemplate parsePromptTemplate(const nlohmann::json& j);
nlohmann::ordered_json promptTemplateToJson(const PromptTemplate& t);

}  // namespace rmnav
