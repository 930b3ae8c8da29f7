#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rmnav/runner.hpp"

using namespace rmnav;

namespace {

auto throughDeceptive = [](CellKind k) { return k != CellKind::Wall && k != CellKind::SolidObstacle; };

std::vector<Method> allMethods() {
  return {Method::ReMove, Method::ReMoveNoFeedback, Method::PerceivedPlannerBaseline};
}

EpisodeLog episode(const Grid& g, Method m, std::uint64_t seed, EpisodeObserver* observer = nullptr) {
  ScriptedOracleFeedback oracle;
  const Interpreter interpreter;
  EpisodeContext ctx{&g, &fixture::smallPolicy(), &oracle, &interpreter, observer};
  return runEpisode(ctx, m, RunConfig{}, seed);
}

SuiteSpec smallSuite(int trials) {
  SuiteSpec spec;
  for (const char* s : {"open_room", "deceptive_corridor", "sealed_deceptive"}) spec.scenarios.push_back(fixture::scenario(s));
  spec.methods = allMethods();
  spec.trials = trials;
  spec.seed = 5;
  spec.feedbackFactory = [] { return std::make_unique<ScriptedOracleFeedback>(); };
  return spec;
}

struct Recorder : EpisodeObserver {
  std::vector<std::string> events;
  void onStep(const StepRecord&) override { events.push_back("step"); }
  void onTrigger(const TriggerRecord&) override { events.push_back("trigger"); }
  void onFeedbackRequested(int, const UncertaintyRecord&) override { events.push_back("requested"); }
  void onSequenceAccepted(const FeedbackEvent&) override { events.push_back("accepted"); }
  void onExecutionProgress(int, const StepRecord&) override { events.push_back("progress"); }
  void onEnd(const EpisodeLog&) override { events.push_back("end"); }
};

class SilentSource : public FeedbackSource {
 public:
  std::optional<FeedbackReply> request(const FeedbackRequest&) override {
    ++calls;
    return std::nullopt;
  }
  int calls = 0;
};

class Garbled : public FeedbackSource {
 public:
  std::optional<FeedbackReply> request(const FeedbackRequest& req) override {
    attempts.push_back(req.attempt);
    return FeedbackReply{Instruction("hover majestically"), std::nullopt};
  }
  std::vector<int> attempts;
};

}  // namespace

TEST_CASE("oracle route crosses deceptive cells on a shortest path") {
  for (const char* name : {"open_room", "deceptive_corridor", "sealed_deceptive"}) {
    CAPTURE(name);
    const Grid g = fixture::scenario(name);
    const auto path = oraclePath(g, g.start(), OracleConfig{});
    REQUIRE(path.has_value());
    CHECK(static_cast<int>(path->size()) == *oracle::bfs(g, g.start(), g.goal(), throughDeceptive));
    AgentState s{g.start(), 0};
    for (int a : *path) {
      const auto o = step(g, s, actionFromCode(a));
      REQUIRE(o.event != StepEvent::Collision);
      s = o.next;
    }
    CHECK(s.position == g.goal());
  }
}

TEST_CASE("scripted oracle instructions parse back to the route") {
  const Grid g = fixture::scenario("sealed_deceptive");
  ScriptedOracleFeedback full;
  const AgentState s{{5, 5}, 0};
  const auto reply = full.request({&g, s});
  REQUIRE(reply.has_value());
  CHECK(reply->instruction.source() == InstructionSource::Scripted);
  CHECK(parseGrammar(reply->instruction).codes() == *oraclePath(g, s.position, OracleConfig{}));

  OracleConfig cut;
  cut.fullPath = false;
  cut.extraSteps = 0;
  ScriptedOracleFeedback prefix(cut);
  const auto shorter = parseGrammar(prefix.request({&g, s})->instruction).codes();
  CHECK(shorter.size() < parseGrammar(reply->instruction).codes().size());
  Cell c = s.position;
  for (int a : shorter) c = moved(c, actionFromCode(a));
  CHECK(g.at(c) == CellKind::DeceptiveObstacle);

  CHECK_FALSE(full.request({&g, {g.goal(), 0}}).has_value());
}

TEST_CASE("jittered starts stay free and near the declared start") {
  const Grid g = fixture::scenario("sealed_deceptive");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Cell c = jitteredStart(g, 1, seed);
    CHECK(g.at(c) == CellKind::Empty);
    CHECK(std::abs(c.row - g.start().row) <= 1);
    CHECK(std::abs(c.col - g.start().col) <= 1);
    CHECK(jitteredStart(g, 1, seed) == c);
  }
  CHECK(jitteredStart(g, 0, 3) == g.start());
}

TEST_CASE("feedback rescues the sealed scenario") {
  const Grid g = fixture::scenario("sealed_deceptive");
  Recorder rec;
  const EpisodeLog remove = episode(g, Method::ReMove, 3, &rec);
  CHECK(remove.outcome == Outcome::Success);
  REQUIRE_FALSE(remove.feedbackEvents.empty());
  REQUIRE_FALSE(remove.triggers.empty());
  const auto& fb = remove.feedbackEvents.front();
  CHECK(fb.provenance == Provenance::ScriptedOracle);
  CHECK(fb.instructionSource == InstructionSource::Scripted);
  CHECK(fb.executed > 0);
  CHECK(std::any_of(remove.steps.begin(), remove.steps.end(),
                    [](const StepRecord& s) { return s.source == StepSource::Feedback; }));
  CHECK(std::any_of(remove.steps.begin(), remove.steps.end(),
                    [](const StepRecord& s) { return s.event == StepEvent::PassedThroughDeceptive; }));

  const auto trigger = std::find(rec.events.begin(), rec.events.end(), "trigger");
  REQUIRE(trigger != rec.events.end());
  CHECK(*(trigger + 1) == "requested");
  CHECK(*(trigger + 2) == "accepted");
  CHECK(*(trigger + 3) == "progress");
  CHECK(rec.events.back() == "end");
  CHECK(std::count(rec.events.begin(), rec.events.end(), "progress") == fb.executed);

  const EpisodeLog noFeedback = episode(g, Method::ReMoveNoFeedback, 3);
  CHECK(noFeedback.outcome != Outcome::Success);
  CHECK(noFeedback.feedbackEvents.empty());

  const EpisodeLog baseline = episode(g, Method::PerceivedPlannerBaseline, 3);
  CHECK(baseline.outcome == Outcome::Frozen);
  CHECK(baseline.triggers.empty());
}

TEST_CASE("episode metrics") {
  const Grid g = fixture::scenario("open_room");
  for (Method m : allMethods()) {
    const EpisodeLog log = episode(g, m, 1);
    REQUIRE(log.outcome == Outcome::Success);
    CHECK(log.pathLength == static_cast<int>(log.steps.size()));
    CHECK(log.straightLine == doctest::Approx(euclidean(log.start, log.goal)));
    CHECK(log.normalizedLength == doctest::Approx(log.pathLength / log.straightLine));
    CHECK(log.normalizedLength >= 1.0);
    CHECK(log.steps.back().to == g.goal());
    for (std::size_t i = 1; i < log.steps.size(); ++i) CHECK(log.steps[i].from == log.steps[i - 1].to);
  }
}

TEST_CASE("feedback source failures fall back to the policy") {
  const Grid g = fixture::scenario("sealed_deceptive");
  const Interpreter interpreter;
  SilentSource silent;
  EpisodeContext ctx{&g, &fixture::smallPolicy(), &silent, &interpreter, nullptr};
  const EpisodeLog a = runEpisode(ctx, Method::ReMove, RunConfig{}, 3);
  CHECK(silent.calls > 0);
  CHECK(a.feedbackEvents.empty());

  Garbled garbled;
  ctx.feedback = &garbled;
  RunConfig config;
  config.maxFeedbackAttempts = 2;
  const EpisodeLog b = runEpisode(ctx, Method::ReMove, config, 3);
  REQUIRE(garbled.attempts.size() >= 2);
  CHECK(garbled.attempts[0] == 1);
  CHECK(garbled.attempts[1] == 2);
  CHECK(b.feedbackEvents.empty());
  CHECK_FALSE(b.feedbackErrors.empty());
}

TEST_CASE("episodes replay byte for byte") {
  const Grid g = fixture::scenario("sealed_deceptive");
  for (Method m : allMethods()) {
    const std::string a = episode(g, m, 7).dump();
    CHECK(a == episode(g, m, 7).dump());
    CHECK(a.find('\n') == std::string::npos);
  }
  const auto j = nlohmann::json::parse(episode(g, Method::ReMove, 7).dump());
  for (const char* key : {"scenario", "method", "seed", "start", "goal", "outcome", "metrics", "steps", "triggers",
                          "feedback", "feedback_errors"})
    CHECK(j.contains(key));
}

TEST_CASE("mismatched policy and grid are rejected") {
  ScenarioSpec s;
  s.L = 8;
  s.start = {2, 2};
  s.goal = {9, 9};
  const Grid g = Grid::build(s);
  EpisodeContext ctx{&g, &fixture::smallPolicy(), nullptr, nullptr, nullptr};
  CHECK_THROWS_AS(runEpisode(ctx, Method::ReMove, RunConfig{}, 1), ConfigMismatch);
  EpisodeContext empty;
  CHECK_THROWS_AS(runEpisode(empty, Method::ReMove, RunConfig{}, 1), BadParam);
}

TEST_CASE("suites run in parallel exactly as serially") {
  const SuiteSpec spec = smallSuite(10);
  const SuiteReport a = runSuite(spec, fixture::smallPolicy());
  const SuiteReport b = runSuiteSerial(spec, fixture::smallPolicy());
  REQUIRE(a.episodes.size() == 90);
  REQUIRE(b.episodes.size() == 90);
  for (std::size_t i = 0; i < a.episodes.size(); ++i) CHECK(a.episodes[i].dump() == b.episodes[i].dump());
  CHECK(a.rows.size() == 9);

  // Trial i of every method shares a seed.
  for (int t = 0; t < 10; ++t)
    CHECK(a.episode(2, 0, t).seed == a.episode(2, 2, t).seed);

  const SuiteRow& row = a.row("sealed_deceptive", Method::PerceivedPlannerBaseline);
  CHECK(row.trials == 10);
  CHECK(row.successRate == 0.0);
  CHECK(row.frozen == 10);
  CHECK_THROWS(a.row("nowhere", Method::ReMove));

  std::ostringstream csv, jsonl, table;
  writeSuiteCsv(a, csv);
  writeEpisodesJsonl(a, jsonl);
  writeSuiteTable(a, table);
  const std::string csvText = csv.str(), jsonlText = jsonl.str();
  CHECK(csvText.rfind("scenario,method,trials,successes,success_rate", 0) == 0);
  CHECK(std::count(csvText.begin(), csvText.end(), '\n') == 10);
  CHECK(std::count(jsonlText.begin(), jsonlText.end(), '\n') == 90);
  CHECK(table.str().find("sealed_deceptive") != std::string::npos);
}

TEST_CASE("run config files") {
  const RunConfigFile c = loadRunConfig(std::filesystem::path(RMNAV_CONFIG_DIR) / "suite.json");
  CHECK(c.trials == 50);
  CHECK(c.seed == 11);
  CHECK(c.scenarios.size() == 3);
  CHECK(std::filesystem::exists(c.scenarios.front()));
  CHECK(c.methods == allMethods());
  CHECK(c.feedbackMode == FeedbackMode::Scripted);
  CHECK(c.run.detector.r0 == 2);

  const auto j = runConfigToJson(c);
  const RunConfigFile back = parseRunConfig(nlohmann::json::parse(j.dump()));
  CHECK(runConfigToJson(back).dump() == j.dump());
  CHECK(back.promptTemplate == c.promptTemplate);

  auto bad = nlohmann::json::parse(j.dump());
  bad["colour"] = "blue";
  CHECK_THROWS_AS(parseRunConfig(bad), ConfigMismatch);
  bad = nlohmann::json::parse(j.dump());
  bad["detector"]["hazard"] = 2.0;
  CHECK_THROWS_AS(parseRunConfig(bad), ConfigMismatch);
  bad = nlohmann::json::parse(j.dump());
  bad["trials"] = 0;
  CHECK_THROWS_AS(parseRunConfig(bad), ConfigMismatch);
  bad = nlohmann::json::parse(j.dump());
  bad["feedback"]["mode"] = "llm";
  CHECK_THROWS_AS(parseRunConfig(bad), ConfigMismatch);
  bad = nlohmann::json::parse(j.dump());
  bad["methods"] = {"remove", "teleport"};
  CHECK_THROWS_AS(parseRunConfig(bad), ConfigMismatch);

  const auto dir = fixture::tempDir("config");
  {
    std::ofstream out(dir / "c.json");
    out << R"({"scenarios": ["x.txt"], "policy": "p.pol"})";
  }
  const RunConfigFile rel = loadRunConfig(dir / "c.json");
  CHECK(rel.scenarios.front() == dir / "x.txt");
  CHECK(rel.policy == dir / "p.pol");
  std::filesystem::remove_all(dir);
}

TEST_CASE("suites built from configs") {
  RunConfigFile c = loadRunConfig(std::filesystem::path(RMNAV_CONFIG_DIR) / "suite.json");
  const SuiteSpec spec = suiteFromConfig(c);
  CHECK(spec.scenarios.size() == 3);
  CHECK(spec.trials == 50);
  REQUIRE(spec.interpreter != nullptr);
  CHECK_FALSE(spec.interpreter->hasClient());
  REQUIRE(spec.feedbackFactory);
  CHECK(spec.feedbackFactory() != nullptr);

  c.feedbackMode = FeedbackMode::Operator;
  CHECK_THROWS_AS(suiteFromConfig(c), ConfigMismatch);

  class Fixed : public LanguageModelClient {
   public:
    std::string complete(const std::string&) override { return "[1]"; }
  };
  c.feedbackMode = FeedbackMode::LanguageModel;
  c.llm = LlmConfig{};
  c.forceModel = true;
  const SuiteSpec llm = suiteFromConfig(c, std::make_shared<Fixed>());
  REQUIRE(llm.interpreter != nullptr);
  CHECK(llm.interpreter->interpret(Instruction("go up")).codes() == std::vector<int>{1});
}
