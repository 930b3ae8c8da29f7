#include "rmnav/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <queue>
#include <tuple>

#include "rmnav/errors.hpp"
#include "rmnav/rng.hpp"

namespace rmnav {

using ojson = nlohmann::ordered_json;

std::string_view methodName(Method m) {
  switch (m) {
    case Method::ReMove: return "remove";
    case Method::ReMoveNoFeedback: return "no_feedback";
    case Method::PerceivedPlannerBaseline: return "baseline";
  }
  return "unknown";
}

Method parseMethod(std::string_view text) {
  if (text == "remove" || text == "ReMove") return Method::ReMove;
  if (text == "no_feedback" || text == "ReMoveNoFeedback") return Method::ReMoveNoFeedback;
  if (text == "baseline" || text == "PerceivedPlannerBaseline") return Method::PerceivedPlannerBaseline;
  throw ConfigMismatch("unknown method '" + std::string(text) + "'");
}

std::string_view outcomeName(Outcome o) {
  switch (o) {
    case Outcome::Success: return "Success";
    case Outcome::Collision: return "Collision";
    case Outcome::Timeout: return "Timeout";
    case Outcome::Frozen: return "Frozen";
  }
  return "unknown";
}

std::string_view stepSourceName(StepSource s) {
  switch (s) {
    case StepSource::Policy: return "policy";
    case StepSource::Feedback: return "feedback";
    case StepSource::Planner: return "planner";
  }
  return "unknown";
}

std::string_view feedbackModeName(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::Scripted: return "scripted";
    case FeedbackMode::Operator: return "operator";
    case FeedbackMode::LanguageModel: return "llm";
  }
  return "unknown";
}

FeedbackMode parseFeedbackMode(std::string_view text) {
  if (text == "scripted") return FeedbackMode::Scripted;
  if (text == "operator") return FeedbackMode::Operator;
  if (text == "llm") return FeedbackMode::LanguageModel;
  throw ConfigMismatch("unknown feedback mode '" + std::string(text) + "'");
}

std::string observationDigest(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size() * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Logs ------------------------------------------------------------------------

namespace {

ojson cellJson(Cell c) { return ojson::array({c.row, c.col}); }

std::string_view instructionSourceName(InstructionSource s) {
  return s == InstructionSource::Operator ? "operator" : "scripted";
}

}  // namespace

ojson EpisodeLog::toJson() const {
  ojson j;
  j["scenario"] = scenarioId;
  j["method"] = methodName(method);
  j["seed"] = seed;
  j["start"] = cellJson(start);
  j["goal"] = cellJson(goal);
  j["outcome"] = outcomeName(outcome);
  j["metrics"] = {{"path_length", pathLength},
                  {"straight_line", straightLine},
                  {"normalized_length", normalizedLength},
                  {"collisions", collisions}};
  ojson steps_ = ojson::array();
  for (const auto& s : steps) {
    ojson e;
    e["t"] = s.t;
    e["from"] = cellJson(s.from);
    e["to"] = cellJson(s.to);
    e["action"] = s.action;
    e["source"] = stepSourceName(s.source);
    e["event"] = stepEventName(s.event);
    e["obs"] = s.obsDigest;
    if (s.hasUncertainty) {
      e["I"] = s.I;
      e["H"] = s.H;
      e["Ebar"] = s.Ebar;
    }
    steps_.push_back(std::move(e));
  }
  j["steps"] = std::move(steps_);
  ojson triggers_ = ojson::array();
  for (const auto& tr : triggers)
    triggers_.push_back({{"t", tr.t},
                         {"position", cellJson(tr.position)},
                         {"map_run_length", tr.mapRunLength},
                         {"short_run_mass", tr.shortRunMass},
                         {"mean_before", tr.meanBefore},
                         {"mean_after", tr.meanAfter}});
  j["triggers"] = std::move(triggers_);
  ojson feedback_ = ojson::array();
  for (const auto& f : feedbackEvents)
    feedback_.push_back({{"t", f.t},
                         {"instruction", f.instruction},
                         {"instruction_source", instructionSourceName(f.instructionSource)},
                         {"actions", f.actions},
                         {"provenance", provenanceName(f.provenance)},
                         {"attempts", f.attempts},
                         {"executed", f.executed}});
  j["feedback"] = std::move(feedback_);
  j["feedback_errors"] = feedbackErrors;
  return j;
}

std::string EpisodeLog::dump() const { return toJson().dump(); }

// Scripted oracle ---------------------------------------------------------------

std::optional<std::vector<int>> oraclePath(const Grid& grid, Cell from, const OracleConfig& config) {
  const int side = grid.side();
  auto index = [side](Cell c) { return static_cast<std::size_t>(c.row) * side + c.col; };
  auto cost = [&](CellKind k) -> double {
    switch (k) {
      case CellKind::Empty:
      case CellKind::Goal:
      case CellKind::DeceptiveObstacle: return 1.0;
      case CellKind::PliableObstacle: return config.pliableCost;
      default: return -1.0;
    }
  };
  std::vector<double> dist(static_cast<std::size_t>(side) * side, -1.0);
  std::vector<int> via(dist.size(), -1);
  using Item = std::tuple<double, int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[index(from)] = 0.0;
  open.emplace(0.0, from.row, from.col);
  while (!open.empty()) {
    const auto [d, r, c] = open.top();
    open.pop();
    const Cell here{r, c};
    if (d > dist[index(here)]) continue;
    if (here == grid.goal()) break;
    for (Action a : kAllActions) {
      const Cell next = moved(here, a);
      if (!grid.inBounds(next)) continue;
      const double w = cost(grid.at(next));
      if (w < 0.0) continue;
      const double nd = d + w;
      double& slot = dist[index(next)];
      if (slot < 0.0 || nd < slot) {
        slot = nd;
        via[index(next)] = toCode(a);
        open.emplace(nd, next.row, next.col);
      }
    }
  }
  if (dist[index(grid.goal())] < 0.0) return std::nullopt;
  std::vector<int> actions;
  for (Cell c = grid.goal(); c != from;) {
    const int a = via[index(c)];
    actions.push_back(a);
    c = moved(c, actionFromCode((a + 2) % 4));
  }
  std::reverse(actions.begin(), actions.end());
  return actions;
}

std::optional<FeedbackReply> ScriptedOracleFeedback::request(const FeedbackRequest& req) {
  if (req.grid == nullptr) return std::nullopt;
  const auto path = oraclePath(*req.grid, req.state.position, config_);
  if (!path || path->empty()) return std::nullopt;
  std::size_t n = path->size();
  if (!config_.fullPath) {
    std::size_t lastDeceptive = path->size();
    Cell c = req.state.position;
    for (std::size_t i = 0; i < path->size(); ++i) {
      c = moved(c, actionFromCode((*path)[i]));
      if (req.grid->at(c) == CellKind::DeceptiveObstacle) lastDeceptive = i;
    }
    const std::size_t keep = lastDeceptive < path->size()
                                 ? lastDeceptive + 1 + static_cast<std::size_t>(std::max(0, config_.extraSteps))
                                 : static_cast<std::size_t>(std::max(1, config_.openSteps));
    n = std::min(n, keep);
  }
  const std::vector<int> prefix(path->begin(), path->begin() + static_cast<long>(n));
  return FeedbackReply{Instruction(describeActions(prefix), InstructionSource::Scripted), std::nullopt};
}

// Episodes ----------------------------------------------------------------------

Cell jitteredStart(const Grid& grid, int radius, std::uint64_t seed) {
  if (radius <= 0) return grid.start();
  std::vector<Cell> candidates;
  const Cell s = grid.start();
  for (int r = s.row - radius; r <= s.row + radius; ++r)
    for (int c = s.col - radius; c <= s.col + radius; ++c) {
      const Cell cell{r, c};
      if (grid.inCentral(cell) && grid.at(cell) == CellKind::Empty) candidates.push_back(cell);
    }
  if (candidates.empty()) return s;
  std::mt19937_64 rng(deriveSeed(seed, 0));
  return candidates[uniformIndex(rng, candidates.size())];
}

namespace {

EpisodeLog startLog(const Grid& grid, Method method, std::uint64_t seed, Cell start) {
  EpisodeLog log;
  log.scenarioId = grid.name();
  log.method = method;
  log.seed = seed;
  log.start = start;
  log.goal = grid.goal();
  log.straightLine = euclidean(start, grid.goal());
  return log;
}

void finishLog(EpisodeLog& log, Outcome outcome, EpisodeObserver* observer) {
  log.outcome = outcome;
  log.normalizedLength = log.straightLine > 0.0 ? log.pathLength / log.straightLine : 0.0;
  if (observer) observer->onEnd(log);
}

StepRecord takeStep(const Grid& grid, AgentState& state, Action a, StepSource source, EpisodeLog& log) {
  const StepOutcome out = step(grid, state, a);
  StepRecord r;
  r.t = state.t;
  r.from = state.position;
  r.to = out.next.position;
  r.action = toCode(a);
  r.source = source;
  r.event = out.event;
  if (r.to != r.from) ++log.pathLength;
  if (out.event == StepEvent::Collision) ++log.collisions;
  state = out.next;
  return r;
}

std::optional<Outcome> terminalOutcome(const StepRecord& r) {
  if (r.event == StepEvent::Collision) return Outcome::Collision;
  if (r.event == StepEvent::ReachedGoal) return Outcome::Success;
  return std::nullopt;
}

void attachUncertainty(StepRecord& r, const Observation& obs, const UncertaintyRecord& rec) {
  r.obsDigest = observationDigest(obs.values);
  r.hasUncertainty = true;
  r.I = rec.mutualInfo;
  r.H = rec.totalEntropy;
  r.Ebar = rec.expectedEntropy;
}

std::optional<FeedbackEvent> obtainFeedback(const EpisodeContext& ctx, const RunConfig& config,
                                            const AgentState& state, const UncertaintyRecord& rec, EpisodeLog& log) {
  static const Interpreter fallbackInterpreter;
  const Interpreter& interpreter = ctx.interpreter ? *ctx.interpreter : fallbackInterpreter;
  if (ctx.observer) ctx.observer->onFeedbackRequested(state.t, rec);
  FeedbackRequest req;
  req.grid = ctx.grid;
  req.state = state;
  req.context = &rec;
  for (int attempt = 1; attempt <= config.maxFeedbackAttempts; ++attempt) {
    req.attempt = attempt;
    auto reply = ctx.feedback->request(req);
    if (!reply) return std::nullopt;
    try {
      const ActionSequence seq = reply->resolved ? *reply->resolved : interpreter.interpret(reply->instruction);
      FeedbackEvent ev;
      ev.t = state.t;
      ev.instruction = reply->instruction.text();
      ev.instructionSource = reply->instruction.source();
      ev.actions = seq.codes();
      ev.provenance = reply->instruction.source() == InstructionSource::Scripted ? Provenance::ScriptedOracle
                                                                                  : seq.provenance();
      ev.attempts = attempt;
      return ev;
    } catch (const FeedbackError& e) {
      log.feedbackErrors.push_back("t=" + std::to_string(state.t) + ": " + e.what());
      req.lastError = e.what();
    }
  }
  return std::nullopt;
}

}  // namespace

EpisodeLog runEpisode(const EpisodeContext& ctx, Method method, const RunConfig& config, std::uint64_t seed) {
  if (ctx.grid == nullptr || ctx.policy == nullptr) throw BadParam("episode needs a grid and a policy");
  if (method == Method::PerceivedPlannerBaseline)
    return runBaseline(*ctx.grid, ctx.policy->observation, config, seed, ctx.observer);
  const Grid& grid = *ctx.grid;
  const EnsemblePolicy& policy = *ctx.policy;
  policy.validate();
  if (policy.L != grid.L())
    throw ConfigMismatch("policy trained for L=" + std::to_string(policy.L) + ", grid has L=" +
                         std::to_string(grid.L()));
  if (policy.observation.length(grid.L()) != policy.inputDim())
    throw ConfigMismatch("policy input dimension does not match its observation spec");

  const Cell start = jitteredStart(grid, config.startJitter, seed);
  EpisodeLog log = startLog(grid, method, seed, start);
  std::mt19937_64 rng(deriveSeed(seed, 1));
  RunLengthPosterior detector(config.detector);
  const int patch = policy.observation.patch;
  SeenMask seen(grid.side());
  AgentState state{start, 0};
  seen.reveal(state.position, patch);
  const int maxSteps = config.maxSteps > 0 ? config.maxSteps : grid.maxSteps();

  auto evaluate = [&]() {
    Observation obs = buildObservation(policy.observation, grid, state, seen);
    UncertaintyRecord rec = decompose(predictMembers(policy, obs, rng), state.t);
    return std::pair{std::move(obs), std::move(rec)};
  };
  auto advance = [&](Action a, StepSource source, const Observation& obs, const UncertaintyRecord& rec) {
    StepRecord r = takeStep(grid, state, a, source, log);
    attachUncertainty(r, obs, rec);
    seen.reveal(state.position, patch);
    log.steps.push_back(r);
    return r;
  };

  std::optional<Outcome> end;
  int still = 0;
  while (!end) {
    if (state.t >= maxSteps) {
      end = Outcome::Timeout;
      break;
    }
    auto [obs, rec] = evaluate();
    const TriggerDecision d = detector.update(rec.mutualInfo);
    if (d.fired) {
      const TriggerRecord tr{state.t, state.position, d.mapRunLength, d.shortRunMass, d.meanBefore, d.meanAfter};
      log.triggers.push_back(tr);
      if (ctx.observer) ctx.observer->onTrigger(tr);
      if (method == Method::ReMove && ctx.feedback != nullptr) {
        if (auto ev = obtainFeedback(ctx, config, state, rec, log)) {
          if (ctx.observer) ctx.observer->onSequenceAccepted(*ev);
          for (std::size_t i = 0; i < ev->actions.size() && !end; ++i) {
            if (state.t >= maxSteps) {
              end = Outcome::Timeout;
              break;
            }
            if (i > 0) std::tie(obs, rec) = evaluate();
            const StepRecord r = advance(actionFromCode(ev->actions[i]), StepSource::Feedback, obs, rec);
            ++ev->executed;
            if (ctx.observer) ctx.observer->onExecutionProgress(static_cast<int>(i), r);
            end = terminalOutcome(r);
          }
          log.feedbackEvents.push_back(std::move(*ev));
          resetAfterFeedback(detector);
          still = 0;
          continue;
        }
      }
    }
    const StepRecord r = advance(act(rec.memberProbs), StepSource::Policy, obs, rec);
    if (ctx.observer) ctx.observer->onStep(r);
    end = terminalOutcome(r);
    if (!end && method == Method::ReMoveNoFeedback) {
      still = r.to == r.from ? still + 1 : 0;
      if (still >= config.frozenRepeats) end = Outcome::Frozen;
    }
  }
  finishLog(log, *end, ctx.observer);
  return log;
}

EpisodeLog runBaseline(const Grid& grid, const ObservationSpec& view, const RunConfig& config, std::uint64_t seed,
                       EpisodeObserver* observer) {
  requireOddPatch(view.patch);
  const Cell start = jitteredStart(grid, config.startJitter, seed);
  EpisodeLog log = startLog(grid, Method::PerceivedPlannerBaseline, seed, start);
  std::mt19937_64 rng(deriveSeed(seed, 2));
  SeenMask seen(grid.side());
  AgentState state{start, 0};
  seen.reveal(state.position, view.patch);
  const int maxSteps = config.maxSteps > 0 ? config.maxSteps : grid.maxSteps();
  const int side = grid.side();
  auto index = [side](Cell c) { return static_cast<std::size_t>(c.row) * side + c.col; };
  auto perceivedFree = [&](Cell c) {
    if (!grid.inCentral(c)) return false;
    return !(seen.seen(c) && observationCode(grid.at(c)) == kCodeBlocked);
  };

  std::optional<Outcome> end;
  int still = 0;
  std::vector<int> dist;
  while (!end) {
    if (state.t >= maxSteps) {
      end = Outcome::Timeout;
      break;
    }
    dist.assign(static_cast<std::size_t>(side) * side, -1);
    std::queue<Cell> frontier;
    dist[index(grid.goal())] = 0;
    frontier.push(grid.goal());
    while (!frontier.empty()) {
      const Cell c = frontier.front();
      frontier.pop();
      for (Action a : kAllActions) {
        const Cell n = moved(c, a);
        if (perceivedFree(n) && dist[index(n)] < 0) {
          dist[index(n)] = dist[index(c)] + 1;
          frontier.push(n);
        }
      }
    }
    const int here = dist[index(state.position)];
    if (here < 0) {
      end = Outcome::Frozen;
      break;
    }
    std::vector<Action> options;
    for (Action a : kAllActions) {
      const Cell n = moved(state.position, a);
      if (grid.inBounds(n) && dist[index(n)] == here - 1) options.push_back(a);
    }
    const auto patchValues = localPatch(grid, state, view.patch, false);
    StepRecord r = takeStep(grid, state, options[uniformIndex(rng, options.size())], StepSource::Planner, log);
    r.obsDigest = observationDigest(patchValues);
    seen.reveal(state.position, view.patch);
    log.steps.push_back(r);
    if (observer) observer->onStep(r);
    end = terminalOutcome(r);
    if (!end) {
      still = r.to == r.from ? still + 1 : 0;
      if (still >= config.frozenRepeats) end = Outcome::Frozen;
    }
  }
  finishLog(log, *end, observer);
  return log;
}

// Suites ------------------------------------------------------------------------

namespace {

EpisodeLog runTrial(const SuiteSpec& spec, const EnsemblePolicy& policy, std::size_t s, std::size_t m, int i) {
  const Method method = spec.methods[m];
  std::unique_ptr<FeedbackSource> source;
  if (method == Method::ReMove && spec.feedbackFactory) source = spec.feedbackFactory();
  EpisodeContext ctx;
  ctx.grid = &spec.scenarios[s];
  ctx.policy = &policy;
  ctx.feedback = source.get();
  ctx.interpreter = spec.interpreter.get();
  return runEpisode(ctx, method, spec.config, deriveSeed(spec.seed, static_cast<std::uint64_t>(i)));
}

SuiteReport aggregate(const SuiteSpec& spec, std::vector<EpisodeLog> episodes) {
  SuiteReport report;
  report.trials = spec.trials;
  report.seed = spec.seed;
  report.scenarioCount = spec.scenarios.size();
  report.methodCount = spec.methods.size();
  for (std::size_t s = 0; s < spec.scenarios.size(); ++s)
    for (std::size_t m = 0; m < spec.methods.size(); ++m) {
      SuiteRow row;
      row.scenarioId = spec.scenarios[s].name();
      row.method = spec.methods[m];
      row.trials = spec.trials;
      double length = 0.0, feedback = 0.0, triggers = 0.0;
      for (int i = 0; i < spec.trials; ++i) {
        const auto& log = episodes[(s * spec.methods.size() + m) * spec.trials + i];
        switch (log.outcome) {
          case Outcome::Success: ++row.successes; break;
          case Outcome::Collision: ++row.collisions; break;
          case Outcome::Timeout: ++row.timeouts; break;
          case Outcome::Frozen: ++row.frozen; break;
        }
        length += log.normalizedLength;
        feedback += static_cast<double>(log.feedbackEvents.size());
        triggers += static_cast<double>(log.triggers.size());
      }
      const double n = static_cast<double>(spec.trials);
      row.successRate = row.successes / n;
      row.meanNormalizedLength = length / n;
      row.meanFeedbackEvents = feedback / n;
      row.meanTriggers = triggers / n;
      report.rows.push_back(row);
    }
  report.episodes = std::move(episodes);
  return report;
}

void checkSuite(const SuiteSpec& spec) {
  if (spec.trials < 1) throw BadParam("a suite needs at least one trial");
  if (spec.scenarios.empty() || spec.methods.empty()) throw BadParam("a suite needs scenarios and methods");
}

}  // namespace

const SuiteRow& SuiteReport::row(std::string_view scenarioId, Method method) const {
  for (const auto& r : rows)
    if (r.scenarioId == scenarioId && r.method == method) return r;
  throw BadParam("no suite row for " + std::string(scenarioId) + "/" + std::string(methodName(method)));
}

const EpisodeLog& SuiteReport::episode(std::size_t scenario, std::size_t method, int trial) const {
  return episodes.at((scenario * methodCount + method) * static_cast<std::size_t>(trials) +
                     static_cast<std::size_t>(trial));
}

SuiteReport runSuite(const SuiteSpec& spec, const EnsemblePolicy& policy) {
  checkSuite(spec);
  const std::size_t M = spec.methods.size();
  const long total = static_cast<long>(spec.scenarios.size() * M * static_cast<std::size_t>(spec.trials));
  std::vector<EpisodeLog> episodes(static_cast<std::size_t>(total));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < total; ++k) {
    const int i = static_cast<int>(k % spec.trials);
    const std::size_t m = static_cast<std::size_t>(k / spec.trials) % M;
    const std::size_t s = static_cast<std::size_t>(k / spec.trials) / M;
    try {
      episodes[static_cast<std::size_t>(k)] = runTrial(spec, policy, s, m, i);
    } catch (...) {
#pragma omp critical(rmnav_suite_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate(spec, std::move(episodes));
}

SuiteReport runSuiteSerial(const SuiteSpec& spec, const EnsemblePolicy& policy) {
  checkSuite(spec);
  std::vector<EpisodeLog> episodes;
  for (std::size_t s = 0; s < spec.scenarios.size(); ++s)
    for (std::size_t m = 0; m < spec.methods.size(); ++m)
      for (int i = 0; i < spec.trials; ++i) episodes.push_back(runTrial(spec, policy, s, m, i));
  return aggregate(spec, std::move(episodes));
}

void writeSuiteCsv(const SuiteReport& report, std::ostream& out) {
  out << "scenario,method,trials,successes,success_rate,mean_normalized_length,collisions,timeouts,frozen,"
         "mean_feedback_events,mean_triggers\n"
      << std::setprecision(10);
  for (const auto& r : report.rows)
    out << r.scenarioId << ',' << methodName(r.method) << ',' << r.trials << ',' << r.successes << ','
        << r.successRate << ',' << r.meanNormalizedLength << ',' << r.collisions << ',' << r.timeouts << ','
        << r.frozen << ',' << r.meanFeedbackEvents << ',' << r.meanTriggers << '\n';
}

void writeSuiteTable(const SuiteReport& report, std::ostream& out) {
  out << "trials per cell: " << report.trials << ", seed: " << report.seed << "\n";
  out << std::left << std::setw(22) << "scenario" << std::setw(13) << "method" << std::right << std::setw(7) << "SR"
      << std::setw(10) << "norm.len" << std::setw(7) << "coll" << std::setw(7) << "tout" << std::setw(7) << "froz"
      << std::setw(9) << "fb/ep" << "\n";
  out << std::fixed;
  for (const auto& r : report.rows)
    out << std::left << std::setw(22) << r.scenarioId << std::setw(13) << methodName(r.method) << std::right
        << std::setw(7) << std::setprecision(2) << r.successRate << std::setw(10) << std::setprecision(3)
        << r.meanNormalizedLength << std::setw(7) << r.collisions << std::setw(7) << r.timeouts << std::setw(7)
        << r.frozen << std::setw(9) << std::setprecision(2) << r.meanFeedbackEvents << "\n";
  out << std::defaultfloat;
}

void writeEpisodesJsonl(const SuiteReport& report, std::ostream& out) {
  for (const auto& e : report.episodes) out << e.dump() << '\n';
}

// Run configuration -------------------------------------------------------------

namespace {

void allowKeys(const nlohmann::json& j, std::initializer_list<std::string_view> keys, std::string_view where) {
  if (!j.is_object()) throw ConfigMismatch(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigMismatch("unknown key '" + key + "' in " + std::string(where));
}

template <typename T>
void readInto(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigMismatch(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

DetectorConfig parseDetectorConfig(const nlohmann::json& j) {
  allowKeys(j, {"hazard", "tau", "r0", "Rmax", "prior"}, "detector");
  DetectorConfig c;
  readInto(j, "hazard", c.hazard);
  readInto(j, "tau", c.tau);
  readInto(j, "r0", c.r0);
  readInto(j, "Rmax", c.rMax);
  if (j.contains("prior")) {
    const auto& p = j.at("prior");
    allowKeys(p, {"mu0", "kappa0", "alpha0", "beta0"}, "detector.prior");
    readInto(p, "mu0", c.prior.mu0);
    readInto(p, "kappa0", c.prior.kappa0);
    readInto(p, "alpha0", c.prior.alpha0);
    readInto(p, "beta0", c.prior.beta0);
  }
  try {
    c.validate();
  } catch (const BadParam& e) {
    throw ConfigMismatch(std::string("detector: ") + e.what());
  }
  return c;
}

ojson detectorConfigToJson(const DetectorConfig& c) {
  return {{"hazard", c.hazard},
          {"tau", c.tau},
          {"r0", c.r0},
          {"Rmax", c.rMax},
          {"prior",
           {{"mu0", c.prior.mu0}, {"kappa0", c.prior.kappa0}, {"alpha0", c.prior.alpha0}, {"beta0", c.prior.beta0}}}};
}

PromptTemplate parsePromptTemplate(const nlohmann::json& j) {
  allowKeys(j, {"preamble", "scaffold"}, "template");
  PromptTemplate t = PromptTemplate::defaults();
  readInto(j, "preamble", t.preamble);
  readInto(j, "scaffold", t.scaffold);
  return t;
}

ojson promptTemplateToJson(const PromptTemplate& t) { return {{"preamble", t.preamble}, {"scaffold", t.scaffold}}; }

RunConfigFile parseRunConfig(const nlohmann::json& j, const std::filesystem::path& baseDir) {
  allowKeys(j, {"scenarios", "methods", "policy", "trials", "seed", "feedback", "detector", "runner", "template", "llm"},
            "run config");
  RunConfigFile c;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || baseDir.empty() ? path : baseDir / path;
  };
  std::vector<std::string> scenarios;
  readInto(j, "scenarios", scenarios);
  for (const auto& s : scenarios) c.scenarios.push_back(resolve(s));
  if (j.contains("methods")) {
    std::vector<std::string> methods;
    readInto(j, "methods", methods);
    c.methods.clear();
    for (const auto& m : methods) c.methods.push_back(parseMethod(m));
  }
  if (j.contains("policy")) {
    std::string p;
    readInto(j, "policy", p);
    c.policy = resolve(p);
  }
  readInto(j, "trials", c.trials);
  if (c.trials < 1) throw ConfigMismatch("trials must be at least 1");
  readInto(j, "seed", c.seed);
  if (j.contains("feedback")) {
    const auto& f = j.at("feedback");
    allowKeys(f, {"mode", "max_attempts", "force_model", "oracle_full_path", "oracle_extra_steps", "oracle_open_steps"},
              "feedback");
    std::string mode = std::string(feedbackModeName(c.feedbackMode));
    readInto(f, "mode", mode);
    c.feedbackMode = parseFeedbackMode(mode);
    readInto(f, "max_attempts", c.run.maxFeedbackAttempts);
    readInto(f, "force_model", c.forceModel);
    readInto(f, "oracle_full_path", c.run.oracle.fullPath);
    readInto(f, "oracle_extra_steps", c.run.oracle.extraSteps);
    readInto(f, "oracle_open_steps", c.run.oracle.openSteps);
    if (c.run.maxFeedbackAttempts < 1) throw ConfigMismatch("feedback.max_attempts must be at least 1");
  }
  if (j.contains("detector")) c.run.detector = parseDetectorConfig(j.at("detector"));
  if (j.contains("runner")) {
    const auto& r = j.at("runner");
    allowKeys(r, {"frozen_repeats", "start_jitter", "max_steps", "step_delay_ms"}, "runner");
    readInto(r, "frozen_repeats", c.run.frozenRepeats);
    readInto(r, "start_jitter", c.run.startJitter);
    readInto(r, "max_steps", c.run.maxSteps);
    readInto(r, "step_delay_ms", c.stepDelayMs);
    if (c.run.frozenRepeats < 1 || c.run.startJitter < 0 || c.run.maxSteps < 0 || c.stepDelayMs < 0)
      throw ConfigMismatch("runner values must be non-negative (frozen_repeats >= 1)");
  }
  if (j.contains("template")) c.promptTemplate = parsePromptTemplate(j.at("template"));
  if (j.contains("llm")) {
    const auto& l = j.at("llm");
    allowKeys(l, {"endpoint", "model", "token_env", "timeout_seconds"}, "llm");
    LlmConfig llm;
    readInto(l, "endpoint", llm.endpoint);
    readInto(l, "model", llm.model);
    readInto(l, "token_env", llm.tokenEnv);
    readInto(l, "timeout_seconds", llm.timeoutSeconds);
    if (!(llm.timeoutSeconds > 0.0)) throw ConfigMismatch("llm.timeout_seconds must be positive");
    c.llm = llm;
  }
  if (c.feedbackMode == FeedbackMode::LanguageModel && !c.llm)
    throw ConfigMismatch("feedback mode 'llm' needs an llm block");
  return c;
}

SuiteSpec suiteFromConfig(const RunConfigFile& config, std::shared_ptr<LanguageModelClient> client) {
  if (config.feedbackMode == FeedbackMode::Operator)
    throw ConfigMismatch("operator feedback needs a live session; use the service");
  SuiteSpec spec;
  for (const auto& path : config.scenarios) spec.scenarios.push_back(Grid::build(loadScenario(path)));
  spec.methods = config.methods;
  spec.trials = config.trials;
  spec.seed = config.seed;
  spec.config = config.run;
  const OracleConfig oracle = config.run.oracle;
  spec.feedbackFactory = [oracle] { return std::make_unique<ScriptedOracleFeedback>(oracle); };
  if (config.feedbackMode == FeedbackMode::LanguageModel) {
    if (!client) client = std::make_shared<HttpChatClient>(*config.llm);
    spec.interpreter = std::make_shared<const Interpreter>(config.promptTemplate, client, !config.forceModel);
  } else {
    spec.interpreter = std::make_shared<const Interpreter>(config.promptTemplate);
  }
  return spec;
}

RunConfigFile loadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigMismatch("cannot open run config " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigMismatch("run config " + path.string() + " is not valid JSON");
  return parseRunConfig(j, path.parent_path());
}

ojson runConfigToJson(const RunConfigFile& c) {
  ojson j;
  ojson scenarios = ojson::array();
  for (const auto& s : c.scenarios) scenarios.push_back(s.string());
  j["scenarios"] = std::move(scenarios);
  ojson methods = ojson::array();
  for (Method m : c.methods) methods.push_back(methodName(m));
  j["methods"] = std::move(methods);
  j["policy"] = c.policy.string();
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["feedback"] = {{"mode", feedbackModeName(c.feedbackMode)},
                   {"max_attempts", c.run.maxFeedbackAttempts},
                   {"force_model", c.forceModel},
                   {"oracle_full_path", c.run.oracle.fullPath},
                   {"oracle_extra_steps", c.run.oracle.extraSteps},
                   {"oracle_open_steps", c.run.oracle.openSteps}};
  j["detector"] = detectorConfigToJson(c.run.detector);
  j["runner"] = {{"frozen_repeats", c.run.frozenRepeats},
                 {"start_jitter", c.run.startJitter},
                 {"max_steps", c.run.maxSteps},
                 {"step_delay_ms", c.stepDelayMs}};
  j["template"] = promptTemplateToJson(c.promptTemplate);
  if (c.llm)
    j["llm"] = {{"endpoint", c.llm->endpoint},
                {"model", c.llm->model},
                {"token_env", c.llm->tokenEnv},
                {"timeout_seconds", c.llm->timeoutSeconds}};
  return j;
}

}  // namespace rmnav
