#include "rmnav/service.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "rmnav/rng.hpp"

namespace rmnav {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json cellJson(Cell c) { return json::array({c.row, c.col}); }

char kindGlyph(CellKind k) {
  switch (k) {
    case CellKind::Empty: return '.';
    case CellKind::Wall: return '#';
    case CellKind::SolidObstacle: return 'S';
    case CellKind::PliableObstacle: return 'P';
    case CellKind::DeceptiveObstacle: return 'D';
    case CellKind::Goal: return 'G';
  }
  return '?';
}

json gridJson(const Grid& grid) {
  json rows = json::array();
  for (int r = 0; r < grid.side(); ++r) {
    std::string line;
    for (int c = 0; c < grid.side(); ++c) line += kindGlyph(grid.at({r, c}));
    rows.push_back(line);
  }
  return {{"name", grid.name()},
          {"L", grid.L()},
          {"side", grid.side()},
          {"start", cellJson(grid.start())},
          {"goal", cellJson(grid.goal())},
          {"cells", rows}};
}

json stepJson(const StepRecord& r) {
  json j = {{"t", r.t},
            {"from", cellJson(r.from)},
            {"to", cellJson(r.to)},
            {"action", r.action},
            {"source", stepSourceName(r.source)},
            {"event", stepEventName(r.event)},
            {"state", {{"position", cellJson(r.to)}, {"t", r.t + 1}}}};
  if (r.hasUncertainty) {
    j["I"] = r.I;
    j["H"] = r.H;
    j["Ebar"] = r.Ebar;
  }
  return j;
}

std::string randomToken() {
  static std::mutex m;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

}  // namespace

// EpisodeStore -----------------------------------------------------------------

EpisodeStore::EpisodeStore(fs::path dir) : dir_(std::move(dir)), index_(json::array()) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StorageFailure("cannot create store directory " + dir_.string() + ": " + ec.message());
  const fs::path indexPath = dir_ / "index.json";
  if (fs::exists(indexPath)) {
    std::ifstream in(indexPath);
    try {
      index_ = json::parse(in);
    } catch (const json::exception& e) {
      throw StorageFailure("corrupt store index " + indexPath.string() + ": " + e.what());
    }
    if (!index_.is_array()) throw StorageFailure("store index is not an array");
  }
}

std::string EpisodeStore::append(const EpisodeLog& log, const std::string& suite) {
  if (suite.empty() || suite.find_first_of("/\\") != std::string::npos || suite == "index")
    throw StorageFailure("invalid suite name '" + suite + "'");
  const std::string line = log.dump();
  std::lock_guard lock(mutex_);
  const std::string file = suite + ".jsonl";
  const fs::path path = dir_ / file;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw StorageFailure("cannot open " + path.string());
  out.seekp(0, std::ios::end);
  const auto offset = static_cast<std::uint64_t>(out.tellp());
  out << line << '\n';
  out.flush();
  if (!out) throw StorageFailure("write failed on " + path.string());

  std::size_t n = 0;
  for (const auto& e : index_)
    if (e.at("suite") == suite) ++n;
  const std::string id = suite + "-" + std::to_string(n);
  index_.push_back({{"id", id},
                    {"suite", suite},
                    {"file", file},
                    {"offset", offset},
                    {"length", line.size()},
                    {"scenario", log.scenarioId},
                    {"method", methodName(log.method)},
                    {"seed", log.seed},
                    {"outcome", outcomeName(log.outcome)}});
  writeIndex();
  return id;
}

void EpisodeStore::writeIndex() const {
  const fs::path tmp = dir_ / "index.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << index_.dump(1) << '\n';
    out.flush();
    if (!out) throw StorageFailure("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, dir_ / "index.json", ec);
  if (ec) throw StorageFailure("cannot replace store index: " + ec.message());
}

json EpisodeStore::list() const {
  std::lock_guard lock(mutex_);
  return index_;
}

std::optional<std::string> EpisodeStore::get(const std::string& id) const {
  json entry;
  {
    std::lock_guard lock(mutex_);
    for (const auto& e : index_)
      if (e.at("id") == id) entry = e;
  }
  if (entry.is_null()) return std::nullopt;
  const fs::path path = dir_ / entry.at("file").get<std::string>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageFailure("cannot open " + path.string());
  std::string bytes(entry.at("length").get<std::size_t>(), '\0');
  in.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw StorageFailure("short read for episode " + id);
  return bytes;
}

std::size_t EpisodeStore::size() const {
  std::lock_guard lock(mutex_);
  return index_.size();
}

// Events -------------------------------------------------------------------------

std::string_view sessionStateName(SessionState s) {
  switch (s) {
    case SessionState::Running: return "Running";
    case SessionState::AwaitingFeedback: return "AwaitingFeedback";
    case SessionState::Executing: return "Executing";
    case SessionState::Terminal: return "Terminal";
  }
  return "unknown";
}

json SessionEvent::frame() const { return {{"seq", seq}, {"type", type}, {"payload", payload}}; }

bool validEventSequence(const std::vector<std::string>& types, bool complete) {
  // 0 = stepping, 1 = just requested, 2 = previewed, 3 = executing, 4 = ended.
  int s = 0;
  for (const auto& t : types) {
    if (s == 4) return false;
    if (t == "StepTaken") {
      s = 0;
    } else if (t == "FeedbackRequested") {
      s = 1;
    } else if (t == "SequencePreview") {
      if (s != 1) return false;
      s = 2;
    } else if (t == "ExecutionProgress") {
      if (s == 0) return false;
      s = 3;
    } else if (t == "EpisodeEnded") {
      s = 4;
    } else {
      return false;
    }
  }
  return !complete || s == 4;
}

// Session ------------------------------------------------------------------------

class Session::Observer : public EpisodeObserver {
 public:
  explicit Observer(Session& s) : s_(s) {}

  void onStep(const StepRecord& r) override {
    s_.setState(SessionState::Running);
    s_.emit("StepTaken", stepJson(r));
    s_.pace();
  }
  void onTrigger(const TriggerRecord& tr) override { last_ = tr; }
  void onFeedbackRequested(int t, const UncertaintyRecord& rec) override {
    json p = {{"t", t}, {"I", rec.mutualInfo}, {"H", rec.totalEntropy}, {"Ebar", rec.expectedEntropy}};
    if (last_ && last_->t == t) {
      p["position"] = cellJson(last_->position);
      p["trigger"] = {{"map_run_length", last_->mapRunLength},
                      {"short_run_mass", last_->shortRunMass},
                      {"mean_before", last_->meanBefore},
                      {"mean_after", last_->meanAfter}};
    }
    s_.setState(SessionState::AwaitingFeedback);
    s_.emit("FeedbackRequested", std::move(p));
  }
  void onSequenceAccepted(const FeedbackEvent& ev) override {
    total_ = static_cast<int>(ev.actions.size());
    s_.setState(SessionState::Executing);
  }
  void onExecutionProgress(int index, const StepRecord& r) override {
    json p = stepJson(r);
    p["index"] = index;
    p["of"] = total_;
    s_.emit("ExecutionProgress", std::move(p));
    s_.pace();
  }

 private:
  Session& s_;
  std::optional<TriggerRecord> last_;
  int total_ = 0;
};

// Blocks the episode worker until the operator confirms a previewed sequence.
class Session::OperatorSource : public FeedbackSource {
 public:
  explicit OperatorSource(Session& s) : s_(s) {}

  std::optional<FeedbackReply> request(const FeedbackRequest&) override {
    std::optional<std::pair<Instruction, ActionSequence>> pending;
    while (true) {
      std::shared_ptr<Command> cmd;
      {
        std::unique_lock lock(s_.mutex_);
        s_.changed_.wait(lock, [&] { return s_.stopping_ || !s_.commands_.empty(); });
        if (s_.stopping_) return std::nullopt;
        cmd = s_.commands_.front();
        s_.commands_.pop_front();
      }
      if (cmd->kind == Command::Submit) {
        try {
          Instruction instruction(cmd->text, InstructionSource::Operator);
          ActionSequence seq = s_.setup_.interpreter->interpret(instruction);
          json reply = {{"actions", seq.codes()},
                        {"provenance", provenanceName(seq.provenance())},
                        {"instruction", instruction.text()}};
          pending.emplace(std::move(instruction), std::move(seq));
          cmd->reply.set_value(std::move(reply));
        } catch (...) {
          cmd->reply.set_exception(std::current_exception());
        }
        continue;
      }
      if (!pending) {
        cmd->reply.set_exception(std::make_exception_ptr(WrongState("no previewed sequence to confirm")));
        continue;
      }
      s_.emit("SequencePreview", {{"actions", pending->second.codes()},
                                  {"provenance", provenanceName(pending->second.provenance())},
                                  {"instruction", pending->first.text()}});
      s_.setState(SessionState::Executing);
      cmd->reply.set_value(pending->second.codes());
      s_.rejectPending("feedback window closed");
      return FeedbackReply{std::move(pending->first), std::move(pending->second)};
    }
  }

 private:
  Session& s_;
};

Session::Session(Setup setup) : setup_(std::move(setup)) {}

Session::~Session() { stop(); }

void Session::start() { worker_ = std::thread([this] { run(); }); }

void Session::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
  if (worker_.joinable()) worker_.join();
}

SessionState Session::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

void Session::setState(SessionState s) {
  {
    std::lock_guard lock(mutex_);
    state_ = s;
  }
  changed_.notify_all();
}

void Session::emit(std::string type, json payload) {
  {
    std::lock_guard lock(mutex_);
    SessionEvent ev;
    ev.seq = events_.size() + 1;
    ev.type = std::move(type);
    ev.payload = std::move(payload);
    if (ev.type == "EpisodeEnded") ended_ = true;
    events_.push_back(std::move(ev));
  }
  changed_.notify_all();
}

void Session::pace() {
  if (setup_.stepDelayMs <= 0) return;
  std::unique_lock lock(mutex_);
  changed_.wait_for(lock, std::chrono::milliseconds(setup_.stepDelayMs), [&] { return stopping_; });
}

json Session::snapshot() const {
  std::lock_guard lock(mutex_);
  json j = {{"id", setup_.id},
            {"state", sessionStateName(state_)},
            {"seed", setup_.seed},
            {"step_delay_ms", setup_.stepDelayMs},
            {"events", events_.size()},
            {"grid", gridJson(*setup_.grid)}};
  if (outcome_) j["outcome"] = outcomeName(*outcome_);
  if (storedId_) j["episode_id"] = *storedId_;
  return j;
}

std::pair<std::vector<SessionEvent>, bool> Session::eventsAfter(std::uint64_t after,
                                                                std::chrono::milliseconds wait) const {
  std::unique_lock lock(mutex_);
  changed_.wait_for(lock, wait, [&] { return events_.size() > after || ended_ || stopping_; });
  std::vector<SessionEvent> out;
  for (std::size_t i = after; i < events_.size(); ++i) out.push_back(events_[i]);
  return {std::move(out), ended_};
}

std::vector<SessionEvent> Session::allEvents() const {
  std::lock_guard lock(mutex_);
  return events_;
}

bool Session::waitForEnd(std::chrono::milliseconds wait) const {
  std::unique_lock lock(mutex_);
  return changed_.wait_for(lock, wait, [&] { return ended_; });
}

std::optional<std::string> Session::storedEpisodeId() const {
  std::lock_guard lock(mutex_);
  return storedId_;
}

void Session::rejectPending(const std::string& why) {
  std::deque<std::shared_ptr<Command>> left;
  {
    std::lock_guard lock(mutex_);
    left.swap(commands_);
  }
  for (auto& c : left) c->reply.set_exception(std::make_exception_ptr(WrongState(why)));
}

json Session::sendCommand(Command::Kind kind, std::string text) {
  auto cmd = std::make_shared<Command>();
  cmd->kind = kind;
  cmd->text = std::move(text);
  auto reply = cmd->reply.get_future();
  {
    std::lock_guard lock(mutex_);
    if (state_ != SessionState::AwaitingFeedback)
      throw WrongState(std::string("session is ") + std::string(sessionStateName(state_)) +
                       ", feedback is accepted only while AwaitingFeedback");
    if (stopping_) throw WrongState("session is shutting down");
    commands_.push_back(cmd);
  }
  changed_.notify_all();
  return reply.get();
}

PreviewResult Session::submit(const std::string& text) {
  const json j = sendCommand(Command::Submit, text);
  PreviewResult p;
  p.actions = j.at("actions").get<std::vector<int>>();
  const auto prov = j.at("provenance").get<std::string>();
  p.provenance = prov == "language_model" ? Provenance::LanguageModel : Provenance::Grammar;
  p.instruction = j.at("instruction").get<std::string>();
  return p;
}

std::vector<int> Session::confirm() { return sendCommand(Command::Confirm, {}).get<std::vector<int>>(); }

void Session::run() {
  Observer observer(*this);
  OperatorSource source(*this);
  EpisodeContext ctx;
  ctx.grid = setup_.grid.get();
  ctx.policy = setup_.policy.get();
  ctx.feedback = &source;
  ctx.interpreter = setup_.interpreter.get();
  ctx.observer = &observer;

  json payload;
  try {
    EpisodeLog log = runEpisode(ctx, Method::ReMove, setup_.run, setup_.seed);
    payload = {{"outcome", outcomeName(log.outcome)},
               {"metrics",
                {{"path_length", log.pathLength},
                 {"straight_line", log.straightLine},
                 {"normalized_length", log.normalizedLength},
                 {"collisions", log.collisions},
                 {"feedback_events", log.feedbackEvents.size()},
                 {"triggers", log.triggers.size()}}}};
    {
      std::lock_guard lock(mutex_);
      outcome_ = log.outcome;
    }
    if (setup_.store) {
      try {
        const std::string id = setup_.store->append(log, "sessions");
        payload["episode_id"] = id;
        std::lock_guard lock(mutex_);
        storedId_ = id;
      } catch (const Error& e) {
        payload["storage_error"] = e.what();
      }
    }
  } catch (const std::exception& e) {
    payload = {{"outcome", "error"}, {"error", e.what()}};
  }
  setState(SessionState::Terminal);
  rejectPending("episode has ended");
  emit("EpisodeEnded", std::move(payload));
}

// SessionManager -------------------------------------------------------------------

SessionManager::SessionManager(ServiceOptions options)
    : options_(std::move(options)), store_(options_.storeDir) {}

SessionManager::~SessionManager() { shutdown(); }

void SessionManager::shutdown() {
  stopping_ = true;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions = sessions_;
  }
  for (auto& [id, s] : sessions) s->stop();
}

std::shared_ptr<const EnsemblePolicy> SessionManager::policyFor(const fs::path& path) {
  std::lock_guard lock(mutex_);
  const std::string key = fs::weakly_canonical(path).string();
  if (auto it = policies_.find(key); it != policies_.end()) return it->second;
  auto p = std::make_shared<const EnsemblePolicy>(loadPolicy(path));
  policies_[key] = p;
  return p;
}

std::string SessionManager::createSession(const json& body) {
  if (stopping_) throw BadConfig("service is shutting down");
  if (!body.is_object()) throw BadConfig("session body must be a JSON object");
  RunConfigFile config;
  try {
    config = parseRunConfig(body, options_.baseDir);
  } catch (const Error& e) {
    throw BadConfig(e.what());
  } catch (const json::exception& e) {
    throw BadConfig(e.what());
  }
  if (config.feedbackMode != FeedbackMode::Operator) throw BadConfig("sessions need feedback.mode = \"operator\"");
  if (config.scenarios.empty()) throw BadConfig("config lists no scenarios");
  if (config.policy.empty()) throw BadConfig("config names no policy file");
  if (!fs::is_regular_file(config.policy)) throw BadConfig("policy file not found: " + config.policy.string());

  Session::Setup setup;
  try {
    setup.grid = std::make_shared<const Grid>(Grid::build(loadScenario(config.scenarios.front())));
    setup.policy = policyFor(config.policy);
  } catch (const Error& e) {
    throw BadConfig(e.what());
  }
  if (setup.policy->L != setup.grid->L()) throw BadConfig("policy and scenario disagree on L");

  std::shared_ptr<LanguageModelClient> client = options_.llmClient;
  if (config.llm) client = std::make_shared<HttpChatClient>(*config.llm);
  try {
    setup.interpreter = std::make_shared<const Interpreter>(config.promptTemplate, client, !config.forceModel);
  } catch (const Error& e) {
    throw BadConfig(e.what());
  }
  setup.run = config.run;
  setup.seed = config.seed;
  const bool delayGiven = body.contains("runner") && body.at("runner").contains("step_delay_ms");
  setup.stepDelayMs = delayGiven ? config.stepDelayMs : options_.defaultStepDelayMs;
  setup.store = &store_;

  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    do setup.id = randomToken();
    while (sessions_.count(setup.id) != 0);
    session = std::make_shared<Session>(std::move(setup));
    sessions_[session->id()] = session;
  }
  session->start();
  return session->id();
}

std::shared_ptr<Session> SessionManager::session(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
  return it->second;
}

PreviewResult SessionManager::submitFeedback(const std::string& id, const std::string& text) {
  return session(id)->submit(text);
}

std::vector<int> SessionManager::confirmFeedback(const std::string& id) { return session(id)->confirm(); }

json SessionManager::sessionSnapshot(const std::string& id) const { return session(id)->snapshot(); }

// HTTP ---------------------------------------------------------------------------

namespace {

void sendJson(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void sendError(httplib::Response& res, int status, std::string_view kind, const std::string& message,
               json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  sendJson(res, status, extra);
}

// Maps library errors onto status codes with a structured body.
template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const UnknownSession& e) {
    sendError(res, 404, "UnknownSession", e.what());
  } catch (const NotFound& e) {
    sendError(res, 404, "NotFound", e.what());
  } catch (const WrongState& e) {
    sendError(res, 409, "WrongState", e.what());
  } catch (const Unparseable& e) {
    sendError(res, 422, "Unparseable", e.what(), {{"position", e.position()}});
  } catch (const InvalidCodes& e) {
    sendError(res, 422, "InvalidCodes", e.what());
  } catch (const AmbiguousReference& e) {
    sendError(res, 422, "AmbiguousReference", e.what());
  } catch (const EmptyInstruction& e) {
    sendError(res, 422, "EmptyInstruction", e.what());
  } catch (const MalformedResponse& e) {
    sendError(res, 502, "MalformedResponse", e.what());
  } catch (const Transport& e) {
    sendError(res, 502, "Transport", e.what());
  } catch (const BadConfig& e) {
    sendError(res, 400, "BadConfig", e.what());
  } catch (const StorageFailure& e) {
    sendError(res, 500, "StorageFailure", e.what());
  } catch (const json::exception& e) {
    sendError(res, 400, "BadRequest", e.what());
  } catch (const std::exception& e) {
    sendError(res, 500, "Internal", e.what());
  }
}

json parseBody(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

}  // namespace

HttpService::HttpService(ServiceOptions options)
    : manager_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
  routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::stop() {
  manager_.shutdown();
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw BadConfig("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpService::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw BadConfig("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body;
      try {
        body = parseBody(req);
      } catch (const json::exception& e) {
        throw BadConfig(std::string("body is not JSON: ") + e.what());
      }
      const std::string id = manager_.createSession(body);
      sendJson(res, 200, {{"id", id}});
    });
  });

  s.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { sendJson(res, 200, manager_.sessionSnapshot(req.matches[1])); });
  });

  s.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto session = manager_.session(req.matches[1]);
      std::uint64_t since = 0;
      if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
      else if (req.has_header("Last-Event-ID")) since = std::stoull(req.get_header_value("Last-Event-ID"));
      auto cursor = std::make_shared<std::uint64_t>(since);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [session, cursor](std::size_t, httplib::DataSink& sink) {
            auto [events, ended] = session->eventsAfter(*cursor, std::chrono::milliseconds(1000));
            std::string out;
            for (const auto& ev : events) {
              out += "id: " + std::to_string(ev.seq) + "\nevent: " + ev.type + "\ndata: " + ev.frame().dump() + "\n\n";
              *cursor = ev.seq;
            }
            if (out.empty() && !ended) out = ": keep-alive\n\n";
            if (!out.empty() && !sink.write(out.data(), out.size())) return false;
            if (ended) sink.done();
            return true;
          });
    });
  });

  s.Post(R"(/sessions/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parseBody(req);
      if (!body.contains("text") || !body.at("text").is_string())
        throw BadConfig("body needs a string field 'text'");
      const PreviewResult p = manager_.submitFeedback(req.matches[1], body.at("text").get<std::string>());
      sendJson(res, 200,
               {{"actions", p.actions}, {"provenance", provenanceName(p.provenance)}, {"instruction", p.instruction}});
    });
  });

  s.Post(R"(/sessions/([^/]+)/confirm)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto actions = manager_.confirmFeedback(req.matches[1]);
      sendJson(res, 200, {{"accepted", true}, {"actions", actions}});
    });
  });

  s.Get("/episodes", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { sendJson(res, 200, manager_.store().list()); });
  });

  s.Get(R"(/episodes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      auto bytes = manager_.store().get(id);
      if (!bytes) throw NotFound("no stored episode '" + id + "'");
      res.status = 200;
      res.set_content(*bytes, "application/json");
    });
  });
}

}  // namespace rmnav
