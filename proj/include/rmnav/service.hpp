#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmnav/errors.hpp"
#include "rmnav/runner.hpp"

namespace httplib {
class Server;
}

namespace rmnav {

#define RMNAV_SERVICE_ERROR(Name) \
  class Name : public Error {     \
   public:                        \
    using Error::Error;           \
  }
RMNAV_SERVICE_ERROR(BadConfig);
RMNAV_SERVICE_ERROR(UnknownSession);
RMNAV_SERVICE_ERROR(WrongState);
RMNAV_SERVICE_ERROR(StorageFailure);
RMNAV_SERVICE_ERROR(NotFound);
#undef RMNAV_SERVICE_ERROR

// Append-only episode store: one JSONL file per suite plus index.json.
// Retrieval returns the stored bytes unchanged.
class EpisodeStore {
 public:
  explicit EpisodeStore(std::filesystem::path dir);

  std::string append(const EpisodeLog& log, const std::string& suite);
  nlohmann::json list() const;
  std::optional<std::string> get(const std::string& id) const;
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void writeIndex() const;

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  nlohmann::json index_;  // array of entries
};

enum class SessionState { Running, AwaitingFeedback, Executing, Terminal };
std::string_view sessionStateName(SessionState s);

struct SessionEvent {
  std::uint64_t seq = 0;
  std::string type;  // StepTaken | FeedbackRequested | SequencePreview | ExecutionProgress | EpisodeEnded
  nlohmann::json payload;
  nlohmann::json frame() const;
};

/// Checks an event-type sequence against
///   StepTaken* (FeedbackRequested SequencePreview? ExecutionProgress* StepTaken*)* EpisodeEnded
/// `complete` = false accepts any valid prefix.
bool validEventSequence(const std::vector<std::string>& types, bool complete = true);

struct PreviewResult {
  std::vector<int> actions;
  Provenance provenance = Provenance::Grammar;
  std::string instruction;
};

class Session;

struct ServiceOptions {
  std::filesystem::path storeDir = "episodes";
  std::filesystem::path baseDir;  // resolves relative paths in session configs
  int defaultStepDelayMs = 150;
  std::shared_ptr<LanguageModelClient> llmClient;  // optional fallback for operator text
};

// Owns every live session and the episode store. Thread-safe; the HTTP layer
// is a thin wrapper over these calls.
class SessionManager {
 public:
  explicit SessionManager(ServiceOptions options);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// Body is a run config object with feedback.mode = "operator". Throws BadConfig.
  std::string createSession(const nlohmann::json& body);
  std::shared_ptr<Session> session(const std::string& id) const;  // throws UnknownSession
  PreviewResult submitFeedback(const std::string& id, const std::string& text);
  std::vector<int> confirmFeedback(const std::string& id);
  nlohmann::json sessionSnapshot(const std::string& id) const;

  EpisodeStore& store() { return store_; }
  void shutdown();

 private:
  std::shared_ptr<const EnsemblePolicy> policyFor(const std::filesystem::path& path);

  ServiceOptions options_;
  EpisodeStore store_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<const EnsemblePolicy>> policies_;
  std::atomic<bool> stopping_{false};
};

class Session {
 public:
  struct Setup {
    std::string id;
    std::shared_ptr<const Grid> grid;
    std::shared_ptr<const EnsemblePolicy> policy;
    RunConfig run;
    std::uint64_t seed = 0;
    int stepDelayMs = 0;
    std::shared_ptr<const Interpreter> interpreter;
    EpisodeStore* store = nullptr;
  };

  explicit Session(Setup setup);
  ~Session();

  const std::string& id() const { return setup_.id; }
  SessionState state() const;
  nlohmann::json snapshot() const;

  /// Events with seq > `after`; blocks up to `wait` for at least one when none
  /// are ready. The second member is true once EpisodeEnded has been emitted.
  std::pair<std::vector<SessionEvent>, bool> eventsAfter(std::uint64_t after, std::chrono::milliseconds wait) const;
  std::vector<SessionEvent> allEvents() const;

  PreviewResult submit(const std::string& text);
  std::vector<int> confirm();
  /// Blocks until the episode ends or `wait` elapses; true if ended.
  bool waitForEnd(std::chrono::milliseconds wait) const;
  std::optional<std::string> storedEpisodeId() const;

  void start();
  void stop();

 private:
  class Observer;
  class OperatorSource;
  struct Command {
    enum Kind { Submit, Confirm } kind;
    std::string text;
    std::promise<nlohmann::json> reply;
  };

  void emit(std::string type, nlohmann::json payload);
  void setState(SessionState s);
  void pace();
  void rejectPending(const std::string& why);
  nlohmann::json sendCommand(Command::Kind kind, std::string text);
  void run();

  Setup setup_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::vector<SessionEvent> events_;
  SessionState state_ = SessionState::Running;
  bool ended_ = false;
  bool stopping_ = false;
  std::deque<std::shared_ptr<Command>> commands_;
  std::optional<std::string> storedId_;
  std::optional<Outcome> outcome_;
  std::thread worker_;
};

// HTTP front end -------------------------------------------------------------------

class HttpService {
 public:
  explicit HttpService(ServiceOptions options);
  ~HttpService();

  /// Binds and serves on a background thread; port 0 picks a free port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();
  SessionManager& manager() { return manager_; }

 private:
  void routes();

  SessionManager manager_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace rmnav
