#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hpoviz/converters.hpp"
#include "hpoviz/errors.hpp"
#include "hpoviz/plugins.hpp"
#include "hpoviz/run_model.hpp"

namespace httplib {
class Server;
}

namespace hpoviz {

/// HTTP status used for an error code.
int http_status(ErrorCode code);

/// `{"error": {"code", "message", "field"?}}`
Json error_json(ErrorCode code, const std::string& message, const std::string& field = {});

struct RunDescriptor {
  std::string id;
  std::string name;
  std::vector<std::string> objectives;
  std::vector<double> budgets;
  std::size_t n_trials = 0;
  bool live = false;
};

/// A run selected for a job: API id plus the snapshot it resolved to.
using RunRef = std::pair<std::string, RunPtr>;

/// Runs loaded from the subdirectories of a runs directory. The API id of a
/// run is its directory name; the content hash changes as the run grows.
class RunRegistry {
 public:
  explicit RunRegistry(fs::path runs_dir);

  std::vector<RunDescriptor> list() const;
  RunPtr get(const std::string& id) const;

  /// Validates compatibility and returns the new group id.
  std::string add_group(const std::string& name, const std::vector<std::string>& run_ids);

  /// Expands group ids, drops duplicates and sorts by API id.
  std::vector<RunRef> resolve(const std::vector<std::string>& ids) const;

  /// Refreshes every loaded run and picks up new run directories. Returns the
  /// number of runs whose content changed or appeared.
  std::size_t poll();

 private:
  struct Entry {
    RunPtr run;
    RunSource source;
  };

  void load_dir(const fs::path& dir);

  fs::path runs_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> runs_;
  std::map<std::string, std::vector<std::string>> groups_;
  std::size_t next_group_ = 1;
  std::mutex poll_mutex_;
};

enum class JobState { Queued, Running, Finished, Failed };

std::string_view to_string(JobState state);

struct JobError {
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
  std::string field;
};

struct JobSnapshot {
  std::string id;
  JobState state = JobState::Queued;
  std::shared_ptr<const std::string> payload;  // set when Finished
  std::optional<JobError> error;               // set when Failed
};

/// Serialized job status. The payload bytes are embedded verbatim.
std::string job_status_json(const JobSnapshot& job);

std::string cache_key(Plugin plugin, const Json& params, const std::vector<RunRef>& runs);

/// Persistent payload store, one file per key.
class ResultCache {
 public:
  explicit ResultCache(fs::path dir);

  std::shared_ptr<const std::string> get(const std::string& key) const;
  void put(const std::string& key, const Json& meta, const std::string& payload);
  fs::path file_for(const std::string& key) const;

 private:
  fs::path dir_;
};

class JobManager {
 public:
  JobManager(fs::path cache_dir, std::size_t workers);
  ~JobManager();

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  /// `params` must already be canonical. Returns the job id.
  std::string submit(Plugin plugin, std::vector<RunRef> runs, Json params);

  /// Validates and canonicalizes raw parameters, then submits.
  std::string submit_raw(Plugin plugin, std::vector<RunRef> runs, const Json& raw_params);

  JobSnapshot status(const std::string& job_id) const;

  /// Blocks until the job reaches a terminal state or the timeout expires.
  JobSnapshot wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

 private:
  struct Job {
    std::string id;
    std::string key;
    Plugin plugin = Plugin::Overview;
    std::vector<RunRef> runs;
    Json params;
    JobState state = JobState::Queued;
    std::shared_ptr<const std::string> payload;
    std::optional<JobError> error;
  };

  void work();
  JobSnapshot snapshot(const Job& job) const;

  ResultCache cache_;
  mutable std::mutex mutex_;
  mutable std::condition_variable done_cv_;
  std::condition_variable queue_cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::map<std::string, std::string> active_;  // key -> queued/running job id
  std::deque<std::shared_ptr<Job>> queue_;
  std::uint64_t next_id_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

struct ServiceOptions {
  fs::path runs_dir;
  fs::path cache_dir;
  fs::path static_dir;  // empty: no static files
  std::size_t workers = 0;  // 0: hardware concurrency
  std::chrono::milliseconds poll_interval{2000};
};

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port. Throws an Io error when the port is unavailable.
  int bind(const std::string& host, int port);

  /// Serves until stop(). Starts the refresh poller.
  void run();
  void stop();

  /// Blocks until run() is accepting connections.
  void wait_until_ready() const;

  RunRegistry& registry() { return registry_; }
  JobManager& jobs() { return jobs_; }

 private:
  void install_routes();
  void poll_loop();

  ServiceOptions options_;
  RunRegistry registry_;
  JobManager jobs_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex poll_mutex_;
  std::condition_variable poll_cv_;
  bool stopping_ = false;
  std::thread poller_;
};

}  // namespace hpoviz
