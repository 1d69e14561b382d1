#include "hpoviz/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "httplib.h"

namespace hpoviz {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::EmptySelection:
    case ErrorCode::InsufficientData: return 422;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

Json error_json(ErrorCode code, const std::string& message, const std::string& field) {
  Json err{{"code", to_string(code)}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return {{"error", err}};
}

// ---- run registry ----

RunRegistry::RunRegistry(fs::path runs_dir) : runs_dir_(std::move(runs_dir)) {
  if (!fs::is_directory(runs_dir_)) {
    throw Error(ErrorCode::Io, "runs directory '" + runs_dir_.string() + "' does not exist", "runs_dir");
  }
  poll();
}

void RunRegistry::load_dir(const fs::path& dir) {
  try {
    if (detect_format(dir) != RunFormat::Tabular) return;
    auto opened = open_run(dir);
    std::unique_lock lock(mutex_);
    runs_[dir.filename().string()] = Entry{opened.run, opened.source};
  } catch (const std::exception& e) {
    std::cerr << "hpoviz: skipping " << dir.string() << ": " << e.what() << "\n";
  }
}

namespace {

bool is_live(const Run& run) {
  return std::any_of(run.trials.begin(), run.trials.end(),
                     [](const Trial& t) { return t.status == TrialStatus::Running; });
}

}  // namespace

std::vector<RunDescriptor> RunRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<RunDescriptor> out;
  for (const auto& [id, entry] : runs_) {
    RunDescriptor d;
    d.id = id;
    d.name = entry.run->name;
    for (const auto& o : entry.run->objectives) d.objectives.push_back(o.name);
    d.budgets = entry.run->budgets;
    d.n_trials = entry.run->trials.size();
    d.live = is_live(*entry.run);
    out.push_back(std::move(d));
  }
  return out;
}

RunPtr RunRegistry::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(ErrorCode::NotFound, "run '" + id + "' not found", "run_id");
  return it->second.run;
}

std::string RunRegistry::add_group(const std::string& name, const std::vector<std::string>& run_ids) {
  if (run_ids.empty()) throw_invalid("run_ids", "a group needs at least one run");
  std::vector<RunPtr> members;
  {
    std::shared_lock lock(mutex_);
    for (const auto& id : run_ids) {
      auto it = runs_.find(id);
      if (it == runs_.end()) throw Error(ErrorCode::NotFound, "run '" + id + "' not found", "run_ids");
      members.push_back(it->second.run);
    }
  }
  group_runs(name, members);
  std::unique_lock lock(mutex_);
  std::string id = "group-" + std::to_string(next_group_++);
  groups_[id] = run_ids;
  return id;
}

std::vector<RunRef> RunRegistry::resolve(const std::vector<std::string>& ids) const {
  if (ids.empty()) throw_invalid("run_ids", "at least one run id is required");
  std::shared_lock lock(mutex_);
  std::set<std::string> expanded;
  for (const auto& id : ids) {
    if (runs_.count(id)) {
      expanded.insert(id);
    } else if (auto g = groups_.find(id); g != groups_.end()) {
      expanded.insert(g->second.begin(), g->second.end());
    } else {
      throw Error(ErrorCode::NotFound, "run '" + id + "' not found", "run_ids");
    }
  }
  std::vector<RunRef> out;
  for (const auto& id : expanded) out.emplace_back(id, runs_.at(id).run);
  return out;
}

std::size_t RunRegistry::poll() {
  std::lock_guard poll_lock(poll_mutex_);
  std::size_t changed = 0;

  std::vector<std::pair<std::string, Entry>> current;
  {
    std::shared_lock lock(mutex_);
    current.assign(runs_.begin(), runs_.end());
  }
  for (auto& [id, entry] : current) {
    try {
      auto result = refresh(entry.source, entry.run);
      if (!result.changed) continue;
      ++changed;
      std::unique_lock lock(mutex_);
      runs_[id] = Entry{result.run, entry.source};
    } catch (const std::exception& e) {
      std::cerr << "hpoviz: refresh of '" << id << "' failed: " << e.what() << "\n";
    }
  }

  std::vector<fs::path> fresh;
  std::error_code ec;
  for (const auto& item : fs::directory_iterator(runs_dir_, ec)) {
    if (!item.is_directory()) continue;
    std::shared_lock lock(mutex_);
    if (!runs_.count(item.path().filename().string())) fresh.push_back(item.path());
  }
  std::sort(fresh.begin(), fresh.end());
  for (const auto& dir : fresh) {
    bool complete = true;
    for (const char* f : {kMetaFile, kSpaceFile, kConfigsFile, kTrialsFile}) complete &= fs::exists(dir / f);
    if (!complete) continue;
    load_dir(dir);
    std::shared_lock lock(mutex_);
    if (runs_.count(dir.filename().string())) ++changed;
  }
  return changed;
}

// ---- cache ----

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Finished: return "finished";
    case JobState::Failed: return "failed";
  }
  return "queued";
}

std::string job_status_json(const JobSnapshot& job) {
  std::string out = "{\"job_id\":" + Json(job.id).dump() + ",\"state\":\"" + std::string(to_string(job.state)) + "\"";
  if (job.payload) out += ",\"result\":" + *job.payload;
  if (job.error) {
    out += ",\"error\":" + error_json(job.error->code, job.error->message, job.error->field)["error"].dump();
  }
  out += "}";
  return out;
}

std::string cache_key(Plugin plugin, const Json& params, const std::vector<RunRef>& runs) {
  Json runs_json = Json::array();
  for (const auto& [id, run] : runs) runs_json.push_back({id, run->id});
  Json key{{"plugin", to_string(plugin)}, {"params", params}, {"runs", runs_json}};
  return key.dump();
}

namespace {

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

ResultCache::ResultCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (!fs::is_directory(dir_)) {
    throw Error(ErrorCode::Io, "cannot create cache directory '" + dir_.string() + "'", "cache_dir");
  }
}

fs::path ResultCache::file_for(const std::string& key) const { return dir_ / (fnv_hex(key) + ".cache"); }

std::shared_ptr<const std::string> ResultCache::get(const std::string& key) const {
  std::ifstream in(file_for(key), std::ios::binary);
  if (!in) return nullptr;
  std::string header;
  if (!std::getline(in, header)) return nullptr;
  try {
    if (Json::parse(header).value("key", std::string()) != key) return nullptr;
  } catch (const Json::exception&) {
    return nullptr;
  }
  std::ostringstream body;
  body << in.rdbuf();
  return std::make_shared<const std::string>(body.str());
}

void ResultCache::put(const std::string& key, const Json& meta, const std::string& payload) {
  Json header = meta;
  header["key"] = key;
  header["bytes"] = payload.size();
  fs::path target = file_for(key);
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  fs::path tmp = target;
  tmp += ".tmp" + tid.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << header.dump() << '\n' << payload;
    if (!out) {
      std::cerr << "hpoviz: cannot write cache file " << tmp.string() << "\n";
      return;
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) std::cerr << "hpoviz: cannot store cache file " << target.string() << ": " << ec.message() << "\n";
}

// ---- jobs ----

JobManager::JobManager(fs::path cache_dir, std::size_t workers) : cache_(std::move(cache_dir)) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { work(); });
}

JobManager::~JobManager() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

std::string JobManager::submit_raw(Plugin plugin, std::vector<RunRef> runs, const Json& raw_params) {
  std::vector<RunPtr> ptrs;
  for (const auto& r : runs) ptrs.push_back(r.second);
  Json params = resolve_params(plugin, ptrs, raw_params);
  return submit(plugin, std::move(runs), std::move(params));
}

std::string JobManager::submit(Plugin plugin, std::vector<RunRef> runs, Json params) {
  std::sort(runs.begin(), runs.end(), [](const RunRef& a, const RunRef& b) { return a.first < b.first; });
  std::string key = cache_key(plugin, params, runs);
  {
    std::lock_guard lock(mutex_);
    if (auto it = active_.find(key); it != active_.end()) return it->second;
  }
  auto cached = cache_.get(key);

  std::lock_guard lock(mutex_);
  if (auto it = active_.find(key); it != active_.end()) return it->second;
  auto job = std::make_shared<Job>();
  job->id = "job-" + std::to_string(next_id_++);
  job->key = key;
  job->plugin = plugin;
  job->runs = std::move(runs);
  job->params = std::move(params);
  jobs_[job->id] = job;
  if (cached) {
    job->state = JobState::Finished;
    job->payload = std::move(cached);
    return job->id;
  }
  active_[key] = job->id;
  queue_.push_back(job);
  queue_cv_.notify_one();
  return job->id;
}

JobSnapshot JobManager::snapshot(const Job& job) const {
  return JobSnapshot{job.id, job.state, job.payload, job.error};
}

JobSnapshot JobManager::status(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "job '" + job_id + "' not found", "job_id");
  return snapshot(*it->second);
}

JobSnapshot JobManager::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "job '" + job_id + "' not found", "job_id");
  auto job = it->second;
  done_cv_.wait_for(lock, timeout,
                    [&] { return job->state == JobState::Finished || job->state == JobState::Failed; });
  return snapshot(*job);
}

void JobManager::work() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
      job->state = JobState::Running;
    }

    std::shared_ptr<const std::string> payload;
    std::optional<JobError> error;
    try {
      std::vector<RunPtr> ptrs;
      for (const auto& r : job->runs) ptrs.push_back(r.second);
      payload = std::make_shared<const std::string>(run_plugin(job->plugin, ptrs, job->params));
      Json run_hashes = Json::array();
      for (const auto& r : job->runs) run_hashes.push_back(r.second->id);
      cache_.put(job->key, {{"plugin", to_string(job->plugin)}, {"run_hashes", run_hashes}}, *payload);
    } catch (const Error& e) {
      error = JobError{e.code(), e.what(), e.field()};
    } catch (const std::exception& e) {
      error = JobError{ErrorCode::Io, e.what(), {}};
    }

    {
      std::lock_guard lock(mutex_);
      if (payload) {
        job->payload = std::move(payload);
        job->state = JobState::Finished;
      } else {
        job->error = std::move(error);
        job->state = JobState::Failed;
      }
      active_.erase(job->key);
    }
    done_cv_.notify_all();
  }
}

// ---- HTTP ----

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, const std::string& field = {}) {
  send_json(res, http_status(code), error_json(code, message, field).dump());
}

template <typename F>
auto guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what(), e.field());
    } catch (const Json::exception& e) {
      send_error(res, ErrorCode::InvalidArgument, std::string("malformed JSON body: ") + e.what(), "body");
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::Io, e.what());
    }
  };
}

Json parse_body(const httplib::Request& req) {
  Json body = Json::parse(req.body);
  if (!body.is_object()) throw_invalid("body", "request body must be a JSON object");
  return body;
}

std::vector<std::string> string_list(const Json& body, const char* field) {
  if (!body.contains(field) || !body[field].is_array()) throw_invalid(field, std::string(field) + " must be a list");
  std::vector<std::string> out;
  for (const auto& v : body[field]) {
    if (!v.is_string()) throw_invalid(field, std::string(field) + " must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

Service::Service(ServiceOptions options)
    : options_(std::move(options)),
      registry_(options_.runs_dir),
      jobs_(options_.cache_dir, options_.workers),
      server_(std::make_unique<httplib::Server>()) {
  // The library default adds SO_REUSEPORT, which lets a second server share
  // the port instead of failing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
  auto& svr = *server_;

  svr.Get("/api/runs", guarded([this](const httplib::Request&, httplib::Response& res) {
            Json list = Json::array();
            for (const auto& d : registry_.list()) {
              list.push_back({{"id", d.id},
                              {"name", d.name},
                              {"objectives", d.objectives},
                              {"budgets", d.budgets},
                              {"n_trials", d.n_trials},
                              {"live", d.live}});
            }
            send_json(res, 200, list.dump());
          }));

  svr.Get(R"(/api/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, overview_payload(*registry_.get(req.matches[1])).dump());
          }));

  svr.Get(R"(/api/runs/([^/]+)/configs/([^/]+))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto run = registry_.get(req.matches[1]);
            send_json(res, 200, config_detail_payload(*run, req.matches[2]).dump());
          }));

  svr.Post("/api/groups", guarded([this](const httplib::Request& req, httplib::Response& res) {
             Json body = parse_body(req);
             std::string name = body.value("name", std::string("group"));
             std::string id = registry_.add_group(name, string_list(body, "run_ids"));
             send_json(res, 200, Json{{"group_id", id}}.dump());
           }));

  svr.Post("/api/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
             Json body = parse_body(req);
             if (!body.contains("plugin") || !body["plugin"].is_string()) {
               throw_invalid("plugin", "plugin must be a string");
             }
             auto plugin = parse_plugin(body["plugin"].get<std::string>());
             if (!plugin) throw_invalid("plugin", "unknown plugin '" + body["plugin"].get<std::string>() + "'");
             auto runs = registry_.resolve(string_list(body, "run_ids"));
             Json params = body.contains("params") ? body["params"] : Json::object();
             std::string id = jobs_.submit_raw(*plugin, std::move(runs), params);
             send_json(res, 200, Json{{"job_id", id}}.dump());
           }));

  svr.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, job_status_json(jobs_.status(req.matches[1])));
          }));

  if (!options_.static_dir.empty() && !svr.set_mount_point("/", options_.static_dir.string())) {
    throw Error(ErrorCode::Io, "static directory '" + options_.static_dir.string() + "' does not exist",
                "static_dir");
  }
}

int Service::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)", "port");
  }
  return bound;
}

void Service::poll_loop() {
  std::unique_lock lock(poll_mutex_);
  while (!stopping_) {
    if (poll_cv_.wait_for(lock, options_.poll_interval, [&] { return stopping_; })) break;
    lock.unlock();
    registry_.poll();
    lock.lock();
  }
}

void Service::run() {
  {
    std::lock_guard lock(poll_mutex_);
    stopping_ = false;
  }
  poller_ = std::thread([this] { poll_loop(); });
  server_->listen_after_bind();
  {
    std::lock_guard lock(poll_mutex_);
    stopping_ = true;
  }
  poll_cv_.notify_all();
  if (poller_.joinable()) poller_.join();
}

void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::stop() {
  if (server_) server_->stop();
  {
    std::lock_guard lock(poll_mutex_);
    stopping_ = true;
  }
  poll_cv_.notify_all();
}

}  // namespace hpoviz
