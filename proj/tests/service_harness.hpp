#pragma once

#include <chrono>
#include <memory>
#include <thread>

#include "hpoviz/service.hpp"
#include "httplib.h"

namespace testing {

/// Service listening on an ephemeral port for the lifetime of the object.
class LiveService {
 public:
  LiveService(const std::filesystem::path& runs, const std::filesystem::path& cache, std::size_t workers = 1,
              std::chrono::milliseconds poll = std::chrono::milliseconds(2000),
              const std::filesystem::path& static_dir = {}) {
    hpoviz::ServiceOptions opts;
    opts.runs_dir = runs;
    opts.cache_dir = cache;
    opts.workers = workers;
    opts.poll_interval = poll;
    opts.static_dir = static_dir;
    service_ = std::make_unique<hpoviz::Service>(opts);
    port_ = service_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_->run(); });
    service_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30, 0);
  }
  ~LiveService() {
    service_->stop();
    thread_.join();
  }

  int port() const { return port_; }
  httplib::Client& client() { return *client_; }
  hpoviz::JobManager& jobs() { return service_->jobs(); }

  /// Polls the job over HTTP until it is terminal.
  hpoviz::Json await(const std::string& id) {
    for (;;) {
      auto res = client_->Get("/api/jobs/" + id);
      auto st = hpoviz::Json::parse(res->body);
      if (st["state"] == "finished" || st["state"] == "failed") return st;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

 private:
  std::unique_ptr<hpoviz::Service> service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace testing
