#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "socdbg/metrics.hpp"

namespace httplib {
class Server;
}

namespace socdbg {

struct ServiceOptions {
  std::string default_config = "gpt-5-low";
  std::string judge_config = "judge-claude-sonnet-4-5";
  std::filesystem::path jobs_dir;  // benchmark job artifacts; empty disables POST /benchmark
  int jobs = 4;
};

enum class JobStatus { queued, running, done, failed };
std::string_view to_string(JobStatus s);

struct ApiJob {
  std::string job_id;
  std::string kind;  // "benchmark"
  JobStatus status = JobStatus::queued;
  std::optional<Json> result;
  std::optional<std::string> error;
};

/// HTTP API over the pipeline. Single-sample generation and judging are
/// synchronous; benchmark runs are jobs polled via GET /jobs/<id>.
class Service {
 public:
  Service(Gateway& gateway, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port;
  /// returns the bound port. Throws Error when binding fails.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  std::optional<ApiJob> job(const std::string& id) const;

 private:
  void routes();
  void run_job(const std::string& id, std::vector<DebugSample> corpus, BenchmarkOptions options);

  Gateway& gateway_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;

  mutable std::mutex jobs_mu_;
  std::map<std::string, ApiJob> jobs_;
  std::vector<std::thread> workers_;
  std::atomic<int> next_job_{1};
};

/// Request decoding shared by the endpoints; exposed for tests. The sample is
/// either {"sample": <DebugSample JSON>} or the four UI texts
/// {problem, bug_code, failed_test, misconception}.
DebugSample sample_from_request(const Json& body);
ReasoningTrajectory trajectory_from_request(const Json& body, const std::string& sample_id);
Conversation conversation_from_request(const Json& body, const std::string& sample_id, int step_count);

}  // namespace socdbg
