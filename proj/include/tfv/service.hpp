#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "tfv/annotations.hpp"
#include "tfv/clustering.hpp"
#include "tfv/error.hpp"
#include "tfv/dataset.hpp"
#include "tfv/reports.hpp"
#include "tfv/trajectory.hpp"
#include "tfv/vlm_client.hpp"

namespace httplib {
class Server;
}

namespace tfv {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kDefaultPort = 8640;

enum class JobKind { Projection, Clustering, Similarity };
enum class JobStatus { Pending, Running, Done, Failed };

std::string_view to_string(JobKind k);
std::string_view to_string(JobStatus s);

struct JobHandle {
  std::string job_id;
  JobKind kind = JobKind::Projection;
  JobStatus status = JobStatus::Pending;
  std::string result_ref;  // set iff done
  std::string error_code;  // set iff failed
  std::string error_message;
};

nlohmann::json to_json(const JobHandle& job);

/// Fixed-size worker pool executing keyed jobs. Submitting an id that is
/// already known (and not failed) returns the existing handle.
class JobRunner {
 public:
  explicit JobRunner(std::size_t workers);
  ~JobRunner();

  JobHandle submit(const std::string& id, JobKind kind, std::function<std::string()> work);
  std::optional<JobHandle> find(const std::string& id) const;
  /// Blocks until the job reaches a terminal state.
  std::optional<JobHandle> wait(const std::string& id) const;

 private:
  void worker_loop(std::stop_token stop);

  mutable std::mutex mu_;
  mutable std::condition_variable_any cv_;
  std::map<std::string, JobHandle> jobs_;
  std::deque<std::pair<std::string, std::function<std::string()>>> queue_;
  std::vector<std::jthread> workers_;
};

struct ServiceOptions {
  DatasetHandle dataset;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> static_dir;
  VlmConfig vlm;
  std::size_t workers = 0;  // 0 = hardware concurrency
  bool log_requests = true;
};

/// HTTP surface over an immutable dataset plus the annotation and report
/// stores. Every JSON body carries schema_version; errors carry
/// {code, message}.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  void register_routes(httplib::Server& server);

  const Dataset& dataset() const { return *options_.dataset; }
  JobRunner& jobs() { return *jobs_; }

 private:
  struct Impl;
  ServiceOptions options_;
  std::unique_ptr<JobRunner> jobs_;
  std::unique_ptr<Impl> impl_;
};

/// Blocks serving on host:port until the process is stopped.
void run_server(ServiceOptions options, const std::string& host, int port);

int http_status_for(ErrorCode code);

}  // namespace tfv
