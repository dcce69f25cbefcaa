#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "windcascade/io.hpp"

namespace httplib {
class Server;
}

namespace windcascade {

// ---------------------------------------------------------------------------
// What-if sweeps

struct WhatIfRequest {
  ScenarioProfile base;  // wind_reduction is ignored; the grid supplies it
  std::vector<Policy> policies{Policy::Exp1, Policy::Exp3};
  std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  /// 0: the base contingencies only; otherwise that many seeded N-2 pairs.
  std::size_t samples = 0;
  std::uint64_t seed = 1;
};

struct WhatIfPoint {
  double delta_w = 0.0;
  std::size_t samples = 0;
  ResilienceReport mean;  // componentwise mean over samples
};

struct WhatIfCurve {
  Policy policy = Policy::Exp1;
  std::vector<WhatIfPoint> points;
};

struct WhatIfSweep {
  ScenarioProfile base;
  std::vector<double> grid;
  std::vector<WhatIfCurve> curves;
};

/// Throws std::invalid_argument on a grid that is not strictly increasing,
/// leaves [0, 0.7], or pushes the net load past its admissible limit.
WhatIfSweep whatif_sweep(const NetworkCase& net, const WhatIfRequest& request, const CascadeOptions& options = {},
                         unsigned threads = 0);

json to_json(const WhatIfSweep& sweep);
std::string whatif_csv(const WhatIfSweep& sweep);

// ---------------------------------------------------------------------------
// Artifact store

/// Content-addressed files: <root>/<kind>/<sha256>.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path root);

  /// WINDCASCADE_DATA_DIR, else ./windcascade-data.
  static std::filesystem::path default_root();

  std::string put(const std::string& kind, std::string_view content);
  std::optional<std::string> get(const std::string& kind, const std::string& id) const;
  bool contains(const std::string& kind, const std::string& id) const;
  std::vector<std::string> list(const std::string& kind) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path path_of(const std::string& kind, const std::string& id) const;
  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Job queue

enum class JobState { Queued, Running, Succeeded, Failed };
std::string_view to_string(JobState s);

struct JobStatus {
  std::string id;
  std::string kind;
  JobState state = JobState::Queued;
  json result;
  std::string error;
};

/// One worker; jobs run in submission order.
class JobQueue {
 public:
  JobQueue();
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  std::string submit(std::string kind, std::function<json()> work);
  std::optional<JobStatus> status(const std::string& id) const;
  /// Blocks until job `id` has finished.
  JobStatus wait(const std::string& id) const;

 private:
  void run();

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, JobStatus> jobs_;
  std::deque<std::pair<std::string, std::function<json()>>> pending_;
  std::size_t counter_ = 0;
  bool stopping_ = false;
  std::jthread worker_;
};

// ---------------------------------------------------------------------------
// Service

/// Error returned by a service call; maps onto the {code, message, detail}
/// envelope and an HTTP status.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  int status_;
  std::string code_;
  std::string detail_;
};

json error_envelope(const std::string& code, const std::string& message, const std::string& detail = {});

/// A trained link and/or load model with its provenance.
struct ModelBundle {
  std::string case_id;
  std::string pool_id;
  std::optional<LinkFailureIM> link;
  std::optional<LoadShedIM> load;
};

std::string write_bundle(const ModelBundle& b);
ModelBundle read_bundle(std::string_view text);

struct AdvisorOptions {
  unsigned threads = 0;  // simulation / training workers, 0 = hardware
  CascadeOptions cascade;
};

/// The operations behind the HTTP API. Every method takes and returns JSON
/// bodies and throws ServiceError.
class Advisor {
 public:
  explicit Advisor(std::filesystem::path data_dir, AdvisorOptions options = {});

  void add_case(const std::string& id, NetworkCase net);

  json list_cases() const;
  json get_case(const std::string& id) const;
  json submit_pool(const json& body);
  json get_pool(const std::string& id) const;
  json submit_model(const json& body);
  json get_model(const std::string& id) const;
  std::string model_matrix_csv(const std::string& id, const std::string& name) const;
  json simulate(const json& body) const;
  json predict(const json& body) const;
  json criticality(const std::string& model_id) const;
  std::string criticality_csv(const std::string& model_id) const;
  json whatif(const json& body) const;
  json job(const std::string& id) const;

  /// Waits for a submitted job (tests and the CLI).
  JobStatus wait_job(const std::string& id) const { return jobs_.wait(id); }

  /// Registers the /api/v1 routes (and unversioned aliases) on `server`.
  void register_routes(httplib::Server& server);

  ArtifactStore& store() { return store_; }

 private:
  std::shared_ptr<const NetworkCase> case_ref(const std::string& id) const;
  std::shared_ptr<const ModelBundle> bundle_ref(const std::string& id) const;

  ArtifactStore store_;
  AdvisorOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const NetworkCase>> cases_;
  mutable std::map<std::string, std::shared_ptr<const ModelBundle>> models_;
  mutable JobQueue jobs_;
};

/// Blocks serving HTTP on host:port. Returns false when the port cannot be bound.
bool serve(Advisor& advisor, const std::string& host, int port);

}  // namespace windcascade
