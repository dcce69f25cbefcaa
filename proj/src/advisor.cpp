#include "windcascade/advisor.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "windcascade/parallel.hpp"

namespace windcascade {

// ---------------------------------------------------------------------------
// What-if sweeps

namespace {

void accumulate(LossReport& into, const LossReport& x, double weight) {
  if (into.per_branch.size() == 0) {
    into.per_branch = Eigen::VectorXd::Zero(x.per_branch.size());
    into.per_bus = Eigen::VectorXd::Zero(x.per_bus.size());
  }
  into.grid_loss += weight * x.grid_loss;
  into.consumer_loss += weight * x.consumer_loss;
  into.per_branch += weight * x.per_branch;
  into.per_bus += weight * x.per_bus;
}

}  // namespace

WhatIfSweep whatif_sweep(const NetworkCase& net, const WhatIfRequest& request, const CascadeOptions& options,
                         unsigned threads) {
  if (request.grid.empty()) throw std::invalid_argument("empty wind reduction grid");
  if (request.policies.empty()) throw std::invalid_argument("no policy requested");
  for (std::size_t k = 0; k < request.grid.size(); ++k) {
    const double dw = request.grid[k];
    if (dw < 0.0 || dw > kMaxWindReduction + 1e-12) throw std::invalid_argument("wind reduction outside [0, 0.7]");
    if (k > 0 && !(dw > request.grid[k - 1])) throw std::invalid_argument("wind reduction grid must be strictly increasing");
  }

  std::vector<ScenarioProfile> profiles;
  if (request.samples == 0) {
    profiles.push_back(request.base);
  } else {
    for (const auto& [a, b] : draw_contingency_pairs(net, request.samples, request.seed, true)) {
      ScenarioProfile p = request.base;
      p.initial_contingencies = {a, b};
      profiles.push_back(std::move(p));
    }
  }
  for (auto& p : profiles) {
    p.wind_reduction = request.grid.back();
    try {
      p.validate(net);
    } catch (const ValidationError& e) {
      throw std::invalid_argument(e.what());
    }
  }

  WhatIfSweep sweep;
  sweep.base = request.base;
  sweep.grid = request.grid;
  const double weight = 1.0 / static_cast<double>(profiles.size());
  for (Policy policy : request.policies) {
    WhatIfCurve curve;
    curve.policy = policy;
    for (double dw : request.grid) {
      std::vector<ResilienceReport> reports(profiles.size());
      parallel_for(
          profiles.size(),
          [&](std::size_t i) {
            PoolSample s;
            s.profile = profiles[i];
            s.profile.wind_reduction = dw;
            auto run = run_with_wind_reduction(net, s.profile, policy, options);
            s.before = std::move(run.before);
            s.after = std::move(run.after);
            reports[i] = resilience(s, net);
          },
          threads);
      WhatIfPoint point;
      point.delta_w = dw;
      point.samples = profiles.size();
      point.mean.delta_w = dw;
      for (const auto& r : reports) {
        point.mean.r += weight * r.r;
        point.mean.r_grid += weight * r.r_grid;
        point.mean.r_load += weight * r.r_load;
        accumulate(point.mean.pre, r.pre, weight);
        accumulate(point.mean.post, r.post, weight);
      }
      curve.points.push_back(std::move(point));
    }
    sweep.curves.push_back(std::move(curve));
  }
  return sweep;
}

json to_json(const WhatIfSweep& sweep) {
  json curves = json::array();
  for (const auto& c : sweep.curves) {
    json points = json::array();
    for (const auto& p : c.points) {
      json r = to_json(p.mean);
      r["samples"] = p.samples;
      points.push_back(r);
    }
    curves.push_back({{"policy", to_string(c.policy)}, {"points", points}});
  }
  return {{"base", to_json(sweep.base)}, {"grid", sweep.grid}, {"curves", curves}};
}

std::string whatif_csv(const WhatIfSweep& sweep) {
  std::string out = "policy,delta_w,samples,R,R_G,R_L\n";
  for (const auto& c : sweep.curves)
    for (const auto& p : c.points)
      out += std::string(to_string(c.policy)) + "," + json(p.delta_w).dump() + "," + std::to_string(p.samples) + "," +
             json(p.mean.r).dump() + "," + json(p.mean.r_grid).dump() + "," + json(p.mean.r_load).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Artifact store

ArtifactStore::ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path ArtifactStore::default_root() {
  if (const char* env = std::getenv("WINDCASCADE_DATA_DIR"); env && *env) return env;
  return std::filesystem::current_path() / "windcascade-data";
}

std::filesystem::path ArtifactStore::path_of(const std::string& kind, const std::string& id) const {
  auto plain = [](const std::string& s) {
    return !s.empty() && s.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789-_") == std::string::npos;
  };
  if (!plain(kind) || !plain(id)) throw std::invalid_argument("invalid artifact reference");
  return root_ / kind / id;
}

std::string ArtifactStore::put(const std::string& kind, std::string_view content) {
  const std::string id = sha256_hex(content);
  const auto path = path_of(kind, id);
  std::lock_guard lock(mutex_);
  if (std::filesystem::exists(path)) return id;
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  write_file(tmp, content);
  std::filesystem::rename(tmp, path);
  return id;
}

std::optional<std::string> ArtifactStore::get(const std::string& kind, const std::string& id) const {
  std::filesystem::path path;
  try {
    path = path_of(kind, id);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  std::lock_guard lock(mutex_);
  if (!std::filesystem::is_regular_file(path)) return std::nullopt;
  return read_file(path.string());
}

bool ArtifactStore::contains(const std::string& kind, const std::string& id) const {
  try {
    std::lock_guard lock(mutex_);
    return std::filesystem::is_regular_file(path_of(kind, id));
  } catch (const std::invalid_argument&) {
    return false;
  }
}

std::vector<std::string> ArtifactStore::list(const std::string& kind) const {
  std::vector<std::string> out;
  std::lock_guard lock(mutex_);
  const auto dir = root_ / kind;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() != ".tmp") out.push_back(entry.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Job queue

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Succeeded: return "succeeded";
    case JobState::Failed: return "failed";
  }
  return "unknown";
}

JobQueue::JobQueue() : worker_([this] { run(); }) {}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
}

std::string JobQueue::submit(std::string kind, std::function<json()> work) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "job-" + std::to_string(++counter_);
    jobs_[id] = JobStatus{id, std::move(kind), JobState::Queued, nullptr, {}};
    pending_.emplace_back(id, std::move(work));
  }
  changed_.notify_all();
  return id;
}

std::optional<JobStatus> JobQueue::status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

JobStatus JobQueue::wait(const std::string& id) const {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw std::invalid_argument("unknown job " + id);
  changed_.wait(lock, [&] { return it->second.state == JobState::Succeeded || it->second.state == JobState::Failed; });
  return it->second;
}

void JobQueue::run() {
  for (;;) {
    std::pair<std::string, std::function<json()>> job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
      if (pending_.empty()) return;
      job = std::move(pending_.front());
      pending_.pop_front();
      jobs_[job.first].state = JobState::Running;
    }
    changed_.notify_all();
    JobStatus done;
    try {
      done.result = job.second();
      done.state = JobState::Succeeded;
    } catch (const std::exception& e) {
      done.state = JobState::Failed;
      done.error = e.what();
    }
    {
      std::lock_guard lock(mutex_);
      auto& st = jobs_[job.first];
      st.state = done.state;
      st.result = std::move(done.result);
      st.error = std::move(done.error);
    }
    changed_.notify_all();
  }
}

// ---------------------------------------------------------------------------
// Service

json error_envelope(const std::string& code, const std::string& message, const std::string& detail) {
  return {{"code", code}, {"message", message}, {"detail", detail}};
}

std::string write_bundle(const ModelBundle& b) {
  json doc = {{"schema", "windcascade.bundle/1"},
              {"case", b.case_id},
              {"pool", b.pool_id},
              {"link", b.link ? to_json(*b.link) : json(nullptr)},
              {"load", b.load ? to_json(*b.load) : json(nullptr)}};
  return doc.dump() + "\n";
}

ModelBundle read_bundle(std::string_view text) {
  const json doc = json::parse(text);
  if (doc.value("schema", "") != "windcascade.bundle/1") throw FormatError("not a model bundle");
  ModelBundle b;
  b.case_id = doc.at("case").get<std::string>();
  b.pool_id = doc.at("pool").get<std::string>();
  if (!doc.at("link").is_null()) b.link = read_model(doc.at("link").dump()).link;
  if (!doc.at("load").is_null()) b.load = read_model(doc.at("load").dump()).load;
  return b;
}

namespace {

ServiceError bad_request(const std::string& message, const std::string& detail = {}) {
  return ServiceError(400, "bad_request", message, detail);
}

ServiceError not_found(const std::string& what, const std::string& id) {
  return ServiceError(404, "not_found", what + " '" + id + "' does not exist");
}

template <class T>
T field(const json& body, const char* name, T fallback) {
  if (!body.contains(name)) return fallback;
  try {
    return body.at(name).get<T>();
  } catch (const json::exception& e) {
    throw bad_request(std::string("field '") + name + "' has the wrong type", e.what());
  }
}

std::vector<int> branch_ids(const NetworkCase& net) {
  std::vector<int> ids;
  for (const auto& b : net.branches) ids.push_back(b.id);
  return ids;
}

std::vector<int> bus_ids(const NetworkCase& net) {
  std::vector<int> ids;
  for (const auto& b : net.buses) ids.push_back(b.id);
  return ids;
}

ScenarioProfile profile_from_body(const json& body, const NetworkCase& net) {
  ScenarioProfile p;
  try {
    p = profile_from_json(body.value("profile", json::object()));
  } catch (const json::exception& e) {
    throw bad_request("malformed profile", e.what());
  }
  try {
    p.validate(net);
  } catch (const ValidationError& e) {
    throw ServiceError(422, "invalid_profile", e.what());
  }
  return p;
}

}  // namespace

Advisor::Advisor(std::filesystem::path data_dir, AdvisorOptions options)
    : store_(std::move(data_dir)), options_(options) {}

void Advisor::add_case(const std::string& id, NetworkCase net) {
  std::unique_lock lock(mutex_);
  cases_[id] = std::make_shared<const NetworkCase>(std::move(net));
}

std::shared_ptr<const NetworkCase> Advisor::case_ref(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = cases_.find(id);
  if (it == cases_.end()) throw not_found("case", id);
  return it->second;
}

std::shared_ptr<const ModelBundle> Advisor::bundle_ref(const std::string& id) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = models_.find(id); it != models_.end()) return it->second;
  }
  auto text = store_.get("models", id);
  if (!text) throw not_found("model", id);
  auto bundle = std::make_shared<const ModelBundle>(read_bundle(*text));
  std::unique_lock lock(mutex_);
  return models_.emplace(id, std::move(bundle)).first->second;
}

json Advisor::list_cases() const {
  json out = json::array();
  std::shared_lock lock(mutex_);
  for (const auto& [id, net] : cases_) {
    json branches = json::array();
    for (const auto& b : net->branches)
      branches.push_back({{"id", b.id}, {"from_bus", b.from_bus}, {"to_bus", b.to_bus},
                          {"rating_long_term", b.rating_long_term}});
    out.push_back({{"id", id},
                   {"buses", net->bus_count()},
                   {"branches", net->branch_count()},
                   {"generators", net->generators.size()},
                   {"total_demand", net->total_demand()},
                   {"branch_list", branches}});
  }
  return {{"cases", out}};
}

json Advisor::get_case(const std::string& id) const { return json::parse(to_case_json(*case_ref(id))); }

json Advisor::submit_pool(const json& body) {
  const std::string case_id = field<std::string>(body, "case", "ieee30");
  auto net = case_ref(case_id);
  PoolConfig config;
  try {
    config = pool_config_from_json(body.value("config", json::object()));
    config.validate();
  } catch (const std::exception& e) {
    throw bad_request("invalid pool configuration", e.what());
  }
  const auto threads = options_.threads;
  const auto cascade = options_.cascade;
  const std::string id = jobs_.submit("pool", [this, net, config, threads, cascade] {
    SamplePool pool = generate_pool(*net, config, cascade, threads);
    pool.case_hash = sha256_hex(to_case_json(*net));
    const std::string pool_id = store_.put("pools", write_pool(pool));
    return json{{"pool_id", pool_id}, {"samples", pool.samples.size()}, {"statistics", to_json(pool_statistics(pool))}};
  });
  return {{"job", id}, {"state", "queued"}};
}

json Advisor::get_pool(const std::string& id) const {
  auto text = store_.get("pools", id);
  if (!text) throw not_found("pool", id);
  const SamplePool pool = read_pool(*text);
  return {{"id", id},
          {"config", to_json(pool.config)},
          {"case_hash", pool.case_hash},
          {"train", pool.train.size()},
          {"test", pool.test.size()},
          {"statistics", to_json(pool_statistics(pool))}};
}

json Advisor::submit_model(const json& body) {
  const std::string pool_id = field<std::string>(body, "pool", "");
  if (pool_id.empty()) throw bad_request("field 'pool' is required");
  if (!store_.contains("pools", pool_id)) throw not_found("pool", pool_id);
  const std::string target = field<std::string>(body, "target", "both");
  if (target != "link" && target != "load" && target != "both")
    throw bad_request("target must be link, load or both");
  std::string case_id = field<std::string>(body, "case", "");
  const auto threads = options_.threads;
  const std::string id = jobs_.submit("model", [this, pool_id, target, case_id, threads]() mutable {
    const SamplePool pool = read_pool(*store_.get("pools", pool_id));
    if (case_id.empty()) {
      std::shared_lock lock(mutex_);
      for (const auto& [cid, net] : cases_)
        if (sha256_hex(to_case_json(*net)) == pool.case_hash) case_id = cid;
    }
    TrainingOptions opts;
    opts.threads = threads;
    ModelBundle bundle;
    bundle.case_id = case_id;
    bundle.pool_id = pool_id;
    json errors = json::object();
    if (target != "load") {
      bundle.link = train_link_model(pool, opts);
      bundle.link->meta.pool_hash = pool_id;
      errors["link"] = bundle.link->meta.training_error;
    }
    if (target != "link") {
      bundle.load = train_load_model(pool, opts);
      bundle.load->meta.pool_hash = pool_id;
      errors["load"] = bundle.load->meta.training_error;
    }
    const std::string model_id = store_.put("models", write_bundle(bundle));
    return json{{"model_id", model_id}, {"training_error", errors}};
  });
  return {{"job", id}, {"state", "queued"}};
}

json Advisor::get_model(const std::string& id) const {
  auto b = bundle_ref(id);
  auto meta = [](const TrainingMetadata& m) {
    std::size_t unconverged = 0, flagged = 0;
    for (bool c : m.converged) unconverged += c ? 0 : 1;
    for (bool f : m.threshold_flagged) flagged += f ? 1 : 0;
    return json{{"pool_hash", m.pool_hash},
                {"seed", m.seed},
                {"observations", m.observations},
                {"training_error", m.training_error},
                {"unconverged", unconverged},
                {"threshold_flagged", flagged}};
  };
  json out = {{"id", id}, {"case", b->case_id}, {"pool", b->pool_id}, {"matrices", json::array()}};
  if (b->link) {
    out["link"] = meta(b->link->meta);
    for (const char* m : {"a11", "a01", "d", "epsilon"}) out["matrices"].push_back(m);
  }
  if (b->load) {
    out["load"] = meta(b->load->meta);
    for (const char* m : {"b11", "b01", "e", "delta"}) out["matrices"].push_back(m);
  }
  return out;
}

std::string Advisor::model_matrix_csv(const std::string& id, const std::string& name) const {
  auto b = bundle_ref(id);
  std::vector<int> br, bus;
  if (!b->case_id.empty()) {
    auto net = case_ref(b->case_id);
    br = branch_ids(*net);
    bus = bus_ids(*net);
  }
  auto labels = [](std::vector<int> known, Eigen::Index n) {
    if (static_cast<Eigen::Index>(known.size()) == n) return known;
    std::vector<int> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(i + 1);
    return out;
  };
  if (b->link && (name == "a11" || name == "a01" || name == "d" || name == "epsilon")) {
    const auto& m = *b->link;
    const auto n = m.links();
    if (name == "epsilon") return matrix_csv(m.epsilon.transpose(), {0}, labels(br, n));
    const Eigen::MatrixXd& mat = name == "a11" ? m.a11 : name == "a01" ? m.a01 : m.d;
    return matrix_csv(mat, labels(br, n), labels(br, n));
  }
  if (b->load && (name == "b11" || name == "b01" || name == "e" || name == "delta")) {
    const auto& m = *b->load;
    if (name == "delta") return matrix_csv(m.delta.transpose(), {0}, labels(bus, m.buses()));
    if (name == "e") return matrix_csv(m.e, labels(bus, m.buses()), labels(br, m.links()));
    return matrix_csv(name == "b11" ? m.b11 : m.b01, labels(br, m.links()), labels(bus, m.buses()));
  }
  throw not_found("matrix", name);
}

json Advisor::simulate(const json& body) const {
  auto net = case_ref(field<std::string>(body, "case", "ieee30"));
  const ScenarioProfile profile = profile_from_body(body, *net);
  Policy policy;
  try {
    policy = parse_policy(field<std::string>(body, "policy", "exp1"));
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  }
  PoolSample s;
  s.profile = profile;
  if (profile.wind_reduction > 0.0) {
    auto run = run_with_wind_reduction(*net, profile, policy, options_.cascade);
    s.before = std::move(run.before);
    s.after = std::move(run.after);
    s.blackout_before = run.blackout_before;
  } else {
    s.before = run_cascade(*net, profile, policy, options_.cascade);
    s.blackout_before = s.before.total_blackout();
  }
  json out = {{"before", to_json(s.before)},
              {"after", s.after ? to_json(*s.after) : json(nullptr)},
              {"blackout_before", s.blackout_before},
              {"losses", to_json(losses(s.before, *net))}};
  out["resilience"] = s.after ? to_json(resilience(s, *net)) : json(nullptr);
  return out;
}

json Advisor::predict(const json& body) const {
  const std::string model_id = field<std::string>(body, "model", "");
  if (model_id.empty()) throw bad_request("field 'model' is required");
  auto b = bundle_ref(model_id);
  const Eigen::Index n = b->link ? b->link->links() : b->load->links();
  Topology state = Topology::Ones(n);
  if (body.contains("state")) {
    try {
      state = bits_from_string(body.at("state").get<std::string>());
    } catch (const std::exception& e) {
      throw bad_request("malformed state", e.what());
    }
    if (state.size() != n) throw bad_request("state length does not match the model");
  } else if (body.contains("contingencies")) {
    if (b->case_id.empty()) throw bad_request("model has no case; send 'state' instead");
    auto net = case_ref(b->case_id);
    for (int id : field<std::vector<int>>(body, "contingencies", {})) {
      try {
        state[static_cast<Eigen::Index>(net->branch_index(id))] = 0;
      } catch (const ValidationError& e) {
        throw bad_request(e.what());
      }
    }
  }
  std::vector<Topology> states{state};
  json out;
  if (b->link) {
    states = predict_cascade(*b->link, state);
    const auto first = predict_next_state(*b->link, state);
    out["link_probabilities"] = std::vector<double>(first.probabilities.data(),
                                                    first.probabilities.data() + first.probabilities.size());
  }
  json seq = json::array();
  for (const auto& s : states) seq.push_back(bits_to_string(s));
  out["states"] = seq;
  if (b->load) {
    json load = json::array();
    for (const auto& s : states) {
      const auto p = predict_load_shed(*b->load, s);
      load.push_back({{"probabilities", std::vector<double>(p.probabilities.data(),
                                                            p.probabilities.data() + p.probabilities.size())},
                      {"binarized", bits_to_string(p.binarized)}});
    }
    out["load"] = load;
  }
  return out;
}

json Advisor::criticality(const std::string& model_id) const {
  auto b = bundle_ref(model_id);
  if (!b->link || !b->load) throw ServiceError(422, "incomplete_model", "criticality needs both link and load models");
  std::vector<int> ids;
  if (!b->case_id.empty()) ids = branch_ids(*case_ref(b->case_id));
  try {
    return to_json(windcascade::criticality(*b->link, *b->load, ids));
  } catch (const std::invalid_argument& e) {
    throw ServiceError(422, "dimension_mismatch", e.what());
  }
}

std::string Advisor::criticality_csv(const std::string& model_id) const {
  auto b = bundle_ref(model_id);
  if (!b->link || !b->load) throw ServiceError(422, "incomplete_model", "criticality needs both link and load models");
  std::vector<int> ids;
  if (!b->case_id.empty()) ids = branch_ids(*case_ref(b->case_id));
  return windcascade::criticality_csv(windcascade::criticality(*b->link, *b->load, ids));
}

json Advisor::whatif(const json& body) const {
  auto net = case_ref(field<std::string>(body, "case", "ieee30"));
  WhatIfRequest req;
  try {
    req.base = profile_from_json(body.value("profile", json::object()));
    if (body.contains("policies")) {
      req.policies.clear();
      for (const auto& p : body.at("policies")) req.policies.push_back(parse_policy(p.get<std::string>()));
    }
    req.grid = field<std::vector<double>>(body, "grid", req.grid);
    req.samples = field<std::size_t>(body, "samples", 0);
    req.seed = field<std::uint64_t>(body, "seed", 1);
    return to_json(whatif_sweep(*net, req, options_.cascade, options_.threads));
  } catch (const ServiceError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw bad_request(e.what());
  } catch (const json::exception& e) {
    throw bad_request("malformed what-if request", e.what());
  }
}

json Advisor::job(const std::string& id) const {
  auto st = jobs_.status(id);
  if (!st) throw not_found("job", id);
  json out = {{"id", st->id}, {"kind", st->kind}, {"state", to_string(st->state)}};
  if (st->state == JobState::Succeeded) out["result"] = st->result;
  if (st->state == JobState::Failed) out["error"] = error_envelope("job_failed", st->error);
  return out;
}

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> body) {
  return [body = std::move(body)](const httplib::Request& req, httplib::Response& res) {
    auto fail = [&](int status, const std::string& code, const std::string& message, const std::string& detail) {
      res.status = status;
      res.set_content(error_envelope(code, message, detail).dump(), "application/json");
    };
    try {
      body(req, res);
    } catch (const ServiceError& e) {
      fail(e.status(), e.code(), e.what(), e.detail());
    } catch (const json::exception& e) {
      fail(400, "bad_request", "malformed JSON body", e.what());
    } catch (const ValidationError& e) {
      fail(422, "invalid_input", e.what(), "");
    } catch (const FormatError& e) {
      fail(422, "corrupt_artifact", e.what(), "");
    } catch (const std::invalid_argument& e) {
      fail(400, "bad_request", e.what(), "");
    } catch (const std::exception& e) {
      fail(500, "internal", "internal error", e.what());
    }
  };
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body);
  if (!j.is_object()) throw bad_request("request body must be a JSON object");
  return j;
}

void reply(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

void Advisor::register_routes(httplib::Server& server) {
  for (const std::string prefix : {"/api/v1", "/api"}) {
    server.Get(prefix + "/cases", guarded([this](const auto&, auto& res) { reply(res, list_cases()); }));
    server.Get(prefix + "/cases/:id",
               guarded([this](const auto& req, auto& res) { reply(res, get_case(req.path_params.at("id"))); }));
    server.Post(prefix + "/pools",
                guarded([this](const auto& req, auto& res) { reply(res, submit_pool(body_of(req)), 202); }));
    server.Get(prefix + "/pools/:id",
               guarded([this](const auto& req, auto& res) { reply(res, get_pool(req.path_params.at("id"))); }));
    server.Post(prefix + "/models",
                guarded([this](const auto& req, auto& res) { reply(res, submit_model(body_of(req)), 202); }));
    server.Get(prefix + "/models/:id",
               guarded([this](const auto& req, auto& res) { reply(res, get_model(req.path_params.at("id"))); }));
    server.Get(prefix + "/models/:id/matrices", guarded([this](const auto& req, auto& res) {
                 const std::string name = req.has_param("name") ? req.get_param_value("name") : "d";
                 res.set_content(model_matrix_csv(req.path_params.at("id"), name), "text/csv");
               }));
    server.Post(prefix + "/simulate",
                guarded([this](const auto& req, auto& res) { reply(res, simulate(body_of(req))); }));
    server.Post(prefix + "/predict",
                guarded([this](const auto& req, auto& res) { reply(res, predict(body_of(req))); }));
    server.Get(prefix + "/criticality", guarded([this](const auto& req, auto& res) {
                 if (!req.has_param("model")) throw bad_request("query parameter 'model' is required");
                 const std::string id = req.get_param_value("model");
                 if (req.has_param("format") && req.get_param_value("format") == "csv")
                   res.set_content(criticality_csv(id), "text/csv");
                 else
                   reply(res, criticality(id));
               }));
    server.Post(prefix + "/whatif",
                guarded([this](const auto& req, auto& res) { reply(res, whatif(body_of(req))); }));
    server.Get(prefix + "/jobs/:id",
               guarded([this](const auto& req, auto& res) { reply(res, job(req.path_params.at("id"))); }));
  }
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty())
      res.set_content(error_envelope(res.status == 404 ? "not_found" : "http_error", "no such endpoint").dump(),
                      "application/json");
  });
}

bool serve(Advisor& advisor, const std::string& host, int port) {
  httplib::Server server;
  // SO_REUSEPORT would let a second service share a bound port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  advisor.register_routes(server);
  return server.listen(host, port);
}

}  // namespace windcascade
