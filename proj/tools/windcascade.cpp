#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "windcascade/advisor.hpp"

using namespace windcascade;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
std::vector<T> split_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::istringstream conv(item);
    T value;
    if (!(conv >> value) || !conv.eof()) throw UsageError("cannot parse list item '" + item + "'");
    out.push_back(value);
  }
  return out;
}

Policy policy_flag(const std::string& text) {
  try {
    return parse_policy(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_file(out, text);
}

NetworkCase case_with_priorities(const std::string& name, const std::string& priorities) {
  NetworkCase net = load_case(name);
  if (!priorities.empty()) {
    apply_priority_overrides(net, read_file(priorities));
    validate(net);
  }
  return net;
}

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "RNG seed");
  cmd->add_option("--out", c.out, "output path (default stdout)");
  cmd->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--threads", c.threads, "worker threads (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascade simulation, influence-model training and resilience analysis"};
  app.require_subcommand(1);

  // simulate
  Common sim_c;
  std::string sim_case = "ieee30", sim_lines, sim_policy = "exp1", sim_priorities;
  double sim_c_mult = 1.0, sim_w = 0.0, sim_dw = 0.0;
  auto* sim = app.add_subcommand("simulate", "run one cascade and write it as a one-sample pool");
  add_common(sim, sim_c);
  sim->add_option("--case", sim_case, "case file or builtin name");
  sim->add_option("--c", sim_c_mult, "loading multiplier");
  sim->add_option("--w", sim_w, "wind fraction");
  sim->add_option("--dw", sim_dw, "wind reduction");
  sim->add_option("--lines", sim_lines, "initial contingencies, comma separated branch ids");
  sim->add_option("--policy", sim_policy, "exp1, exp2 or exp3");
  sim->add_option("--priorities", sim_priorities, "bus_id,priority CSV");

  // pool
  Common pool_c;
  std::string pool_case = "ieee30", pool_loadings = "1.0", pool_reductions = "0.1,0.2,0.3,0.4,0.5,0.6,0.7",
              pool_policy = "exp1", pool_priorities;
  std::size_t pool_n = 100;
  double pool_w = 0.1, pool_train = 0.7;
  bool pool_no_screen = false;
  auto* pool = app.add_subcommand("pool", "generate a Monte Carlo sample pool");
  add_common(pool, pool_c);
  pool->add_option("--case", pool_case, "case file or builtin name");
  pool->add_option("--n", pool_n, "number of samples");
  pool->add_option("--loadings", pool_loadings, "loading multipliers, comma separated");
  pool->add_option("--w", pool_w, "wind fraction");
  pool->add_option("--reductions", pool_reductions, "wind reductions, comma separated, or 'none'");
  pool->add_option("--policy", pool_policy, "exp1, exp2 or exp3");
  pool->add_option("--train-fraction", pool_train, "share of samples in the training split");
  pool->add_flag("--no-screen", pool_no_screen, "draw pairs that island loads without generation too");
  pool->add_option("--priorities", pool_priorities, "bus_id,priority CSV");

  // train
  Common train_c;
  std::string train_pool, train_target = "link";
  auto* train = app.add_subcommand("train", "fit a link-failure or load-shed influence model");
  add_common(train, train_c);
  train->add_option("--pool", train_pool, "pool file")->required();
  train->add_option("--target", train_target, "link or load")->check(CLI::IsMember({"link", "load"}));

  // evaluate
  Common eval_c;
  std::string eval_pool, eval_link, eval_load;
  bool eval_per_loading = false;
  auto* eval = app.add_subcommand("evaluate", "test-split error rates of the models and both baselines");
  add_common(eval, eval_c);
  eval->add_option("--pool", eval_pool, "pool file")->required();
  eval->add_option("--link", eval_link, "link model file");
  eval->add_option("--load", eval_load, "load model file");
  eval->add_flag("--per-loading", eval_per_loading, "train and evaluate one model pair per loading multiplier");

  // rank
  Common rank_c;
  std::string rank_link, rank_load, rank_case, rank_pool;
  auto* rank = app.add_subcommand("rank", "branch criticality ranking");
  add_common(rank, rank_c);
  rank->add_option("--link", rank_link, "link model file")->required();
  rank->add_option("--load", rank_load, "load model file")->required();
  rank->add_option("--case", rank_case, "case supplying branch ids");
  rank->add_option("--pool", rank_pool, "pool for expected losses per branch");

  // whatif
  Common wi_c;
  std::string wi_case = "ieee30", wi_lines, wi_policies = "exp1,exp3", wi_grid = "0.1,0.2,0.3,0.4,0.5,0.6,0.7",
              wi_priorities;
  double wi_c_mult = 1.0, wi_w = 0.1;
  std::size_t wi_samples = 0;
  auto* wi = app.add_subcommand("whatif", "resilience impact over a wind reduction grid");
  add_common(wi, wi_c);
  wi->add_option("--case", wi_case, "case file or builtin name");
  wi->add_option("--c", wi_c_mult, "loading multiplier");
  wi->add_option("--w", wi_w, "wind fraction");
  wi->add_option("--lines", wi_lines, "initial contingencies, comma separated branch ids");
  wi->add_option("--policies", wi_policies, "comma separated policies");
  wi->add_option("--grid", wi_grid, "wind reductions, comma separated");
  wi->add_option("--samples", wi_samples, "seeded N-2 samples per point (0 = --lines only)");
  wi->add_option("--priorities", wi_priorities, "bus_id,priority CSV");

  // serve
  std::string srv_host = "127.0.0.1", srv_data;
  int srv_port = 8080;
  unsigned srv_threads = 0;
  std::vector<std::string> srv_cases;
  auto* srv = app.add_subcommand("serve", "run the HTTP advisory service");
  srv->add_option("--host", srv_host, "bind address");
  srv->add_option("--port", srv_port, "port");
  srv->add_option("--data-dir", srv_data, "artifact directory (default $WINDCASCADE_DATA_DIR)");
  srv->add_option("--case", srv_cases, "additional case files, id taken from the file stem");
  srv->add_option("--threads", srv_threads, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      ScenarioProfile p;
      p.loading_multiplier = sim_c_mult;
      p.wind_fraction = sim_w;
      p.wind_reduction = sim_dw;
      p.initial_contingencies = split_list<int>(sim_lines);
      const Policy policy = policy_flag(sim_policy);
      const NetworkCase net = case_with_priorities(sim_case, sim_priorities);
      p.validate(net);
      SamplePool out;
      out.config.n_samples = 1;
      out.config.loading_multipliers = {sim_c_mult};
      out.config.wind_fraction = sim_w;
      out.config.wind_reductions = sim_dw > 0.0 ? std::vector<double>{sim_dw} : std::vector<double>{};
      out.config.policy = policy;
      out.config.seed = sim_c.seed;
      out.case_hash = sha256_hex(to_case_json(net));
      PoolSample s;
      s.profile = p;
      if (sim_dw > 0.0) {
        auto run = run_with_wind_reduction(net, p, policy);
        s.before = std::move(run.before);
        s.after = std::move(run.after);
        s.blackout_before = run.blackout_before;
      } else {
        s.before = run_cascade(net, p, policy);
        s.blackout_before = s.before.total_blackout();
      }
      std::cerr << "steps " << s.before.length() << (s.after ? " + " + std::to_string(s.after->length()) : "")
                << ", propagated trips " << s.before.propagated_trips() + (s.after ? s.after->propagated_trips() : 0)
                << "\n";
      out.samples.push_back(std::move(s));
      out.train = {0};
      emit(sim_c.out, write_pool(out));
    } else if (*pool) {
      PoolConfig cfg;
      cfg.n_samples = pool_n;
      cfg.loading_multipliers = split_list<double>(pool_loadings);
      cfg.wind_fraction = pool_w;
      cfg.wind_reductions = pool_reductions == "none" ? std::vector<double>{} : split_list<double>(pool_reductions);
      cfg.policy = policy_flag(pool_policy);
      cfg.seed = pool_c.seed;
      cfg.train_fraction = pool_train;
      cfg.screen_islanding = !pool_no_screen;
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const NetworkCase net = case_with_priorities(pool_case, pool_priorities);
      SamplePool p = generate_pool(net, cfg, {}, pool_c.threads);
      p.case_hash = sha256_hex(to_case_json(net));
      const auto stats = pool_statistics(p);
      std::cerr << "samples " << p.samples.size() << ", mean steps " << stats.mean_trace_length << "\n";
      emit(pool_c.out, write_pool(p));
    } else if (*train) {
      const std::string text = read_file(train_pool);
      const SamplePool p = read_pool(text);
      TrainingOptions opts;
      opts.threads = train_c.threads;
      if (train_target == "link") {
        auto m = train_link_model(p, opts);
        m.meta.pool_hash = sha256_hex(text);
        std::cerr << "training link error " << m.meta.training_error << "\n";
        emit(train_c.out, write_model(m));
      } else {
        auto m = train_load_model(p, opts);
        m.meta.pool_hash = sha256_hex(text);
        std::cerr << "training load error " << m.meta.training_error << "\n";
        emit(train_c.out, write_model(m));
      }
    } else if (*eval) {
      const SamplePool p = read_pool(read_file(eval_pool));
      ErrorRateReport report;
      if (eval_per_loading) {
        TrainingOptions opts;
        opts.threads = eval_c.threads;
        report = loading_cell_error_rates(p, eval_c.seed, opts);
      } else {
        if (eval_link.empty() || eval_load.empty()) throw UsageError("--link and --load are required without --per-loading");
        auto link = read_model(read_file(eval_link)).link;
        auto load = read_model(read_file(eval_load)).load;
        if (!link || !load) throw FormatError("--link must be a link model and --load a load model");
        report = error_rates(*link, *load, p, eval_c.seed);
      }
      emit(eval_c.out, eval_c.format == "csv" ? error_rates_csv(report) : to_json(report).dump(1) + "\n");
    } else if (*rank) {
      auto link = read_model(read_file(rank_link)).link;
      auto load = read_model(read_file(rank_load)).load;
      if (!link || !load) throw FormatError("--link must be a link model and --load a load model");
      std::vector<int> ids;
      std::optional<NetworkCase> net;
      if (!rank_case.empty()) {
        net = load_case(rank_case);
        for (const auto& b : net->branches) ids.push_back(b.id);
      }
      const auto report = criticality(*link, *load, ids);
      if (!rank_pool.empty() && !net) throw UsageError("--pool needs --case");
      if (rank_c.format == "csv") {
        std::string text = criticality_csv(report);
        if (!rank_pool.empty()) text += "\n" + expected_losses_csv(expected_losses(read_pool(read_file(rank_pool)), *net));
        emit(rank_c.out, text);
      } else {
        json j = to_json(report);
        if (!rank_pool.empty()) j["expected_losses"] = to_json(expected_losses(read_pool(read_file(rank_pool)), *net));
        emit(rank_c.out, j.dump(1) + "\n");
      }
    } else if (*wi) {
      WhatIfRequest req;
      req.base.loading_multiplier = wi_c_mult;
      req.base.wind_fraction = wi_w;
      req.base.initial_contingencies = split_list<int>(wi_lines);
      req.policies.clear();
      std::stringstream in(wi_policies);
      for (std::string item; std::getline(in, item, ',');) req.policies.push_back(policy_flag(item));
      req.grid = split_list<double>(wi_grid);
      req.samples = wi_samples;
      req.seed = wi_c.seed;
      const NetworkCase net = case_with_priorities(wi_case, wi_priorities);
      WhatIfSweep sweep;
      try {
        sweep = whatif_sweep(net, req, {}, wi_c.threads);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      emit(wi_c.out, wi_c.format == "csv" ? whatif_csv(sweep) : to_json(sweep).dump(1) + "\n");
    } else if (*srv) {
      AdvisorOptions opts;
      opts.threads = srv_threads;
      Advisor advisor(srv_data.empty() ? ArtifactStore::default_root() : std::filesystem::path(srv_data), opts);
      advisor.add_case("ieee30", load_case("ieee30"));
      for (const auto& path : srv_cases) advisor.add_case(std::filesystem::path(path).stem().string(), load_case(path));
      std::cerr << "listening on " << srv_host << ":" << srv_port << "\n";
      if (!serve(advisor, srv_host, srv_port)) {
        std::cerr << "error: cannot bind " << srv_host << ":" << srv_port << "\n";
        return 3;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
