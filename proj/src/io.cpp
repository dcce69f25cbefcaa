#include "windcascade/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <set>

#include <openssl/evp.h>
#include <zlib.h>

namespace windcascade {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string read_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const char* msg = n < 0 ? gzerror(f, &err) : nullptr;
  gzclose(f);
  if (msg) throw std::runtime_error("cannot read '" + path + "': " + msg);
  return out;
}

void write_file(const std::string& path, std::string_view content) {
  if (path.size() > 3 && path.ends_with(".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    const bool ok = content.empty() ||
                    gzwrite(f, content.data(), static_cast<unsigned>(content.size())) == static_cast<int>(content.size());
    if (gzclose(f) != Z_OK || !ok) throw std::runtime_error("cannot write '" + path + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

std::string bits_to_string(const Eigen::Matrix<unsigned char, Eigen::Dynamic, 1>& bits) {
  std::string s(static_cast<std::size_t>(bits.size()), '0');
  for (Eigen::Index i = 0; i < bits.size(); ++i)
    if (bits[i]) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

Eigen::Matrix<unsigned char, Eigen::Dynamic, 1> bits_from_string(std::string_view text) {
  Eigen::Matrix<unsigned char, Eigen::Dynamic, 1> bits(static_cast<Eigen::Index>(text.size()));
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '0' && text[i] != '1') throw FormatError("bit string contains '" + std::string(1, text[i]) + "'");
    bits[static_cast<Eigen::Index>(i)] = text[i] == '1' ? 1 : 0;
  }
  return bits;
}

namespace {

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
    throw FormatError("matrix size does not match its data");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

json meta_json(const TrainingMetadata& m) {
  return {{"pool_hash", m.pool_hash},
          {"seed", m.seed},
          {"observations", m.observations},
          {"iterations", m.iterations},
          {"converged", m.converged},
          {"threshold_flagged", m.threshold_flagged},
          {"training_error", m.training_error}};
}

TrainingMetadata meta_from(const json& j) {
  TrainingMetadata m;
  m.pool_hash = j.at("pool_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.observations = j.at("observations").get<std::size_t>();
  m.iterations = j.at("iterations").get<std::vector<int>>();
  m.converged = j.at("converged").get<std::vector<bool>>();
  m.threshold_flagged = j.at("threshold_flagged").get<std::vector<bool>>();
  m.training_error = j.at("training_error").get<double>();
  return m;
}

}  // namespace

json to_json(const ScenarioProfile& p) {
  return {{"loading_multiplier", p.loading_multiplier},
          {"wind_fraction", p.wind_fraction},
          {"wind_buses", p.wind_buses},
          {"initial_contingencies", p.initial_contingencies},
          {"wind_reduction", p.wind_reduction}};
}

ScenarioProfile profile_from_json(const json& j) {
  ScenarioProfile p;
  p.loading_multiplier = j.value("loading_multiplier", 1.0);
  p.wind_fraction = j.value("wind_fraction", 0.0);
  p.wind_buses = j.value("wind_buses", std::vector<int>{});
  p.initial_contingencies = j.value("initial_contingencies", std::vector<int>{});
  p.wind_reduction = j.value("wind_reduction", 0.0);
  return p;
}

json to_json(const CascadeEvent& e) {
  return {{"time", e.time}, {"kind", to_string(e.kind)}, {"subject", e.subject}, {"magnitude", e.magnitude}};
}

json to_json(const CascadeTrace& t) {
  json states = json::array(), bits = json::array(), served = json::array(), demand = json::array(),
       events = json::array();
  for (const auto& s : t.states) states.push_back(bits_to_string(s));
  for (const auto& l : t.load_bits) bits.push_back(bits_to_string(l));
  for (const auto& v : t.served) served.push_back(vector_json(v));
  for (const auto& v : t.demand) demand.push_back(vector_json(v));
  for (const auto& e : t.events) events.push_back(to_json(e));
  return {{"profile", to_json(t.profile)},
          {"policy", to_string(t.policy)},
          {"wind_reduced", t.wind_reduced},
          {"states", states},
          {"load_bits", bits},
          {"served", served},
          {"demand", demand},
          {"events", events},
          {"final_generation", vector_json(t.final_generation)}};
}

CascadeTrace trace_from_json(const json& j) {
  CascadeTrace t;
  t.profile = profile_from_json(j.at("profile"));
  t.policy = parse_policy(j.at("policy").get<std::string>());
  t.wind_reduced = j.at("wind_reduced").get<bool>();
  for (const auto& s : j.at("states")) t.states.push_back(bits_from_string(s.get<std::string>()));
  for (const auto& l : j.at("load_bits")) t.load_bits.push_back(bits_from_string(l.get<std::string>()));
  for (const auto& v : j.at("served")) t.served.push_back(vector_from(v));
  for (const auto& v : j.at("demand")) t.demand.push_back(vector_from(v));
  for (const auto& e : j.at("events"))
    t.events.push_back({e.at("time").get<int>(), parse_event_kind(e.at("kind").get<std::string>()),
                        e.at("subject").get<int>(), e.at("magnitude").get<double>()});
  t.final_generation = vector_from(j.at("final_generation"));

  const std::size_t T = t.states.size();
  if (T == 0) throw FormatError("trace has no states");
  if (t.load_bits.size() != T || t.served.size() != T || t.demand.size() != T)
    throw FormatError("trace series have different lengths");
  for (std::size_t k = 1; k < T; ++k) {
    if (t.states[k].size() != t.states[0].size() || t.load_bits[k].size() != t.load_bits[0].size() ||
        t.served[k].size() != t.load_bits[0].size() || t.demand[k].size() != t.load_bits[0].size())
      throw FormatError("trace vectors have inconsistent sizes");
  }
  return t;
}

json to_json(const PoolConfig& c) {
  return {{"n_samples", c.n_samples},
          {"loading_multipliers", c.loading_multipliers},
          {"wind_fraction", c.wind_fraction},
          {"wind_reductions", c.wind_reductions},
          {"policy", to_string(c.policy)},
          {"seed", c.seed},
          {"train_fraction", c.train_fraction},
          {"screen_islanding", c.screen_islanding}};
}

PoolConfig pool_config_from_json(const json& j) {
  PoolConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.loading_multipliers = j.value("loading_multipliers", c.loading_multipliers);
  c.wind_fraction = j.value("wind_fraction", c.wind_fraction);
  c.wind_reductions = j.value("wind_reductions", c.wind_reductions);
  if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.screen_islanding = j.value("screen_islanding", c.screen_islanding);
  return c;
}

std::string write_pool(const SamplePool& pool) {
  std::string out = json{{"schema", kPoolSchema},
                         {"config", to_json(pool.config)},
                         {"samples", pool.samples.size()},
                         {"split", {{"train", pool.train}, {"test", pool.test}}},
                         {"case_hash", pool.case_hash}}
                        .dump();
  out.push_back('\n');
  for (const auto& s : pool.samples) {
    json line = {{"index", s.index},
                 {"profile", to_json(s.profile)},
                 {"blackout_before", s.blackout_before},
                 {"before", to_json(s.before)},
                 {"after", s.after ? to_json(*s.after) : json(nullptr)}};
    out += line.dump();
    out.push_back('\n');
  }
  return out;
}

SamplePool read_pool(std::string_view text) {
  SamplePool pool;
  std::size_t line_no = 0, expected = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      if (!header) {
        if (j.value("schema", "") != kPoolSchema) throw FormatError("not a pool document");
        pool.config = pool_config_from_json(j.at("config"));
        expected = j.at("samples").get<std::size_t>();
        pool.train = j.at("split").at("train").get<std::vector<std::size_t>>();
        pool.test = j.at("split").at("test").get<std::vector<std::size_t>>();
        pool.case_hash = j.value("case_hash", "");
        header = true;
        continue;
      }
      PoolSample s;
      s.index = j.at("index").get<std::size_t>();
      if (s.index != pool.samples.size()) throw FormatError("sample index out of order");
      s.profile = profile_from_json(j.at("profile"));
      s.blackout_before = j.at("blackout_before").get<bool>();
      s.before = trace_from_json(j.at("before"));
      if (!j.at("after").is_null()) s.after = trace_from_json(j.at("after"));
      pool.samples.push_back(std::move(s));
    } catch (const FormatError& e) {
      throw FormatError("pool line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw FormatError("pool line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw FormatError("pool document is empty");
  if (pool.samples.size() != expected)
    throw FormatError("pool declares " + std::to_string(expected) + " samples, found " +
                      std::to_string(pool.samples.size()));
  std::set<std::size_t> seen;
  for (auto i : pool.train)
    if (i >= expected || !seen.insert(i).second) throw FormatError("invalid training split");
  for (auto i : pool.test)
    if (i >= expected || !seen.insert(i).second) throw FormatError("invalid test split");
  if (seen.size() != expected) throw FormatError("split does not cover every sample");
  for (const auto& s : pool.samples) {
    if (s.before.states[0].size() != pool.samples[0].before.states[0].size() ||
        s.before.load_bits[0].size() != pool.samples[0].before.load_bits[0].size())
      throw FormatError("samples have inconsistent dimensions");
  }
  return pool;
}

json to_json(const LinkFailureIM& m) {
  return {{"schema", kModelSchema},
          {"target", "link"},
          {"links", m.links()},
          {"outputs", m.d.cols()},
          {"a11", matrix_json(m.a11)},
          {"a01", matrix_json(m.a01)},
          {"d", matrix_json(m.d)},
          {"epsilon", vector_json(m.epsilon)},
          {"meta", meta_json(m.meta)}};
}

json to_json(const LoadShedIM& m) {
  return {{"schema", kModelSchema},
          {"target", "load"},
          {"links", m.links()},
          {"outputs", m.buses()},
          {"b11", matrix_json(m.b11)},
          {"b01", matrix_json(m.b01)},
          {"e", matrix_json(m.e)},
          {"delta", vector_json(m.delta)},
          {"always_served", bits_to_string(m.always_served)},
          {"meta", meta_json(m.meta)}};
}

std::string write_model(const LinkFailureIM& m) { return to_json(m).dump(1) + "\n"; }
std::string write_model(const LoadShedIM& m) { return to_json(m).dump(1) + "\n"; }

ModelFile read_model(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.value("schema", "") != kModelSchema) throw FormatError("not a model document");
    ModelFile f;
    f.target = parse_target(j.at("target").get<std::string>());
    const auto links = j.at("links").get<Eigen::Index>();
    const auto outputs = j.at("outputs").get<Eigen::Index>();
    auto check = [&](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* name) {
      if (m.rows() != r || m.cols() != c) throw FormatError(std::string("matrix ") + name + " has the wrong shape");
    };
    if (f.target == Target::Link) {
      LinkFailureIM m;
      m.a11 = matrix_from(j.at("a11"));
      m.a01 = matrix_from(j.at("a01"));
      m.d = matrix_from(j.at("d"));
      m.epsilon = vector_from(j.at("epsilon"));
      m.meta = meta_from(j.at("meta"));
      check(m.a11, links, outputs, "a11");
      check(m.a01, links, outputs, "a01");
      check(m.d, links, outputs, "d");
      if (m.epsilon.size() != outputs) throw FormatError("epsilon has the wrong length");
      f.link = std::move(m);
    } else {
      LoadShedIM m;
      m.b11 = matrix_from(j.at("b11"));
      m.b01 = matrix_from(j.at("b01"));
      m.e = matrix_from(j.at("e"));
      m.delta = vector_from(j.at("delta"));
      m.always_served = bits_from_string(j.at("always_served").get<std::string>());
      m.meta = meta_from(j.at("meta"));
      check(m.b11, links, outputs, "b11");
      check(m.b01, links, outputs, "b01");
      check(m.e, outputs, links, "e");
      if (m.delta.size() != outputs || m.always_served.size() != outputs)
        throw FormatError("threshold vector has the wrong length");
      f.load = std::move(m);
    }
    return f;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("model document: ") + e.what());
  }
}

namespace {

std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<int>& row_labels,
                       const std::vector<int>& col_labels) {
  if (static_cast<Eigen::Index>(row_labels.size()) != m.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != m.cols())
    throw std::invalid_argument("label count does not match the matrix");
  std::string out = "row";
  for (int c : col_labels) out += "," + std::to_string(c);
  out += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += std::to_string(row_labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += "," + number(m(r, c));
    out += "\n";
  }
  return out;
}

json to_json(const LossReport& r) {
  return {{"grid_loss", r.grid_loss},
          {"consumer_loss", r.consumer_loss},
          {"per_branch", vector_json(r.per_branch)},
          {"per_bus", vector_json(r.per_bus)}};
}

json to_json(const ResilienceReport& r) {
  return {{"R", r.r},       {"R_G", r.r_grid},         {"R_L", r.r_load},
          {"delta_w", r.delta_w}, {"pre", to_json(r.pre)}, {"post", to_json(r.post)}};
}

json to_json(const CriticalityReport& r) {
  return {{"branch_ids", r.branch_ids},
          {"C_D", vector_json(r.c_d)},
          {"C_E", vector_json(r.c_e)},
          {"combined", vector_json(r.combined)},
          {"ranking", r.ranking}};
}

namespace {

json method_json(const MethodErrors& e) { return {{"IM", e.im}, {"RANDOM", e.random}, {"UNIFORM", e.uniform}}; }

}  // namespace

json to_json(const ErrorRateReport& r) {
  json cells = json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"loading", c.loading},
                     {"test_samples", c.test_samples},
                     {"link", method_json(c.link)},
                     {"load", method_json(c.load)}});
  return {{"link", method_json(r.link)}, {"load", method_json(r.load)}, {"cells", cells}};
}

json to_json(const PoolStatistics& s) {
  return {{"samples", s.samples},
          {"branch_failure_frequency", vector_json(s.branch_failure_frequency)},
          {"bus_shed_frequency", vector_json(s.bus_shed_frequency)},
          {"mean_trace_length", s.mean_trace_length}};
}

json to_json(const std::vector<ExpectedLoss>& e) {
  json out = json::array();
  for (const auto& x : e)
    out.push_back({{"branch", x.branch},
                   {"samples", x.samples},
                   {"expected_grid_loss", x.grid},
                   {"expected_consumer_loss", x.consumer},
                   {"expected_resilience", x.resilience}});
  return out;
}

std::string criticality_csv(const CriticalityReport& r) {
  std::string out = "rank,branch,C_D,C_E,combined\n";
  for (std::size_t k = 0; k < r.ranking.size(); ++k) {
    const auto it = std::find(r.branch_ids.begin(), r.branch_ids.end(), r.ranking[k]);
    const auto idx = static_cast<Eigen::Index>(it - r.branch_ids.begin());
    out += std::to_string(k + 1) + "," + std::to_string(r.ranking[k]) + "," + number(r.c_d[idx]) + "," +
           number(r.c_e[idx]) + "," + number(r.combined[idx]) + "\n";
  }
  return out;
}

std::string error_rates_csv(const ErrorRateReport& r) {
  std::string out = "loading,test_samples,link_im,link_random,link_uniform,load_im,load_random,load_uniform\n";
  auto row = [&](const std::string& label, std::size_t n, const MethodErrors& l, const MethodErrors& d) {
    out += label + "," + std::to_string(n) + "," + number(l.im) + "," + number(l.random) + "," + number(l.uniform) +
           "," + number(d.im) + "," + number(d.random) + "," + number(d.uniform) + "\n";
  };
  std::size_t total = 0;
  for (const auto& c : r.cells) {
    row(number(c.loading), c.test_samples, c.link, c.load);
    total += c.test_samples;
  }
  row("all", total, r.link, r.load);
  return out;
}

std::string expected_losses_csv(const std::vector<ExpectedLoss>& e) {
  std::string out = "branch,samples,expected_grid_loss,expected_consumer_loss,expected_resilience\n";
  for (const auto& x : e)
    out += std::to_string(x.branch) + "," + std::to_string(x.samples) + "," + number(x.grid) + "," +
           number(x.consumer) + "," + number(x.resilience) + "\n";
  return out;
}

std::string losses_csv(const LossReport& r, const NetworkCase& net) {
  std::string out = "kind,id,contribution\n";
  for (std::size_t b = 0; b < net.branch_count(); ++b)
    out += "branch," + std::to_string(net.branches[b].id) + "," + number(r.per_branch[static_cast<Eigen::Index>(b)]) + "\n";
  for (std::size_t b = 0; b < net.bus_count(); ++b)
    out += "bus," + std::to_string(net.buses[b].id) + "," + number(r.per_bus[static_cast<Eigen::Index>(b)]) + "\n";
  return out;
}

}  // namespace windcascade
