#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "windcascade/influence.hpp"
#include "windcascade/metrics.hpp"
#include "windcascade/sampler.hpp"

namespace windcascade {

using json = nlohmann::json;

/// Malformed pool, model or trace document.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kPoolSchema = "windcascade.pool/1";
inline constexpr std::string_view kModelSchema = "windcascade.model/1";

std::string sha256_hex(std::string_view bytes);

/// Reads a file, inflating it when gzip-compressed. Throws std::runtime_error.
std::string read_file(const std::string& path);
/// Writes a file; a ".gz" suffix selects gzip compression.
void write_file(const std::string& path, std::string_view content);

std::string bits_to_string(const Eigen::Matrix<unsigned char, Eigen::Dynamic, 1>& bits);
Eigen::Matrix<unsigned char, Eigen::Dynamic, 1> bits_from_string(std::string_view text);

json to_json(const ScenarioProfile& p);
ScenarioProfile profile_from_json(const json& j);
json to_json(const CascadeEvent& e);
json to_json(const CascadeTrace& t);
CascadeTrace trace_from_json(const json& j);
json to_json(const PoolConfig& c);
PoolConfig pool_config_from_json(const json& j);

/// Line-delimited pool document: a header line (schema, config, split,
/// case hash), then one sample per line.
std::string write_pool(const SamplePool& pool);
SamplePool read_pool(std::string_view text);

json to_json(const LinkFailureIM& m);
json to_json(const LoadShedIM& m);

/// A model file holds exactly one of the two models.
struct ModelFile {
  Target target = Target::Link;
  std::optional<LinkFailureIM> link;
  std::optional<LoadShedIM> load;
};

ModelFile read_model(std::string_view text);
std::string write_model(const LinkFailureIM& m);
std::string write_model(const LoadShedIM& m);

/// Matrix as CSV with a header of column labels and a leading row label.
std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<int>& row_labels,
                       const std::vector<int>& col_labels);

json to_json(const LossReport& r);
json to_json(const ResilienceReport& r);
json to_json(const CriticalityReport& r);
json to_json(const ErrorRateReport& r);
json to_json(const PoolStatistics& s);
json to_json(const std::vector<ExpectedLoss>& e);

std::string criticality_csv(const CriticalityReport& r);
std::string error_rates_csv(const ErrorRateReport& r);
std::string expected_losses_csv(const std::vector<ExpectedLoss>& e);
std::string losses_csv(const LossReport& r, const NetworkCase& net);

}  // namespace windcascade
