#pragma once
// Experiment driver: a JSON-configurable set of Monte Carlo runs, each
// producing a numeric table that serializes to CSV or JSON.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace cef {

struct ExperimentConfig {
  std::string experiment;
  std::vector<int> Ns;  // dimensions swept (tables run one row block per N)
  int N = 8;
  int L = 8;
  int K = 0;
  std::vector<int> Ks;  // K1 / K2 grid for the IoM tables
  int p = 0;
  int Ny = 1;
  std::vector<double> sigmas;
  std::vector<double> radii;
  std::vector<double> alphas;
  int trials = 100;
  int noise_draws = 5;
  int eta_blocks = 10000;
  int eta_inputs = 100;
  int banks = 50;
  int directions = 5;
  int bins = 64;
  double q = 0.5;
  bool quantize = false;
  std::string newton = "literal";  // or "safeguarded"
  std::uint64_t seed = 1;
  double eta_max = 2.5;
  int workers = 0;
  std::string output;
};

// Defaults for an experiment id; throws InvalidInput on an unknown id.
ExperimentConfig default_config(const std::string& experiment);
// Fields present in j override the experiment defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);

const std::vector<std::string>& experiment_ids();

struct ResultTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json meta = nlohmann::json::object();  // config hash, elapsed, version

  void add_row(std::vector<double> row);
  double at(std::size_t row, const std::string& column) const;
};

ResultTable run(const ExperimentConfig& config);

// Header plus one line per row, cells printed with 10 significant digits.
std::string emit_csv(const ResultTable& t);
nlohmann::json emit_json(const ResultTable& t);
ResultTable table_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON dump of the config.
std::string config_hash(const ExperimentConfig& c);
const char* version_string();

}  // namespace cef
