#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qrng/protocol_sim.hpp"
#include "qrng/statespace.hpp"

namespace qrng::cli {

// Resolved run configuration. Parameter names follow the experimental
// table (mu, p_t, n_total, eta, p_x, epsilon); defaults are its values.
struct RunConfig {
  std::string mode;  // certify | simulate | sweep | extract

  double mu = 0.005;
  double eta = 0.232;
  double p_t = 3.464e-4;
  double n_total = 5.3e9;
  double epsilon = 1e-10;
  InputDistribution p_x{kUniformTernary, kUniformTernary, kUniformTernary};
  int d = 4;

  double eps_hash = 1e-10;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::uint64_t block_size = 10000;
  DriftModel drift;
  bool compensate = true;
  bool frames = false;
  bool paired = false;
  bool write_raw = false;
  std::size_t extract_block_rounds = 1u << 17;

  bool nominal = false;
  std::string tally_path;
  std::string raw_path;
  std::string certificate_path;
  std::string seed_path;

  std::string axis;
  std::vector<double> grid;

  std::string out_dir = "out";

  nlohmann::json to_json() const;
  // Applies the keys present in `j` on top of the defaults. Unknown keys
  // and wrongly typed values raise DataError naming the key.
  static RunConfig from_json(const nlohmann::json& j);
  void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);

// Hex SHA-256 of the resolved config followed by every input file.
std::string content_hash(const RunConfig& config, const std::vector<std::string>& input_files);

// Tally files: {"n_total", "n_gen", "p_t", "p_x", "counts": 3 x d}.
nlohmann::json tally_to_json(const Tally& t);
Tally tally_from_json(const nlohmann::json& j);

nlohmann::json certificate_to_json(const Certificate& c);

// Each command writes its outputs under config.out_dir and returns the
// report it wrote. Library errors propagate to the caller.
nlohmann::json cmd_certify(const RunConfig& config);
nlohmann::json cmd_simulate(const RunConfig& config);
nlohmann::json cmd_sweep(const RunConfig& config);
nlohmann::json cmd_extract(const RunConfig& config);

struct SweepRow {
  double value = 0.0;
  double h_min = 0.0;
  double hprime_min = 0.0;
  double r_gross = 0.0;
  double r_in = 0.0;
  double r_net = 0.0;
  double a = 0.0;
  double b = 0.0;
  double hprime_min_baseline = 0.0;
};

// Nominal-tally sweep over axis in {p_t, eta, mu, N}; rows in grid order.
std::vector<SweepRow> run_sweep(const RunConfig& config, const std::string& axis, const std::vector<double>& grid);

std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows);

}  // namespace qrng::cli
