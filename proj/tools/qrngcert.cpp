#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrng/cli.hpp"
#include "qrng/errors.hpp"

namespace {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw qrng::ParameterError("bad grid value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certify and simulate a semi-device-independent QRNG"};
  app.require_subcommand(1);

  std::string config_path;
  bool nominal = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string axis;
  std::string grid;
  std::string tally;
  unsigned workers = 0;
  bool paired = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "64-bit seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads");
  };

  auto* certify = app.add_subcommand("certify", "certificate from a tally file or nominal counts");
  add_common(certify);
  certify->add_flag("--nominal", nominal, "use nominal counts p_x p_t N p'(y|x)");
  certify->add_option("--tally", tally, "tally JSON file");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run followed by certification");
  add_common(simulate);
  simulate->add_flag("--paired", paired, "also run without drift on the same seed");

  auto* sweep = app.add_subcommand("sweep", "nominal-tally sweep written as CSV");
  add_common(sweep);
  sweep->add_option("--axis", axis, "p_t, eta, mu or N");
  sweep->add_option("--grid", grid, "comma separated, sorted values");

  auto* extract = app.add_subcommand("extract", "Toeplitz extraction sized by a certificate");
  add_common(extract);

  CLI11_PARSE(app, argc, argv);

  try {
    qrng::cli::RunConfig config;
    if (!config_path.empty()) config = qrng::cli::load_config(config_path);
    CLI::App* chosen = app.get_subcommands().front();
    config.mode = chosen->get_name();
    if (chosen->count("--seed")) config.seed = seed;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (workers > 0) config.workers = workers;
    if (nominal) config.nominal = true;
    if (!tally.empty()) config.tally_path = tally;
    if (paired) config.paired = true;
    if (!axis.empty()) config.axis = axis;
    if (!grid.empty()) config.grid = parse_grid(grid);

    nlohmann::json report;
    if (config.mode == "certify") {
      report = qrng::cli::cmd_certify(config);
      std::cout << report["certificate"].dump(2) << '\n';
    } else if (config.mode == "simulate") {
      report = qrng::cli::cmd_simulate(config);
      std::cout << report["run"]["certificate"].dump(2) << '\n';
    } else if (config.mode == "sweep") {
      report = qrng::cli::cmd_sweep(config);
      std::cout << "wrote " << config.out_dir << '/' << report["csv"].get<std::string>() << '\n';
    } else {
      report = qrng::cli::cmd_extract(config);
      for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
      std::cout << report["extraction"].dump(2) << '\n';
    }
  } catch (const qrng::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const qrng::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << " (achieved " << e.achieved() << ")\n";
    return 4;
  } catch (const qrng::CertificateError& e) {
    std::cerr << "certificate rejected: " << e.what() << " (residual " << e.residual() << ")\n";
    return 5;
  } catch (const qrng::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
