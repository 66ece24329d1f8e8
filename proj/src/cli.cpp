#include "qrng/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "qrng/certifier.hpp"
#include "qrng/errors.hpp"
#include "qrng/extractor.hpp"
#include "qrng/finite_size.hpp"
#include "qrng/measurement.hpp"

namespace qrng::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("config key '") + key + "' is missing or has the wrong type");
  }
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(std::string("cannot read ") + what + " '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json parse_json_file(const std::string& path, const char* what) {
  const std::string text = read_file(path, what);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path, const char* what) {
  const std::string s = read_file(path, what);
  return {s.begin(), s.end()};
}

json drift_json(const DriftModel& d) {
  return {{"kind", d.label()}, {"theta0", d.theta0}, {"sigma", d.sigma}};
}

DriftModel drift_from(const json& j) {
  const auto kind = j.value("kind", std::string("none"));
  if (kind == "none") return DriftModel::none();
  if (kind == "constant") return DriftModel::constant(j.value("theta0", 0.0));
  if (kind == "random-walk") return DriftModel::random_walk(j.value("sigma", kDefaultWalkSigma));
  throw DataError("config key 'drift.kind' must be none, constant or random-walk");
}

SourceModel source_for(const RunConfig& c) { return build_source(c.mu, c.p_x); }
DetectorParams detector_for(const RunConfig& c) { return {c.eta, c.d}; }

json report_header(const RunConfig& config, const std::vector<std::string>& inputs) {
  return {{"config", config.to_json()}, {"input_hash", content_hash(config, inputs)}};
}

json dual_summary(const DualCertificate& d) {
  return {{"objective", d.objective},
          {"feasibility_residual", d.feasibility_residual},
          {"max_omega", d.omega.maxCoeff()},
          {"solver_status", d.solver.status}};
}

void write_report(const RunConfig& config, const std::string& name, const json& report) {
  fs::create_directories(config.out_dir);
  write_text(fs::path(config.out_dir) / name, report.dump(2) + "\n");
}

struct Solved {
  double pg = 1.0;
  DualCertificate dual;
};

// Primal and restricted dual at (mu, eta); the dual goes through the disk
// cache so repeated sweeps skip the solve.
Solved solve_point(const RunConfig& config, const SourceModel& model, const DetectorParams& det) {
  const ProbTable table = quadrant_probabilities(model, det);
  Solved s;
  s.pg = solve_primal(model, table).pg;
  const CertificateCache cache(fs::path(config.out_dir) / "cache");
  s.dual = cache.get_or_solve(model, det);
  return s;
}

std::string hex(const unsigned char* data, unsigned len) {
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return out.str();
}

}  // namespace

json RunConfig::to_json() const {
  json j = {{"mode", mode},
            {"mu", mu},
            {"eta", eta},
            {"p_t", p_t},
            {"n_total", n_total},
            {"epsilon", epsilon},
            {"p_x", std::vector<double>(p_x.begin(), p_x.end())},
            {"d", d},
            {"eps_hash", eps_hash},
            {"seed", seed},
            {"workers", workers},
            {"block_size", block_size},
            {"drift", drift_json(drift)},
            {"compensate", compensate},
            {"frames", frames},
            {"paired", paired},
            {"write_raw", write_raw},
            {"extract_block_rounds", extract_block_rounds},
            {"nominal", nominal},
            {"tally", tally_path},
            {"raw_bits", raw_path},
            {"certificate", certificate_path},
            {"seed_file", seed_path},
            {"axis", axis},
            {"grid", grid},
            {"out", out_dir}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  static const std::set<std::string> known = {
      "mode", "mu", "eta", "p_t", "n_total", "epsilon", "p_x", "d", "eps_hash", "seed", "workers",
      "block_size", "drift", "compensate", "frames", "paired", "write_raw", "extract_block_rounds",
      "nominal", "tally", "raw_bits", "certificate", "seed_file", "axis", "grid", "out"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw DataError("unknown config key '" + item.key() + "'");
  }
  RunConfig c;
  if (j.contains("mode")) c.mode = field<std::string>(j, "mode");
  if (j.contains("mu")) c.mu = field<double>(j, "mu");
  if (j.contains("eta")) c.eta = field<double>(j, "eta");
  if (j.contains("p_t")) c.p_t = field<double>(j, "p_t");
  if (j.contains("n_total")) c.n_total = field<double>(j, "n_total");
  if (j.contains("epsilon")) c.epsilon = field<double>(j, "epsilon");
  if (j.contains("p_x")) {
    const auto v = field<std::vector<double>>(j, "p_x");
    if (v.size() != 3) throw DataError("config key 'p_x' must have 3 entries");
    std::copy(v.begin(), v.end(), c.p_x.begin());
  }
  if (j.contains("d")) c.d = field<int>(j, "d");
  if (j.contains("eps_hash")) c.eps_hash = field<double>(j, "eps_hash");
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("workers")) c.workers = field<unsigned>(j, "workers");
  if (j.contains("block_size")) c.block_size = field<std::uint64_t>(j, "block_size");
  if (j.contains("drift")) {
    if (!j.at("drift").is_object()) throw DataError("config key 'drift' must be an object");
    c.drift = drift_from(j.at("drift"));
  }
  if (j.contains("compensate")) c.compensate = field<bool>(j, "compensate");
  if (j.contains("frames")) c.frames = field<bool>(j, "frames");
  if (j.contains("paired")) c.paired = field<bool>(j, "paired");
  if (j.contains("write_raw")) c.write_raw = field<bool>(j, "write_raw");
  if (j.contains("extract_block_rounds")) c.extract_block_rounds = field<std::size_t>(j, "extract_block_rounds");
  if (j.contains("nominal")) c.nominal = field<bool>(j, "nominal");
  if (j.contains("tally")) c.tally_path = field<std::string>(j, "tally");
  if (j.contains("raw_bits")) c.raw_path = field<std::string>(j, "raw_bits");
  if (j.contains("certificate")) c.certificate_path = field<std::string>(j, "certificate");
  if (j.contains("seed_file")) c.seed_path = field<std::string>(j, "seed_file");
  if (j.contains("axis")) c.axis = field<std::string>(j, "axis");
  if (j.contains("grid")) c.grid = field<std::vector<double>>(j, "grid");
  if (j.contains("out")) c.out_dir = field<std::string>(j, "out");
  return c;
}

void RunConfig::validate() const {
  static const std::set<std::string> modes = {"certify", "simulate", "sweep", "extract"};
  if (!modes.count(mode)) throw ParameterError("mode must be one of certify, simulate, sweep, extract");
  build_source(mu, p_x);
  detector_for(*this).validate();
  if (!(p_t > 0.0 && p_t < 1.0)) throw ParameterError("p_t must lie strictly between 0 and 1");
  if (!(n_total >= 1.0)) throw ParameterError("n_total must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParameterError("epsilon must lie in (0, 1)");
  if (!(eps_hash > 0.0 && eps_hash < 1.0)) throw ParameterError("eps_hash must lie in (0, 1)");
  if (mode == "sweep") {
    static const std::set<std::string> axes = {"p_t", "eta", "mu", "N"};
    if (!axes.count(axis)) throw ParameterError("sweep axis must be one of p_t, eta, mu, N");
    if (grid.empty()) throw ParameterError("sweep grid must be non-empty");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ParameterError("sweep grid must be sorted");
  }
}

RunConfig load_config(const fs::path& path) {
  return RunConfig::from_json(parse_json_file(path.string(), "config file"));
}

std::string content_hash(const RunConfig& config, const std::vector<std::string>& input_files) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("cannot allocate hash context");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  const std::string cfg = config.to_json().dump();
  EVP_DigestUpdate(ctx, cfg.data(), cfg.size());
  for (const auto& path : input_files) {
    if (path.empty()) continue;
    const std::string data = read_file(path, "input file");
    EVP_DigestUpdate(ctx, data.data(), data.size());
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  return hex(digest, len);
}

json tally_to_json(const Tally& t) {
  json counts = json::array();
  for (int x = 0; x < t.counts.rows(); ++x) {
    json row = json::array();
    for (int y = 0; y < t.counts.cols(); ++y) row.push_back(t.counts(x, y));
    counts.push_back(row);
  }
  return {{"n_total", t.n_total},
          {"n_gen", t.n_gen},
          {"p_t", t.p_t},
          {"p_x", std::vector<double>(t.probs.begin(), t.probs.end())},
          {"counts", counts}};
}

Tally tally_from_json(const json& j) {
  auto num = [&](const char* key) {
    if (!j.contains(key)) throw DataError(std::string("tally field '") + key + "' is missing");
    if (!j.at(key).is_number()) throw DataError(std::string("tally field '") + key + "' must be a number");
    return j.at(key).get<double>();
  };
  if (!j.is_object()) throw DataError("tally must be a JSON object");
  Tally t;
  t.n_total = num("n_total");
  t.n_gen = num("n_gen");
  t.p_t = num("p_t");
  if (j.contains("p_x")) {
    const auto& px = j.at("p_x");
    if (!px.is_array() || px.size() != 3) throw DataError("tally field 'p_x' must be an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!px[i].is_number()) throw DataError("tally field 'p_x' must be an array of 3 numbers");
      t.probs[i] = px[i].get<double>();
    }
  }
  if (!j.contains("counts")) throw DataError("tally field 'counts' is missing");
  const auto& c = j.at("counts");
  if (!c.is_array() || c.size() != 3 || !c[0].is_array() || c[0].empty()) {
    throw DataError("tally field 'counts' must be a 3 x d array");
  }
  const std::size_t d = c[0].size();
  t.counts.resize(3, static_cast<Eigen::Index>(d));
  for (std::size_t x = 0; x < 3; ++x) {
    if (!c[x].is_array() || c[x].size() != d) throw DataError("tally field 'counts' has ragged rows");
    for (std::size_t y = 0; y < d; ++y) {
      if (!c[x][y].is_number()) throw DataError("tally field 'counts' must hold numbers");
      t.counts(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = c[x][y].get<double>();
    }
  }
  try {
    t.validate();
  } catch (const Error& e) {
    throw DataError(std::string("tally is inconsistent: ") + e.what());
  }
  return t;
}

json certificate_to_json(const Certificate& c) {
  json j = {{"hprime_min", c.hprime_min},
            {"hprime_min_vacuous", c.vacuous},
            {"ng_max", c.ng_max},
            {"delta", c.delta},
            {"r_gross", c.r_gross},
            {"r_in", c.r_in},
            {"r_net", c.r_net},
            {"kato", {{"a", c.params.a}, {"b", c.params.b}, {"epsilon", c.params.eps},
                      {"w_min", c.params.w_min}, {"w_max", c.params.w_max}}},
            {"hprime_min_azuma_baseline", c.hprime_min_baseline}};
  j["h_min_asymptotic"] = std::isnan(c.h_min_asymptotic) ? json(nullptr) : json(c.h_min_asymptotic);
  return j;
}

json cmd_certify(const RunConfig& config) {
  config.validate();
  if (!config.nominal && config.tally_path.empty()) {
    throw ParameterError("certify needs a tally file or --nominal");
  }
  const SourceModel model = source_for(config);
  const DetectorParams det = detector_for(config);
  const Solved solved = solve_point(config, model, det);

  Tally tally;
  if (config.nominal) {
    tally = nominal_tally(config.n_total, config.p_t, config.p_x, quadrant_probabilities(model, det));
  } else {
    tally = tally_from_json(parse_json_file(config.tally_path, "tally file"));
  }
  const Certificate cert =
      certify(tally, solved.dual, config.epsilon, asymptotic_min_entropy(solved.pg, config.d));

  json report = report_header(config, {config.nominal ? std::string() : config.tally_path});
  report["tally_source"] = config.nominal ? "nominal" : "file";
  report["tally"] = tally_to_json(tally);
  report["guessing_probability"] = solved.pg;
  report["dual"] = dual_summary(solved.dual);
  report["certificate"] = certificate_to_json(cert);
  write_report(config, "certificate.json", report);
  return report;
}

json cmd_simulate(const RunConfig& config) {
  config.validate();
  const SourceModel model = source_for(config);
  const DetectorParams det = detector_for(config);
  const Solved solved = solve_point(config, model, det);
  const double h_min = asymptotic_min_entropy(solved.pg, config.d);

  SimConfig sim;
  sim.model = model;
  sim.det = det;
  sim.p_t = config.p_t;
  sim.n_total = static_cast<std::uint64_t>(std::llround(config.n_total));
  sim.drift = config.drift;
  sim.block_size = config.block_size;
  sim.compensate = config.compensate;
  if (config.frames) {
    FrameLayout layout;
    layout.valid_len = config.block_size;
    sim.frame = layout;
  }
  sim.seed = config.seed;
  sim.workers = config.workers;
  sim.collect_outcomes = config.write_raw;

  auto run = [&](const SimConfig& s) {
    const SimResult r = run_simulation(s);
    json out;
    out["tally"] = tally_to_json(r.tally);
    const auto& sm = r.summary;
    out["summary"] = {{"rounds_scheduled", sm.rounds_scheduled},
                      {"test_rounds", sm.test_rounds},
                      {"generation_rounds", sm.generation_rounds},
                      {"auxiliary_scheduled", sm.auxiliary_scheduled},
                      {"input_bits", sm.input_bits},
                      {"input_bits_per_round", static_cast<double>(sm.input_bits) / static_cast<double>(sm.rounds_scheduled)},
                      {"blocks", sm.blocks},
                      {"fallback_blocks", sm.fallback_blocks},
                      {"lost_blocks", sm.lost_blocks},
                      {"lost_rounds", sm.lost_rounds},
                      {"misaligned_blocks", sm.misaligned_blocks},
                      {"mean_abs_phase_error", sm.mean_abs_phase_error},
                      {"drift", sm.drift},
                      {"drift_sigma_is_stand_in", sm.sigma_is_stand_in}};
    const Certificate cert = certify(r.tally, solved.dual, config.epsilon, h_min);
    out["certificate"] = certificate_to_json(cert);
    return std::make_pair(out, r);
  };

  fs::create_directories(config.out_dir);
  auto [primary, result] = run(sim);
  json report = report_header(config, {});
  report["guessing_probability"] = solved.pg;
  report["dual"] = dual_summary(solved.dual);
  report["run"] = primary;
  if (config.write_raw) {
    const BitString raw = encode_outcomes(result.outcomes);
    write_bytes(fs::path(config.out_dir) / "raw.bin", raw.to_bytes());
    report["raw_bits"] = {{"file", "raw.bin"}, {"bits", raw.size()}, {"encoding", "2 bits per outcome, y - 1 big-endian"}};
  }
  write_text(fs::path(config.out_dir) / "tally.json", tally_to_json(result.tally).dump(2) + "\n");
  if (config.paired && config.drift.kind != DriftKind::none) {
    SimConfig reference = sim;
    reference.drift = DriftModel::none();
    reference.collect_outcomes = false;
    report["reference_no_drift"] = run(reference).first;
  }
  write_report(config, "simulate.json", report);
  return report;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, const std::string& axis, const std::vector<double>& grid) {
  std::vector<SweepRow> rows(grid.size());
  std::mutex mu_lock;
  std::map<std::pair<double, double>, Solved> solved;

  auto point = [&](std::size_t i) {
    RunConfig c = config;
    const double v = grid[i];
    if (axis == "p_t") {
      c.p_t = v;
    } else if (axis == "eta") {
      c.eta = v;
    } else if (axis == "mu") {
      c.mu = v;
    } else if (axis == "N") {
      c.n_total = v;
    } else {
      throw ParameterError("sweep axis must be one of p_t, eta, mu, N");
    }
    const SourceModel model = source_for(c);
    const DetectorParams det = detector_for(c);
    const auto key = std::make_pair(c.mu, c.eta);
    Solved s;
    {
      std::lock_guard<std::mutex> lock(mu_lock);
      auto it = solved.find(key);
      if (it == solved.end()) it = solved.emplace(key, solve_point(c, model, det)).first;
      s = it->second;
    }
    const Tally t = nominal_tally(c.n_total, c.p_t, c.p_x, quadrant_probabilities(model, det));
    const Certificate cert = certify(t, s.dual, c.epsilon, asymptotic_min_entropy(s.pg, c.d));
    rows[i] = {v, cert.h_min_asymptotic, cert.hprime_min, cert.r_gross, cert.r_in, cert.r_net,
               cert.params.a, cert.params.b, cert.hprime_min_baseline};
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(grid.size())));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < grid.size(); i += workers) point(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::string sweep_csv(const std::string& axis, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << axis << ",h_min,hprime_min,r_gross,r_in,r_net,a,b\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.value << ',' << r.h_min << ',' << r.hprime_min << ',' << r.r_gross << ',' << r.r_in << ',' << r.r_net
        << ',' << r.a << ',' << r.b << '\n';
  }
  return out.str();
}

json cmd_sweep(const RunConfig& config) {
  config.validate();
  const auto rows = run_sweep(config, config.axis, config.grid);
  fs::create_directories(config.out_dir);
  const std::string name = "sweep_" + config.axis + ".csv";
  write_text(fs::path(config.out_dir) / name, sweep_csv(config.axis, rows));
  json report = report_header(config, {});
  report["csv"] = name;
  report["rows"] = rows.size();
  if (config.axis == "N") report["grid_note"] = "N grid chosen by the user; not taken from a published legend";
  write_report(config, "sweep_" + config.axis + ".json", report);
  return report;
}

json cmd_extract(const RunConfig& config) {
  config.validate();
  if (config.raw_path.empty()) throw ParameterError("extract needs a raw-bit file (config key 'raw_bits')");
  if (config.certificate_path.empty()) throw ParameterError("extract needs a certificate report (config key 'certificate')");

  const json cert_report = parse_json_file(config.certificate_path, "certificate report");
  const json* cert = nullptr;
  if (cert_report.contains("run") && cert_report["run"].contains("certificate")) {
    cert = &cert_report["run"]["certificate"];
  } else if (cert_report.contains("certificate")) {
    cert = &cert_report["certificate"];
  }
  if (!cert || !cert->contains("hprime_min") || !(*cert)["hprime_min"].is_number()) {
    throw DataError("certificate report has no numeric 'hprime_min'");
  }
  const double hprime = (*cert)["hprime_min"].get<double>();
  const bool vacuous = cert->value("hprime_min_vacuous", false);

  std::size_t n_raw_bits = 0;
  const auto bytes = read_bytes(config.raw_path, "raw-bit file");
  if (cert_report.contains("raw_bits") && cert_report["raw_bits"].contains("bits")) {
    n_raw_bits = cert_report["raw_bits"]["bits"].get<std::size_t>();
  } else {
    n_raw_bits = bytes.size() * 8;
  }
  const BitString raw = BitString::from_bytes(bytes, n_raw_bits);

  json report = report_header(config, {config.raw_path, config.certificate_path, config.seed_path});
  report["hprime_min"] = hprime;
  std::vector<std::string> warnings;
  // A pinned (vacuous) bound signals unrealistic inputs; refuse to spend it.
  const double usable = vacuous ? 0.0 : hprime;
  if (vacuous) warnings.push_back("certificate bound is vacuous (ng_max = 0); no output produced");

  const BlockPlan plan = plan_blocks(raw.size(), 2, usable, config.eps_hash, config.extract_block_rounds);
  BitString seed;
  if (!config.seed_path.empty()) {
    const auto seed_bytes = read_bytes(config.seed_path, "seed file");
    if (seed_bytes.size() != (plan.seed_len() + 7) / 8) {
      throw ParameterError("seed file holds " + std::to_string(seed_bytes.size() * 8) + " bits, the Toeplitz matrix needs " +
                           std::to_string(plan.seed_len()));
    }
    seed = BitString::from_bytes(seed_bytes, plan.seed_len());
  } else {
    CounterRng rng(config.seed, 0x5eed);
    seed = BitString(plan.seed_len());
    for (std::size_t i = 0; i < plan.seed_len(); ++i) seed.set(i, rng() & 1u);
  }

  const BitString out = extract_blocks(raw, plan, seed, config.eps_hash);
  if (out.empty() && warnings.empty()) warnings.push_back("certified entropy too small for any output");

  fs::create_directories(config.out_dir);
  write_bytes(fs::path(config.out_dir) / "extracted.bin", out.to_bytes());
  write_bytes(fs::path(config.out_dir) / "toeplitz_seed.bin", seed.to_bytes());
  report["extraction"] = {{"raw_bits", raw.size()},
                          {"block_raw_bits", plan.block_raw},
                          {"block_output_bits", plan.block_out},
                          {"blocks", plan.blocks},
                          {"output_bits", out.size()},
                          {"eps_hash", config.eps_hash},
                          {"seed_bits", seed.size()},
                          {"seed_file", "toeplitz_seed.bin"},
                          {"seed_reused_across_blocks", true},
                          {"output_file", "extracted.bin"}};
  if (out.size() >= 10000) {
    const SanityReport s = sanity_tests(out);
    report["sanity"] = {{"bits", s.bits},
                        {"monobit_z", s.monobit_z},
                        {"runs_z", s.runs_z},
                        {"chi_square", s.chi_square},
                        {"chi_square_z", s.chi_square_z},
                        {"pass", s.pass}};
  } else {
    report["sanity"] = nullptr;
    if (!out.empty()) warnings.push_back("fewer than 10^4 output bits; sanity tests skipped");
  }
  report["warnings"] = warnings;
  write_report(config, "extract.json", report);
  return report;
}

}  // namespace qrng::cli
