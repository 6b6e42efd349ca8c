#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hpspin/experiment.hpp"

namespace fs = std::filesystem;
using namespace hpspin;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::size_t workers = 1;
  bool json_stdout = false;
  std::vector<std::string> sets;  // key=value overrides for params
};

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << bytes;
}

int report_errors(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "error: " << e << "\n";
  return 2;
}

/// --set key=value; values parse as JSON when possible, else as plain strings.
bool apply_set(json& params, const std::string& kv, std::vector<std::string>& errors) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back("--set expects key=value, got " + kv);
    return false;
  }
  const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
  try {
    params[key] = json::parse(val);
  } catch (const json::parse_error&) {
    params[key] = val;
  }
  return true;
}

int run_subcommand(Experiment e, const GlobalOptions& g) {
  std::vector<std::string> errors;
  json raw;
  if (!g.config_path.empty()) {
    std::ifstream f(g.config_path);
    if (!f) return report_errors({"cannot read config " + g.config_path});
    std::stringstream ss;
    ss << f.rdbuf();
    try {
      raw = json::parse(ss.str());
    } catch (const json::parse_error& ex) {
      return report_errors({std::string("config is not valid JSON: ") + ex.what()});
    }
    if (!raw.is_object()) return report_errors({"config must be a JSON object"});
    if (raw.contains("experiment") && raw["experiment"] != to_string(e))
      return report_errors({"config experiment " + raw["experiment"].dump() + " does not match subcommand " +
                            to_string(e)});
  } else {
    raw = json::object();
  }
  raw["experiment"] = to_string(e);
  if (!g.sets.empty()) {
    json params = raw.contains("params") ? raw["params"] : json::object();
    for (const auto& kv : g.sets) apply_set(params, kv, errors);
    raw["params"] = params;
  }
  if (!errors.empty()) return report_errors(errors);
  auto parsed = parse_config(raw);
  if (!parsed.config) return report_errors(parsed.errors);
  ExperimentConfig cfg = *parsed.config;
  if (g.seed) cfg.seed = *g.seed;
  const auto problems = validate(cfg);
  if (!problems.empty()) return report_errors(problems);

  ResultRecord rec;
  int code = 0;
  try {
    rec = run(cfg, g.workers);
  } catch (const ValidationError& ex) {
    return report_errors(ex.errors());
  } catch (const GuardTrip& ex) {
    rec.guard_trip = ex.what();
    rec.summary = {{"guard_trip", ex.what()}};
    rec.csv_schema = to_string(e) + "/1";
    code = 3;
  } catch (const DomainError& ex) {
    return report_errors({ex.what()});
  }
  if (rec.guard_trip) code = 3;

  const fs::path out(g.out_dir);
  fs::create_directories(out);
  const json results = rec.results_json(cfg);
  write_file(out / "config.json", to_json(cfg).dump(2) + "\n");
  write_file(out / "results.json", results.dump(2) + "\n");
  if (!rec.csv.header.empty()) write_file(out / "results.csv", rec.csv.str());
  for (const auto& [name, bytes] : rec.extra_files) write_file(out / name, bytes);
  if (g.json_stdout) std::cout << results.dump(2) << "\n";
  else std::cout << to_string(e) << ": wrote " << out.string() << (code == 3 ? " (guard trip)" : "") << "\n";
  if (rec.guard_trip) std::cerr << "guard trip: " << *rec.guard_trip << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heavy-tailed mixed p-spin spherical model experiments"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--json", g.json_stdout, "Print results.json to stdout");
  app.add_option("--set", g.sets, "Override a params entry, key=value (repeatable)");
  app.set_version_flag("--version", kToolVersion);

  std::vector<std::pair<CLI::App*, Experiment>> subs;
  for (const auto& [e, name] : experiment_names()) subs.emplace_back(app.add_subcommand(name, "Run " + name), e);
  for (auto& [sub, e] : subs) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int rc = app.exit(ex);
    return rc == 0 ? 0 : 2;
  }
  if (seed_opt->count()) g.seed = seed;
  try {
    for (auto& [sub, e] : subs)
      if (sub->parsed()) return run_subcommand(e, g);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
