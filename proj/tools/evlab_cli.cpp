#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "evlab/harness.hpp"

namespace {

using evlab::ExperimentConfig;
using evlab::ExperimentKind;
using evlab::Json;

int run(const ExperimentConfig& config) {
  try {
    const evlab::RunRecord record = evlab::run_experiment(config);
    evlab::emit_report(record);
    std::cout << record.to_json().dump(2) << "\n";
    if (record.aggregate.contains("pass") && !record.aggregate["pass"].get<bool>()) return 2;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evlab: eigenvector statistics laboratory for complex i.i.d. matrices"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false;
  int threads = -1;
  bool print_defaults = false;

  app.add_option("--config", config_path, "JSON experiment configuration file");
  app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--threads", threads, "worker thread count (0 = hardware)");
  app.add_option("--out", out_dir, "output directory override")->each([&](const std::string&) {
    out_set = true;
  });
  app.add_flag("--print-defaults", print_defaults, "print the default configuration and exit");

  const char* kinds[] = {"sample",        "spectrum",   "verify-a1",       "verify-a2",
                         "verify-a3",     "rigidity",   "eth",             "level-repulsion",
                         "jacobian-check", "kq-ratio",  "evec-stats",      "mgf",
                         "independence",  "dse-table"};
  std::vector<CLI::App*> subs;
  for (const char* k : kinds) subs.push_back(app.add_subcommand(k, ""));

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig config;
  if (print_defaults) {
    std::cout << config.to_json().dump(2) << "\n";
    return 0;
  }
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << "error: cannot open config " << config_path << "\n";
      return 1;
    }
    Json j;
    f >> j;
    config = ExperimentConfig::from_json(j);
  }
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) config.kind = evlab::experiment_kind_from_string(kinds[i]);
  if (seed_set) config.master_seed = seed;
  if (threads >= 0) config.threads = threads;
  if (out_set) config.out_dir = out_dir;

  return run(config);
}
