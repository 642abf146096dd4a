#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mmab/harness.hpp"

namespace {

mmab::ExperimentConfig with_overrides(mmab::ExperimentConfig c, const std::optional<int>& runs,
                                      const std::optional<std::uint64_t>& seed,
                                      const std::string& algo, const std::string& out,
                                      const std::optional<int>& threads) {
  if (runs) c.runs = *runs;
  if (seed) c.seed = *seed;
  if (!algo.empty()) {
    mmab::AlgorithmSpec spec = c.algorithms.front();
    spec.name = algo;
    c.algorithms.assign(1, spec);
    if (!c.instance.feedback) c.instance.feedback = mmab::natural_feedback(algo);
  }
  if (!out.empty()) c.output = out;
  if (threads) c.threads = *threads;
  if (c.runs < 1) throw mmab::ConfigError("--runs must be >= 1");
  return c;
}

void print_summary(const mmab::AggregateReport& r) {
  std::printf("runs=%d flagged=%d mean_final_regret=%.6g init_failure_rate=%.6g "
              "selection_success_rate=%.6g\n",
              r.runs, r.flagged_runs, r.mean_final_regret, r.init_failure_rate,
              r.selection_success_rate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized multiplayer bandit simulator"};
  app.require_subcommand(1);

  std::string config_path, algo, out, in_dir, param;
  std::optional<int> runs, threads;
  std::optional<std::uint64_t> seed;
  std::vector<double> values;

  auto* run = app.add_subcommand("run", "Run a seeded batch of episodes");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--runs", runs, "Number of runs");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--algo", algo, "Algorithm for every player")
      ->check(CLI::IsMember({"sic-mmab", "sic-mmab2", "dyn-mmab", "selfish", "oracle"}));
  run->add_option("--out", out, "Output directory");
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* sweep = app.add_subcommand("sweep", "Repeat a batch over parameter values");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "Swept parameter")
      ->required()
      ->check(CLI::IsMember({"gap", "horizon", "runs"}));
  sweep->add_option("--values", values, "Parameter values")->required();
  sweep->add_option("--runs", runs, "Number of runs");
  sweep->add_option("--seed", seed, "Master seed");
  sweep->add_option("--algo", algo, "Algorithm for every player");
  sweep->add_option("--out", out, "Output directory");
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* report = app.add_subcommand("report", "Print a stored summary");
  report->add_option("--in", in_dir, "Directory holding summary.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = with_overrides(mmab::load_config(config_path), runs, seed, algo, out, threads);
      const auto batch = mmab::run_batch(config);
      if (!config.output.empty()) mmab::write_batch_outputs(config.output, config, batch);
      print_summary(batch.report);
    } else if (*sweep) {
      auto config = with_overrides(mmab::load_config(config_path), runs, seed, algo, out, threads);
      const auto rows = mmab::run_sweep(config, param, values, config.output);
      mmab::write_sweep_table(std::cout, rows);
    } else if (*report) {
      std::ifstream in(std::filesystem::path(in_dir) / "summary.json");
      if (!in) throw mmab::ConfigError("no summary.json in " + in_dir);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw mmab::ConfigError(std::string("malformed summary.json: ") + e.what());
      }
      if (!j.contains("report")) throw mmab::ConfigError("summary.json has no report");
      const auto r = mmab::report_from_json(j.at("report"));
      print_summary(r);
      mmab::write_regret_curve(std::cout, r);
    }
  } catch (const mmab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const mmab::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
