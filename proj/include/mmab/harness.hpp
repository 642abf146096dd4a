#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmab/arena.hpp"
#include "mmab/sic_mmab.hpp"

namespace mmab {

/// Arm means given explicitly or by a generator.
///  "linear": K means evenly spaced from `from` down to `to`.
///  "gap":    mu_k = from - k * gap.
struct MeansGenerator {
  std::string type = "linear";
  double from = 0.9;
  double to = 0.1;
  double gap = 0.0;

  bool operator==(const MeansGenerator&) const = default;
};

struct InstanceSpec {
  int arms = 1;
  std::optional<std::vector<double>> means;
  std::optional<MeansGenerator> generator;
  ArmFamily family = ArmFamily::Bernoulli;
  std::int64_t horizon = 1;
  /// Defaults to the first algorithm's natural feedback mode.
  std::optional<Feedback> feedback;

  bool operator==(const InstanceSpec&) const = default;
};

struct AlgorithmSpec {
  /// sic-mmab | sic-mmab2 | dyn-mmab | selfish | oracle
  std::string name = "sic-mmab";
  SicVariant variant = SicVariant::Bernoulli;
  std::optional<double> mu_min;
  double block_scale = 2400.0;

  bool operator==(const AlgorithmSpec&) const = default;
};

struct ExperimentConfig {
  InstanceSpec instance;
  /// One algorithm shared by all players, or one per player.
  std::vector<AlgorithmSpec> algorithms{AlgorithmSpec{}};
  std::vector<std::int64_t> entries{0};
  int runs = 1;
  std::uint64_t seed = 0;
  std::string output;
  /// 0 = hardware concurrency.
  int threads = 0;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys, wrong types and invalid values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<double> resolve_means(const InstanceSpec& spec);
BanditInstance build_instance(const ExperimentConfig& config);
Feedback natural_feedback(const std::string& algorithm);

/// Seed of run i: hash(master, i).
std::uint64_t run_seed(std::uint64_t master, int run);

/// Fresh policies for one episode; player j draws from stream (seed, "player", j).
PolicySet make_policies(const ExperimentConfig& config, const BanditInstance& instance,
                        std::uint64_t seed);

/// Powers of two up to T, plus T.
std::vector<std::int64_t> checkpoint_grid(std::int64_t horizon);

/// True when the exploited arms are exactly the top-M arms, one exploiter each.
bool selects_top_arms(const BanditInstance& instance,
                      const std::vector<std::optional<ArmId>>& exploit);

struct RunSummary {
  int run_id = 0;
  std::uint64_t seed = 0;
  std::vector<double> regret;             // at checkpoints
  std::vector<std::int64_t> collisions;   // cumulative, at checkpoints
  std::vector<std::string> phase;         // phase tags at checkpoints
  double final_regret = 0.0;
  double final_realized_regret = 0.0;
  bool flagged = false;
  bool selected = false;
  std::vector<std::optional<ArmId>> exploit;
  std::map<std::string, std::int64_t> collisions_by_phase;
};

RunSummary run_single(const ExperimentConfig& config, int run_id);

struct AggregateReport {
  int runs = 0;
  int flagged_runs = 0;
  std::vector<std::int64_t> checkpoints;
  std::vector<double> mean_regret, std_regret;
  /// Excluding flagged runs.
  std::vector<double> mean_regret_valid, std_regret_valid;
  double mean_final_regret = 0.0;
  double mean_final_realized_regret = 0.0;
  double init_failure_rate = 0.0;
  double selection_success_rate = 0.0;
  /// Mean number of colliding pulls per run, keyed by phase tag.
  std::map<std::string, double> collisions_by_phase;
  /// Frequency of each final exploitation map ("a0,a1,..." with '-' when not exploiting).
  std::map<std::string, double> exploitation_maps;

  bool operator==(const AggregateReport&) const = default;
};

/// Order-independent reduction of per-run summaries (sorted by run id first).
AggregateReport aggregate(std::vector<RunSummary> runs, std::vector<std::int64_t> checkpoints);

nlohmann::json to_json(const AggregateReport& report);
AggregateReport report_from_json(const nlohmann::json& j);

struct BatchResult {
  std::vector<RunSummary> runs;
  AggregateReport report;
};

/// R independent seeded episodes on a worker pool, then aggregation.
BatchResult run_batch(const ExperimentConfig& config);

void write_runs_csv(std::ostream& os, const std::vector<RunSummary>& runs,
                    const std::vector<std::int64_t>& checkpoints);
void write_regret_curve(std::ostream& os, const AggregateReport& report);

struct SweepRow {
  double gap = 0.0;
  AggregateReport report;
};
void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows);

/// Writes runs.csv, summary.json and regret_vs_time.csv into `dir`.
void write_batch_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                         const BatchResult& batch);
/// Regret-vs-time series for a finished report.
void emit_plot_data(const std::filesystem::path& dir, const AggregateReport& report);

/// Runs the batch once per value, overriding `param` (gap | horizon | runs).
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& param,
                                const std::vector<double>& values,
                                const std::filesystem::path& out_dir);

}  // namespace mmab
