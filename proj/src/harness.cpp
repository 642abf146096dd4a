#include "mmab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "mmab/baselines.hpp"
#include "mmab/dyn_mmab.hpp"
#include "mmab/sic_mmab2.hpp"

namespace mmab {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
T get(const json& j, const char* key, std::string_view where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key, std::string_view where) {
  if (!j.contains(key)) return std::nullopt;
  return get<T>(j, key, where);
}

std::string_view to_string(SicVariant v) { return v == SicVariant::General ? "general" : "bernoulli"; }

SicVariant parse_variant(const std::string& s) {
  if (s == "general") return SicVariant::General;
  if (s == "bernoulli") return SicVariant::Bernoulli;
  throw ConfigError("unknown SIC-MMAB variant '" + s + "'");
}

const std::set<std::string>& algorithm_names() {
  static const std::set<std::string> names{"sic-mmab", "sic-mmab2", "dyn-mmab", "selfish",
                                           "oracle"};
  return names;
}

json algo_to_json(const AlgorithmSpec& a) {
  json j{{"name", a.name}, {"variant", to_string(a.variant)}, {"block_scale", a.block_scale}};
  if (a.mu_min) j["mu_min"] = *a.mu_min;
  return j;
}

AlgorithmSpec algo_from_json(const json& j) {
  reject_unknown(j, {"name", "variant", "mu_min", "block_scale"}, "algorithm");
  AlgorithmSpec a;
  a.name = get<std::string>(j, "name", "algorithm");
  if (!algorithm_names().contains(a.name)) throw ConfigError("unknown algorithm '" + a.name + "'");
  if (auto v = get_opt<std::string>(j, "variant", "algorithm")) a.variant = parse_variant(*v);
  a.mu_min = get_opt<double>(j, "mu_min", "algorithm");
  if (auto s = get_opt<double>(j, "block_scale", "algorithm")) a.block_scale = *s;
  return a;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string exploit_key(const std::vector<std::optional<ArmId>>& exploit) {
  std::string key;
  for (std::size_t j = 0; j < exploit.size(); ++j) {
    if (j) key += ',';
    key += exploit[j] ? std::to_string(*exploit[j]) : "-";
  }
  return key;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json inst{{"arms", c.instance.arms},
            {"distribution", to_string(c.instance.family)},
            {"horizon", c.instance.horizon}};
  if (c.instance.means) inst["means"] = *c.instance.means;
  if (c.instance.generator) {
    const auto& g = *c.instance.generator;
    inst["generator"] = {{"type", g.type}, {"from", g.from}, {"to", g.to}, {"gap", g.gap}};
  }
  if (c.instance.feedback) inst["feedback"] = to_string(*c.instance.feedback);

  json algos = json::array();
  for (const auto& a : c.algorithms) algos.push_back(algo_to_json(a));
  json j{{"instance", inst},   {"algorithm", algos}, {"entries", c.entries},
         {"runs", c.runs},     {"seed", c.seed},     {"output", c.output},
         {"threads", c.threads}};
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"instance", "algorithm", "entries", "players", "runs", "seed", "output",
                     "threads"},
                 "config");
  ExperimentConfig c;
  const json& inst = j.at("instance");
  reject_unknown(inst, {"arms", "means", "generator", "distribution", "horizon", "feedback"},
                 "instance");
  c.instance.horizon = get<std::int64_t>(inst, "horizon", "instance");
  c.instance.means = get_opt<std::vector<double>>(inst, "means", "instance");
  if (inst.contains("generator")) {
    const json& g = inst.at("generator");
    reject_unknown(g, {"type", "from", "to", "gap"}, "generator");
    MeansGenerator gen;
    gen.type = get<std::string>(g, "type", "generator");
    if (gen.type != "linear" && gen.type != "gap") {
      throw ConfigError("unknown means generator '" + gen.type + "'");
    }
    gen.from = get_opt<double>(g, "from", "generator").value_or(gen.from);
    gen.to = get_opt<double>(g, "to", "generator").value_or(gen.to);
    gen.gap = get_opt<double>(g, "gap", "generator").value_or(gen.gap);
    c.instance.generator = gen;
  }
  if (c.instance.means.has_value() == c.instance.generator.has_value()) {
    throw ConfigError("instance needs exactly one of 'means' or 'generator'");
  }
  if (auto k = get_opt<int>(inst, "arms", "instance")) {
    c.instance.arms = *k;
  } else if (c.instance.means) {
    c.instance.arms = static_cast<int>(c.instance.means->size());
  } else {
    throw ConfigError("instance.arms is required with a generator");
  }
  if (c.instance.means && static_cast<int>(c.instance.means->size()) != c.instance.arms) {
    throw ConfigError("instance.arms does not match the number of means");
  }
  if (auto d = get_opt<std::string>(inst, "distribution", "instance")) {
    c.instance.family = parse_family(*d);
  }
  if (auto f = get_opt<std::string>(inst, "feedback", "instance")) {
    c.instance.feedback = parse_feedback(*f);
  }

  if (!j.contains("algorithm")) throw ConfigError("config.algorithm is required");
  const json& algo = j.at("algorithm");
  c.algorithms.clear();
  if (algo.is_array()) {
    for (const auto& a : algo) c.algorithms.push_back(algo_from_json(a));
  } else {
    c.algorithms.push_back(algo_from_json(algo));
  }
  if (c.algorithms.empty()) throw ConfigError("config.algorithm must not be empty");

  if (j.contains("entries")) {
    c.entries = get<std::vector<std::int64_t>>(j, "entries", "config");
    if (j.contains("players") &&
        get<int>(j, "players", "config") != static_cast<int>(c.entries.size())) {
      throw ConfigError("config.players does not match the number of entries");
    }
  } else if (j.contains("players")) {
    c.entries.assign(static_cast<std::size_t>(get<int>(j, "players", "config")), 0);
  } else {
    throw ConfigError("config needs 'entries' or 'players'");
  }
  if (c.algorithms.size() != 1 && c.algorithms.size() != c.entries.size()) {
    throw ConfigError("need one algorithm for all players or one per player");
  }
  c.runs = get_opt<int>(j, "runs", "config").value_or(1);
  c.seed = get_opt<std::uint64_t>(j, "seed", "config").value_or(0);
  c.output = get_opt<std::string>(j, "output", "config").value_or("");
  c.threads = get_opt<int>(j, "threads", "config").value_or(0);
  if (c.runs < 1) throw ConfigError("config.runs must be >= 1");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::vector<double> resolve_means(const InstanceSpec& spec) {
  if (spec.means) return *spec.means;
  const auto& g = *spec.generator;
  std::vector<double> out(static_cast<std::size_t>(spec.arms));
  for (int k = 0; k < spec.arms; ++k) {
    if (g.type == "gap") {
      out[static_cast<std::size_t>(k)] = g.from - k * g.gap;
    } else {
      out[static_cast<std::size_t>(k)] =
          spec.arms == 1 ? g.from : g.from + (g.to - g.from) * k / (spec.arms - 1);
    }
  }
  return out;
}

Feedback natural_feedback(const std::string& algorithm) {
  return algorithm == "sic-mmab" || algorithm == "oracle" ? Feedback::CollisionSensing
                                                          : Feedback::NoSensing;
}

BanditInstance build_instance(const ExperimentConfig& config) {
  BanditInstance inst;
  inst.means = resolve_means(config.instance);
  inst.family = config.instance.family;
  inst.horizon = config.instance.horizon;
  inst.entries = config.entries;
  inst.feedback = config.instance.feedback.value_or(natural_feedback(config.algorithms.front().name));
  inst.validate();
  for (const auto& a : config.algorithms) {
    if ((a.name == "sic-mmab" || a.name == "sic-mmab2") && !inst.is_static()) {
      throw ConfigError(a.name + " requires all players to enter at t = 0");
    }
    if (a.name == "sic-mmab" && inst.feedback != Feedback::CollisionSensing) {
      throw ConfigError("sic-mmab requires collision-sensing feedback");
    }
  }
  return inst;
}

std::uint64_t run_seed(std::uint64_t master, int run) {
  return hash_combine(master, static_cast<std::uint64_t>(run));
}

PolicySet make_policies(const ExperimentConfig& config, const BanditInstance& instance,
                        std::uint64_t seed) {
  PolicySet set;
  const int M = instance.players();
  const int K = instance.arms();
  std::vector<ArmId> pinned;
  for (int j = 0; j < M; ++j) {
    const auto& a = config.algorithms.size() == 1 ? config.algorithms.front()
                                                  : config.algorithms[static_cast<std::size_t>(j)];
    Rng rng = make_stream(seed, "player", static_cast<std::uint64_t>(j));
    if (a.name == "sic-mmab") {
      set.push_back(std::make_unique<SicMmabPolicy>(SicConfig{a.variant, instance.horizon, K, {}},
                                                    std::move(rng)));
    } else if (a.name == "sic-mmab2") {
      const double mu_min = a.mu_min.value_or(
          *std::min_element(instance.means.begin(), instance.means.end()));
      set.push_back(std::make_unique<SicMmab2Policy>(
          Sic2Config{instance.horizon, K, mu_min, a.block_scale, 0.5}, std::move(rng)));
    } else if (a.name == "dyn-mmab") {
      set.push_back(std::make_unique<DynMmabPolicy>(
          DynConfig{K, instance.horizon - instance.entries[static_cast<std::size_t>(j)]},
          std::move(rng)));
    } else if (a.name == "selfish") {
      set.push_back(std::make_unique<SelfishUcbPolicy>(K, std::move(rng)));
    } else if (a.name == "oracle") {
      if (pinned.empty()) pinned = oracle_assignment(instance);
      set.push_back(std::make_unique<PinnedPolicy>(pinned[static_cast<std::size_t>(j)]));
    } else {
      throw ConfigError("unknown algorithm '" + a.name + "'");
    }
  }
  return set;
}

std::vector<std::int64_t> checkpoint_grid(std::int64_t horizon) {
  std::vector<std::int64_t> grid;
  for (std::int64_t t = 1; t < horizon; t *= 2) grid.push_back(t);
  grid.push_back(horizon);
  return grid;
}

bool selects_top_arms(const BanditInstance& instance,
                      const std::vector<std::optional<ArmId>>& exploit) {
  std::vector<ArmId> order(static_cast<std::size_t>(instance.arms()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ArmId a, ArmId b) {
    return instance.means[static_cast<std::size_t>(a)] > instance.means[static_cast<std::size_t>(b)];
  });
  std::vector<ArmId> chosen;
  for (const auto& e : exploit) {
    if (!e) return false;
    chosen.push_back(*e);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<ArmId> top(order.begin(), order.begin() + instance.players());
  std::sort(top.begin(), top.end());
  return chosen == top;
}

RunSummary run_single(const ExperimentConfig& config, int run_id) {
  const BanditInstance instance = build_instance(config);
  RunSummary s;
  s.run_id = run_id;
  s.seed = run_seed(config.seed, run_id);
  PolicySet policies = make_policies(config, instance, s.seed);

  const auto grid = checkpoint_grid(instance.horizon);
  std::size_t next = 0;
  std::int64_t cum_collisions = 0;
  EpisodeOptions opts;
  opts.on_round = [&](const RoundResult& round, std::span<const std::unique_ptr<Policy>>) {
    for (const Pull& p : round.pulls) {
      if (p.collided) {
        ++cum_collisions;
        ++s.collisions_by_phase[std::string(p.phase)];
      }
    }
    if (next < grid.size() && round.t == grid[next]) {
      std::string tags;
      for (const Pull& p : round.pulls) {
        if (!tags.empty()) tags += '|';
        tags += p.phase;
      }
      s.collisions.push_back(cum_collisions);
      s.phase.push_back(std::move(tags));
      ++next;
    }
  };
  const EpisodeResult ep = run_episode(instance, policies, s.seed, opts);
  for (auto t : grid) s.regret.push_back(ep.ledger.cum_regret[static_cast<std::size_t>(t - 1)]);
  s.final_regret = ep.ledger.final_regret();
  s.final_realized_regret = ep.ledger.cum_realized_regret.back();
  s.exploit = ep.ledger.exploit_arm;
  for (const auto& p : policies) {
    if (p->init_failed()) s.flagged = true;
    if (auto m = p->estimated_players(); m && *m != instance.players()) s.flagged = true;
  }
  s.selected = selects_top_arms(instance, s.exploit);
  return s;
}

AggregateReport aggregate(std::vector<RunSummary> runs, std::vector<std::int64_t> checkpoints) {
  std::sort(runs.begin(), runs.end(),
            [](const RunSummary& a, const RunSummary& b) { return a.run_id < b.run_id; });
  AggregateReport r;
  r.runs = static_cast<int>(runs.size());
  r.checkpoints = std::move(checkpoints);
  const std::size_t C = r.checkpoints.size();
  std::vector<double> column, valid, finals, finals_real;
  int selected = 0;
  for (std::size_t c = 0; c < C; ++c) {
    column.clear();
    valid.clear();
    for (const auto& s : runs) {
      column.push_back(s.regret[c]);
      if (!s.flagged) valid.push_back(s.regret[c]);
    }
    r.mean_regret.push_back(mean_of(column));
    r.std_regret.push_back(std_of(column));
    r.mean_regret_valid.push_back(mean_of(valid));
    r.std_regret_valid.push_back(std_of(valid));
  }
  for (const auto& s : runs) {
    finals.push_back(s.final_regret);
    finals_real.push_back(s.final_realized_regret);
    if (s.flagged) ++r.flagged_runs;
    if (s.selected) ++selected;
    for (const auto& [tag, n] : s.collisions_by_phase) {
      r.collisions_by_phase[tag] += static_cast<double>(n);
    }
    r.exploitation_maps[exploit_key(s.exploit)] += 1.0;
  }
  const double R = std::max(1, r.runs);
  for (auto& [_, v] : r.collisions_by_phase) v /= R;
  for (auto& [_, v] : r.exploitation_maps) v /= R;
  r.mean_final_regret = mean_of(finals);
  r.mean_final_realized_regret = mean_of(finals_real);
  r.init_failure_rate = r.flagged_runs / R;
  r.selection_success_rate = selected / R;
  return r;
}

json to_json(const AggregateReport& r) {
  return json{{"runs", r.runs},
              {"flagged_runs", r.flagged_runs},
              {"checkpoints", r.checkpoints},
              {"mean_regret", r.mean_regret},
              {"std_regret", r.std_regret},
              {"mean_regret_valid", r.mean_regret_valid},
              {"std_regret_valid", r.std_regret_valid},
              {"mean_final_regret", r.mean_final_regret},
              {"mean_final_realized_regret", r.mean_final_realized_regret},
              {"init_failure_rate", r.init_failure_rate},
              {"selection_success_rate", r.selection_success_rate},
              {"collisions_by_phase", r.collisions_by_phase},
              {"exploitation_maps", r.exploitation_maps}};
}

AggregateReport report_from_json(const json& j) {
  AggregateReport r;
  try {
    r.runs = j.at("runs").get<int>();
    r.flagged_runs = j.at("flagged_runs").get<int>();
    r.checkpoints = j.at("checkpoints").get<std::vector<std::int64_t>>();
    r.mean_regret = j.at("mean_regret").get<std::vector<double>>();
    r.std_regret = j.at("std_regret").get<std::vector<double>>();
    r.mean_regret_valid = j.at("mean_regret_valid").get<std::vector<double>>();
    r.std_regret_valid = j.at("std_regret_valid").get<std::vector<double>>();
    r.mean_final_regret = j.at("mean_final_regret").get<double>();
    r.mean_final_realized_regret = j.at("mean_final_realized_regret").get<double>();
    r.init_failure_rate = j.at("init_failure_rate").get<double>();
    r.selection_success_rate = j.at("selection_success_rate").get<double>();
    r.collisions_by_phase = j.at("collisions_by_phase").get<std::map<std::string, double>>();
    r.exploitation_maps = j.at("exploitation_maps").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

BatchResult run_batch(const ExperimentConfig& config) {
  const BanditInstance probe = build_instance(config);
  BatchResult out;
  out.runs.resize(static_cast<std::size_t>(config.runs));
  const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  const int workers = std::clamp(config.threads > 0 ? config.threads : static_cast<int>(hw), 1,
                                 config.runs);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (int i = next++; i < config.runs; i = next++) {
      try {
        out.runs[static_cast<std::size_t>(i)] = run_single(config, i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = config.runs;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  out.report = aggregate(out.runs, checkpoint_grid(probe.horizon));
  return out;
}

void write_runs_csv(std::ostream& os, const std::vector<RunSummary>& runs,
                    const std::vector<std::int64_t>& checkpoints) {
  os << "run_id,t,cum_regret,collisions,phase\n";
  for (const auto& s : runs) {
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      os << s.run_id << ',' << checkpoints[c] << ',' << fmt_double(s.regret[c]) << ','
         << (c < s.collisions.size() ? s.collisions[c] : 0) << ','
         << (c < s.phase.size() ? s.phase[c] : "") << '\n';
    }
  }
}

void write_regret_curve(std::ostream& os, const AggregateReport& r) {
  os << "t,mean_regret,std_regret,mean_regret_valid,std_regret_valid\n";
  for (std::size_t c = 0; c < r.checkpoints.size(); ++c) {
    os << r.checkpoints[c] << ',' << fmt_double(r.mean_regret[c]) << ','
       << fmt_double(r.std_regret[c]) << ',' << fmt_double(r.mean_regret_valid[c]) << ','
       << fmt_double(r.std_regret_valid[c]) << '\n';
  }
}

void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "inv_gap,gap,mean_final_regret,std_final_regret,runs\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << fmt_double(1.0 / row.gap) << ',' << fmt_double(row.gap) << ','
       << fmt_double(r.mean_final_regret) << ','
       << fmt_double(r.std_regret.empty() ? 0.0 : r.std_regret.back()) << ',' << r.runs << '\n';
  }
}

void emit_plot_data(const std::filesystem::path& dir, const AggregateReport& report) {
  std::filesystem::create_directories(dir);
  std::ofstream curve(dir / "regret_vs_time.csv", std::ios::binary);
  write_regret_curve(curve, report);
}

void write_batch_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                         const BatchResult& batch) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream runs(dir / "runs.csv", std::ios::binary);
    write_runs_csv(runs, batch.runs, batch.report.checkpoints);
  }
  {
    std::ofstream summary(dir / "summary.json", std::ios::binary);
    summary << json{{"config", to_json(config)}, {"report", to_json(batch.report)}}.dump(2)
            << '\n';
  }
  emit_plot_data(dir, batch.report);
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& param,
                                const std::vector<double>& values,
                                const std::filesystem::path& out_dir) {
  if (param != "gap" && param != "horizon" && param != "runs") {
    throw ConfigError("unsupported sweep parameter '" + param + "'");
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig c = config;
    const double v = values[i];
    double gap = 0.0;
    if (param == "gap") {
      if (!(v > 0.0)) throw ConfigError("sweep gaps must be positive");
      const auto means = resolve_means(c.instance);
      MeansGenerator g;
      g.type = "gap";
      g.from = *std::max_element(means.begin(), means.end());
      g.gap = v;
      c.instance.means.reset();
      c.instance.generator = g;
      gap = v;
    } else if (param == "horizon") {
      c.instance.horizon = static_cast<std::int64_t>(v);
    } else {
      c.runs = static_cast<int>(v);
    }
    if (gap == 0.0) {
      const auto means = resolve_means(c.instance);
      gap = means.size() > 1 ? std::abs(means[0] - means[1]) : 1.0;
    }
    BatchResult batch = run_batch(c);
    if (!out_dir.empty()) {
      write_batch_outputs(out_dir / ("value_" + std::to_string(i)), c, batch);
    }
    rows.push_back({gap, std::move(batch.report)});
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream table(out_dir / "final_regret_vs_inv_gap.csv", std::ios::binary);
    write_sweep_table(table, rows);
  }
  return rows;
}

}  // namespace mmab
