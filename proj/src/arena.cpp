#include "mmab/arena.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <cstdio>
#include <random>

#include "json.hpp"

namespace mmab {

std::string_view to_string(Feedback f) {
  return f == Feedback::CollisionSensing ? "collision-sensing" : "no-sensing";
}

std::string_view to_string(ArmFamily f) {
  return f == ArmFamily::Bernoulli ? "bernoulli" : "bounded-general";
}

Feedback parse_feedback(std::string_view s) {
  if (s == "collision-sensing") return Feedback::CollisionSensing;
  if (s == "no-sensing") return Feedback::NoSensing;
  throw ConfigError("unknown feedback mode '" + std::string(s) + "'");
}

ArmFamily parse_family(std::string_view s) {
  if (s == "bernoulli") return ArmFamily::Bernoulli;
  if (s == "bounded-general") return ArmFamily::BoundedGeneral;
  throw ConfigError("unknown distribution family '" + std::string(s) + "'");
}

bool BanditInstance::is_static() const {
  return std::all_of(entries.begin(), entries.end(), [](auto e) { return e == 0; });
}

void BanditInstance::validate() const {
  if (means.empty()) throw ConfigError("instance needs at least one arm");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (entries.empty()) throw ConfigError("instance needs at least one player");
  if (players() > arms()) throw ConfigError("more players than arms (M > K)");
  for (double mu : means) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw ConfigError("arm means must lie in [0, 1]");
  }
  for (auto e : entries) {
    if (e < 0 || e >= horizon) throw ConfigError("entry times must lie in [0, T)");
  }
}

ArmSampler::ArmSampler(const BanditInstance& instance, std::uint64_t env_key)
    : instance_(&instance), key_(env_key) {}

double ArmSampler::draw(std::int64_t t, ArmId k) const {
  const std::uint64_t counter = hash_combine(hash_combine(key_, static_cast<std::uint64_t>(t)),
                                             static_cast<std::uint64_t>(k));
  const double mu = instance_->means[static_cast<std::size_t>(k)];
  if (instance_->family == ArmFamily::Bernoulli) {
    return to_unit(counter) < mu ? 1.0 : 0.0;
  }
  if (mu <= 0.0 || mu >= 1.0) return mu;
  SplitMix64 gen{counter};
  std::gamma_distribution<double> ga(kBoundedConcentration * mu, 1.0);
  std::gamma_distribution<double> gb(kBoundedConcentration * (1.0 - mu), 1.0);
  const double a = ga(gen);
  const double b = gb(gen);
  const double x = a + b > 0.0 ? a / (a + b) : mu;
  return std::clamp(x, 0.0, 1.0);
}

void resolve_round_into(const BanditInstance& instance, const ArmSampler& sampler,
                        std::int64_t t, std::span<const ArmId> arms, RoundResult& out) {
  const int K = instance.arms();
  out.t = t;
  out.pulls.clear();
  out.raw_draws.resize(static_cast<std::size_t>(K));
  out.eta.assign(static_cast<std::size_t>(K), 0);

  // Pull counts C_k(t) reuse eta as a saturating counter before the pass below.
  for (std::size_t j = 0; j < arms.size(); ++j) {
    const ArmId a = arms[j];
    if (a == kNoArm) continue;
    if (a < 0 || a >= K) {
      throw ConfigError("player " + std::to_string(j) + " pulled arm " + std::to_string(a) +
                        " outside [0, " + std::to_string(K) + ")");
    }
    auto& c = out.eta[static_cast<std::size_t>(a)];
    if (c < 2) ++c;
  }
  for (int k = 0; k < K; ++k) {
    out.raw_draws[static_cast<std::size_t>(k)] = sampler.draw(t, k);
    out.eta[static_cast<std::size_t>(k)] = out.eta[static_cast<std::size_t>(k)] >= 2 ? 1 : 0;
  }
  for (std::size_t j = 0; j < arms.size(); ++j) {
    const ArmId a = arms[j];
    if (a == kNoArm) continue;
    const bool hit = out.eta[static_cast<std::size_t>(a)] != 0;
    const double x = out.raw_draws[static_cast<std::size_t>(a)];
    out.pulls.push_back(Pull{static_cast<int>(j), a, x * (hit ? 0.0 : 1.0), hit, {}});
  }
}

RoundResult resolve_round(const BanditInstance& instance, const ArmSampler& sampler,
                          std::int64_t t, std::span<const ArmId> arms) {
  RoundResult r;
  resolve_round_into(instance, sampler, t, arms, r);
  return r;
}

Observation feedback_view(const RoundResult& round, Feedback mode, int player,
                          std::int64_t entry) {
  auto it = std::find_if(round.pulls.begin(), round.pulls.end(),
                         [player](const Pull& p) { return p.player == player; });
  if (it == round.pulls.end()) {
    throw ProtocolError("player " + std::to_string(player) + " did not pull in round " +
                        std::to_string(round.t));
  }
  Observation obs;
  obs.reward = it->reward;
  obs.personal_time = round.t - entry;
  if (mode == Feedback::CollisionSensing) obs.collision = it->collided;
  return obs;
}

std::string to_json_line(const Observation& obs) {
  nlohmann::json j;
  j["reward"] = obs.reward;
  j["personal_time"] = obs.personal_time;
  if (obs.collision) j["collision"] = *obs.collision;
  return j.dump();
}

double top_sum(std::span<const double> sorted_desc, int m) {
  double s = 0.0;
  for (int k = 0; k < m && k < static_cast<int>(sorted_desc.size()); ++k) {
    s += sorted_desc[static_cast<std::size_t>(k)];
  }
  return s;
}

namespace {

std::vector<double> sorted_means(const BanditInstance& instance) {
  std::vector<double> v = instance.means;
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

struct RoundAccount {
  double pseudo = 0.0;
  double realized = 0.0;
  int collisions = 0;
};

RoundAccount account(const BanditInstance& instance, std::span<const double> sorted_desc,
                     const RoundResult& round) {
  // Termwise differences between the k-th largest optimal and earned means are
  // each >= 0, so the increment is exactly 0 for an oracle allocation and never
  // negative through rounding.
  thread_local std::vector<double> earned_means;
  earned_means.clear();
  RoundAccount acc;
  double earned = 0.0;
  for (const Pull& p : round.pulls) {
    earned_means.push_back(p.collided ? 0.0 : instance.means[static_cast<std::size_t>(p.arm)]);
    earned += p.reward;
  }
  std::sort(earned_means.begin(), earned_means.end(), std::greater<>());
  const double best = top_sum(sorted_desc, static_cast<int>(round.pulls.size()));
  for (std::size_t k = 0; k < earned_means.size() && k < sorted_desc.size(); ++k) {
    acc.pseudo += sorted_desc[k] - earned_means[k];
  }
  acc.realized = best - earned;
  for (auto e : round.eta) acc.collisions += e;
  return acc;
}

}  // namespace

double round_pseudo_regret(const BanditInstance& instance,
                           std::span<const double> sorted_desc, const RoundResult& round) {
  return account(instance, sorted_desc, round).pseudo;
}

RegretLedger pseudo_regret(std::span<const RoundResult> trace, const BanditInstance& instance) {
  const auto sorted = sorted_means(instance);
  RegretLedger ledger;
  ledger.cum_regret.reserve(trace.size());
  double cum = 0.0;
  double cum_real = 0.0;
  for (const RoundResult& r : trace) {
    const auto acc = account(instance, sorted, r);
    cum += acc.pseudo;
    cum_real += acc.realized;
    ledger.cum_regret.push_back(cum);
    ledger.cum_realized_regret.push_back(cum_real);
    ledger.collisions.push_back(acc.collisions);
  }
  return ledger;
}

EpisodeResult run_episode(const BanditInstance& instance,
                          std::span<const std::unique_ptr<Policy>> policies, std::uint64_t seed,
                          const EpisodeOptions& options) {
  instance.validate();
  if (static_cast<int>(policies.size()) != instance.players()) {
    throw ConfigError("need exactly one policy per entry");
  }
  const ArmSampler sampler(instance, stream_key(seed, "environment", 0));
  const auto sorted = sorted_means(instance);
  const std::int64_t T = std::min(instance.horizon, options.max_rounds.value_or(instance.horizon));

  EpisodeResult result;
  auto& ledger = result.ledger;
  ledger.cum_regret.reserve(static_cast<std::size_t>(T));
  ledger.cum_realized_regret.reserve(static_cast<std::size_t>(T));
  ledger.collisions.reserve(static_cast<std::size_t>(T));
  if (options.keep_trace) result.trace.reserve(static_cast<std::size_t>(T));

  const std::size_t M = policies.size();
  std::vector<ArmId> arms(M, kNoArm);
  RoundResult round;
  double cum = 0.0;
  double cum_real = 0.0;

  for (std::int64_t t = 1; t <= T; ++t) {
    for (std::size_t j = 0; j < M; ++j) {
      const auto entry = instance.entries[j];
      if (entry < t) {
        const ArmId a = policies[j]->choose(t - entry);
        if (a == kNoArm) {
          throw ProtocolError("player " + std::to_string(j) + " returned no arm at t=" +
                              std::to_string(t));
        }
        arms[j] = a;
      } else {
        arms[j] = kNoArm;
      }
    }
    resolve_round_into(instance, sampler, t, arms, round);
    for (Pull& p : round.pulls) {
      p.phase = policies[static_cast<std::size_t>(p.player)]->phase();
    }
    for (const Pull& p : round.pulls) {
      Observation obs;
      obs.reward = p.reward;
      obs.personal_time = t - instance.entries[static_cast<std::size_t>(p.player)];
      if (instance.feedback == Feedback::CollisionSensing) obs.collision = p.collided;
      policies[static_cast<std::size_t>(p.player)]->observe(obs);
    }

    const auto acc = account(instance, sorted, round);
    cum += acc.pseudo;
    cum_real += acc.realized;
    ledger.cum_regret.push_back(cum);
    ledger.cum_realized_regret.push_back(cum_real);
    ledger.collisions.push_back(acc.collisions);

    if (options.on_round) options.on_round(round, policies);
    if (options.keep_trace) result.trace.push_back(round);
  }

  ledger.exploit_arm.reserve(M);
  for (const auto& p : policies) ledger.exploit_arm.push_back(p->exploiting_arm());
  return result;
}

void write_trace_jsonl(std::ostream& os, std::span<const RoundResult> trace) {
  for (const RoundResult& r : trace) {
    nlohmann::json line;
    line["t"] = r.t;
    auto pulls = nlohmann::json::array();
    for (const Pull& p : r.pulls) {
      pulls.push_back({{"player", p.player},
                       {"arm", p.arm},
                       {"reward", p.reward},
                       {"eta", p.collided ? 1 : 0},
                       {"phase", std::string(p.phase)}});
    }
    line["pulls"] = std::move(pulls);
    line["raw_draws"] = r.raw_draws;
    line["eta"] = r.eta;
    os << line.dump() << '\n';
  }
}

void write_ledger_csv(std::ostream& os, const RegretLedger& ledger) {
  os << "t,cum_regret,collisions\n";
  char buf[64];
  for (std::size_t i = 0; i < ledger.cum_regret.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", ledger.cum_regret[i]);
    os << (i + 1) << ',' << buf << ',' << ledger.collisions[i] << '\n';
  }
}

}  // namespace mmab
