#include "mmab/sic_mmab2.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iterator>
#include <numeric>

namespace mmab {

std::int64_t bit_slot_rounds(std::int64_t horizon, double mu_min) {
  return static_cast<std::int64_t>(std::ceil(std::log(static_cast<double>(horizon)) / mu_min));
}

std::int64_t base_block_rounds(std::int64_t horizon, double mu_min, double block_scale) {
  return static_cast<std::int64_t>(
      std::ceil(block_scale * std::log(static_cast<double>(horizon)) / mu_min));
}

void ArmStats::merge(const ArmStats& other) {
  for (std::size_t k = 0; k < sum.size() && k < other.sum.size(); ++k) {
    sum[k] += other.sum[k];
    count[k] += other.count[k];
  }
}

std::vector<ArmId> signal_detect(const ArmStats& exploration, const ArmStats& block,
                                 std::span<const ArmId> active_arms) {
  std::vector<ArmId> out;
  for (ArmId i : active_arms) {
    const auto ui = static_cast<std::size_t>(i);
    if (block.count[ui] <= 0.0) continue;
    assert(exploration.count[ui] > 0.0 && "arm has no exploration pulls");
    if (exploration.count[ui] <= 0.0) continue;
    const double mu_hat = exploration.sum[ui] / exploration.count[ui];
    const double r_hat = block.sum[ui] / block.count[ui];
    if (std::abs(mu_hat - r_hat) >= mu_hat / 4.0) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

NoSensingSets update_sets_nosensing(std::span<const ArmId> declared, const ArmStats& last_block,
                                    const NoSensingSets& sets) {
  NoSensingSets next;
  int optimal = 0;
  for (ArmId i : declared) {
    if (last_block.sum[static_cast<std::size_t>(i)] == 0.0) ++optimal;
  }
  next.active_players = sets.active_players - optimal;
  for (ArmId a : sets.active_arms) {
    if (std::find(declared.begin(), declared.end(), a) == declared.end()) {
      next.active_arms.push_back(a);
    }
  }
  return next;
}

namespace {

void add_all(std::vector<ArmId>& set, std::span<const ArmId> extra) {
  for (ArmId a : extra) {
    auto it = std::lower_bound(set.begin(), set.end(), a);
    if (it == set.end() || *it != a) set.insert(it, a);
  }
}

bool contains(std::span<const ArmId> sorted, ArmId a) {
  return std::binary_search(sorted.begin(), sorted.end(), a);
}

std::vector<ArmId> minus(std::span<const ArmId> a, std::span<const ArmId> b) {
  std::vector<ArmId> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

int index_of(std::span<const ArmId> arms, ArmId a) {
  auto it = std::find(arms.begin(), arms.end(), a);
  return it == arms.end() ? 0 : static_cast<int>(it - arms.begin());
}

}  // namespace

SicMmab2Policy::SicMmab2Policy(Sic2Config config, Rng rng)
    : config_(config), rng_(std::move(rng)), exploration_(config.arms) {
  if (config_.arms < 1) throw ConfigError("SIC-MMAB2 needs at least one arm");
  if (config_.horizon < 2) throw ConfigError("SIC-MMAB2 needs a horizon of at least 2");
  if (!(config_.mu_min > 0.0 && config_.mu_min <= 1.0)) {
    throw ConfigError("SIC-MMAB2 needs mu_min in (0, 1]");
  }
  if (!(config_.block_scale > 0.0)) throw ConfigError("block scale must be positive");
  slot_ = bit_slot_rounds(config_.horizon, config_.mu_min);
  base_ = base_block_rounds(config_.horizon, config_.mu_min, config_.block_scale);
}

Step<int> SicMmab2Policy::estimate_m_nosensing(ArmId external_rank) {
  const int K = config_.arms;
  const int rank1 = external_rank + 1;
  int players = 1;
  ArmId arm = external_rank;
  for (int n = 1; n <= 2 * K; ++n) {
    double total = 0.0;
    if (n >= 2 * rank1) arm = (arm + 1) % K;
    for (std::int64_t s = 0; s < slot_; ++s) {
      const Observation obs = co_await pull(arm);
      total += obs.reward;
    }
    if (total == 0.0) ++players;
  }
  co_return players;
}

Step<SicMmab2Policy::BlockOutcome> SicMmab2Policy::declare_block(ArmId arm,
                                                                  std::span<const ArmId> active,
                                                                  std::int64_t length,
                                                                  int& cursor) {
  const int Kp = static_cast<int>(active.size());
  BlockOutcome out{{}, ArmStats(config_.arms), std::nullopt};
  for (std::int64_t s = 0; s < length; ++s) {
    const ArmId i = uniform01(rng_) < config_.declare_prob
                        ? arm
                        : active[static_cast<std::size_t>(cursor)];
    const Observation obs = co_await pull(i);
    out.stats.add(i, obs.reward);
    cursor = (cursor + 1) % Kp;
  }
  out.signaled = signal_detect(exploration_, out.stats, active);
  add_all(out.signaled, std::span<const ArmId>(&arm, 1));
  co_return out;
}

Step<SicMmab2Policy::BlockOutcome> SicMmab2Policy::occupy_block(std::span<const ArmId> candidates,
                                                                 std::span<const ArmId> active,
                                                                 std::int64_t length,
                                                                 int& cursor) {
  const int Kp = static_cast<int>(active.size());
  BlockOutcome out{{}, ArmStats(config_.arms), std::nullopt};
  for (std::int64_t s = 0; s < length; ++s) {
    if (out.fixed) {
      co_await pull(*out.fixed);
      continue;
    }
    const ArmId arm = active[static_cast<std::size_t>(cursor)];
    const Observation obs = co_await pull(arm);
    if (contains(candidates, arm) && obs.reward > 0.0) out.fixed = arm;
    out.stats.add(arm, obs.reward);
    cursor = (cursor + 1) % Kp;
  }
  out.signaled = signal_detect(exploration_, out.stats, active);
  co_return out;
}

Step<SicMmab2Policy::BlockOutcome> SicMmab2Policy::receive_block(std::span<const ArmId> active,
                                                                  std::int64_t length,
                                                                  int& cursor) {
  const int Kp = static_cast<int>(active.size());
  BlockOutcome out{{}, ArmStats(config_.arms), std::nullopt};
  for (std::int64_t s = 0; s < length; ++s) {
    const ArmId arm = active[static_cast<std::size_t>(cursor)];
    const Observation obs = co_await pull(arm);
    out.stats.add(arm, obs.reward);
    cursor = (cursor + 1) % Kp;
  }
  out.signaled = signal_detect(exploration_, out.stats, active);
  co_return out;
}

Step<Done> SicMmab2Policy::body() {
  const int K = config_.arms;
  const double T = static_cast<double>(config_.horizon);
  std::vector<ArmId> all(static_cast<std::size_t>(K));
  std::iota(all.begin(), all.end(), 0);

  set_phase("init-mc");
  ArmId rank = co_await musical_chairs(channel(), all, static_cast<std::int64_t>(K) * slot_,
                                       Feedback::NoSensing, rng_);
  if (rank == kNoArm) {
    init_failed_ = true;
    rank = channel().pending;
  }
  external_rank_ = rank;

  set_phase("init-estim");
  const int M = co_await estimate_m_nosensing(rank);
  estimated_players_ = M;

  NoSensingSets sets{std::min(M, K), all};
  std::vector<ArmId> declared;
  std::int64_t block_len = 0;
  ArmStats last_block(K);
  int cursor = rank;
  std::vector<double> estimate(static_cast<std::size_t>(K), 0.0);
  std::vector<double> radius(static_cast<std::size_t>(K), 0.0);

  for (int p = 1; !exploit_; ++p) {
    const std::vector<ArmId> active = sets.active_arms;
    const int Kp = static_cast<int>(active.size());
    const int Mp = sets.active_players;
    if (Kp == 0 || Mp <= 0) {
      // Only reachable after a failed initialization or a missed signal.
      init_failed_ = true;
      exploit_ = Kp > 0 ? active.front() : rank;
      break;
    }

    std::int64_t explore_len = static_cast<std::int64_t>(Kp) * (std::int64_t{1} << p) * base_;
    if (!declared.empty()) {
      set_phase("explore-mc");
      ArmId seat = co_await musical_chairs(channel(), active,
                                           static_cast<std::int64_t>(Kp) * slot_,
                                           Feedback::NoSensing, rng_);
      if (seat == kNoArm) {
        init_failed_ = true;
        seat = channel().pending;
      }
      cursor = index_of(active, seat);
    } else {
      exploration_.merge(last_block);
      explore_len -= block_len;
    }

    set_phase("explore");
    for (std::int64_t s = 0; s < explore_len; ++s) {
      const ArmId arm = active[static_cast<std::size_t>(cursor)];
      const Observation obs = co_await pull(arm);
      exploration_.add(arm, obs.reward);
      cursor = (cursor + 1) % Kp;
    }

    block_len = static_cast<std::int64_t>(Kp) * base_;
    declared.clear();
    for (ArmId a : active) {
      const auto ua = static_cast<std::size_t>(a);
      const double n = exploration_.count[ua];
      estimate[ua] = n > 0.0 ? exploration_.sum[ua] / n : 0.0;
      radius[ua] = n > 0.0 ? std::sqrt(2.0 * std::log(T) / n) : 1e9;
    }
    const ArmDecision decision = accept_reject(active, estimate, radius, Mp);

    for (;;) {
      const auto pending = minus(decision.rejected, declared);
      if (pending.empty()) break;
      set_phase("declare");
      const BlockOutcome out = co_await declare_block(pending.front(), active, block_len, cursor);
      add_all(declared, out.signaled);
    }

    const auto candidates = minus(decision.accepted, declared);
    if (!candidates.empty()) {
      set_phase("fix");
      const BlockOutcome out = co_await occupy_block(candidates, active, block_len, cursor);
      add_all(declared, out.signaled);
      if (out.fixed) {
        exploit_ = out.fixed;
        history_.push_back({p, declared, sets, sets, personal_time(), true});
        break;
      }
    }

    for (;;) {
      set_phase("receive");
      BlockOutcome out = co_await receive_block(active, block_len, cursor);
      const auto fresh = minus(out.signaled, declared);
      add_all(declared, fresh);
      last_block = std::move(out.stats);
      if (fresh.empty()) break;
    }

    Sic2CommRecord rec{p, declared, sets, {}, personal_time()};
    sets = update_sets_nosensing(declared, last_block, sets);
    rec.after = sets;
    history_.push_back(std::move(rec));
  }

  set_phase("exploit");
  const ArmId arm = *exploit_;
  for (;;) co_await pull(arm);
}

}  // namespace mmab
