#include "mmab/sic_mmab.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mmab {

double sic_radius(SicVariant variant, double horizon, double pulls) {
  const double lt = std::log(horizon);
  if (variant == SicVariant::General) return 3.0 * std::sqrt(lt / (2.0 * pulls));
  return std::sqrt(2.0 * lt / pulls);
}

std::int64_t sic_init_rounds(int arms, std::int64_t horizon) {
  return static_cast<std::int64_t>(
      std::ceil(static_cast<double>(arms) * std::log(static_cast<double>(horizon))));
}

std::uint64_t quantize(double s, int phase, Rng& rng) {
  const double hi = std::ldexp(1.0, phase + 1) - 1.0;
  if (!(s >= 0.0 && s <= hi)) {
    throw std::out_of_range("statistic " + std::to_string(s) + " outside [0, 2^(p+1)-1]");
  }
  const double n = std::floor(s);
  const double d = s - n;
  auto q = static_cast<std::uint64_t>(n);
  if (d > 0.0 && uniform01(rng) < d) ++q;
  return q;
}

std::vector<bool> encode_bits(std::uint64_t s, int phase) {
  std::vector<bool> bits(static_cast<std::size_t>(phase + 1));
  for (int n = 0; n <= phase; ++n) bits[static_cast<std::size_t>(n)] = ((s >> n) & 1U) != 0;
  return bits;
}

std::uint64_t decode_bits(const std::vector<bool>& bits) {
  std::uint64_t s = 0;
  for (std::size_t n = 0; n < bits.size(); ++n) {
    if (bits[n]) s |= std::uint64_t{1} << n;
  }
  return s;
}

std::vector<ArmId> send_schedule(std::uint64_t s, int phase, ArmId receiver_arm, ArmId own_arm) {
  std::vector<ArmId> pulls;
  pulls.reserve(static_cast<std::size_t>(phase + 1));
  for (bool bit : encode_bits(s, phase)) pulls.push_back(bit ? receiver_arm : own_arm);
  return pulls;
}

Step<Done> send_stat(PullChannel& ch, std::uint64_t s, int phase, ArmId receiver_arm,
                     ArmId own_arm) {
  for (int n = 0; n <= phase; ++n) {
    co_await PullAwaiter{ch, ((s >> n) & 1U) != 0 ? receiver_arm : own_arm};
  }
  co_return Done{};
}

Step<std::uint64_t> receive_stat(PullChannel& ch, int phase, ArmId own_arm) {
  std::uint64_t s = 0;
  for (int n = 0; n <= phase; ++n) {
    const Observation obs = co_await PullAwaiter{ch, own_arm};
    if (obs.collision.value_or(false)) s |= std::uint64_t{1} << n;
  }
  co_return s;
}

ArmDecision accept_reject(std::span<const ArmId> active_arms, std::span<const double> estimate,
                          std::span<const double> radius, int active_players) {
  ArmDecision out;
  const int Kp = static_cast<int>(active_arms.size());
  for (ArmId k : active_arms) {
    const auto uk = static_cast<std::size_t>(k);
    int beats = 0;
    int beaten_by = 0;
    for (ArmId i : active_arms) {
      if (i == k) continue;
      const auto ui = static_cast<std::size_t>(i);
      if (estimate[uk] - radius[uk] >= estimate[ui] + radius[ui]) ++beats;
      if (estimate[ui] - radius[ui] >= estimate[uk] + radius[uk]) ++beaten_by;
    }
    const bool acc = beats >= Kp - active_players;
    const bool rej = beaten_by >= active_players;
    assert(!(acc && rej) && "accept and reject sets intersect");
    if (acc) out.accepted.push_back(k);
    else if (rej) out.rejected.push_back(k);
  }
  std::sort(out.accepted.begin(), out.accepted.end());
  std::sort(out.rejected.begin(), out.rejected.end());
  return out;
}

std::optional<ArmId> exploit_choice(int active_players, int internal_rank,
                                    std::span<const ArmId> accepted) {
  const int slot = active_players - internal_rank + 1;
  if (slot < 1 || slot > static_cast<int>(accepted.size())) return std::nullopt;
  return accepted[static_cast<std::size_t>(slot - 1)];
}

SicSets update_sets(const SicSets& sets, const ArmDecision& decision) {
  SicSets next;
  next.active_players = sets.active_players - static_cast<int>(decision.accepted.size());
  for (ArmId a : sets.active_arms) {
    const bool gone =
        std::binary_search(decision.accepted.begin(), decision.accepted.end(), a) ||
        std::binary_search(decision.rejected.begin(), decision.rejected.end(), a);
    if (!gone) next.active_arms.push_back(a);
  }
  return next;
}

SicMmabPolicy::SicMmabPolicy(SicConfig config, Rng rng)
    : config_(std::move(config)), rng_(std::move(rng)) {
  if (config_.arms < 1) throw ConfigError("SIC-MMAB needs at least one arm");
  if (config_.horizon < 1) throw ConfigError("SIC-MMAB needs a positive horizon");
}

Step<RankEstimate> SicMmabPolicy::estimate_m(ArmId external_rank) {
  const int K = config_.arms;
  const int rank1 = external_rank + 1;
  RankEstimate est;
  ArmId arm = external_rank;
  for (int step = 0; step < 2 * rank1; ++step) {
    const Observation obs = co_await pull(arm);
    if (obs.collision.value_or(false)) {
      ++est.players;
      ++est.internal_rank;
    }
  }
  for (int step = 0; step < 2 * (K - rank1); ++step) {
    arm = (arm + 1) % K;
    const Observation obs = co_await pull(arm);
    if (obs.collision.value_or(false)) ++est.players;
  }
  co_return est;
}

Step<Done> SicMmabPolicy::body() {
  const int K = config_.arms;
  const double T = static_cast<double>(config_.horizon);
  std::vector<ArmId> all(static_cast<std::size_t>(K));
  std::iota(all.begin(), all.end(), 0);

  ArmId rank = kNoArm;
  if (config_.preset_external_rank) {
    rank = *config_.preset_external_rank;
  } else {
    set_phase("init-mc");
    rank = co_await musical_chairs(channel(), all, sic_init_rounds(K, config_.horizon),
                                   Feedback::CollisionSensing, rng_);
    if (rank == kNoArm) {
      init_failed_ = true;
      rank = channel().pending;
    }
  }
  external_rank_ = rank;

  set_phase("init-estim");
  const RankEstimate est = co_await estimate_m(rank);
  estimate_ = est;
  const int M = std::clamp(est.players, 1, K);
  const int j = std::clamp(est.internal_rank, 1, M);
  if (M != est.players || j != est.internal_rank) init_failed_ = true;

  std::vector<std::vector<std::uint64_t>> shared(
      static_cast<std::size_t>(M), std::vector<std::uint64_t>(static_cast<std::size_t>(K), 0));
  std::vector<double> own(static_cast<std::size_t>(K), 0.0);
  std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
  std::vector<double> estimate(static_cast<std::size_t>(K), 0.0);
  std::vector<double> radius(static_cast<std::size_t>(K), 0.0);
  std::vector<std::uint64_t> quantized(static_cast<std::size_t>(K), 0);
  SicSets sets{M, all};

  for (int p = 1; !exploit_; ++p) {
    const auto& active = sets.active_arms;
    const int Kp = static_cast<int>(active.size());
    const int Mp = sets.active_players;
    if (Kp == 0 || j > Mp || Mp > Kp) {
      // Only reachable after a failed initialization.
      init_failed_ = true;
      exploit_ = Kp > 0 ? active.front() : rank;
      break;
    }
    const std::int64_t block = std::int64_t{1} << p;

    set_phase("explore");
    int cursor = j - 1;
    for (std::int64_t step = 0; step < static_cast<std::int64_t>(Kp) * block; ++step) {
      cursor = (cursor + 1) % Kp;
      const ArmId arm = active[static_cast<std::size_t>(cursor)];
      const Observation obs = co_await pull(arm);
      own[static_cast<std::size_t>(arm)] += obs.reward;
    }

    set_phase("communicate");
    for (ArmId arm : active) {
      const auto ua = static_cast<std::size_t>(arm);
      quantized[ua] = config_.variant == SicVariant::General
                          ? quantize(own[ua], p, rng_)
                          : static_cast<std::uint64_t>(std::llround(own[ua]));
      shared[static_cast<std::size_t>(j - 1)][ua] = quantized[ua];
    }
    const ArmId own_arm = active[static_cast<std::size_t>(j - 1)];
    for (int i = 1; i <= Mp; ++i) {
      for (int l = 1; l <= Mp; ++l) {
        if (i == l) continue;
        for (ArmId arm : active) {
          if (i == j) {
            co_await send_stat(channel(), quantized[static_cast<std::size_t>(arm)], p,
                               active[static_cast<std::size_t>(l - 1)], own_arm);
          } else if (l == j) {
            shared[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(arm)] =
                co_await receive_stat(channel(), p, own_arm);
          } else {
            for (int n = 0; n <= p; ++n) co_await pull(own_arm);
          }
        }
      }
    }

    for (ArmId arm : active) {
      const auto ua = static_cast<std::size_t>(arm);
      counts[ua] += static_cast<double>(Mp) * static_cast<double>(block);
      std::uint64_t total = 0;
      for (const auto& row : shared) total += row[ua];
      estimate[ua] = static_cast<double>(total) / counts[ua];
      radius[ua] = sic_radius(config_.variant, T, counts[ua]);
    }
    ArmDecision decision = accept_reject(active, estimate, radius, Mp);

    SicCommRecord rec;
    rec.phase = p;
    rec.active_players = Mp;
    rec.active_arms = active;
    for (int r = 0; r < Mp; ++r) {
      std::vector<std::uint64_t> row;
      for (ArmId arm : active) row.push_back(shared[static_cast<std::size_t>(r)][static_cast<std::size_t>(arm)]);
      rec.shared_stats.push_back(std::move(row));
    }
    for (ArmId arm : active) rec.pull_counts.push_back(counts[static_cast<std::size_t>(arm)]);
    rec.decision = decision;
    rec.end_time = personal_time();
    history_.push_back(std::move(rec));

    if (auto fixed = exploit_choice(Mp, j, decision.accepted)) {
      assert(std::find(active.begin(), active.end(), *fixed) != active.end());
      exploit_ = *fixed;
      break;
    }
    sets = update_sets(sets, decision);
  }

  set_phase("exploit");
  const ArmId arm = *exploit_;
  for (;;) co_await pull(arm);
}

}  // namespace mmab
