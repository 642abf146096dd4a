#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmab/protocol.hpp"

namespace mmab {

/// Confidence radius choice for the accept/reject rules.
///  General:   B_s = 3 sqrt(ln T / (2 s)), statistics quantized before sending.
///  Bernoulli: B_s = sqrt(2 ln T / s), statistics are exact integers.
enum class SicVariant { General, Bernoulli };

double sic_radius(SicVariant variant, double horizon, double pulls);

/// Musical Chairs duration ceil(K ln T).
std::int64_t sic_init_rounds(int arms, std::int64_t horizon);

/// Unbiased stochastic rounding of s in [0, 2^{p+1} - 1]:
/// floor(s) + 1 with probability frac(s), floor(s) otherwise.
/// Throws std::out_of_range for s outside that interval.
std::uint64_t quantize(double s, int phase, Rng& rng);

/// Least-significant-first binary expansion of s on p+1 bits.
std::vector<bool> encode_bits(std::uint64_t s, int phase);

/// Inverse of encode_bits: sum_n bits[n] 2^n.
std::uint64_t decode_bits(const std::vector<bool>& bits);

/// Arms pulled by a sender transmitting `s` to the owner of `receiver_arm`
/// while its own communicating arm is `own_arm`.
std::vector<ArmId> send_schedule(std::uint64_t s, int phase, ArmId receiver_arm, ArmId own_arm);

/// Sends `s` in p+1 pulls: bit 1 collides on the receiver's arm, bit 0 pulls own arm.
Step<Done> send_stat(PullChannel& ch, std::uint64_t s, int phase, ArmId receiver_arm,
                     ArmId own_arm);

/// Receives p+1 bits by pulling `own_arm`; a collision reads as bit 1.
Step<std::uint64_t> receive_stat(PullChannel& ch, int phase, ArmId own_arm);

struct ArmDecision {
  /// Ascending arm index.
  std::vector<ArmId> accepted;
  std::vector<ArmId> rejected;
};

/// Successive accept/reject over the active arms.
/// k is accepted iff #{i != k : est_k - rad_k >= est_i + rad_i} >= K_p - M_p,
/// rejected iff #{i != k : est_i - rad_i >= est_k + rad_k} >= M_p.
/// `estimate` and `radius` are indexed by arm id.
ArmDecision accept_reject(std::span<const ArmId> active_arms, std::span<const double> estimate,
                          std::span<const double> radius, int active_players);

/// Exploitation choice after a communication phase: Acc[M_p - j + 1] (1-based)
/// when M_p - j + 1 <= |Acc|, otherwise none. `internal_rank` is 1-based.
std::optional<ArmId> exploit_choice(int active_players, int internal_rank,
                                    std::span<const ArmId> accepted);

struct SicSets {
  int active_players = 0;
  std::vector<ArmId> active_arms;
};

/// M_{p+1} = M_p - |Acc|, [K_{p+1}] = [K_p] \ (Acc u Rej).
SicSets update_sets(const SicSets& sets, const ArmDecision& decision);

/// Internal rank and player count from an Estimate_M run of 2K steps.
struct RankEstimate {
  int players = 1;
  int internal_rank = 1;
};

struct SicConfig {
  SicVariant variant = SicVariant::Bernoulli;
  std::int64_t horizon = 1;
  int arms = 1;
  /// Skip Musical Chairs and start Estimate_M on this arm (tests only).
  std::optional<ArmId> preset_external_rank;
};

/// State recorded by one player at the end of each communication phase.
struct SicCommRecord {
  int phase = 0;
  int active_players = 0;
  std::vector<ArmId> active_arms;
  /// Quantized sums: rows are internal ranks 1..M_p, columns follow active_arms.
  std::vector<std::vector<std::uint64_t>> shared_stats;
  std::vector<double> pull_counts;
  ArmDecision decision;
  std::int64_t end_time = 0;
};

class SicMmabPolicy final : public ProtocolPolicy {
 public:
  SicMmabPolicy(SicConfig config, Rng rng);

  std::optional<ArmId> exploiting_arm() const override { return exploit_; }
  bool init_failed() const override { return init_failed_; }
  std::optional<int> estimated_players() const override {
    return estimate_ ? std::optional<int>(estimate_->players) : std::nullopt;
  }

  std::optional<ArmId> external_rank() const { return external_rank_; }
  std::optional<RankEstimate> rank_estimate() const { return estimate_; }
  const std::vector<SicCommRecord>& comm_history() const { return history_; }

 protected:
  Step<Done> body() override;

 private:
  Step<RankEstimate> estimate_m(ArmId external_rank);

  SicConfig config_;
  Rng rng_;
  std::optional<ArmId> external_rank_;
  std::optional<RankEstimate> estimate_;
  std::optional<ArmId> exploit_;
  bool init_failed_ = false;
  std::vector<SicCommRecord> history_;
};

}  // namespace mmab
