#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmab/protocol.hpp"
#include "mmab/sic_mmab.hpp"

namespace mmab {

struct Sic2Config {
  std::int64_t horizon = 1;
  int arms = 1;
  double mu_min = 0.5;
  /// Multiplier c in T0 = ceil(c ln T / mu_min).
  double block_scale = 2400.0;
  /// Probability of pulling the declared arm in a declaration block.
  double declare_prob = 0.5;
};

/// Bit slot length T_c = ceil(ln T / mu_min).
std::int64_t bit_slot_rounds(std::int64_t horizon, double mu_min);
/// Base exploration and block unit T0 = ceil(block_scale ln T / mu_min).
std::int64_t base_block_rounds(std::int64_t horizon, double mu_min, double block_scale);

/// Per-arm running sums and counts.
struct ArmStats {
  std::vector<double> sum;
  std::vector<double> count;

  explicit ArmStats(int arms = 0)
      : sum(static_cast<std::size_t>(arms), 0.0), count(static_cast<std::size_t>(arms), 0.0) {}
  void add(ArmId a, double r) {
    sum[static_cast<std::size_t>(a)] += r;
    count[static_cast<std::size_t>(a)] += 1.0;
  }
  void merge(const ArmStats& other);
};

/// Arms i with |S_i/T_i - s_i/t_i| >= S_i/(4 T_i). Arms with t_i = 0 are skipped.
/// Sorted ascending.
std::vector<ArmId> signal_detect(const ArmStats& exploration, const ArmStats& block,
                                 std::span<const ArmId> active_arms);

struct NoSensingSets {
  int active_players = 0;
  std::vector<ArmId> active_arms;
};

/// Opt = {i in Decl : s_i = 0}; [K_{p+1}] = [K_p] \ Decl; M_{p+1} = M_p - |Opt|.
NoSensingSets update_sets_nosensing(std::span<const ArmId> declared, const ArmStats& last_block,
                                    const NoSensingSets& sets);

/// End-of-communication-phase snapshot recorded by each SIC-MMAB2 player.
struct Sic2CommRecord {
  int phase = 0;
  std::vector<ArmId> declared;
  NoSensingSets before;
  NoSensingSets after;
  std::int64_t end_time = 0;
  /// Written by a player that seated itself during this phase.
  bool fixed = false;
};

class SicMmab2Policy final : public ProtocolPolicy {
 public:
  SicMmab2Policy(Sic2Config config, Rng rng);

  std::optional<ArmId> exploiting_arm() const override { return exploit_; }
  bool init_failed() const override { return init_failed_; }
  std::optional<int> estimated_players() const override { return estimated_players_; }

  std::optional<ArmId> external_rank() const { return external_rank_; }
  const std::vector<Sic2CommRecord>& comm_history() const { return history_; }
  std::int64_t slot_rounds() const { return slot_; }
  std::int64_t base_rounds() const { return base_; }

 protected:
  Step<Done> body() override;

 private:
  /// 2K slots of T_c pulls each, hopping from slot 2k on (k = 1-based rank).
  /// Counts a player whenever a slot returns zero total reward.
  Step<int> estimate_m_nosensing(ArmId external_rank);

  struct BlockOutcome {
    std::vector<ArmId> signaled;
    ArmStats stats;
    std::optional<ArmId> fixed;
  };

  Step<BlockOutcome> declare_block(ArmId arm, std::span<const ArmId> active, std::int64_t length,
                                   int& cursor);
  Step<BlockOutcome> occupy_block(std::span<const ArmId> candidates, std::span<const ArmId> active,
                                  std::int64_t length, int& cursor);
  Step<BlockOutcome> receive_block(std::span<const ArmId> active, std::int64_t length, int& cursor);

  Sic2Config config_;
  Rng rng_;
  std::int64_t slot_ = 1;
  std::int64_t base_ = 1;
  ArmStats exploration_;
  std::optional<ArmId> external_rank_;
  std::optional<int> estimated_players_;
  std::optional<ArmId> exploit_;
  bool init_failed_ = false;
  std::vector<Sic2CommRecord> history_;
};

}  // namespace mmab
