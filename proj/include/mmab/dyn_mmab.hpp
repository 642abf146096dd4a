#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmab/arena.hpp"

namespace mmab {

/// Per-player bookkeeping of DYN-MMAB. Each method is one rule of the
/// exploration loop; `step` applies them in the loop's order.
struct DynState {
  int arms = 1;
  /// Personal horizon T^j = T - tau_j.
  double personal_horizon = 1.0;

  std::vector<double> sum, count;
  std::vector<double> block_sum, block_count;
  /// Zero-run block length per arm. Starts at +inf and never increases.
  std::vector<double> block_limit;
  std::vector<double> lower, upper;
  std::vector<ArmId> preferences;
  std::vector<bool> occupied;
  /// 1-based pointer into preferences.
  int pointer = 1;
  std::optional<ArmId> fixed;

  DynState(int arms, double personal_horizon);

  /// B^j(t) = 2 sqrt(6 K ln(T^j) / t).
  double radius(std::int64_t t) const;

  bool in_preferences(ArmId a) const;
  bool is_active(ArmId a) const;
  /// Preferences[p], if it exists.
  std::optional<ArmId> target() const;

  /// Sums and counts for `arm`, confidence bounds for all arms, then L[arm].
  void ingest(ArmId arm, double reward, std::int64_t t);
  /// Fix on `arm` if it is Preferences[p] and the reward is positive.
  void try_fix(ArmId arm, double reward);
  /// Advance p when Preferences[p] is occupied.
  void advance_pointer();
  /// Close the zero-run block of `arm` once it reaches L[arm] pulls.
  void close_block(ArmId arm);
  /// Append an active arm whose lower bound beats every other active arm's upper bound.
  void preference_update();
  /// Mark Preferences[p] occupied when an unoccupied arm outside Preferences[1:p]
  /// dominates it. Occupied arms keep stale means and are not compared.
  void occupied_demotion();

  /// One exploration round in loop order.
  void step(ArmId arm, double reward, std::int64_t t);
};

struct DynConfig {
  int arms = 1;
  /// Personal horizon T - tau_j.
  std::int64_t personal_horizon = 1;
};

class DynMmabPolicy final : public Policy {
 public:
  DynMmabPolicy(DynConfig config, Rng rng);

  ArmId choose(std::int64_t personal_time) override;
  void observe(const Observation& obs) override;
  std::optional<ArmId> exploiting_arm() const override { return state_.fixed; }
  std::string_view phase() const override { return exploiting_ ? "exploit" : "explore"; }

  const DynState& state() const { return state_; }

 private:
  DynState state_;
  Rng rng_;
  ArmId last_ = kNoArm;
  bool exploiting_ = false;
};

}  // namespace mmab
