#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmab/arena.hpp"

namespace mmab {

/// Independent UCB on the observed reward (No Sensing). Each arm is pulled
/// once in index order, then argmax s/t + sqrt(2 ln n / t) with uniform
/// random tie-breaking, n being the player's round counter.
class SelfishUcbPolicy final : public Policy {
 public:
  SelfishUcbPolicy(int arms, Rng rng);

  ArmId choose(std::int64_t personal_time) override;
  void observe(const Observation& obs) override;
  std::optional<ArmId> exploiting_arm() const override { return std::nullopt; }
  std::string_view phase() const override { return "selfish"; }

  double index(ArmId k, std::int64_t n) const;
  const std::vector<double>& sums() const { return sums_; }
  const std::vector<double>& counts() const { return counts_; }

 private:
  std::vector<double> sums_, counts_;
  Rng rng_;
  ArmId last_ = kNoArm;
  std::vector<ArmId> ties_;
};

/// Centralized benchmark: pulls one pinned arm forever.
class PinnedPolicy final : public Policy {
 public:
  explicit PinnedPolicy(ArmId arm) : arm_(arm) {}

  ArmId choose(std::int64_t) override { return arm_; }
  void observe(const Observation&) override {}
  std::optional<ArmId> exploiting_arm() const override { return arm_; }
  std::string_view phase() const override { return "exploit"; }

 private:
  ArmId arm_;
};

/// Pinned arms for the oracle benchmark: players in entry order (ties by
/// index) take the best arm not used by earlier entrants.
std::vector<ArmId> oracle_assignment(const BanditInstance& instance);
PolicySet oracle_static(const BanditInstance& instance);

}  // namespace mmab
