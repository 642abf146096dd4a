#pragma once

#include <functional>
#include <vector>

#include "mmab/arena.hpp"
#include "mmab/protocol.hpp"

namespace mmab::testing {

/// Plays a fixed arm sequence, repeating the last entry; records what it saw.
class ScriptPolicy final : public Policy {
 public:
  explicit ScriptPolicy(std::vector<ArmId> arms) : arms_(std::move(arms)) {}
  ArmId choose(std::int64_t personal_time) override {
    times.push_back(personal_time);
    const std::size_t i = std::min(next_++, arms_.size() - 1);
    return arms_[i];
  }
  void observe(const Observation& obs) override { seen.push_back(obs); }
  std::optional<ArmId> exploiting_arm() const override { return std::nullopt; }

  std::vector<std::int64_t> times;
  std::vector<Observation> seen;

 private:
  std::vector<ArmId> arms_;
  std::size_t next_ = 0;
};

/// ProtocolPolicy driven by an arbitrary coroutine factory.
class LambdaProtocol final : public ProtocolPolicy {
 public:
  using Body = std::function<Step<Done>(PullChannel&)>;
  explicit LambdaProtocol(Body body) : body_(std::move(body)) {}
  std::optional<ArmId> exploiting_arm() const override { return std::nullopt; }

 protected:
  Step<Done> body() override { return body_(channel()); }

 private:
  Body body_;
};

inline BanditInstance make_instance(std::vector<double> means, int players, std::int64_t horizon,
                                    Feedback feedback = Feedback::CollisionSensing,
                                    ArmFamily family = ArmFamily::Bernoulli) {
  BanditInstance inst;
  inst.means = std::move(means);
  inst.horizon = horizon;
  inst.entries.assign(static_cast<std::size_t>(players), 0);
  inst.feedback = feedback;
  inst.family = family;
  return inst;
}

}  // namespace mmab::testing
