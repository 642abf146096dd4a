#include "mmab/protocol.hpp"

namespace mmab {

ArmId ProtocolPolicy::choose(std::int64_t personal_time) {
  personal_time_ = personal_time;
  ch_.pending = kNoArm;
  if (!script_) {
    script_.emplace(body());
    script_->start();
  } else if (!script_->done()) {
    ch_.resume_point.resume();
  }
  if (auto err = script_->error()) std::rethrow_exception(err);
  if (script_->done() || ch_.pending == kNoArm) {
    throw ProtocolError("protocol finished without pulling an arm");
  }
  return ch_.pending;
}

void ProtocolPolicy::observe(const Observation& obs) { ch_.last = obs; }

Step<ArmId> musical_chairs(PullChannel& ch, std::span<const ArmId> arms, std::int64_t rounds,
                           Feedback mode, Rng& rng) {
  ArmId fixed = kNoArm;
  const int n = static_cast<int>(arms.size());
  for (std::int64_t step = 0; step < rounds; ++step) {
    if (fixed != kNoArm) {
      co_await PullAwaiter{ch, fixed};
      continue;
    }
    const ArmId k = arms[static_cast<std::size_t>(uniform_index(rng, n))];
    const Observation obs = co_await PullAwaiter{ch, k};
    const bool free = mode == Feedback::CollisionSensing ? !obs.collision.value_or(true)
                                                         : obs.reward > 0.0;
    if (free) fixed = k;
  }
  co_return fixed;
}

}  // namespace mmab
