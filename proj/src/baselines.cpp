#include "mmab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmab {

SelfishUcbPolicy::SelfishUcbPolicy(int arms, Rng rng)
    : sums_(static_cast<std::size_t>(arms), 0.0),
      counts_(static_cast<std::size_t>(arms), 0.0),
      rng_(std::move(rng)) {
  if (arms < 1) throw ConfigError("selfish UCB needs at least one arm");
}

double SelfishUcbPolicy::index(ArmId k, std::int64_t n) const {
  const auto uk = static_cast<std::size_t>(k);
  return sums_[uk] / counts_[uk] + std::sqrt(2.0 * std::log(static_cast<double>(n)) / counts_[uk]);
}

ArmId SelfishUcbPolicy::choose(std::int64_t personal_time) {
  const int K = static_cast<int>(sums_.size());
  for (ArmId k = 0; k < K; ++k) {
    if (counts_[static_cast<std::size_t>(k)] == 0.0) return last_ = k;
  }
  double best = -1.0;
  ties_.clear();
  for (ArmId k = 0; k < K; ++k) {
    const double v = index(k, personal_time);
    if (v > best) {
      best = v;
      ties_.assign(1, k);
    } else if (v == best) {
      ties_.push_back(k);
    }
  }
  last_ = ties_.size() == 1 ? ties_.front()
                            : ties_[static_cast<std::size_t>(uniform_index(rng_, static_cast<int>(ties_.size())))];
  return last_;
}

void SelfishUcbPolicy::observe(const Observation& obs) {
  sums_[static_cast<std::size_t>(last_)] += obs.reward;
  counts_[static_cast<std::size_t>(last_)] += 1.0;
}

std::vector<ArmId> oracle_assignment(const BanditInstance& instance) {
  std::vector<ArmId> by_mean(static_cast<std::size_t>(instance.arms()));
  std::iota(by_mean.begin(), by_mean.end(), 0);
  std::stable_sort(by_mean.begin(), by_mean.end(), [&](ArmId a, ArmId b) {
    return instance.means[static_cast<std::size_t>(a)] > instance.means[static_cast<std::size_t>(b)];
  });
  std::vector<int> order(static_cast<std::size_t>(instance.players()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return instance.entries[static_cast<std::size_t>(a)] < instance.entries[static_cast<std::size_t>(b)];
  });
  std::vector<ArmId> pinned(order.size(), kNoArm);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    pinned[static_cast<std::size_t>(order[rank])] = by_mean[rank];
  }
  return pinned;
}

PolicySet oracle_static(const BanditInstance& instance) {
  PolicySet set;
  for (ArmId a : oracle_assignment(instance)) set.push_back(std::make_unique<PinnedPolicy>(a));
  return set;
}

}  // namespace mmab
