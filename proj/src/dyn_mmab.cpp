#include "mmab/dyn_mmab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mmab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

DynState::DynState(int arms_, double personal_horizon_)
    : arms(arms_),
      personal_horizon(personal_horizon_),
      sum(static_cast<std::size_t>(arms_), 0.0),
      count(static_cast<std::size_t>(arms_), 0.0),
      block_sum(static_cast<std::size_t>(arms_), 0.0),
      block_count(static_cast<std::size_t>(arms_), 0.0),
      block_limit(static_cast<std::size_t>(arms_), kInf),
      lower(static_cast<std::size_t>(arms_), 0.0),
      upper(static_cast<std::size_t>(arms_), 1.0),
      occupied(static_cast<std::size_t>(arms_), false) {}

double DynState::radius(std::int64_t t) const {
  return 2.0 * std::sqrt(6.0 * arms * std::log(personal_horizon) / static_cast<double>(t));
}

bool DynState::in_preferences(ArmId a) const {
  return std::find(preferences.begin(), preferences.end(), a) != preferences.end();
}

bool DynState::is_active(ArmId a) const {
  return !occupied[static_cast<std::size_t>(a)] && !in_preferences(a);
}

std::optional<ArmId> DynState::target() const {
  if (pointer < 1 || pointer > static_cast<int>(preferences.size())) return std::nullopt;
  return preferences[static_cast<std::size_t>(pointer - 1)];
}

void DynState::ingest(ArmId arm, double reward, std::int64_t t) {
  const auto ua = static_cast<std::size_t>(arm);
  block_count[ua] += 1.0;
  count[ua] += 1.0;
  block_sum[ua] += reward;
  sum[ua] += reward;

  const double b = radius(t);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] <= 0.0) continue;
    const double mean = sum[i] / count[i];
    lower[i] = std::max(mean - b, 0.0);
    upper[i] = std::min(mean + b, 1.0);
  }

  const double candidate =
      lower[ua] > 0.0 ? 2.0 * std::numbers::e * std::log(personal_horizon) / lower[ua] : kInf;
  block_limit[ua] = std::min(candidate, block_limit[ua]);
}

void DynState::try_fix(ArmId arm, double reward) {
  if (auto tgt = target(); tgt && *tgt == arm && reward > 0.0) fixed = arm;
}

void DynState::advance_pointer() {
  if (auto tgt = target(); tgt && occupied[static_cast<std::size_t>(*tgt)]) ++pointer;
}

void DynState::close_block(ArmId arm) {
  const auto ua = static_cast<std::size_t>(arm);
  if (block_count[ua] >= block_limit[ua]) {
    if (block_sum[ua] == 0.0) occupied[ua] = true;
    block_sum[ua] = 0.0;
    block_count[ua] = 0.0;
  }
}

void DynState::preference_update() {
  for (ArmId i = 0; i < arms; ++i) {
    if (!is_active(i)) continue;
    bool dominates = true;
    for (ArmId l = 0; l < arms && dominates; ++l) {
      if (l == i || !is_active(l)) continue;
      dominates = lower[static_cast<std::size_t>(i)] > upper[static_cast<std::size_t>(l)];
    }
    if (dominates) {
      preferences.push_back(i);
      return;
    }
  }
}

void DynState::occupied_demotion() {
  const auto tgt = target();
  if (!tgt) return;
  const auto head = preferences.begin() + pointer;
  for (ArmId l = 0; l < arms; ++l) {
    if (std::find(preferences.begin(), head, l) != head) continue;
    if (occupied[static_cast<std::size_t>(l)]) continue;
    if (lower[static_cast<std::size_t>(l)] > upper[static_cast<std::size_t>(*tgt)]) {
      occupied[static_cast<std::size_t>(*tgt)] = true;
      return;
    }
  }
}

void DynState::step(ArmId arm, double reward, std::int64_t t) {
  ingest(arm, reward, t);
  try_fix(arm, reward);
  advance_pointer();
  close_block(arm);
  preference_update();
  occupied_demotion();
}

DynMmabPolicy::DynMmabPolicy(DynConfig config, Rng rng)
    : state_(config.arms, static_cast<double>(config.personal_horizon)), rng_(std::move(rng)) {
  if (config.arms < 1) throw ConfigError("DYN-MMAB needs at least one arm");
  if (config.personal_horizon < 1) throw ConfigError("DYN-MMAB needs a positive horizon");
}

ArmId DynMmabPolicy::choose(std::int64_t) {
  if (state_.fixed) {
    exploiting_ = true;
    last_ = *state_.fixed;
  } else {
    last_ = uniform_index(rng_, state_.arms);
  }
  return last_;
}

void DynMmabPolicy::observe(const Observation& obs) {
  if (exploiting_) return;
  state_.step(last_, obs.reward, obs.personal_time);
}

}  // namespace mmab
