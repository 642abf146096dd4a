#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmab/rng.hpp"

namespace mmab {

/// Arms are 0-based internally; documentation and CLI output use the same
/// 0-based indices.
using ArmId = int;
inline constexpr ArmId kNoArm = -1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a policy violates the lockstep contract (e.g. yields no arm).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Feedback { CollisionSensing, NoSensing };
enum class ArmFamily { Bernoulli, BoundedGeneral };

std::string_view to_string(Feedback f);
std::string_view to_string(ArmFamily f);
Feedback parse_feedback(std::string_view s);
ArmFamily parse_family(std::string_view s);

struct BanditInstance {
  std::vector<double> means;
  ArmFamily family = ArmFamily::Bernoulli;
  std::int64_t horizon = 1;
  /// Entry time tau_j per player; a player is active in rounds tau_j < t <= T.
  std::vector<std::int64_t> entries;
  Feedback feedback = Feedback::CollisionSensing;

  int arms() const { return static_cast<int>(means.size()); }
  int players() const { return static_cast<int>(entries.size()); }
  bool is_static() const;

  /// Throws ConfigError unless 1 <= M <= K, means in [0,1], entries in [0,T).
  void validate() const;
};

/// Environment draws X_k(t). Counter-based: the value for (t, k) depends only
/// on the environment key, so draws are identical whoever pulls.
class ArmSampler {
 public:
  ArmSampler(const BanditInstance& instance, std::uint64_t env_key);
  double draw(std::int64_t t, ArmId k) const;

 private:
  const BanditInstance* instance_;
  std::uint64_t key_;
};

/// Concentration of the bounded-general family: X ~ Beta(c*mu, c*(1-mu)).
inline constexpr double kBoundedConcentration = 4.0;

struct Pull {
  int player = 0;
  ArmId arm = kNoArm;
  double reward = 0.0;
  bool collided = false;
  /// Phase tag reported by the policy for this round (test hook only).
  std::string_view phase;
};

struct RoundResult {
  std::int64_t t = 0;
  /// Active players only, in ascending player order.
  std::vector<Pull> pulls;
  /// X_k(t) for every arm (one draw per arm per round).
  std::vector<double> raw_draws;
  /// eta_k(t) for every arm.
  std::vector<std::uint8_t> eta;
};

struct Observation {
  double reward = 0.0;
  /// Present iff the feedback mode is CollisionSensing.
  std::optional<bool> collision;
  std::int64_t personal_time = 0;
};

/// Serialized form used to check that NoSensing leaks no collision bit.
std::string to_json_line(const Observation& obs);

/// Decentralized player. A policy sees only its own observations; it may be
/// constructed with its personal horizon and, where the algorithm needs it,
/// the known lower bound on the means.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual ArmId choose(std::int64_t personal_time) = 0;
  virtual void observe(const Observation& obs) = 0;

  /// Introspection for tests and the harness.
  virtual std::optional<ArmId> exploiting_arm() const = 0;
  virtual std::string_view phase() const { return "play"; }
  /// True when the policy detected its own initialization failure.
  virtual bool init_failed() const { return false; }
  virtual std::optional<int> estimated_players() const { return std::nullopt; }
};

using PolicySet = std::vector<std::unique_ptr<Policy>>;

/// Samples draws, resolves collisions and computes rewards for one round.
/// `arms[j]` is the arm chosen by player j, or kNoArm for inactive players.
RoundResult resolve_round(const BanditInstance& instance, const ArmSampler& sampler,
                          std::int64_t t, std::span<const ArmId> arms);

/// In-place variant reusing `out`'s buffers; used by the episode loop.
void resolve_round_into(const BanditInstance& instance, const ArmSampler& sampler,
                        std::int64_t t, std::span<const ArmId> arms, RoundResult& out);

Observation feedback_view(const RoundResult& round, Feedback mode, int player,
                          std::int64_t entry);

struct RegretLedger {
  /// Index t-1 holds the value after round t.
  std::vector<double> cum_regret;
  std::vector<double> cum_realized_regret;
  /// Number of arms with eta = 1 in round t.
  std::vector<int> collisions;
  std::vector<std::optional<ArmId>> exploit_arm;

  double final_regret() const { return cum_regret.empty() ? 0.0 : cum_regret.back(); }
};

/// Sum of the m largest means.
double top_sum(std::span<const double> sorted_desc, int m);

/// Pseudo-regret increment of one round:
/// sum of the top-#M(t) means minus sum_j mu_{pi_j} (1 - eta_{pi_j}).
double round_pseudo_regret(const BanditInstance& instance,
                           std::span<const double> sorted_desc, const RoundResult& round);

RegretLedger pseudo_regret(std::span<const RoundResult> trace, const BanditInstance& instance);

using RoundHook = std::function<void(const RoundResult&, std::span<const std::unique_ptr<Policy>>)>;

struct EpisodeOptions {
  bool keep_trace = false;
  /// Stop after this many rounds (defaults to the horizon).
  std::optional<std::int64_t> max_rounds;
  RoundHook on_round;
};

struct EpisodeResult {
  std::vector<RoundResult> trace;
  RegretLedger ledger;
};

/// Lockstep loop t = 1..T. Every active player is queried, the round is
/// resolved, and each active player receives its feedback view.
EpisodeResult run_episode(const BanditInstance& instance, std::span<const std::unique_ptr<Policy>> policies,
                          std::uint64_t seed, const EpisodeOptions& options = {});

void write_trace_jsonl(std::ostream& os, std::span<const RoundResult> trace);
void write_ledger_csv(std::ostream& os, const RegretLedger& ledger);

}  // namespace mmab
