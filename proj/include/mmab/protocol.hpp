#pragma once

// Coroutine scaffolding for policies written as straight-line protocols.
//
// A protocol body is a coroutine that pulls arms with `co_await pull(arm)`
// and receives the round's Observation as the result. Sub-protocols are
// lazily started `Step<T>` coroutines awaited from the body; the policy's
// driver always resumes the innermost suspended frame.

#include <coroutine>
#include <exception>
#include <optional>
#include <string_view>
#include <utility>

#include "mmab/arena.hpp"

namespace mmab {

/// Shared mailbox between a protocol's coroutine frames and the policy driver.
struct PullChannel {
  ArmId pending = kNoArm;
  Observation last;
  std::coroutine_handle<> resume_point;
  std::string_view phase = "init";
};

class PullAwaiter {
 public:
  PullAwaiter(PullChannel& ch, ArmId arm) : ch_(&ch), arm_(arm) {}

  bool await_ready() const noexcept { return false; }
  void await_suspend(std::coroutine_handle<> h) noexcept {
    ch_->pending = arm_;
    ch_->resume_point = h;
  }
  Observation await_resume() const noexcept { return ch_->last; }

 private:
  PullChannel* ch_;
  ArmId arm_;
};

struct Done {};

template <class T>
class [[nodiscard]] Step {
 public:
  struct promise_type {
    std::optional<T> value;
    std::coroutine_handle<> continuation;
    std::exception_ptr error;

    Step get_return_object() {
      return Step{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }

    struct FinalAwaiter {
      bool await_ready() const noexcept { return false; }
      std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
        auto c = h.promise().continuation;
        return c ? c : std::noop_coroutine();
      }
      void await_resume() const noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }

    void return_value(T v) { value.emplace(std::move(v)); }
    void unhandled_exception() { error = std::current_exception(); }
  };

  using Handle = std::coroutine_handle<promise_type>;

  Step(Step&& other) noexcept : h_(std::exchange(other.h_, {})) {}
  Step& operator=(Step&& other) noexcept {
    if (this != &other) {
      reset();
      h_ = std::exchange(other.h_, {});
    }
    return *this;
  }
  Step(const Step&) = delete;
  Step& operator=(const Step&) = delete;
  ~Step() { reset(); }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> caller) noexcept {
    h_.promise().continuation = caller;
    return h_;
  }
  T await_resume() {
    if (h_.promise().error) std::rethrow_exception(h_.promise().error);
    return std::move(*h_.promise().value);
  }

  /// Top-level use: start the coroutine without a continuation.
  void start() { h_.resume(); }
  bool done() const { return !h_ || h_.done(); }
  std::exception_ptr error() const { return h_ ? h_.promise().error : nullptr; }

 private:
  explicit Step(Handle h) : h_(h) {}
  void reset() {
    if (h_) h_.destroy();
    h_ = {};
  }
  Handle h_;
};

/// Base class running a protocol coroutine in lockstep with the arena.
class ProtocolPolicy : public Policy {
 public:
  ArmId choose(std::int64_t personal_time) final;
  void observe(const Observation& obs) final;
  std::string_view phase() const override { return ch_.phase; }

 protected:
  /// The protocol body. Must pull forever (exploitation loops until T).
  virtual Step<Done> body() = 0;

  PullAwaiter pull(ArmId arm) { return PullAwaiter{ch_, arm}; }
  void set_phase(std::string_view tag) { ch_.phase = tag; }
  std::int64_t personal_time() const { return personal_time_; }
  PullChannel& channel() { return ch_; }

 private:
  PullChannel ch_;
  std::optional<Step<Done>> script_;
  std::int64_t personal_time_ = 0;
};

/// Plays `rounds` Musical Chairs steps on `arms`: sample uniformly until the
/// first non-colliding pull (CollisionSensing: eta = 0; NoSensing: r > 0),
/// then stay. Returns the fixed arm or kNoArm if it never fixed.
Step<ArmId> musical_chairs(PullChannel& ch, std::span<const ArmId> arms, std::int64_t rounds,
                           Feedback mode, Rng& rng);

}  // namespace mmab
