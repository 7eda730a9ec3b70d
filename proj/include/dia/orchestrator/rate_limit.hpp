// Copyright 2026 The DIA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "dia/core/types.hpp"

namespace dia {

struct TokenBucketParams {
  double capacity = 1.0;           // tokens; >= 1
  double refill_per_second = 1.0;  // > 0
};

inline void ValidateBucket(const TokenBucketParams& p) {
  if (!(p.capacity >= 1.0)) {
    throw ValidationError("rate", "token bucket capacity must be >= 1");
  }
  if (!(p.refill_per_second > 0.0)) {
    throw ValidationError("rate", "refill rate must be > 0");
  }
}

struct BucketState {
  double tokens = 0.0;
  double last_refill_s = 0.0;
};

inline BucketState FullBucket(const TokenBucketParams& p, double now_s = 0.0) {
  return {p.capacity, now_s};
}

struct Admission {
  bool proceed = false;
  double wait_s = 0.0;  // when !proceed: time until one token is available
  BucketState next;
};

// Pure token-bucket step. `now_s` must not go backwards.
inline Admission Admit(const TokenBucketParams& p, BucketState state,
                       double now_s) {
  // Absorbs float error from refill arithmetic such as 3.333.. * 0.3.
  constexpr double kSlack = 1e-9;
  double elapsed = std::max(0.0, now_s - state.last_refill_s);
  state.tokens = std::min(p.capacity, state.tokens + elapsed * p.refill_per_second);
  state.last_refill_s = std::max(state.last_refill_s, now_s);
  if (state.tokens >= 1.0 - kSlack) {
    state.tokens = std::max(0.0, state.tokens - 1.0);
    return {true, 0.0, state};
  }
  return {false, (1.0 - state.tokens) / p.refill_per_second, state};
}

// Admission times of `n` back-to-back requests starting at `start_s`,
// continuing from `state` (which is updated).
inline std::vector<double> AdmissionSchedule(const TokenBucketParams& p,
                                             BucketState& state, std::size_t n,
                                             double start_s) {
  std::vector<double> out;
  out.reserve(n);
  double now = std::max(start_s, state.last_refill_s);
  while (out.size() < n) {
    Admission a = Admit(p, state, now);
    state = a.next;
    if (a.proceed) {
      out.push_back(now);
    } else {
      now += a.wait_s;
    }
  }
  return out;
}

// Time source for the gate. Virtual clocks advance only when slept on.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double NowSeconds() = 0;
  virtual void SleepFor(double seconds) = 0;
};

class SteadyClock : public Clock {
 public:
  SteadyClock() : start_(std::chrono::steady_clock::now()) {}
  double NowSeconds() override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }
  void SleepFor(double seconds) override {
    if (seconds > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

class VirtualClock : public Clock {
 public:
  double NowSeconds() override {
    std::lock_guard<std::mutex> lock(mu_);
    return now_;
  }
  void SleepFor(double seconds) override {
    std::lock_guard<std::mutex> lock(mu_);
    if (seconds > 0) now_ += seconds;
  }

 private:
  std::mutex mu_;
  double now_ = 0.0;
};

// Blocking per-provider gate: bucket state is updated under a mutex, the
// wait happens outside it.
class RateGate {
 public:
  RateGate(TokenBucketParams params, Clock& clock)
      : params_(params), clock_(clock) {
    ValidateBucket(params_);
    state_ = FullBucket(params_, clock_.NowSeconds());
  }

  // Blocks until admitted; returns the admission time.
  double Acquire() {
    for (;;) {
      Admission a;
      double now;
      {
        std::lock_guard<std::mutex> lock(mu_);
        now = clock_.NowSeconds();
        a = Admit(params_, state_, now);
        state_ = a.next;
      }
      if (a.proceed) return now;
      clock_.SleepFor(a.wait_s);
    }
  }

 private:
  TokenBucketParams params_;
  Clock& clock_;
  std::mutex mu_;
  BucketState state_;
};

}  // namespace dia
