/*
   Copyright 2026 The fedsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <cstdint>

namespace fedsim {

/// Purpose tags separating independent random streams.
enum class StreamTag : std::uint32_t {
  kBatch = 1,
  kDeviceSampling = 2,
  kGenerator = 3,
  kProbe = 4,
  kMonteCarlo = 5,
};

/// Philox4x32-10 block cipher used as a counter-based generator.
///
/// Every value is a pure function of (key, counter); there is no hidden
/// state, so draws can be computed in any order and on any thread.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept;
};

/// Address of a single random draw.
struct DrawAddress {
  std::uint64_t seed = 0;
  StreamTag tag = StreamTag::kBatch;
  std::uint32_t device = 0;
  std::uint64_t step = 0;
  std::uint32_t draw = 0;
};

/// 64 random bits for the given address.
std::uint64_t random_bits(const DrawAddress& addr) noexcept;

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(const DrawAddress& addr) noexcept;

/// Uniform integer in [0, bound). bound must be positive.
std::uint64_t uniform_index(const DrawAddress& addr, std::uint64_t bound) noexcept;

/// Standard normal via Box-Muller on the draws (2*draw, 2*draw+1).
double standard_normal(const DrawAddress& addr) noexcept;

/// Mixes two 64-bit words into a fresh seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

/// Sequential view over one (seed, tag, device, step) stream.
///
/// Convenience for callers that need "the next" draw; the n-th call always
/// returns the same value regardless of what other streams did.
class Stream {
 public:
  Stream(std::uint64_t seed, StreamTag tag, std::uint32_t device = 0,
         std::uint64_t step = 0) noexcept
      : addr_{seed, tag, device, step, 0} {}

  std::uint64_t bits() noexcept { return random_bits(next()); }
  double uniform() noexcept { return uniform01(next()); }
  std::uint64_t index(std::uint64_t bound) noexcept {
    return uniform_index(next(), bound);
  }
  double normal() noexcept { return standard_normal(next()); }

 private:
  DrawAddress next() noexcept {
    DrawAddress a = addr_;
    ++addr_.draw;
    return a;
  }

  DrawAddress addr_;
};

}  // namespace fedsim
