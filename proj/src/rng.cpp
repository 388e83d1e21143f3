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

#include "fedsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace fedsim {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Philox4x32::Counter counter_of(const DrawAddress& a) noexcept {
  // The draw index selects a 4-word block; two 64-bit outputs per block.
  const std::uint64_t block = a.draw / 2;
  return {static_cast<std::uint32_t>(block),
          static_cast<std::uint32_t>(a.step),
          static_cast<std::uint32_t>(a.step >> 32),
          a.device};
}

Philox4x32::Key key_of(const DrawAddress& a) noexcept {
  const std::uint64_t k = derive_seed(a.seed, static_cast<std::uint64_t>(a.tag));
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t random_bits(const DrawAddress& addr) noexcept {
  const auto out = Philox4x32::block(counter_of(addr), key_of(addr));
  const int half = static_cast<int>(addr.draw % 2) * 2;
  return (static_cast<std::uint64_t>(out[half]) << 32) | out[half + 1];
}

double uniform01(const DrawAddress& addr) noexcept {
  return static_cast<double>(random_bits(addr) >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_index(const DrawAddress& addr, std::uint64_t bound) noexcept {
  __extension__ using u128 = unsigned __int128;
  const u128 p = static_cast<u128>(random_bits(addr)) * bound;
  return static_cast<std::uint64_t>(p >> 64);
}

double standard_normal(const DrawAddress& addr) noexcept {
  DrawAddress a = addr;
  a.draw = addr.draw * 2;
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(a);
  a.draw += 1;
  const double u2 = uniform01(a);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace fedsim
