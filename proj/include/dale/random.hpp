// Copyright 2026 The dale-forge Authors.
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

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "dale/text.hpp"

namespace dale {

// Anything that can feed the Gaussian gates and the hint-position draw.
// Tests substitute scripted sources to pin individual draws.
template <typename R>
concept RandomSource = requires(R& r, double mu, double sigma2, std::size_t n) {
  { r.gaussian(mu, sigma2) } -> std::convertible_to<double>;
  { r.uniform_index(n) } -> std::convertible_to<std::size_t>;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Per-item seed that depends only on (global seed, item key, stream), never
// on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key,
                                 std::uint64_t stream = 0) {
  return splitmix64(splitmix64(global_seed) ^ text::fnv1a64(key) ^
                    splitmix64(stream + 0x5851F42D4C957F2DULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // `sigma2` is the variance.
  double gaussian(double mu, double sigma2) {
    std::normal_distribution<double> dist(mu, std::sqrt(sigma2));
    return dist(engine_);
  }

  // Uniform in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

static_assert(RandomSource<Rng>);

}  // namespace dale
