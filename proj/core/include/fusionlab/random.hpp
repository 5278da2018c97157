// Copyright 2026 The fusion-lab Authors
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

#ifndef FUSIONLAB__RANDOM_HPP_
#define FUSIONLAB__RANDOM_HPP_

#include <cstdint>
#include <initializer_list>

namespace fusionlab
{

/// SplitMix64 finalizer: a well-mixed 64-bit function of its input.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and stream keys
/// (frame index, epoch, fog level, ...).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys)
{
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t k : keys) {
    s = splitmix64(s ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  }
  return s;
}

}  // namespace fusionlab

#endif  // FUSIONLAB__RANDOM_HPP_
