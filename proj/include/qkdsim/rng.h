// Copyright 2026 The qkdsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Counter-based randomness: a pure function of (seed, index, lane).

#ifndef QKDSIM_RNG_H
#define QKDSIM_RNG_H

#include <cstdint>

namespace qkdsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t index, std::uint64_t lane) {
    return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (lane * 0xd1b54a32d192ed03ULL));
}

/// Uniform in [0, 1).
inline double counter_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t lane) {
    return static_cast<double>(counter_hash(seed, index, lane) >> 11) * 0x1.0p-53;
}

/// Derives an independent stream seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return counter_hash(seed, 0xffffffffffffffffULL, stream);
}

}  // namespace qkdsim

#endif
