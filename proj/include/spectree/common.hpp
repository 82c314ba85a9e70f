// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace spectree {

using Token = std::int32_t;
using NodeId = std::int32_t;

inline constexpr NodeId kNoParent = -1;
inline constexpr Token kNoToken = -1;

/// Raised when a caller breaks an operation's documented contract in a way
/// that is not a plain bad argument (e.g. asking for gains of a tree that was
/// not expanded best-first).
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Raised by brute-force oracles when an instance is too large to enumerate.
class OracleRefusal : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Random streams are std::mt19937_64, whose output sequence is fixed by the
// standard. Conversions to doubles go through to_unit() rather than
// std::uniform_real_distribution so results do not depend on the library.
using RandomStream = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t h, std::uint64_t v) noexcept {
    return splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
}

/// Maps 64 random bits to [0, 1) with 53 bits of resolution.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform01(RandomStream& rng) { return to_unit(rng()); }

} // namespace spectree
