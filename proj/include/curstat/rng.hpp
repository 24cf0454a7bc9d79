#pragma once

#include <cstdint>
#include <random>

namespace curstat {

std::uint64_t splitmix64(std::uint64_t& state);

// Independent generator for (seed, stream). Replicate b of a study always gets
// make_stream(seed, b), whatever thread runs it.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

// Draws a fresh seed from an existing generator, for nested studies.
std::uint64_t child_seed(std::mt19937_64& rng);

}  // namespace curstat
