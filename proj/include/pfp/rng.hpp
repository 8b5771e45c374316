#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace pfp {

using Rng = std::mt19937_64;

// Distinct streams for the same user seed. Keeping them apart is what makes
// evaluation contexts independent of the training data drawn for a run.
enum class Stream : std::uint64_t {
  kContexts = 1,
  kReward = 2,
  kOracleNoise = 3,
  kInit = 4,
  kEval = 5,
  kSession = 6,
};

// Seeds a generator from an ordered tuple of integers via std::seed_seq.
inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  words.reserve(parts.size() * 2);
  for (std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline Rng make_rng(Stream stream, std::uint64_t seed) {
  return make_rng({static_cast<std::uint64_t>(stream), seed});
}

}  // namespace pfp
