#ifndef PALAB_RNG_HPP
#define PALAB_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace palab {

// splitmix64 step; used only to decorrelate seed material.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Independent generator per (seed, stream id).  Every random decision in a run
// draws from a stream derived this way, so repetitions and counterfactual
// replays never perturb each other's randomness.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed ^ (0xd1342543de82ef95ull * (stream + 1));
  std::uint64_t a = splitmix64(x);
  std::uint64_t b = splitmix64(x);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

// Uniform double in [0,1) from the top 53 bits; avoids distribution objects so
// the byte stream is identical across standard library implementations.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Sample an index proportionally to nonnegative weights (sum need not be 1).
inline int sample_index(const std::vector<double>& w, std::mt19937_64& g) {
  double total = 0.0;
  for (double x : w) total += x;
  if (total <= 0.0) return 0;
  double u = uniform01(g) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace palab

#endif
