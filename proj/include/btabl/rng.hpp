#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace btabl {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based seed derivation: the same (base, keys...) always yields the
/// same stream seed, independent of call order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

// Stream tags used with derive_seed.
namespace stream {
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t shuffle = 0x73687566;
inline constexpr std::uint64_t posterior = 0x706f7374;
inline constexpr std::uint64_t dropout = 0x64726f70;
inline constexpr std::uint64_t predictive = 0x70726564;
inline constexpr std::uint64_t synth = 0x73796e74;
}  // namespace stream

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace btabl
