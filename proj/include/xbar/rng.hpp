#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace xbar {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Named sub-streams hanging off the single top-level experiment seed.
namespace streams {
constexpr std::uint64_t kCampaign = 0x11;
constexpr std::uint64_t kTraining = 0x22;
constexpr std::uint64_t kNoise = 0x33;
constexpr std::uint64_t kBatchOrder = 0x44;
constexpr std::uint64_t kInit = 0x55;
constexpr std::uint64_t kBackground = 0x66;
constexpr std::uint64_t kSplit = 0x77;
}  // namespace streams

// mt19937_64 with hand-rolled uniform/gaussian conversions so that sequences
// are identical across standard libraries (std distributions are not
// portable, the engine itself is).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(uniform() * n); }

  // Box-Muller, one value per draw (no cached spare).
  double gaussian(double mean, double stddev) {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Derives a child stream seed from a root seed and a path of indices, e.g.
// Rng(substream(seed, {streams::kCampaign, sample})). Execution-order
// independent and path-sensitive.
inline std::uint64_t substream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p));
  return h;
}

}  // namespace xbar
