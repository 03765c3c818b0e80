#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fepls {

// splitmix64 finalizer; used to derive independent stream seeds from a
// master seed. Stateless: stream k of master s seeds from mix(s + k*GAMMA).
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG:  mt19937_64 engine with hand-rolled uniform/normal
// transforms so that streams are bit-identical across standard libraries
// (std::normal_distribution and generate_canonical are implementation
// defined; we cannot use them if datasets must reproduce exactly).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  // Independent substream `stream_id` of a master seed.
  static Rng stream(std::uint64_t master, std::uint64_t stream_id) {
    return Rng(splitmix64(master + 0x9e3779b97f4a7c15ULL * (stream_id + 1)));
  }

  // Uniform on [0,1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via the trigonometric Box-Muller transform; the second
  // deviate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), safe at u1=0
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  std::uint64_t raw() { return eng_(); }

  // Fisher-Yates shuffle of 0..n-1, used for deterministic CV folds.
  template <class IntVec>
  void shuffle(IntVec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(eng_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fepls
