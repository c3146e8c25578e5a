#ifndef LAP_RNG_HPP
#define LAP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lap {

// Seeded random stream with hand-rolled draw functions so that the byte
// stream does not depend on the standard library's distribution
// implementations. Every sampler in the toolkit owns one of these.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  size_t uniform_index(size_t n) {
    return n == 0 ? 0 : size_t(uniform() * double(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // derive an independent stream (used for per-epoch shuffles etc.)
  Rng fork(uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 gen_;
};

// FNV-1a, used for dataset/grammar fingerprints and the OOV embedding hash.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hex_fingerprint(uint64_t h);

}  // namespace lap

#endif
