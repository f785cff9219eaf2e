#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace sernas {

// Seedable RNG with named stream derivation. Every consumer (dataset
// synthesis, parameter init, path sampling, dropout masks, ...) owns its own
// stream, so draws in one subsystem never shift another subsystem's sequence.
//
// A stream is identified by (seed, name). split() derives a child stream from
// the stored key without consuming generator state, so the derivation is
// deterministic no matter how much of the parent stream has been used.
class RngStream {
 public:
  RngStream() : RngStream(0, "root") {}

  RngStream(uint64_t seed, std::string_view stream)
      : key_(mix(seed ^ fnv1a(stream))), gen_(key_) {}

  RngStream split(std::string_view child) const { return RngStream(key_, child); }

  uint64_t key() const { return key_; }

  uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53-bit resolution. std:: distributions are not used anywhere:
  // their exact output is implementation-defined, and reproducibility of every
  // draw is part of the contract here.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n). Modulo bias is < n / 2^64, far below anything the statistics in
  // this project can resolve.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  // Box-Muller; the spare draw is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (char c : s) {
      h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
      h *= 1099511628211ull;
    }
    return h;
  }

  // splitmix64 finalizer
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t key_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sernas
