#pragma once
// Seedable, platform-independent random streams.
//
// Every stream is named by a 64-bit key derived from the master seed and a
// chain of (role, index...) tags.  Child derivation is pure SplitMix64
// mixing, so a given (seed, tags...) chain produces the same stream on every
// platform and under any scheduling of parallel work.
//
// Deviates come from std::mt19937_64 (bit-exact per the C++ standard)
// through fixed transforms, never through std::*_distribution (whose
// algorithms are implementation-defined):
//
//   uniform01()  (x >> 11) * 2^-53                    in [0, 1)
//   normal()     Box-Muller on (u1, u2), u1 in (0,1]; pairs cached
//   exponential()  -log(1 - u)

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ascapower {

inline constexpr std::uint64_t kSplitMixGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kSplitMixGamma;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; folds role strings into stream keys, also used as the content
// digest for run manifests.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key), engine_(splitmix64(key)) {}

  std::uint64_t key() const { return key_; }

  // Stream named (role, idx...) relative to this one.  Derivation is pure:
  // it does not advance this stream, and repeated calls return the same
  // child.  Tags fold sequentially, so child("a", 1, 2) != child("a", 12).
  template <class... Ix>
  RngStream child(std::string_view role, Ix... idx) const {
    std::uint64_t h = splitmix64(key_ ^ fnv1a64(role));
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(idx))), ...);
    return RngStream(h);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Integer in [0, n), n >= 1.  Modulo reduction; bias < n / 2^64.
  std::uint64_t uniform_below(std::uint64_t n) { return engine_() % n; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 =
        (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  double exponential() { return -std::log1p(-uniform01()); }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ascapower
