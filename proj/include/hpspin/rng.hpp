#ifndef HPSPIN_RNG_HPP
#define HPSPIN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace hpspin {

/// SplitMix64 finalizer; used only to decorrelate (seed, stream id) pairs.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// An independent random stream derived from (master seed, stream id).
/// Streams are values: copy one to replay it, never share one across workers.
class Stream {
 public:
  using engine_type = std::mt19937_64;

  Stream(std::uint64_t master_seed, std::uint64_t stream_id)
      : engine_(splitmix64(master_seed ^ splitmix64(stream_id + 0x5851F42D4C957F2DULL))) {}

  /// Child stream, e.g. one per trial or per chain.
  static Stream derive(std::uint64_t master_seed, std::uint64_t a, std::uint64_t b) {
    return Stream(master_seed, splitmix64(a) ^ (b * 0x9E3779B97F4A7C15ULL + 1));
  }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return normal_(engine_); }

  bool coin() { return (engine_() >> 63) != 0; }

  std::uint64_t below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }

  double exponential() { return -std::log(uniform_open()); }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hpspin

#endif
