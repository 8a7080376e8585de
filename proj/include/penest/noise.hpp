#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace penest {

/// Independent noise channels derived from one scenario seed.
enum class NoiseChannel : std::uint32_t { kProcess = 1, kMeasurement = 2 };

/// Gaussian sample stream keyed by (seed, channel, step).
///
/// Both the engine (mt19937_64) and std::seed_seq are fully specified by the
/// standard, and the normal transform below is written out explicitly, so a
/// given key yields the same samples on every conforming toolchain. The
/// distribution objects of <random> do not carry that guarantee.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, NoiseChannel channel, std::uint64_t step) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(channel), static_cast<std::uint32_t>(step),
                      static_cast<std::uint32_t>(step >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    double u;
    do {
      u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    } while (u == 0.0);
    return u;
  }

  /// Standard normal sample (Box-Muller, both branches used).
  double standard_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// N(0, stddev²). A zero deviation still consumes a draw, so the sample
  /// sequence of the other variables does not depend on it.
  double normal(double stddev) { return stddev * standard_normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace penest
