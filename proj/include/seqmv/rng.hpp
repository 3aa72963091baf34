#pragma once

// Counter-based random streams.
//
// Every random number in the library is a pure function of
// (master seed, replica, particle, purpose tag, draw index). There is no
// generator state shared between particles, so the order in which particles
// or replicas are simulated (or the number of threads doing it) never changes
// a single bit of output.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace seqmv {

/// Philox4x32-10 block function (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// What a stream is used for. Distinct tags give disjoint counter spaces.
enum class StreamTag : std::uint32_t {
  Init = 1,
  Brownian = 2,
  EvalInit = 3,
  EvalBrownian = 4,
  VarLeftInit = 5,
  VarLeftBrownian = 6,
  VarRightInit = 7,
  VarRightBrownian = 8,
  SpdeInit = 9,
  SpdeNoise = 10,
  Eta0 = 11,
  Synthetic = 12,
};

/// A pair of tags driving one family of diffusion paths.
struct StreamFamily {
  StreamTag init;
  StreamTag brownian;
};

inline constexpr StreamFamily kPrimaryFamily{StreamTag::Init, StreamTag::Brownian};
inline constexpr StreamFamily kEvaluationFamily{StreamTag::EvalInit, StreamTag::EvalBrownian};
inline constexpr StreamFamily kVarLeftFamily{StreamTag::VarLeftInit, StreamTag::VarLeftBrownian};
inline constexpr StreamFamily kVarRightFamily{StreamTag::VarRightInit,
                                              StreamTag::VarRightBrownian};

/// Sequential reader over one addressed stream. Each Philox block yields two
/// 53-bit uniforms, or two standard normals via Box-Muller.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t replica, std::uint32_t particle,
               StreamTag tag)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replica_(replica),
        particle_(particle),
        tag_(static_cast<std::uint32_t>(tag)) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    if (uniform_pos_ == 2) {
      refill_uniforms();
    }
    return uniforms_[uniform_pos_++];
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::uint64_t blocks_consumed() const { return block_; }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  void refill_uniforms() {
    const auto out = Philox4x32::apply(
        {static_cast<std::uint32_t>(block_), replica_, particle_, tag_}, key_);
    ++block_;
    uniforms_[0] = to_unit(out[0], out[1]);
    uniforms_[1] = to_unit(out[2], out[3]);
    uniform_pos_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t replica_;
  std::uint32_t particle_;
  std::uint32_t tag_;
  std::uint64_t block_ = 0;
  std::array<double, 2> uniforms_{};
  int uniform_pos_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed plus the addressing rule (replica, particle, tag) -> stream.
struct RngContract {
  std::uint64_t master_seed = 0;

  RandomStream stream(std::uint64_t replica, std::uint64_t particle, StreamTag tag) const {
    return RandomStream(master_seed, static_cast<std::uint32_t>(replica),
                        static_cast<std::uint32_t>(particle), tag);
  }

  /// Independent contract for a derived experiment (e.g. the half-dt rerun).
  RngContract derive(std::uint64_t salt) const {
    std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return RngContract{z ^ (z >> 31)};
  }
};

}  // namespace seqmv
