#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace ampg {

/// Philox-4x32-10 counter-based generator. Streams are addressed by a
/// (master seed, stream id, lane) triple, so independent substreams can be
/// derived without coordination: same address, same sequence, on any machine.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream, std::uint32_t lane = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, lane, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  std::uint32_t next_u32() {
    if (have_ == 0) {
      block_ = round10(ctr_, key_);
      ++ctr_[0];  // 2^32 blocks per (stream, lane); far beyond any run here
      have_ = 4;
    }
    return block_[4 - have_--];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    const std::uint64_t hi = next_u32() >> 5;  // 27 bits
    const std::uint64_t lo = next_u32() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * (1.0 / 9007199254740992.0);
  }

  /// Index sampled from a probability row (walks the cumulative sum).
  int sample(const Eigen::Ref<const Eigen::VectorXd>& probs) {
    const double u = next_double();
    double acc = 0.0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  int sample_uniform(int n) { return static_cast<int>(next_u32() % static_cast<std::uint32_t>(n)); }

 private:
  using Ctr = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Ctr round10(Ctr c, Key k) {
    for (int r = 0; r < 10; ++r) {
      c = single_round(c, k);
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return c;
  }

  static Ctr single_round(const Ctr& c, const Key& k) {
    const std::uint64_t p0 = 0xD2511F53ull * c[0];
    const std::uint64_t p1 = 0xCD9E8D57ull * c[2];
    return Ctr{static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  Key key_;
  Ctr ctr_;
  Ctr block_{};
  int have_ = 0;
};

}  // namespace ampg
