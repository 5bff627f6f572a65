#pragma once

#include <array>
#include <cstdint>

namespace diagan {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Maps a 128-bit counter and 64-bit key to 128 random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Named, purpose-separated random streams. Each component of a run draws from
/// its own stream so that adding draws in one place never shifts another.
enum class StreamId : std::uint32_t {
  dataset = 1,
  init_generator = 2,
  init_discriminator = 3,
  real_batches = 4,
  latents = 5,
  aux_batches = 6,
  drs = 7,
  evaluation = 8,
  autoencoder = 9,
  bayes = 10,
  test = 99,
};

/// Counter-based random stream: (seed, stream) select the key and the upper
/// counter words, the lower 64 bits count blocks. The full state is three
/// integers plus the Box-Muller cache, so it can be checkpointed exactly.
class RngStream {
 public:
  struct State {
    std::uint64_t seed = 0;
    std::uint32_t stream = 0;
    std::uint64_t block = 0;
    std::uint32_t lane = 4;  // 4 = buffer exhausted
    bool has_spare_normal = false;
    double spare_normal = 0.0;

    bool operator==(const State&) const = default;
  };

  RngStream(std::uint64_t seed, StreamId stream);
  RngStream(std::uint64_t seed, std::uint32_t stream);
  explicit RngStream(const State& state);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via the Box-Muller transform; pairs are cached.
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  State state() const;

 private:
  void refill();

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  std::uint32_t lane_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace diagan
