#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace lbp {

// Philox4x32-10 counter-based generator.
//
// A stream is fixed by (seed, replicate, lane). The 128-bit counter holds the
// replicate index in its upper half and the block index in its lower half, so
// draws never depend on how replicates are scheduled across threads.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t replicate = 0, std::uint64_t lane = 0);

  static constexpr auto min() -> result_type { return 0; }
  static constexpr auto max() -> result_type { return std::numeric_limits<result_type>::max(); }

  auto operator()() -> result_type;

  // Uniform on [0, 1) with 53 random bits.
  auto uniform() -> double;
  // Uniform on (0, 1].
  auto uniform_pos() -> double;
  auto exponential(double rate) -> double;
  auto normal() -> double;
  // Uniform integer in [0, n); n > 0.
  auto index(std::uint64_t n) -> std::uint64_t;

  // Raw Philox4x32-10 block function.
  static auto philox(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key)
      -> std::array<std::uint32_t, 4>;

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t replicate_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace lbp
