#include "lbp/rng.h"

#include <cmath>
#include <numbers>

namespace lbp {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

auto splitmix64(std::uint64_t x) -> std::uint64_t {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t replicate, std::uint64_t lane) : replicate_{replicate} {
  auto k = splitmix64(splitmix64(seed) ^ (lane * 0xD1B54A32D192ED03ull));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

auto Rng::philox(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key)
    -> std::array<std::uint32_t, 4> {
  for (int round = 0; round < 10; ++round) {
    auto p0 = std::uint64_t{kMul0} * ctr[0];
    auto p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

void Rng::refill() {
  auto ctr = std::array<std::uint32_t, 4>{
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(replicate_), static_cast<std::uint32_t>(replicate_ >> 32)};
  buffer_ = philox(ctr, key_);
  ++block_;
  used_ = 0;
}

auto Rng::operator()() -> result_type {
  if (used_ >= 4) refill();
  auto lo = buffer_[used_];
  auto hi = buffer_[used_ + 1];
  used_ += 2;
  return (std::uint64_t{hi} << 32) | lo;
}

auto Rng::uniform() -> double { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

auto Rng::uniform_pos() -> double { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

auto Rng::exponential(double rate) -> double { return -std::log(uniform_pos()) / rate; }

auto Rng::normal() -> double {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  auto r = std::sqrt(-2.0 * std::log(uniform_pos()));
  auto theta = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = r * std::sin(theta);
  has_spare_normal_ = true;
  return r * std::cos(theta);
}

auto Rng::index(std::uint64_t n) -> std::uint64_t {
  auto product = static_cast<unsigned __int128>((*this)()) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

}  // namespace lbp
