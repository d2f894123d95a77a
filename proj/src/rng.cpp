#include "brw/rng.hpp"

#include <cassert>
#include <cmath>

namespace brw {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c,
                         std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * c[2];
  c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1),
       std::uint32_t(p0 >> 32) ^ c[3] ^ k[1], std::uint32_t(p0)};
  k[0] += kPhiloxW0;
  k[1] += kPhiloxW1;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  key_ = {std::uint32_t(seed), std::uint32_t(seed >> 32)};
  // Counter layout: words 0..1 hold the per-stream block counter, words 2..3
  // hold the stream id.  Distinct ids therefore never share a counter block.
  ctr_ = {0u, 0u, std::uint32_t(stream_id), std::uint32_t(stream_id >> 32)};
}

RngStream RngStream::derive(std::uint64_t tag) const {
  return RngStream(seed_, mix64(stream_id_, tag));
}

void RngStream::refill() {
  auto c = ctr_;
  auto k = key_;
  for (int r = 0; r < 10; ++r) philox_round(c, k);
  buf_ = c;
  avail_ = 4;
  if (++ctr_[0] == 0) ++ctr_[1];  // 2^64 blocks per stream before wrap
}

std::uint64_t RngStream::bits() {
  if (avail_ < 2) refill();
  const std::uint32_t lo = buf_[4 - avail_];
  const std::uint32_t hi = buf_[4 - avail_ + 1];
  avail_ -= 2;
  return (std::uint64_t(hi) << 32) | lo;
}

double RngStream::uniform() {
  // 53 random bits into [0, 1); the standard (a >> 5, b >> 6) construction.
  if (avail_ < 2) refill();
  const std::uint32_t a = buf_[4 - avail_];
  const std::uint32_t b = buf_[4 - avail_ + 1];
  avail_ -= 2;
  return ((a >> 5) * 67108864.0 + (b >> 6)) * (1.0 / 9007199254740992.0);
}

double RngStream::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_gauss_;
  }
  // Box-Muller on (0,1] x [0,1): u is shifted away from 0 so log(u) is finite.
  double u = 1.0 - uniform();
  double v = uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  const double c = std::cos(6.283185307179586476925286766559 * v);
  const double s = std::sin(6.283185307179586476925286766559 * v);
  spare_gauss_ = r * s;
  have_spare_ = true;
  return r * c;
}

long RngStream::poisson(double mean) {
  assert(mean >= 0.0);
  if (mean <= 0.0) return 0;
  // Split large means: a Poisson(2m) draw is the sum of two independent
  // Poisson(m) draws, which keeps the product method's exp(-mean) in range.
  long k = 0;
  while (mean > 30.0) {
    mean *= 0.5;
    k += poisson(mean);
  }
  const double limit = std::exp(-mean);
  double prod = 1.0;
  long n = -1;
  do {
    ++n;
    prod *= uniform();
  } while (prod > limit);
  return k + n;
}

}  // namespace brw
