#pragma once

#include <array>
#include <cstdint>

namespace brw {

// Counter-based stream built on the Philox-4x32-10 block function.  A stream
// is identified by (seed, stream id); draws advance a 64-bit block counter.
// Two streams with distinct ids are independent for any practical purpose,
// and a stream's output never depends on what other streams consumed.  That
// is the property the simulation layer relies on: work can be sharded over
// replicas, tree nodes, or worker threads in any order and still reproduce
// the same numbers.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  // Independent child stream under the same seed.  Derivation is a pure
  // function of (stream id, tag), so callers can rebuild any substream
  // without coordination.
  RngStream derive(std::uint64_t tag) const;

  std::uint64_t bits();          // 64 uniform bits
  double uniform();              // [0, 1), 53-bit resolution
  double gaussian();             // standard normal
  long poisson(double mean);     // mean >= 0

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int avail_ = 0;
  double spare_gauss_ = 0.0;
  bool have_spare_ = false;
};

// 64-bit mix used to key per-node substreams in the tree simulation.  Not a
// cryptographic hash; it only needs to spread structured inputs (path
// indices) over the id space.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

}  // namespace brw
