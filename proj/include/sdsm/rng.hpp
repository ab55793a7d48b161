#ifndef SDSM_RNG_HPP
#define SDSM_RNG_HPP

#include <array>
#include <cstddef>
#include <cstdint>

namespace sdsm {

/// Philox4x32-10 block function (Salmon et al., Random123).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream.
///
/// The key is derived from (seed, stream); the counter is (block, substream).
/// A replicate owns one stream and asks for one substream per time step, so
/// draws never depend on scheduling or on how many draws earlier steps used.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream,
               std::uint64_t substream = 0);

  RandomStream substream(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t substream_id() const { return substream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential(double rate);
  /// Uniform on {0, ..., n-1}.
  std::size_t uniform_index(std::size_t n);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t substream_;
  Philox4x32::Key key_{};
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace sdsm

#endif  // SDSM_RNG_HPP
