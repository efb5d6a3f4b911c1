#pragma once

#include <array>
#include <cstdint>

namespace tcilab {

// Philox4x32-10 counter-based generator. A stream is identified by
// (seed, stream_id); the block counter is private to the stream object, so
// streams never share mutable state and can be handed out per sample.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform();
  double normal();
  void fill_normal(double* out, std::size_t n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derive a child stream id from a parent id and a tag without collisions for
// small tags (used to split e.g. noise vs pilot batches).
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t tag);

}  // namespace tcilab
