#pragma once
// Seeded, splittable pseudo-randomness.
//
// A stream is addressed by (master seed, label, index tuple). The address is
// folded through SplitMix64 into the 256-bit state of a xoshiro256** generator,
// so any substream can be recreated without touching the others.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cef/types.hpp"

namespace cef {

struct KeyMaterial {
  std::uint64_t master_seed = 0;
  std::string label;
};

class Stream {
 public:
  Stream() = default;
  explicit Stream(const std::array<std::uint64_t, 4>& state) : s_(state) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) from the top 53 bits.
  double uniform();
  // Standard normal, Box-Muller; the second variate of each pair is cached.
  double gaussian();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  const std::array<std::uint64_t, 4>& state() const { return s_; }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

Stream derive_stream(const KeyMaterial& key, std::span<const std::uint64_t> indices);
inline Stream derive_stream(const KeyMaterial& key, std::initializer_list<std::uint64_t> indices) {
  return derive_stream(key, std::span<const std::uint64_t>(indices.begin(), indices.size()));
}

// Entries filled in column-major order.
Mat gaussian_matrix(Stream& s, int rows, int cols);
Vec gaussian_vector(Stream& s, int n);

// Householder QR of a Gaussian matrix with columns flipped so diag(R) > 0.
Mat haar_orthogonal(Stream& s, int n);

// (P x)[i] = x[map[i]].
struct Permutation {
  std::vector<int> map;

  int size() const { return static_cast<int>(map.size()); }
  Vec apply(const Vec& x) const;
  Mat matrix() const;
};

// Fisher-Yates shuffle of the identity.
Permutation random_permutation(Stream& s, int n);

}  // namespace cef
