#include "cef/keystream.hpp"

#include <cmath>
#include <numbers>

namespace cef {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

inline std::uint64_t mix(std::uint64_t h, std::uint64_t word) {
  std::uint64_t st = h ^ word;
  return splitmix64(st);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Stream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Stream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Stream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

std::uint64_t Stream::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

Stream derive_stream(const KeyMaterial& key, std::span<const std::uint64_t> indices) {
  std::uint64_t h = mix(0x6a09e667f3bcc908ULL, key.master_seed);
  // Label bytes packed little-endian, eight per word, then the length.
  std::uint64_t word = 0;
  std::size_t n = 0;
  for (unsigned char c : key.label) {
    word |= static_cast<std::uint64_t>(c) << (8 * (n % 8));
    if (++n % 8 == 0) {
      h = mix(h, word);
      word = 0;
    }
  }
  if (n % 8 != 0) h = mix(h, word);
  h = mix(h, 0xa000000000000000ULL ^ key.label.size());
  for (std::uint64_t idx : indices) h = mix(h, idx);
  h = mix(h, 0xb000000000000000ULL ^ indices.size());

  std::array<std::uint64_t, 4> st{};
  for (auto& w : st) w = splitmix64(h);
  if ((st[0] | st[1] | st[2] | st[3]) == 0) st[0] = 1;
  return Stream(st);
}

Mat gaussian_matrix(Stream& s, int rows, int cols) {
  require(rows >= 1 && cols >= 1, "gaussian_matrix: rows and cols must be >= 1");
  Mat m(rows, cols);
  double* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = s.gaussian();
  return m;
}

Vec gaussian_vector(Stream& s, int n) {
  require(n >= 1, "gaussian_vector: n must be >= 1");
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = s.gaussian();
  return v;
}

Mat haar_orthogonal(Stream& s, int n) {
  require(n >= 1, "haar_orthogonal: n must be >= 1");
  const Mat g = gaussian_matrix(s, n, n);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  const Mat& r = qr.matrixQR();
  for (int j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Vec Permutation::apply(const Vec& x) const {
  require(x.size() == size(), "Permutation::apply: dimension mismatch");
  Vec y(x.size());
  for (int i = 0; i < size(); ++i) y[i] = x[map[i]];
  return y;
}

Mat Permutation::matrix() const {
  Mat p = Mat::Zero(size(), size());
  for (int i = 0; i < size(); ++i) p(i, map[i]) = 1.0;
  return p;
}

Permutation random_permutation(Stream& s, int n) {
  require(n >= 1, "random_permutation: n must be >= 1");
  Permutation p;
  p.map.resize(n);
  for (int i = 0; i < n; ++i) p.map[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(s.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p.map[i], p.map[j]);
  }
  return p;
}

}  // namespace cef
