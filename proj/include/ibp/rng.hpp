#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace ibp {

// Philox4x64-10 (Salmon et al.), matching the Random123 reference and
// numpy.random.Philox bit for bit.
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;

  static Counter block(Counter c, Key k) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k[0] += W0;
        k[1] += W1;
      }
      const unsigned __int128 p0 = static_cast<unsigned __int128>(M0) * c[0];
      const unsigned __int128 p1 = static_cast<unsigned __int128>(M1) * c[2];
      const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const auto lo0 = static_cast<std::uint64_t>(p0);
      const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const auto lo1 = static_cast<std::uint64_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn labels into stream tags.
constexpr std::uint64_t tag_of(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 0x100000001B3ULL;
  return h;
}

// Generator for one sample. Every draw is a pure function of
// (seed, stream, index) and the position in the draw sequence.
class SampleRng {
 public:
  using result_type = std::uint64_t;

  SampleRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, bool antithetic)
      : key_{seed, stream}, ctr_{index, 0, 0, 0}, flip_(antithetic) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = Philox4x64::block(ctr_, key_);
      ++ctr_[1];
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  // Uniform on (0, 1], 53 bits.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  // Box-Muller; the antithetic flag negates every normal.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    const double s = flip_ ? -1.0 : 1.0;
    spare_ = s * r * std::sin(th);
    have_spare_ = true;
    return s * r * std::cos(th);
  }

 private:
  Philox4x64::Key key_;
  Philox4x64::Counter ctr_;
  Philox4x64::Counter buf_{};
  int pos_ = 4;
  bool flip_ = false;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// A named stream of samples. Sample i depends only on (seed, stream, i).
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool antithetic = false;

  RngStream child(std::uint64_t tag) const {
    return {seed, splitmix64(stream ^ splitmix64(tag + 0x632BE59BD9B4E019ULL)), antithetic};
  }
  RngStream child(const char* label) const { return child(tag_of(label)); }
  RngStream child(const char* label, std::uint64_t i) const { return child(label).child(i); }

  RngStream mirrored() const { return {seed, stream, !antithetic}; }

  SampleRng sample(std::uint64_t index) const { return {seed, stream, index, antithetic}; }
};

}  // namespace ibp
