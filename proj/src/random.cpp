#include "loewnerlab/random.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "loewnerlab/errors.hpp"

namespace loewnerlab {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

// Second key word; distinct per use so normals and uniforms never alias.
constexpr std::uint64_t kGaussianKey = 0x6C62272E07BB0142ULL;
constexpr std::uint64_t kUniformKey = 0x94D049BB133111EBULL;
constexpr std::uint64_t kEngineKey = 0xBF58476D1CE4E5B9ULL;
constexpr std::uint64_t kSeedKey = 0xD1B54A32D192ED03ULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi,
                    std::uint64_t& lo) noexcept {
  __extension__ using u128 = unsigned __int128;
  const u128 p = static_cast<u128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline Philox4x64::Counter round(const Philox4x64::Counter& c,
                                 const Philox4x64::Key& k) noexcept {
  std::uint64_t hi0, lo0, hi1, lo1;
  mulhilo(kMul0, c[0], hi0, lo0);
  mulhilo(kMul1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline double to_open_unit(std::uint64_t x) noexcept {
  // 53 random bits centred in their bucket: never exactly 0 or 1.
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x64::Counter Philox4x64::block(Counter ctr, Key key) noexcept {
  ctr = round(ctr, key);
  for (int r = 1; r < 10; ++r) {
    key[0] += kWeyl0;
    key[1] += kWeyl1;
    ctr = round(ctr, key);
  }
  return ctr;
}

double gaussian(std::uint64_t seed, Stream stream, std::uint64_t a,
                std::uint64_t b, std::uint64_t index) noexcept {
  const auto bits = Philox4x64::block(
      {index / 4, a, b, static_cast<std::uint64_t>(stream)}, {seed, kGaussianKey});
  const unsigned lane = index % 4;
  const unsigned pair = lane / 2;
  const double u0 = to_open_unit(bits[2 * pair]);
  const double u1 = to_open_unit(bits[2 * pair + 1]);
  const double radius = std::sqrt(-2.0 * std::log(u0));
  const double angle = 2.0 * std::numbers::pi * u1;
  return (lane % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

double uniform(std::uint64_t seed, Stream stream, std::uint64_t a,
               std::uint64_t b, std::uint64_t index) noexcept {
  const auto bits = Philox4x64::block(
      {index / 4, a, b, static_cast<std::uint64_t>(stream)}, {seed, kUniformKey});
  return to_open_unit(bits[index % 4]);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
  return Philox4x64::block({index, 0, 0, static_cast<std::uint64_t>(stream)},
                           {seed, kSeedKey})[0];
}

CounterEngine::result_type CounterEngine::operator()() noexcept {
  if (buffered_ == 0) {
    buffer_ = Philox4x64::block(
        {counter_++, substream_, 0, static_cast<std::uint64_t>(stream_)},
        {seed_, kEngineKey});
    buffered_ = 4;
  }
  return buffer_[4 - buffered_--];
}

double CounterEngine::uniform() noexcept { return to_open_unit((*this)()); }

double CounterEngine::normal() noexcept {
  const double u0 = uniform();
  const double u1 = uniform();
  return std::sqrt(-2.0 * std::log(u0)) * std::cos(2.0 * std::numbers::pi * u1);
}

std::uint64_t parse_seed(std::string_view text) {
  std::uint64_t value = 0;
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value, base);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ValidationError("invalid seed '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace loewnerlab
