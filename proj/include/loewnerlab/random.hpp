#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace loewnerlab {

/// Philox4x64-10 counter-based generator (Salmon et al., SC'11).
/// A pure function of (counter, key); there is no hidden state.
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter block(Counter ctr, Key key) noexcept;
};

/// Stream identifiers. Every consumer of randomness owns one so that
/// replicas, bridge refinements and field draws never share counters.
enum class Stream : std::uint64_t {
  driving_increments = 1,
  bridge_refinement = 2,
  field_pairings = 3,
  stationarity_a = 4,
  stationarity_b = 5,
  scenario_states = 6,
  property_tests = 99,
};

/// Standard normal variate addressed by (seed, stream, a, b, index).
/// Four variates are produced per Philox block via two Box-Muller pairs,
/// so consecutive `index` values share blocks.
double gaussian(std::uint64_t seed, Stream stream, std::uint64_t a,
                std::uint64_t b, std::uint64_t index) noexcept;

/// Uniform variate on (0,1) addressed like `gaussian`.
double uniform(std::uint64_t seed, Stream stream, std::uint64_t a,
               std::uint64_t b, std::uint64_t index) noexcept;

/// Independent 64-bit seed for item `index` of a family (one driving path
/// per Monte Carlo replica, for example).
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept;

/// Sequential adapter over the counter-based generator. Satisfies
/// UniformRandomBitGenerator so it can drive <random> distributions.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  CounterEngine(std::uint64_t seed, Stream stream, std::uint64_t substream = 0)
      : seed_(seed), stream_(stream), substream_(substream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept;

  double uniform() noexcept;
  double normal() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t substream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 4> buffer_{};
  int buffered_ = 0;
};

/// Parses a seed written in decimal or as 0x-prefixed hexadecimal.
std::uint64_t parse_seed(std::string_view text);

}  // namespace loewnerlab
