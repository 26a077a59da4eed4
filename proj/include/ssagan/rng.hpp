#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace ssagan {

/// Deterministic random source.
///
/// Streams are derived from a master seed plus a list of stream ids, so any
/// consumer (epoch shuffles, per-step noise, weight init) can be regenerated
/// without carrying engine state around. Normal variates use Box-Muller with
/// no cached second value, so a draw depends only on the engine position.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream keyed by (seed, ids...).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> stream_ids);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  std::string state() const;
  void set_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ssagan
