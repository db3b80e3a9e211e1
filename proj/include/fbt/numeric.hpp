#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fbt/errors.hpp"

namespace fbt {

/// Threshold comparisons are made on a 1e-12 grid.
inline constexpr double kGrid = 1e-12;

inline double snap(double x) {
  if (!std::isfinite(x)) return x;
  if (std::fabs(x) >= 1e3) return x;
  return std::round(x / kGrid) * kGrid;
}

/// a >= b after snapping both sides.
inline bool geq(double a, double b) { return snap(a) >= snap(b); }
/// a < b after snapping both sides.
inline bool lt(double a, double b) { return snap(a) < snap(b); }

/** @brief Neumaier-compensated accumulator; order of additions is the caller's responsibility. */
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double stable_sum(std::span<const double> v) {
  Accumulator acc;
  for (double x : v) acc.add(x);
  return acc.value();
}

/// p * log2(1/p) with the 0 log 0 = 0 convention.
inline double plogp(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

/// q^n, throwing CapacityError if it exceeds 2^62.
inline std::uint64_t checked_pow(std::uint64_t q, std::size_t n) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (q != 0 && r > (std::uint64_t{1} << 62) / q)
      throw CapacityError("sequence space " + std::to_string(q) + "^" + std::to_string(n) +
                          " exceeds 2^62");
    r *= q;
  }
  return r;
}

inline double log2_count(std::uint64_t c) { return std::log2(static_cast<double>(c)); }

}  // namespace fbt
