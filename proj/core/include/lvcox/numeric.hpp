#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace lvcox {

// log(sum(exp(v))). Returns -inf for an empty range or all -inf entries.
inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

// Streaming accumulator for log-sum-exp, used where the terms are produced
// one at a time (reverse cumulative sums over risk sets).
class LogSumExpAccumulator {
 public:
  void add(double x) {
    if (x == -std::numeric_limits<double>::infinity()) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const {
    return sum_ == 0.0 ? -std::numeric_limits<double>::infinity()
                       : max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

}  // namespace lvcox
