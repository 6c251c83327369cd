#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's numerical routines.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "lvcox/hazard_model.hpp"

namespace lvcox::oracle {

// max over kappa in [0, 1] (grid step `step`) of
//   kappa f(U) + (1 - kappa) f(L) - f(kappa U + (1 - kappa) L).
struct GridGap {
  double value;
  double kappa;
};

inline GridGap grid_gap(const std::function<double(double)>& f, double lo, double hi,
                        double step = 1e-6) {
  GridGap best{-1.0, 0.0};
  const auto steps = static_cast<long>(std::llround(1.0 / step));
  for (long i = 0; i <= steps; ++i) {
    const double k = static_cast<double>(i) / static_cast<double>(steps);
    const double g = k * f(hi) + (1.0 - k) * f(lo) - f(k * hi + (1.0 - k) * lo);
    if (g > best.value) best = {g, k};
  }
  return best;
}

// argmax over a uniform grid of s*w - f(w) on [lo, hi].
inline double grid_maximizer(const std::function<double(double)>& f, double lo, double hi,
                             std::size_t points) {
  const double s = (f(hi) - f(lo)) / (hi - lo);
  double best_w = lo;
  double best = -1e300;
  for (std::size_t i = 0; i < points; ++i) {
    const double w = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const double v = s * w - f(w);
    if (v > best) {
      best = v;
      best_w = w;
    }
  }
  return best_w;
}

// E[a_event / sum_j a_j] by recursion over every latent assignment, with
// probabilities and factors given directly (not in log form).
inline double brute_force_marginal(std::size_t event,
                                   const std::vector<std::vector<double>>& probs,
                                   const std::vector<std::vector<double>>& factors) {
  const std::size_t n = probs.size();
  std::vector<std::size_t> z(n, 0);
  std::function<double(std::size_t, double)> rec = [&](std::size_t j, double weight) -> double {
    if (j == n) {
      double denom = 0.0;
      for (std::size_t m = 0; m < n; ++m) denom += factors[m][z[m]];
      return weight * factors[event][z[event]] / denom;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < probs[j].size(); ++k) {
      z[j] = k;
      total += rec(j + 1, weight * probs[j][k]);
    }
    return total;
  };
  return rec(0, 1.0);
}

// Textbook Cox negative log partial likelihood with Breslow ties:
//   sum_{i: event} [ log sum_{j: t_j >= t_i} exp(b.x_j) - b.x_i ].
inline double textbook_cox_nll(const Eigen::VectorXd& beta,
                               const std::vector<SurvivalRecord>& records) {
  double nll = 0.0;
  for (const auto& ri : records) {
    if (!ri.event) continue;
    double denom = 0.0;
    for (const auto& rj : records) {
      if (rj.time >= ri.time) denom += std::exp(beta.dot(rj.features));
    }
    nll += std::log(denom) - beta.dot(ri.features);
  }
  return nll;
}

// Monte Carlo estimate (mean, standard error) of E[(sum_j X_j)^p] for
// independent discrete X_j with the given probabilities and values.
struct McEstimate {
  double mean;
  double std_error;
};

inline McEstimate monte_carlo_sum_moment(const std::vector<std::vector<double>>& probs,
                                         const std::vector<std::vector<double>>& values, int p,
                                         std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<std::discrete_distribution<std::size_t>> draws;
  for (const auto& pr : probs) draws.emplace_back(pr.begin(), pr.end());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double total = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) total += values[j][draws[j](engine)];
    const double v = std::pow(total, p);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = (sum_sq / n - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

// Direct O(n^2) Harrell C used to cross-check the library implementation.
inline double naive_harrell(const std::vector<double>& risk, const std::vector<double>& times,
                            const std::vector<int>& events) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < risk.size(); ++i) {
    for (std::size_t j = 0; j < risk.size(); ++j) {
      if (events[i] == 1 && times[i] < times[j]) {
        den += 1.0;
        num += risk[i] > risk[j] ? 1.0 : (risk[i] == risk[j] ? 0.5 : 0.0);
      }
    }
  }
  return num / den;
}

}  // namespace lvcox::oracle
