#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lvcox/jensen_bounds.hpp"

namespace lvcox {

// Distribution over K discrete latent classes for one entity.
class LatentPosterior {
 public:
  explicit LatentPosterior(std::vector<double> probs);

  static LatentPosterior uniform(std::size_t classes);
  static LatentPosterior one_hot(std::size_t classes, std::size_t index);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  bool is_one_hot() const noexcept;

 private:
  std::vector<double> probs_;
};

// Per-class hazard factors a_k = exp(beta_k . x), stored as log a_k.
class FactorSpectrum {
 public:
  explicit FactorSpectrum(std::vector<double> log_values);

  static FactorSpectrum from_factors(std::span<const double> factors);

  std::size_t size() const noexcept { return log_values_.size(); }
  double log_value(std::size_t k) const { return log_values_[k]; }
  const std::vector<double>& log_values() const noexcept { return log_values_; }

 private:
  std::vector<double> log_values_;
};

// One entity's contribution to a risk set: its posterior and its factors.
struct LatentFactor {
  LatentPosterior posterior;
  FactorSpectrum spectrum;
};

struct SupportInterval {
  Interval interval;
  double coverage;
  std::vector<std::size_t> included_classes;
};

struct SeriesResult {
  double value;
  bool converging;
};

// E[a^p] = sum_k pi_k a_k^p, evaluated as a log-sum-exp.
double factor_moment(const LatentPosterior& post, const FactorSpectrum& factors,
                     int p);
double log_factor_moment(const LatentPosterior& post,
                         const FactorSpectrum& factors, int p);

// E[(sum_j X_j)^p] for independent X_j given by `terms`.
double sum_moment(std::span<const LatentFactor> terms, int p);

// Raw moments E[S^0..S^p_max] of the sum; entry 0 is 1.
std::vector<double> sum_moments(std::span<const LatentFactor> terms,
                                int p_max);

// E[(X/Y)^p] = E[X^p] E[Y^-p] for independent positive X, Y.
double ratio_moment(double num_moment_p, double den_moment_negp);

// Partial sum of sum_{p>=0} (-1)^p E[eta^p] E[alpha^-p], the expansion of
// E[alpha / (alpha + eta)]. An empty eta list means eta = 0.
SeriesResult truncated_series(const LatentFactor& alpha,
                              std::span<const LatentFactor> eta_terms,
                              int order);

inline constexpr double kEnumerationBudget = 1e7;

// E[a_i / sum_{j in R} a_j] by enumerating every latent assignment of the
// risk set. `event_index` indexes into `risk_set`.
double exact_marginal(std::size_t event_index,
                      std::span<const LatentFactor> risk_set);

double moment_order(double h_alpha, double h_eta);

double entropy(const LatentPosterior& post);

// Classes with pi_k >= eps (and pi_k > 0) span the interval; falls back to
// the argmax class when none qualifies.
SupportInterval support_interval(const LatentPosterior& post,
                                 const FactorSpectrum& factors, double eps);

}  // namespace lvcox
