#include "lvcox/latent_moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lvcox/errors.hpp"
#include "lvcox/numeric.hpp"

namespace lvcox {

LatentPosterior::LatentPosterior(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) throw DimensionError("posterior needs at least one class");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DomainError("posterior probabilities must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("posterior probabilities must sum to 1, got " +
                      std::to_string(total));
  }
}

LatentPosterior LatentPosterior::uniform(std::size_t classes) {
  if (classes == 0) throw DimensionError("posterior needs at least one class");
  return LatentPosterior(
      std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
}

LatentPosterior LatentPosterior::one_hot(std::size_t classes,
                                         std::size_t index) {
  if (index >= classes) throw DimensionError("one-hot index out of range");
  std::vector<double> probs(classes, 0.0);
  probs[index] = 1.0;
  return LatentPosterior(std::move(probs));
}

bool LatentPosterior::is_one_hot() const noexcept {
  return std::count_if(probs_.begin(), probs_.end(),
                       [](double p) { return p > 0.0; }) == 1;
}

FactorSpectrum::FactorSpectrum(std::vector<double> log_values)
    : log_values_(std::move(log_values)) {
  if (log_values_.empty()) throw DimensionError("spectrum needs at least one class");
  for (double v : log_values_) {
    if (!std::isfinite(v)) throw DomainError("spectrum log-values must be finite");
  }
}

FactorSpectrum FactorSpectrum::from_factors(std::span<const double> factors) {
  std::vector<double> logs;
  logs.reserve(factors.size());
  for (double a : factors) {
    if (!(a > 0.0)) throw DomainError("hazard factors must be positive");
    logs.push_back(std::log(a));
  }
  return FactorSpectrum(std::move(logs));
}

namespace {

void check_same_size(const LatentPosterior& post, const FactorSpectrum& factors) {
  if (post.size() != factors.size()) {
    throw DimensionError("posterior has " + std::to_string(post.size()) +
                         " classes but spectrum has " +
                         std::to_string(factors.size()));
  }
}

}  // namespace

double log_factor_moment(const LatentPosterior& post,
                         const FactorSpectrum& factors, int p) {
  check_same_size(post, factors);
  LogSumExpAccumulator acc;
  for (std::size_t k = 0; k < post.size(); ++k) {
    if (post[k] > 0.0) acc.add(std::log(post[k]) + p * factors.log_value(k));
  }
  return acc.value();
}

double factor_moment(const LatentPosterior& post, const FactorSpectrum& factors,
                     int p) {
  return std::exp(log_factor_moment(post, factors, p));
}

std::vector<double> sum_moments(std::span<const LatentFactor> terms,
                                int p_max) {
  if (p_max < 0) throw DomainError("moment order must be nonnegative");
  if (terms.empty()) throw DimensionError("sum_moment needs at least one term");

  const auto n = static_cast<std::size_t>(p_max) + 1;
  // binom[q][r] = C(q, r)
  std::vector<std::vector<double>> binom(n);
  for (std::size_t q = 0; q < n; ++q) {
    binom[q].assign(q + 1, 1.0);
    for (std::size_t r = 1; r < q; ++r) {
      binom[q][r] = binom[q - 1][r - 1] + binom[q - 1][r];
    }
  }

  std::vector<double> acc(n, 0.0);
  acc[0] = 1.0;
  std::vector<double> term(n);
  std::vector<double> next(n);
  for (const auto& t : terms) {
    for (std::size_t r = 0; r < n; ++r) {
      term[r] = factor_moment(t.posterior, t.spectrum, static_cast<int>(r));
    }
    for (std::size_t q = 0; q < n; ++q) {
      double s = 0.0;
      for (std::size_t r = 0; r <= q; ++r) {
        s += binom[q][r] * acc[r] * term[q - r];
      }
      next[q] = s;
    }
    std::swap(acc, next);
  }
  return acc;
}

double sum_moment(std::span<const LatentFactor> terms, int p) {
  if (p < 1) throw DomainError("sum_moment requires p >= 1");
  return sum_moments(terms, p)[static_cast<std::size_t>(p)];
}

double ratio_moment(double num_moment_p, double den_moment_negp) {
  if (!(num_moment_p > 0.0) || !(den_moment_negp > 0.0)) {
    throw DomainError("ratio_moment inputs must be positive");
  }
  return num_moment_p * den_moment_negp;
}

SeriesResult truncated_series(const LatentFactor& alpha,
                              std::span<const LatentFactor> eta_terms,
                              int order) {
  if (order < 0) throw DomainError("series order must be nonnegative");
  if (eta_terms.empty()) return {1.0, true};

  const auto eta = sum_moments(eta_terms, std::max(order, 1));
  double value = 1.0;
  double sign = 1.0;
  for (int p = 1; p <= order; ++p) {
    sign = -sign;
    value += sign * eta[static_cast<std::size_t>(p)] *
             factor_moment(alpha.posterior, alpha.spectrum, -p);
  }
  const double ratio =
      eta[1] * factor_moment(alpha.posterior, alpha.spectrum, -1);
  return {value, ratio < 1.0};
}

double exact_marginal(std::size_t event_index,
                      std::span<const LatentFactor> risk_set) {
  if (event_index >= risk_set.size()) {
    throw DimensionError("event index is not inside the risk set");
  }
  double required = 1.0;
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& f : risk_set) {
    check_same_size(f.posterior, f.spectrum);
    required *= static_cast<double>(f.posterior.size());
    for (double v : f.spectrum.log_values()) shift = std::max(shift, v);
  }
  if (required > kEnumerationBudget) {
    throw BudgetError("exact marginalization requires " +
                          std::to_string(static_cast<long long>(required)) +
                          " latent assignments (budget 10000000)",
                      required);
  }

  const std::size_t n = risk_set.size();
  // Factors rescaled by a common constant; the ratio is unchanged.
  std::vector<std::vector<double>> factors(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (double v : risk_set[j].spectrum.log_values()) {
      factors[j].push_back(std::exp(v - shift));
    }
  }

  // Mixed-radix odometer over assignments in lexicographic order.
  std::vector<std::size_t> z(n, 0);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      weight *= risk_set[j].posterior[z[j]];
      denom += factors[j][z[j]];
    }
    if (weight > 0.0) total += weight * factors[event_index][z[event_index]] / denom;

    std::size_t j = n;
    while (j > 0) {
      --j;
      if (++z[j] < risk_set[j].posterior.size()) break;
      z[j] = 0;
      if (j == 0) return total;
    }
  }
}

double moment_order(double h_alpha, double h_eta) {
  if (!(h_alpha > 0.0) || !(h_eta > 0.0)) {
    throw DomainError("moment orders must be positive");
  }
  return h_alpha * h_eta / (h_alpha + h_eta);
}

double entropy(const LatentPosterior& post) {
  double h = 0.0;
  for (double p : post.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

SupportInterval support_interval(const LatentPosterior& post,
                                 const FactorSpectrum& factors, double eps) {
  check_same_size(post, factors);
  if (!(eps >= 0.0) || !(eps < 1.0)) {
    throw DomainError("support threshold must lie in [0, 1)");
  }
  std::vector<std::size_t> included;
  for (std::size_t k = 0; k < post.size(); ++k) {
    if (post[k] > 0.0 && post[k] >= eps) included.push_back(k);
  }
  if (included.empty()) {
    const auto& p = post.probs();
    included.push_back(static_cast<std::size_t>(
        std::distance(p.begin(), std::max_element(p.begin(), p.end()))));
  }
  double lo_log = std::numeric_limits<double>::infinity();
  double hi_log = -std::numeric_limits<double>::infinity();
  double coverage = 0.0;
  for (std::size_t k : included) {
    lo_log = std::min(lo_log, factors.log_value(k));
    hi_log = std::max(hi_log, factors.log_value(k));
    coverage += post[k];
  }
  return SupportInterval{Interval(std::exp(lo_log), std::exp(hi_log)),
                         std::min(coverage, 1.0), std::move(included)};
}

}  // namespace lvcox
