#include "lvcox/jensen_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lvcox/errors.hpp"
#include "lvcox/numeric.hpp"

namespace lvcox {

PowerFunction::PowerFunction(int exponent, Direction direction)
    : exponent_(exponent), direction_(direction) {
  if (exponent < 2) {
    throw DomainError("power function exponent must be >= 2, got " +
                      std::to_string(exponent));
  }
}

double PowerFunction::log_value(double x) const {
  return signed_exponent() * std::log(x);
}

double PowerFunction::operator()(double x) const {
  if (direction_ == Direction::Positive) return std::pow(x, exponent_);
  return std::exp(log_value(x));
}

double PowerFunction::derivative(double x) const {
  // d/dx x^q = q x^(q-1)
  const int q = signed_exponent();
  return q * std::exp((q - 1) * std::log(x));
}

Interval::Interval(double lower, double upper) : lower_(lower), upper_(upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower > 0.0) ||
      !(lower <= upper)) {
    throw DomainError("interval requires 0 < L <= U finite, got [" +
                      std::to_string(lower) + ", " + std::to_string(upper) +
                      "]");
  }
}

DiscreteDistribution::DiscreteDistribution(std::vector<Atom> atoms)
    : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw DomainError("distribution needs at least one atom");
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (!(a.value > 0.0) || !std::isfinite(a.value)) {
      throw DomainError("distribution atoms must be strictly positive");
    }
    if (!(a.probability >= 0.0)) {
      throw DomainError("distribution probabilities must be nonnegative");
    }
    total += a.probability;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("distribution probabilities must sum to 1");
  }
}

DiscreteDistribution DiscreteDistribution::point_mass(double value) {
  return DiscreteDistribution({{value, 1.0}});
}

double DiscreteDistribution::mean() const {
  double m = 0.0;
  for (const auto& a : atoms_) m += a.probability * a.value;
  return m;
}

bool DiscreteDistribution::supported_in(const Interval& iv) const {
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [&](const Atom& a) { return iv.contains(a.value); });
}

double dragomir_bound(const PowerFunction& f, const Interval& iv) {
  const double lo = iv.lower();
  const double hi = iv.upper();
  const int p = f.exponent();
  double spread;
  if (f.direction() == PowerFunction::Direction::Positive) {
    spread = std::pow(hi, p - 1) - std::pow(lo, p - 1);
  } else {
    spread = std::exp(-(p + 1) * std::log(lo)) -
             std::exp(-(p + 1) * std::log(hi));
  }
  const double bound = 0.25 * p * (hi - lo) * spread;
  require_finite(bound, "dragomir_bound (exponent " + std::to_string(p) + ")");
  return std::max(0.0, bound);
}

namespace {

// log of sum_{k=0}^{p-1} U^k L^(p-1-k), which equals (U^p - L^p)/(U - L)
// without the cancellation.
double log_secant_sum(int p, double lo, double hi) {
  std::vector<double> terms(static_cast<std::size_t>(p));
  const double log_lo = std::log(lo);
  const double log_hi = std::log(hi);
  for (int k = 0; k < p; ++k) {
    terms[static_cast<std::size_t>(k)] = k * log_hi + (p - 1 - k) * log_lo;
  }
  return log_sum_exp(terms);
}

}  // namespace

double conjugate_maximizer(const PowerFunction& f, const Interval& iv) {
  const double lo = iv.lower();
  const double hi = iv.upper();
  if (iv.width() < kDegenerateWidth) return lo;

  const int p = f.exponent();
  const double log_sum = log_secant_sum(p, lo, hi);
  double log_w;
  if (f.direction() == PowerFunction::Direction::Positive) {
    // f'(w) = p w^(p-1) = (U^p - L^p)/(U - L)
    log_w = (log_sum - std::log(p)) / (p - 1);
  } else {
    // f'(w) = -p w^-(p+1) = -(U^p - L^p) / ((U - L) U^p L^p)
    log_w = (std::log(p) + p * std::log(hi) + p * std::log(lo) - log_sum) /
            (p + 1);
  }
  return std::clamp(std::exp(log_w), lo, hi);
}

GapBound tight_bound(const PowerFunction& f, const Interval& iv) {
  const double lo = iv.lower();
  const double hi = iv.upper();
  if (iv.width() < kDegenerateWidth) return GapBound{0.0, 0.0, lo};

  const double w = conjugate_maximizer(f, iv);
  const double kappa = std::clamp((w - lo) / (hi - lo), 0.0, 1.0);
  const double value = kappa * f(hi) + (1.0 - kappa) * f(lo) - f(w);
  require_finite(value,
                 "tight_bound (exponent " + std::to_string(f.exponent()) + ")");
  return GapBound{std::max(0.0, value), kappa, w, GapBound::Method::Tight};
}

double empirical_gap(const PowerFunction& f, const DiscreteDistribution& dist) {
  double expected = 0.0;
  for (const auto& a : dist.atoms()) expected += a.probability * f(a.value);
  return expected - f(dist.mean());
}

DiscreteDistribution worst_case_distribution(const PowerFunction& f,
                                             const Interval& iv) {
  if (iv.width() < kDegenerateWidth) {
    return DiscreteDistribution::point_mass(iv.lower());
  }
  const GapBound g = tight_bound(f, iv);
  return DiscreteDistribution(
      {{iv.upper(), g.kappa}, {iv.lower(), 1.0 - g.kappa}});
}

double delta_probability(double upper, double lower, double mu_factor,
                         double sigma, double beta_norm) {
  if (!(sigma > 0.0) || !(beta_norm > 0.0) || !(mu_factor > 0.0)) {
    throw DomainError("delta_probability requires positive sigma, |beta|, m");
  }
  const double scale =
      2.0 * std::numbers::sqrt2 * sigma * mu_factor * beta_norm;
  const double delta = std::erf((upper - mu_factor) / scale) -
                       std::erf((-lower - mu_factor) / scale);
  return std::clamp(delta, 0.0, 1.0);
}

}  // namespace lvcox
