#pragma once

#include <cstddef>
#include <vector>

namespace lvcox {

// Strictly convex power family on (0, inf): x^p (Positive) or x^-p
// (Negative), with p >= 2.
class PowerFunction {
 public:
  enum class Direction { Positive, Negative };

  PowerFunction(int exponent, Direction direction);

  static PowerFunction positive(int p) { return {p, Direction::Positive}; }
  static PowerFunction negative(int p) { return {p, Direction::Negative}; }

  int exponent() const noexcept { return exponent_; }
  Direction direction() const noexcept { return direction_; }
  // Signed exponent: p for Positive, -p for Negative.
  int signed_exponent() const noexcept {
    return direction_ == Direction::Positive ? exponent_ : -exponent_;
  }

  double operator()(double x) const;
  double derivative(double x) const;
  double log_value(double x) const;

 private:
  int exponent_;
  Direction direction_;
};

// Closed positive interval [lower, upper].
class Interval {
 public:
  Interval(double lower, double upper);

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double width() const noexcept { return upper_ - lower_; }
  bool contains(double x) const noexcept { return x >= lower_ && x <= upper_; }

 private:
  double lower_;
  double upper_;
};

// Widths below this are treated as a single point.
inline constexpr double kDegenerateWidth = 1e-12;

struct GapBound {
  enum class Method { Tight, Dragomir };

  double value = 0.0;
  double kappa = 0.0;
  double w_star = 0.0;
  Method method = Method::Tight;
};

struct Atom {
  double value;
  double probability;
};

// Finite law with strictly positive support.
class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(std::vector<Atom> atoms);

  static DiscreteDistribution point_mass(double value);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double mean() const;
  bool supported_in(const Interval& iv) const;

 private:
  std::vector<Atom> atoms_;
};

// Converse-Jensen bound (1/4)(U-L)(f'(U)-f'(L)).
double dragomir_bound(const PowerFunction& f, const Interval& iv);

// argmax over w in [L, U] of s*w - f(w), s the secant slope of f over the
// interval. This is the gradient of the convex conjugate of f at s.
double conjugate_maximizer(const PowerFunction& f, const Interval& iv);

// Supremum of E[f(X)] - f(E[X]) over all laws supported in iv, attained by
// a two-point law on {L, U} with weight kappa on U.
GapBound tight_bound(const PowerFunction& f, const Interval& iv);

double empirical_gap(const PowerFunction& f, const DiscreteDistribution& dist);

DiscreteDistribution worst_case_distribution(const PowerFunction& f,
                                             const Interval& iv);

// Coverage probability for the sub-Gaussian interval construction:
//   erf((U - m) / (2 sqrt(2) sigma m |beta|))
//     - erf((-L - m) / (2 sqrt(2) sigma m |beta|)),
// evaluated as written and clamped to [0, 1].
double delta_probability(double upper, double lower, double mu_factor,
                         double sigma, double beta_norm);

}  // namespace lvcox
