#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "lvcox/hazard_model.hpp"

namespace lvcox::fixtures {

// Two entities with uniform posteriors over K = 2 classes and factors
// a = (1, 2) and a = (1, 3). Entity 0 has the event at t = 1; entity 1 is
// censored at t = 2, so the only risk set is {0, 1}.
struct TwoEntity {
  ModelParams params;
  std::vector<SurvivalRecord> records;
};

inline TwoEntity two_entity() {
  TwoEntity t;
  t.params = ModelParams::zeros(2, 2);
  t.params.beta(1, 0) = std::log(2.0);
  t.params.beta(1, 1) = std::log(3.0);
  t.records.push_back({Eigen::Vector2d(1.0, 0.0), 1.0, true});
  t.records.push_back({Eigen::Vector2d(0.0, 1.0), 2.0, false});
  return t;
}

inline ModelParams random_params(std::size_t classes, std::size_t dim, std::mt19937_64& engine,
                                 double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  ModelParams p = ModelParams::zeros(classes, dim);
  for (Eigen::Index r = 0; r < p.beta.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.beta.cols(); ++c) {
      p.beta(r, c) = normal(engine);
      p.gating_weights(r, c) = normal(engine);
    }
    p.gating_bias[r] = normal(engine);
  }
  return p;
}

// Random survival records with distinct continuous times; roughly
// `censor_fraction` of them censored, the first record always an event.
inline std::vector<SurvivalRecord> random_records(std::size_t n, std::size_t dim,
                                                  std::mt19937_64& engine,
                                                  double censor_fraction = 0.3) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> exp1(1.0);
  std::bernoulli_distribution censor(censor_fraction);
  std::vector<SurvivalRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    SurvivalRecord r;
    r.features = Eigen::VectorXd(static_cast<Eigen::Index>(dim));
    for (Eigen::Index f = 0; f < r.features.size(); ++f) r.features[f] = normal(engine);
    r.time = exp1(engine) + 1e-3;
    r.event = i == 0 || !censor(engine);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lvcox::fixtures
