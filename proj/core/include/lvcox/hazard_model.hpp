#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "lvcox/latent_moments.hpp"

namespace lvcox {

struct SurvivalRecord {
  Eigen::VectorXd features;
  double time = 1.0;
  bool event = false;
};

// Throws DomainError unless time > 0 and all features are finite.
void validate_record(const SurvivalRecord& record);

// Risk sets R(t_i) = {j : t_j >= t_i} for every uncensored record.
//
// Every risk set is a prefix of one permutation of the records (sorted by
// decreasing time), so the index stores that permutation once plus a prefix
// length per event. Tied event times resolve to the same prefix (Breslow).
class RiskSetIndex {
 public:
  struct Event {
    std::size_t record;     // index of the uncensored record
    std::size_t risk_size;  // |R(t_record)|; the risk set is order()[0, risk_size)
  };

  RiskSetIndex(std::vector<std::size_t> order, std::vector<Event> events);

  std::size_t record_count() const noexcept { return order_.size(); }
  // Record indices sorted by decreasing time, ties by increasing index.
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  // Events sorted by increasing time, ties by increasing record index.
  const std::vector<Event>& events() const noexcept { return events_; }

  // Sorted record indices of the risk set of events()[e].
  std::vector<std::size_t> members(std::size_t e) const;
  // Position of `record` in events(), or events().size() when censored.
  std::size_t find_event(std::size_t record) const;
  // For every record j, the number of event risk sets containing j.
  std::vector<std::size_t> membership_counts() const;

 private:
  std::vector<std::size_t> order_;
  std::vector<Event> events_;
};

RiskSetIndex build_risk_sets(std::span<const SurvivalRecord> records);

enum class GatingMode { Soft, Hard };

struct ModelParams {
  Eigen::MatrixXd beta;            // K x d, row k is beta_k
  Eigen::MatrixXd gating_weights;  // K x d
  Eigen::VectorXd gating_bias;     // K
  double temperature = 1.0;

  static ModelParams zeros(std::size_t classes, std::size_t dim);

  std::size_t classes() const noexcept {
    return static_cast<std::size_t>(beta.rows());
  }
  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(beta.cols());
  }
  // Throws on inconsistent shapes, non-finite entries or temperature <= 0.
  void validate() const;
};

struct ObjectiveConfig {
  GatingMode gating_mode = GatingMode::Soft;
  double lambda_entropy = 0.0;
  double lambda_gap = 0.0;
  int p_max = 2;
  double eps_support = 0.0;
  // Hard gating trains with one-hot forward and soft-posterior backward.
  bool straight_through = true;
  // Explicit w_p for p = 2..p_max; empty selects w_p = 1/p!.
  std::vector<double> series_weights;

  double series_weight(int p) const;
  void validate() const;
};

// Gradient of the joint objective; same shapes as ModelParams.
struct ModelGradient {
  Eigen::MatrixXd beta;
  Eigen::MatrixXd gating_weights;
  Eigen::VectorXd gating_bias;
};

struct ObjectiveValue {
  double value = 0.0;
  ModelGradient gradient;
};

// softmax((W x + b) / tau); Hard maps to one-hot at the argmax, ties to the
// lowest class.
LatentPosterior posterior(const ModelParams& params, const Eigen::VectorXd& x,
                          GatingMode mode = GatingMode::Soft);

FactorSpectrum spectrum(const ModelParams& params, const Eigen::VectorXd& x);

// log E[exp(beta_z . x)] under the gating posterior; the model's risk score.
double risk_score(const ModelParams& params, const Eigen::VectorXd& x,
                  GatingMode mode = GatingMode::Soft);

std::vector<double> risk_scores(const ModelParams& params,
                                std::span<const SurvivalRecord> records,
                                GatingMode mode = GatingMode::Soft);

// E[alpha_i] / sum_{j in R(t_i)} E[alpha_j] for uncensored record `record`.
double approx_event_probability(std::size_t record, const ModelParams& params,
                                std::span<const SurvivalRecord> records,
                                const RiskSetIndex& risk_sets,
                                GatingMode mode = GatingMode::Soft);

double negative_log_partial_likelihood(const ModelParams& params,
                                       std::span<const SurvivalRecord> records,
                                       const RiskSetIndex& risk_sets,
                                       const ObjectiveConfig& config);

// lambda_entropy * H(posterior) + lambda_gap * sum_p w_p [G(x^-p) + G(x^p)]
// where G is the tight Jensen-gap bound over the record's support interval.
double regularizer(const ModelParams& params, const SurvivalRecord& record,
                   const ObjectiveConfig& config);

// Negative log partial likelihood plus the regularizer of every member of
// every event's risk set.
double joint_objective(const ModelParams& params,
                       std::span<const SurvivalRecord> records,
                       const RiskSetIndex& risk_sets,
                       const ObjectiveConfig& config);

ObjectiveValue objective_and_gradient(const ModelParams& params,
                                      std::span<const SurvivalRecord> records,
                                      const RiskSetIndex& risk_sets,
                                      const ObjectiveConfig& config);

ModelGradient objective_gradient(const ModelParams& params,
                                 std::span<const SurvivalRecord> records,
                                 const RiskSetIndex& risk_sets,
                                 const ObjectiveConfig& config);

// Harrell's C over pairs with t_i < t_j and event_i set. Throws
// UndefinedMetricError when no pair is comparable.
double concordance_index(std::span<const double> risk,
                         std::span<const double> times,
                         std::span<const int> events);

double concordance_index(std::span<const double> risk,
                         std::span<const SurvivalRecord> records);

}  // namespace lvcox
