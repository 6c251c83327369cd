#include "lvcox/training.hpp"

#include <cmath>
#include <limits>

namespace lvcox {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw DimensionError("adam_step: parameter, gradient and state sizes differ");
  }
  const auto& h = state.hyper;
  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double correct1 = 1.0 - std::pow(h.beta1, t);
  const double correct2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * grads[i];
    v = h.beta2 * v + (1.0 - h.beta2) * grads[i] * grads[i];
    const double m_hat = m / correct1;
    const double v_hat = v / correct2;
    params[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

namespace {

void append_row_major(const Eigen::MatrixXd& m, std::vector<double>& out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
}

std::vector<double> flatten_parts(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& weights,
                                  const Eigen::VectorXd& bias) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(beta.size() + weights.size() + bias.size()));
  append_row_major(beta, out);
  append_row_major(weights, out);
  for (Eigen::Index i = 0; i < bias.size(); ++i) out.push_back(bias[i]);
  return out;
}

}  // namespace

std::vector<double> flatten(const ModelParams& params) {
  return flatten_parts(params.beta, params.gating_weights, params.gating_bias);
}

std::vector<double> flatten(const ModelGradient& grad) {
  return flatten_parts(grad.beta, grad.gating_weights, grad.gating_bias);
}

void unflatten(std::span<const double> flat, ModelParams& params) {
  const auto expected =
      static_cast<std::size_t>(params.beta.size() + params.gating_weights.size() +
                               params.gating_bias.size());
  if (flat.size() != expected) {
    throw DimensionError("flat parameter vector has " + std::to_string(flat.size()) +
                         " entries, model needs " + std::to_string(expected));
  }
  std::size_t i = 0;
  for (auto* m : {&params.beta, &params.gating_weights}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = flat[i++];
    }
  }
  for (Eigen::Index k = 0; k < params.gating_bias.size(); ++k) params.gating_bias[k] = flat[i++];
}

TrainResult fit(const std::vector<SurvivalRecord>& train_records,
                const std::vector<SurvivalRecord>& validation_records, const TrainConfig& config,
                std::uint64_t seed) {
  if (train_records.empty() || validation_records.empty()) {
    throw DataError("training and validation splits must be nonempty");
  }
  auto has_event = [](const std::vector<SurvivalRecord>& rs) {
    return std::any_of(rs.begin(), rs.end(), [](const SurvivalRecord& r) { return r.event; });
  };
  if (!has_event(train_records)) throw DataError("training split has no events");
  if (!has_event(validation_records)) throw DataError("validation split has no events");
  if (config.classes < 1) throw DomainError("model needs at least one latent class");
  if (config.max_epochs < 1) throw DomainError("max_epochs must be >= 1");
  if (config.patience < 0) throw DomainError("patience must be >= 0");
  config.objective.validate();

  const auto dim = static_cast<std::size_t>(train_records.front().features.size());
  const auto train_sets = build_risk_sets(train_records);
  const auto val_sets = build_risk_sets(validation_records);

  ModelParams params = ModelParams::zeros(config.classes, dim);
  params.temperature = config.temperature;
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> init(0.0, config.init_scale);
  for (Eigen::Index r = 0; r < params.beta.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.beta.cols(); ++c) params.beta(r, c) = init(engine);
  }

  std::vector<double> flat = flatten(params);
  AdamState adam(flat.size(), config.adam);

  TrainResult result;
  TrainReport& report = result.report;
  result.params = params;
  double best_nll = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    ObjectiveValue ov;
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      ov = objective_and_gradient(params, train_records, train_sets, config.objective);
      rec.validation_nll =
          negative_log_partial_likelihood(params, validation_records, val_sets, config.objective);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    rec.train_objective = ov.value;
    try {
      rec.validation_c_index = concordance_index(
          risk_scores(params, validation_records, config.objective.gating_mode),
          validation_records);
    } catch (const UndefinedMetricError&) {
      rec.validation_c_index = std::numeric_limits<double>::quiet_NaN();
    }
    report.epochs.push_back(rec);

    if (rec.validation_nll < best_nll) {
      best_nll = rec.validation_nll;
      report.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best > config.patience) {
      report.stop_reason = StopReason::EarlyStopping;
      return result;
    }

    adam_step(flat, flatten(ov.gradient), adam);
    unflatten(flat, params);
  }
  report.stop_reason = StopReason::MaxEpochs;
  return result;
}

TrainOutcome train(const std::vector<SurvivalRecord>& records, const TrainConfig& config,
                   const SplitFractions& fractions, std::uint64_t seed) {
  auto raw = split(records, fractions, seed);
  TrainOutcome out;
  auto [train_norm, stats] = zscore(raw.train);
  out.splits.train = std::move(train_norm);
  out.splits.validation = zscore(raw.validation, stats).first;
  out.splits.test = zscore(raw.test, stats).first;
  out.stats = std::move(stats);

  auto fitted = fit(out.splits.train, out.splits.validation, config, seed);
  out.params = std::move(fitted.params);
  out.report = std::move(fitted.report);
  return out;
}

double finite_difference_check(const std::function<double(std::span<const double>)>& objective,
                               std::span<const double> point, std::span<const double> analytic,
                               double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  if (point.size() != analytic.size()) {
    throw DimensionError("gradient and point sizes differ");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double base = x[i];
    x[i] = base + h;
    const double up = objective(x);
    x[i] = base - h;
    const double down = objective(x);
    x[i] = base;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("percentile of an empty sample");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace lvcox
