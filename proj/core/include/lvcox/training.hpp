#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lvcox/data_io.hpp"
#include "lvcox/errors.hpp"
#include "lvcox/hazard_model.hpp"

namespace lvcox {

struct AdamHyper {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  explicit AdamState(std::size_t size, AdamHyper h = {})
      : first_moment(size, 0.0), second_moment(size, 0.0), hyper(h) {}

  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;
};

// One bias-corrected ADAM update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Flat parameter layout used by the optimizer: beta (row-major), then
// gating weights (row-major), then gating bias.
std::vector<double> flatten(const ModelParams& params);
std::vector<double> flatten(const ModelGradient& grad);
void unflatten(std::span<const double> flat, ModelParams& params);

struct TrainConfig {
  std::size_t classes = 2;
  ObjectiveConfig objective;
  AdamHyper adam;
  int max_epochs = 500;
  int patience = 20;
  double init_scale = 0.01;
  double temperature = 1.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_objective = 0.0;
  double validation_nll = 0.0;
  double validation_c_index = 0.0;  // NaN when undefined on the split
};

enum class StopReason { EarlyStopping, MaxEpochs };

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  StopReason stop_reason = StopReason::MaxEpochs;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Full-batch ADAM on the joint objective of `train_records`, early-stopped on
// validation NLL. Epoch e evaluates the current parameters, then steps.
TrainResult fit(const std::vector<SurvivalRecord>& train_records,
                const std::vector<SurvivalRecord>& validation_records,
                const TrainConfig& config, std::uint64_t seed);

struct TrainOutcome {
  ModelParams params;
  TrainReport report;
  NormalizationStats stats;
  DataSplits splits;  // normalized with `stats`
};

// Splits, z-scores on the training split, then fits.
TrainOutcome train(const std::vector<SurvivalRecord>& records, const TrainConfig& config,
                   const SplitFractions& fractions, std::uint64_t seed);

// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-12), using central differences with step h.
double finite_difference_check(const std::function<double(std::span<const double>)>& objective,
                               std::span<const double> point,
                               std::span<const double> analytic, double h);

struct BootstrapResult {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t skipped = 0;
};

// Linear-interpolation percentile of a sorted sample, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

// Percentile bootstrap. Resamples on which the metric throws
// UndefinedMetricError are skipped; more than 20% skipped is an error.
template <typename T>
BootstrapResult bootstrap_ci(const std::function<double(const std::vector<T>&)>& metric,
                             const std::vector<T>& dataset, std::size_t resamples,
                             double confidence, std::uint64_t seed) {
  if (resamples < 1) throw DomainError("bootstrap needs at least one resample");
  if (dataset.empty()) throw DomainError("bootstrap needs a nonempty dataset");
  if (!(confidence > 0.0) || !(confidence < 1.0)) {
    throw DomainError("bootstrap confidence must lie in (0, 1)");
  }

  BootstrapResult out;
  out.point = metric(dataset);

  std::mt19937_64 engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<T> sample;
  sample.reserve(dataset.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    sample.clear();
    for (std::size_t i = 0; i < dataset.size(); ++i) sample.push_back(dataset[pick(engine)]);
    try {
      values.push_back(metric(sample));
    } catch (const UndefinedMetricError&) {
      ++out.skipped;
    }
  }
  if (static_cast<double>(out.skipped) > 0.2 * static_cast<double>(resamples)) {
    throw UndefinedMetricError("metric undefined on " + std::to_string(out.skipped) + " of " +
                               std::to_string(resamples) + " bootstrap resamples");
  }
  std::sort(values.begin(), values.end());
  const double tail = 0.5 * (1.0 - confidence);
  out.lower = percentile(values, tail);
  out.upper = percentile(values, 1.0 - tail);
  return out;
}

}  // namespace lvcox
