#include "lvcox/hazard_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lvcox/errors.hpp"
#include "lvcox/jensen_bounds.hpp"
#include "lvcox/numeric.hpp"

namespace lvcox {

void validate_record(const SurvivalRecord& record) {
  if (!(record.time > 0.0) || !std::isfinite(record.time)) {
    throw DomainError("survival time must be positive and finite");
  }
  if (!record.features.allFinite()) {
    throw DomainError("survival record features must be finite");
  }
}

RiskSetIndex::RiskSetIndex(std::vector<std::size_t> order,
                           std::vector<Event> events)
    : order_(std::move(order)), events_(std::move(events)) {}

std::vector<std::size_t> RiskSetIndex::members(std::size_t e) const {
  const auto& ev = events_.at(e);
  std::vector<std::size_t> out(order_.begin(),
                               order_.begin() + static_cast<long>(ev.risk_size));
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t RiskSetIndex::find_event(std::size_t record) const {
  for (std::size_t e = 0; e < events_.size(); ++e) {
    if (events_[e].record == record) return e;
  }
  return events_.size();
}

std::vector<std::size_t> RiskSetIndex::membership_counts() const {
  const std::size_t n = order_.size();
  std::vector<std::size_t> by_position(n + 1, 0);
  for (const auto& ev : events_) by_position[ev.risk_size - 1] += 1;
  for (std::size_t pos = n; pos-- > 1;) by_position[pos - 1] += by_position[pos];
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) counts[order_[pos]] = by_position[pos];
  return counts;
}

RiskSetIndex build_risk_sets(std::span<const SurvivalRecord> records) {
  if (records.empty()) throw DataError("cannot build risk sets of no records");
  for (const auto& r : records) validate_record(r);

  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].time > records[b].time;
  });

  // risk size of every record = one past the last position with equal time
  std::vector<std::size_t> risk_size(n);
  for (std::size_t pos = 0; pos < n;) {
    std::size_t end = pos;
    while (end < n && records[order[end]].time == records[order[pos]].time) ++end;
    for (std::size_t q = pos; q < end; ++q) risk_size[order[q]] = end;
    pos = end;
  }

  std::vector<RiskSetIndex::Event> events;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].event) events.push_back({i, risk_size[i]});
  }
  if (events.empty()) throw DataError("no uncensored events: risk-set index is empty");
  std::stable_sort(events.begin(), events.end(), [&](const auto& a, const auto& b) {
    return records[a.record].time < records[b.record].time;
  });
  return RiskSetIndex(std::move(order), std::move(events));
}

ModelParams ModelParams::zeros(std::size_t classes, std::size_t dim) {
  const auto k = static_cast<Eigen::Index>(classes);
  const auto d = static_cast<Eigen::Index>(dim);
  return ModelParams{Eigen::MatrixXd::Zero(k, d), Eigen::MatrixXd::Zero(k, d),
                     Eigen::VectorXd::Zero(k), 1.0};
}

void ModelParams::validate() const {
  if (beta.rows() < 1 || beta.cols() < 1) {
    throw DimensionError("model needs K >= 1 classes and d >= 1 features");
  }
  if (gating_weights.rows() != beta.rows() || gating_weights.cols() != beta.cols() ||
      gating_bias.size() != beta.rows()) {
    throw DimensionError("beta, gating weights and gating bias disagree in shape");
  }
  if (!beta.allFinite() || !gating_weights.allFinite() || !gating_bias.allFinite()) {
    throw NumericError("model parameters must be finite");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("gating temperature must be positive");
  }
}

double ObjectiveConfig::series_weight(int p) const {
  if (!series_weights.empty()) {
    const auto idx = static_cast<std::size_t>(p - 2);
    if (p < 2 || idx >= series_weights.size()) {
      throw DimensionError("no series weight configured for p = " + std::to_string(p));
    }
    return series_weights[idx];
  }
  return 1.0 / std::tgamma(p + 1.0);
}

void ObjectiveConfig::validate() const {
  if (!(lambda_entropy >= 0.0) || !(lambda_gap >= 0.0)) {
    throw DomainError("regularizer weights must be nonnegative");
  }
  if (p_max < 2) throw DomainError("p_max must be >= 2");
  if (!(eps_support >= 0.0) || !(eps_support < 1.0)) {
    throw DomainError("eps_support must lie in [0, 1)");
  }
  if (!series_weights.empty() &&
      series_weights.size() != static_cast<std::size_t>(p_max - 1)) {
    throw DimensionError("series_weights must hold p_max - 1 entries");
  }
}

namespace {

void check_dim(const ModelParams& params, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != params.dim()) {
    throw DimensionError("feature vector has " + std::to_string(x.size()) +
                         " entries but the model expects " +
                         std::to_string(params.dim()));
  }
}

// Per-entity quantities shared by the objective and its gradient.
struct EntityState {
  Eigen::VectorXd logits;         // (W x + b) / tau
  Eigen::VectorXd log_factors;    // beta x
  Eigen::VectorXd soft;           // softmax(logits)
  Eigen::VectorXd log_soft;
  Eigen::VectorXd forward;        // soft, or one-hot at the argmax in Hard mode
  double log_mean_factor = 0.0;   // log E[alpha]
};

EntityState entity_state(const ModelParams& params, const Eigen::VectorXd& x,
                         GatingMode mode) {
  check_dim(params, x);
  EntityState st;
  st.logits = (params.gating_weights * x + params.gating_bias) / params.temperature;
  st.log_factors = params.beta * x;
  const auto k = st.logits.size();

  const double norm = log_sum_exp({st.logits.data(), static_cast<std::size_t>(k)});
  st.log_soft = st.logits.array() - norm;
  st.soft = st.log_soft.array().exp();

  if (mode == GatingMode::Soft) {
    st.forward = st.soft;
    std::vector<double> terms(static_cast<std::size_t>(k));
    for (Eigen::Index c = 0; c < k; ++c) {
      terms[static_cast<std::size_t>(c)] = st.log_soft[c] + st.log_factors[c];
    }
    st.log_mean_factor = log_sum_exp(terms);
  } else {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < k; ++c) {
      if (st.logits[c] > st.logits[best]) best = c;
    }
    st.forward = Eigen::VectorXd::Zero(k);
    st.forward[best] = 1.0;
    st.log_mean_factor = st.log_factors[best];
  }
  return st;
}

LatentPosterior to_posterior(const Eigen::VectorXd& probs) {
  std::vector<double> p(probs.data(), probs.data() + probs.size());
  // softmax output can miss 1 by a few ulps; renormalize before validating
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return LatentPosterior(std::move(p));
}

FactorSpectrum to_spectrum(const Eigen::VectorXd& log_factors) {
  return FactorSpectrum(std::vector<double>(
      log_factors.data(), log_factors.data() + log_factors.size()));
}

double entropy_of(const Eigen::VectorXd& probs, const Eigen::VectorXd& log_probs) {
  double h = 0.0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    if (probs[c] > 0.0) h -= probs[c] * log_probs[c];
  }
  return h;
}

double gap_term(const Eigen::VectorXd& forward, const Eigen::VectorXd& log_factors,
                const ObjectiveConfig& config) {
  const auto support = support_interval(to_posterior(forward),
                                        to_spectrum(log_factors), config.eps_support);
  if (support.interval.width() < kDegenerateWidth) return 0.0;
  double total = 0.0;
  for (int p = 2; p <= config.p_max; ++p) {
    total += config.series_weight(p) *
             (tight_bound(PowerFunction::negative(p), support.interval).value +
              tight_bound(PowerFunction::positive(p), support.interval).value);
  }
  return total;
}

constexpr double kGapStep = 1e-5;

struct Evaluation {
  double value = 0.0;
  ModelGradient gradient;
};

void check_inputs(const ModelParams& params, std::span<const SurvivalRecord> records,
                  const RiskSetIndex& risk_sets, const ObjectiveConfig& config) {
  params.validate();
  config.validate();
  if (risk_sets.record_count() != records.size()) {
    throw DimensionError("risk-set index was built for " +
                         std::to_string(risk_sets.record_count()) +
                         " records, got " + std::to_string(records.size()));
  }
}

Evaluation evaluate(const ModelParams& params, std::span<const SurvivalRecord> records,
                    const RiskSetIndex& risk_sets, const ObjectiveConfig& config,
                    bool with_gradient) {
  check_inputs(params, records, risk_sets, config);
  if (with_gradient && config.gating_mode == GatingMode::Hard && !config.straight_through) {
    throw UsageError("hard gating gradients require the straight-through convention");
  }

  const std::size_t n = records.size();
  const auto k = static_cast<Eigen::Index>(params.classes());
  std::vector<EntityState> states;
  states.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    states.push_back(entity_state(params, records[j].features, config.gating_mode));
    require_finite(states.back().log_mean_factor, "hazard factor of record " + std::to_string(j));
  }

  // Prefix log-sum-exp of log E[alpha] along decreasing time.
  const auto& order = risk_sets.order();
  std::vector<double> prefix(n + 1, -std::numeric_limits<double>::infinity());
  {
    LogSumExpAccumulator acc;
    for (std::size_t pos = 0; pos < n; ++pos) {
      acc.add(states[order[pos]].log_mean_factor);
      prefix[pos + 1] = acc.value();
    }
  }

  Evaluation out;
  double nll = 0.0;
  for (const auto& ev : risk_sets.events()) {
    const double term = prefix[ev.risk_size] - states[ev.record].log_mean_factor;
    nll += require_finite(term, "partial likelihood of record " + std::to_string(ev.record));
  }

  const bool use_entropy = config.lambda_entropy > 0.0;
  const bool use_gap = config.lambda_gap > 0.0;
  const auto counts = (use_entropy || use_gap) ? risk_sets.membership_counts()
                                               : std::vector<std::size_t>{};
  double reg = 0.0;
  std::vector<double> gaps(use_gap ? n : 0, 0.0);
  for (std::size_t j = 0; j < n && (use_entropy || use_gap); ++j) {
    if (counts[j] == 0) continue;
    double r = 0.0;
    if (use_entropy && config.gating_mode == GatingMode::Soft) {
      r += config.lambda_entropy * entropy_of(states[j].soft, states[j].log_soft);
    }
    if (use_gap) {
      gaps[j] = gap_term(states[j].forward, states[j].log_factors, config);
      r += config.lambda_gap * gaps[j];
    }
    reg += static_cast<double>(counts[j]) * r;
  }
  out.value = require_finite(nll + reg, "joint objective");
  if (!with_gradient) return out;

  // d nll / d log E[alpha_j] = sum_{e : j in R_e} exp(r_j - LSE_e) - event_j,
  // with the event sum accumulated as a suffix log-sum-exp over positions.
  std::vector<LogSumExpAccumulator> by_position(n);
  for (const auto& ev : risk_sets.events()) by_position[ev.risk_size - 1].add(-prefix[ev.risk_size]);
  std::vector<double> suffix(n + 1, -std::numeric_limits<double>::infinity());
  {
    LogSumExpAccumulator acc;
    for (std::size_t pos = n; pos-- > 0;) {
      acc.add(by_position[pos].value());
      suffix[pos] = acc.value();
    }
  }
  std::vector<double> d_log_mean(n, 0.0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t j = order[pos];
    d_log_mean[j] = std::exp(states[j].log_mean_factor + suffix[pos]);
  }
  for (const auto& ev : risk_sets.events()) d_log_mean[ev.record] -= 1.0;

  const auto d = static_cast<Eigen::Index>(params.dim());
  ModelGradient& g = out.gradient;
  g.beta = Eigen::MatrixXd::Zero(k, d);
  g.gating_weights = Eigen::MatrixXd::Zero(k, d);
  g.gating_bias = Eigen::VectorXd::Zero(k);

  Eigen::VectorXd d_factor(k);
  Eigen::VectorXd d_logit(k);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& st = states[j];
    const auto& x = records[j].features;

    // ratio_c = a_c / E[alpha]; with forward probs it gives d r / d log a_c,
    // with soft probs the straight-through logit gradient.
    const Eigen::VectorXd ratio = (st.log_factors.array() - st.log_mean_factor).exp();
    const Eigen::VectorXd weighted = st.soft.cwiseProduct(ratio);
    d_factor = d_log_mean[j] * st.forward.cwiseProduct(ratio);
    d_logit = d_log_mean[j] * (weighted - st.soft * weighted.sum());

    const double c = counts.empty() ? 0.0 : static_cast<double>(counts[j]);
    if (use_entropy && c > 0.0) {
      const double h = entropy_of(st.soft, st.log_soft);
      // dH/du_c = -pi_c (log pi_c + H)
      d_logit -= config.lambda_entropy * c *
                 (st.soft.array() * (st.log_soft.array() + h)).matrix();
    }
    if (use_gap && c > 0.0 && gaps[j] > 0.0) {
      // support membership is piecewise constant in the gating parameters,
      // so only the factor direction carries a gradient
      Eigen::VectorXd shifted = st.log_factors;
      for (Eigen::Index cl = 0; cl < k; ++cl) {
        const double base = shifted[cl];
        shifted[cl] = base + kGapStep;
        const double up = gap_term(st.forward, shifted, config);
        shifted[cl] = base - kGapStep;
        const double down = gap_term(st.forward, shifted, config);
        shifted[cl] = base;
        d_factor[cl] += config.lambda_gap * c * (up - down) / (2.0 * kGapStep);
      }
    }

    g.beta.noalias() += d_factor * x.transpose();
    g.gating_weights.noalias() += (d_logit / params.temperature) * x.transpose();
    g.gating_bias += d_logit / params.temperature;
  }
  return out;
}

}  // namespace

LatentPosterior posterior(const ModelParams& params, const Eigen::VectorXd& x,
                          GatingMode mode) {
  params.validate();
  return to_posterior(entity_state(params, x, mode).forward);
}

FactorSpectrum spectrum(const ModelParams& params, const Eigen::VectorXd& x) {
  params.validate();
  check_dim(params, x);
  return to_spectrum(params.beta * x);
}

double risk_score(const ModelParams& params, const Eigen::VectorXd& x, GatingMode mode) {
  params.validate();
  return entity_state(params, x, mode).log_mean_factor;
}

std::vector<double> risk_scores(const ModelParams& params,
                                std::span<const SurvivalRecord> records, GatingMode mode) {
  params.validate();
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(entity_state(params, r.features, mode).log_mean_factor);
  return out;
}

double approx_event_probability(std::size_t record, const ModelParams& params,
                                std::span<const SurvivalRecord> records,
                                const RiskSetIndex& risk_sets, GatingMode mode) {
  params.validate();
  const std::size_t e = risk_sets.find_event(record);
  if (e == risk_sets.events().size()) {
    throw DomainError("record " + std::to_string(record) + " is not an uncensored event");
  }
  const auto members = risk_sets.members(e);
  std::vector<double> logs;
  logs.reserve(members.size());
  for (std::size_t j : members) logs.push_back(risk_score(params, records[j].features, mode));
  return std::exp(risk_score(params, records[record].features, mode) - log_sum_exp(logs));
}

double negative_log_partial_likelihood(const ModelParams& params,
                                       std::span<const SurvivalRecord> records,
                                       const RiskSetIndex& risk_sets,
                                       const ObjectiveConfig& config) {
  ObjectiveConfig plain = config;
  plain.lambda_entropy = 0.0;
  plain.lambda_gap = 0.0;
  return evaluate(params, records, risk_sets, plain, false).value;
}

double regularizer(const ModelParams& params, const SurvivalRecord& record,
                   const ObjectiveConfig& config) {
  params.validate();
  config.validate();
  const auto st = entity_state(params, record.features, config.gating_mode);
  double r = 0.0;
  if (config.lambda_entropy > 0.0 && config.gating_mode == GatingMode::Soft) {
    r += config.lambda_entropy * entropy_of(st.soft, st.log_soft);
  }
  if (config.lambda_gap > 0.0) {
    r += config.lambda_gap * gap_term(st.forward, st.log_factors, config);
  }
  return r;
}

double joint_objective(const ModelParams& params, std::span<const SurvivalRecord> records,
                       const RiskSetIndex& risk_sets, const ObjectiveConfig& config) {
  return evaluate(params, records, risk_sets, config, false).value;
}

ObjectiveValue objective_and_gradient(const ModelParams& params,
                                      std::span<const SurvivalRecord> records,
                                      const RiskSetIndex& risk_sets,
                                      const ObjectiveConfig& config) {
  auto ev = evaluate(params, records, risk_sets, config, true);
  return ObjectiveValue{ev.value, std::move(ev.gradient)};
}

ModelGradient objective_gradient(const ModelParams& params,
                                 std::span<const SurvivalRecord> records,
                                 const RiskSetIndex& risk_sets, const ObjectiveConfig& config) {
  return evaluate(params, records, risk_sets, config, true).gradient;
}

double concordance_index(std::span<const double> risk, std::span<const double> times,
                         std::span<const int> events) {
  const std::size_t n = risk.size();
  if (times.size() != n || events.size() != n) {
    throw DimensionError("concordance inputs must have equal length");
  }
  if (n < 2) throw UndefinedMetricError("concordance needs at least two records");
  double concordant = 0.0;
  double comparable = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (events[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      comparable += 1.0;
      if (risk[i] > risk[j]) {
        concordant += 1.0;
      } else if (risk[i] == risk[j]) {
        concordant += 0.5;
      }
    }
  }
  if (comparable == 0.0) throw UndefinedMetricError("no comparable pairs for concordance");
  return concordant / comparable;
}

double concordance_index(std::span<const double> risk,
                         std::span<const SurvivalRecord> records) {
  std::vector<double> times;
  std::vector<int> events;
  times.reserve(records.size());
  events.reserve(records.size());
  for (const auto& r : records) {
    times.push_back(r.time);
    events.push_back(r.event ? 1 : 0);
  }
  return concordance_index(risk, times, events);
}

}  // namespace lvcox
