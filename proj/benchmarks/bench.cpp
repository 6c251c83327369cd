#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "lvcox/hazard_model.hpp"
#include "lvcox/jensen_bounds.hpp"
#include "lvcox/latent_moments.hpp"

namespace {

using namespace lvcox;

void BM_TightBound(benchmark::State& state) {
  const auto f = PowerFunction::negative(static_cast<int>(state.range(0)));
  const Interval iv(0.9, 2.1);
  for (auto _ : state) benchmark::DoNotOptimize(tight_bound(f, iv));
}
BENCHMARK(BM_TightBound)->Arg(2)->Arg(20)->Arg(200);

void BM_Dragomir(benchmark::State& state) {
  const auto f = PowerFunction::negative(static_cast<int>(state.range(0)));
  const Interval iv(0.9, 2.1);
  for (auto _ : state) benchmark::DoNotOptimize(dragomir_bound(f, iv));
}
BENCHMARK(BM_Dragomir)->Arg(2)->Arg(20);

std::vector<LatentFactor> random_risk_set(std::size_t size, std::size_t classes) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<LatentFactor> out;
  for (std::size_t j = 0; j < size; ++j) {
    std::vector<double> probs(classes);
    std::vector<double> logs(classes);
    double total = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      probs[k] = std::exp(n(rng));
      total += probs[k];
      logs[k] = n(rng);
    }
    for (double& p : probs) p /= total;
    out.push_back({LatentPosterior(probs), FactorSpectrum(logs)});
  }
  return out;
}

// Exponential in the risk-set size.
void BM_ExactMarginal(benchmark::State& state) {
  const auto risk = random_risk_set(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(exact_marginal(0, risk));
}
BENCHMARK(BM_ExactMarginal)->DenseRange(4, 12, 4);

// Linear in the risk-set size.
void BM_ApproxMarginal(benchmark::State& state) {
  const auto risk = random_risk_set(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    double denom = 0.0;
    for (const auto& f : risk) denom += factor_moment(f.posterior, f.spectrum, 1);
    benchmark::DoNotOptimize(factor_moment(risk[0].posterior, risk[0].spectrum, 1) / denom);
  }
}
BENCHMARK(BM_ApproxMarginal)->DenseRange(4, 12, 4);

void BM_ObjectiveAndGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> time(1.0);
  std::vector<SurvivalRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(5);
    for (Eigen::Index f = 0; f < 5; ++f) x[f] = normal(rng);
    records.push_back({x, time(rng) + 1e-3, i % 3 != 0});
  }
  ModelParams params = ModelParams::zeros(2, 5);
  params.beta.setConstant(0.1);
  params.gating_weights.row(0).setConstant(0.2);
  ObjectiveConfig cfg;
  cfg.lambda_entropy = 0.01;
  cfg.lambda_gap = state.range(1) != 0 ? 0.05 : 0.0;
  const auto rs = build_risk_sets(records);
  for (auto _ : state) benchmark::DoNotOptimize(objective_and_gradient(params, records, rs, cfg));
}
BENCHMARK(BM_ObjectiveAndGradient)
    ->ArgsProduct({{250, 1000, 4000}, {0, 1}})
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
