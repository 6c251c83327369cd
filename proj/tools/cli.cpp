#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "lvcox/data_io.hpp"
#include "lvcox/errors.hpp"
#include "lvcox/hazard_model.hpp"
#include "lvcox/jensen_bounds.hpp"
#include "lvcox/latent_moments.hpp"
#include "lvcox/training.hpp"

namespace lvcox::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Invalid flag combinations detected after CLI11 has parsed the line.
class UsageFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Independent generator per purpose so adding draws to one subcommand never
// shifts another's stream.
enum class Stream : std::uint32_t { Bounds = 1, ApproxCheck = 2, Bootstrap = 3 };

std::mt19937_64 engine_for(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

bool is_stdout(const std::string& path) { return path.empty() || path == "-"; }

void write_to(const std::string& path, std::ostream& fallback,
              const std::function<void(std::ostream&)>& body) {
  if (is_stdout(path)) {
    body(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path);
  body(file);
  if (!file) throw DataError("failed while writing " + path);
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  p.replace_extension(suffix);
  return p.string();
}

void print_config(std::ostream& err, const std::string& command, std::uint64_t seed, json fields) {
  fields["command"] = command;
  fields["seed"] = seed;
  err << "resolved config: " << fields.dump() << '\n';
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string row;
  for (const auto& c : cells) {
    if (!row.empty()) row += ',';
    row += c;
  }
  return row + '\n';
}

// ---------------------------------------------------------------- bounds

struct BoundsOptions {
  int p_min = 2;
  int p_max = 20;
  std::string family = "both";
  double lower_mean = 1.0;
  double upper_mean = 2.0;
  double sigma = 0.1;
  long samples = 1000;
  std::string out = "-";
  std::string summary_out;
};

std::vector<Interval> draw_intervals(const BoundsOptions& o, std::uint64_t seed) {
  std::vector<Interval> intervals;
  intervals.reserve(static_cast<std::size_t>(o.samples));
  if (o.sigma == 0.0) {
    if (!(o.lower_mean > 0.0 && o.lower_mean < o.upper_mean)) {
      throw UsageFailure("with --sigma 0 the means must satisfy 0 < lower-mean < upper-mean");
    }
    intervals.assign(static_cast<std::size_t>(o.samples), Interval(o.lower_mean, o.upper_mean));
    return intervals;
  }
  auto engine = engine_for(seed, Stream::Bounds);
  std::normal_distribution<double> lower(o.lower_mean, o.sigma);
  std::normal_distribution<double> upper(o.upper_mean, o.sigma);
  constexpr int kMaxAttempts = 10000;
  for (long s = 0; s < o.samples; ++s) {
    int attempts = 0;
    for (;;) {
      const double l = lower(engine);
      const double u = upper(engine);
      if (l > 0.0 && l < u) {
        intervals.emplace_back(l, u);
        break;
      }
      if (++attempts == kMaxAttempts) {
        throw UsageFailure("interval parameters almost never give 0 < L < U");
      }
    }
  }
  return intervals;
}

int run_bounds(const BoundsOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  if (o.p_min < 2) throw UsageFailure("--p-min must be >= 2");
  if (o.p_max < o.p_min) throw UsageFailure("--p-max must be >= --p-min");
  if (o.samples < 1) throw UsageFailure("--samples must be >= 1");
  if (!(o.sigma >= 0.0) || !std::isfinite(o.sigma)) throw UsageFailure("--sigma must be >= 0");
  std::vector<PowerFunction::Direction> families;
  if (o.family == "pos" || o.family == "both") families.push_back(PowerFunction::Direction::Positive);
  if (o.family == "neg" || o.family == "both") families.push_back(PowerFunction::Direction::Negative);
  if (families.empty()) throw UsageFailure("--family must be pos, neg or both");

  print_config(err, "bounds", seed,
               {{"p_min", o.p_min}, {"p_max", o.p_max}, {"family", o.family},
                {"lower_mean", o.lower_mean}, {"upper_mean", o.upper_mean}, {"sigma", o.sigma},
                {"samples", o.samples}, {"out", o.out}, {"summary_out", o.summary_out}});

  const auto intervals = draw_intervals(o, seed);

  struct Summary {
    int p;
    std::string family;
    std::vector<double> tight;
    std::vector<double> dragomir;
    double ratio_sum = 0.0;
    std::size_t ratio_count = 0;
  };
  std::vector<Summary> summaries;

  write_to(o.out, out, [&](std::ostream& os) {
    os << "p,family,L,U,tight,dragomir,empirical_max\n";
    for (int p = o.p_min; p <= o.p_max; ++p) {
      for (auto dir : families) {
        const PowerFunction f(p, dir);
        const std::string name = dir == PowerFunction::Direction::Positive ? "pos" : "neg";
        Summary s{p, name, {}, {}};
        for (const auto& iv : intervals) {
          const double tight = tight_bound(f, iv).value;
          const double dragomir = dragomir_bound(f, iv);
          const double attained = empirical_gap(f, worst_case_distribution(f, iv));
          os << csv_row({std::to_string(p), name, format_number(iv.lower()),
                         format_number(iv.upper()), format_number(tight), format_number(dragomir),
                         format_number(attained)});
          s.tight.push_back(tight);
          s.dragomir.push_back(dragomir);
          if (dragomir > 0.0) {
            s.ratio_sum += tight / dragomir;
            s.ratio_count += 1;
          }
        }
        summaries.push_back(std::move(s));
      }
    }
  });

  auto mean = [](const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
  };
  auto write_summary = [&](std::ostream& os) {
    os << "p,family,tight_mean,tight_lo,tight_hi,dragomir_mean,dragomir_lo,dragomir_hi,ratio_mean\n";
    for (auto& s : summaries) {
      const double tm = mean(s.tight);
      const double dm = mean(s.dragomir);
      std::sort(s.tight.begin(), s.tight.end());
      std::sort(s.dragomir.begin(), s.dragomir.end());
      const double ratio = s.ratio_count > 0 ? s.ratio_sum / static_cast<double>(s.ratio_count)
                                             : std::numeric_limits<double>::quiet_NaN();
      os << csv_row({std::to_string(s.p), s.family, format_number(tm),
                     format_number(percentile(s.tight, 0.025)),
                     format_number(percentile(s.tight, 0.975)), format_number(dm),
                     format_number(percentile(s.dragomir, 0.025)),
                     format_number(percentile(s.dragomir, 0.975)), format_number(ratio)});
    }
  };
  if (o.summary_out.empty()) {
    write_summary(err);
  } else {
    write_to(o.summary_out, out, write_summary);
  }
  return kExitOk;
}

// ---------------------------------------------------------- approx-check

struct ApproxOptions {
  int classes = 2;
  int risk_size = 2;
  int trials = 10;
  std::vector<double> temperatures{1.0, 0.5, 0.25, 0.1, 0.01, 0.0};
  bool worked_example = false;
  std::string out = "-";
};

LatentPosterior tempered(const std::vector<double>& logits, double tau) {
  const auto top = static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  if (tau == 0.0) return LatentPosterior::one_hot(logits.size(), top);
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp((logits[k] - logits[top]) / tau);
    total += probs[k];
  }
  for (double& p : probs) p /= total;
  return LatentPosterior(std::move(probs));
}

int run_approx_check(ApproxOptions o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  if (o.worked_example) {
    o.classes = 2;
    o.risk_size = 2;
    o.trials = 1;
  }
  if (o.classes < 1) throw UsageFailure("--classes must be >= 1");
  if (o.risk_size < 1) throw UsageFailure("--risk-size must be >= 1");
  if (o.trials < 1) throw UsageFailure("--trials must be >= 1");
  if (o.temperatures.empty()) throw UsageFailure("--temperatures needs at least one value");
  for (double t : o.temperatures) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw UsageFailure("temperatures must be finite and >= 0");
  }
  const double assignments = std::pow(static_cast<double>(o.classes), o.risk_size);
  if (assignments > kEnumerationBudget) {
    throw BudgetError("exact marginal needs " + format_number(assignments) +
                          " assignments, budget is " + format_number(kEnumerationBudget),
                      assignments);
  }

  print_config(err, "approx-check", seed,
               {{"classes", o.classes}, {"risk_size", o.risk_size}, {"trials", o.trials},
                {"temperatures", o.temperatures}, {"worked_example", o.worked_example},
                {"out", o.out}});

  const auto k = static_cast<std::size_t>(o.classes);
  const auto r = static_cast<std::size_t>(o.risk_size);
  auto engine = engine_for(seed, Stream::ApproxCheck);
  std::normal_distribution<double> normal(0.0, 1.0);

  write_to(o.out, out, [&](std::ostream& os) {
    os << "trial,tau,exact,approx,abs_gap,entropy_mean\n";
    for (int trial = 0; trial < o.trials; ++trial) {
      std::vector<std::vector<double>> logits(r, std::vector<double>(k, 0.0));
      std::vector<FactorSpectrum> spectra;
      if (o.worked_example) {
        spectra.emplace_back(std::vector<double>{0.0, std::log(2.0)});
        spectra.emplace_back(std::vector<double>{0.0, std::log(3.0)});
      } else {
        for (std::size_t j = 0; j < r; ++j) {
          for (double& l : logits[j]) l = normal(engine);
          std::vector<double> logs(k);
          for (double& v : logs) v = normal(engine);
          spectra.emplace_back(std::move(logs));
        }
      }
      for (double tau : o.temperatures) {
        std::vector<LatentFactor> risk;
        double entropy_sum = 0.0;
        for (std::size_t j = 0; j < r; ++j) {
          auto post = tempered(logits[j], tau);
          entropy_sum += entropy(post);
          risk.push_back({std::move(post), spectra[j]});
        }
        const double exact = exact_marginal(0, risk);
        double denom = 0.0;
        for (const auto& f : risk) denom += factor_moment(f.posterior, f.spectrum, 1);
        const double approx = factor_moment(risk[0].posterior, risk[0].spectrum, 1) / denom;
        os << csv_row({std::to_string(trial), format_number(tau), format_number(exact),
                       format_number(approx), format_number(std::abs(exact - approx)),
                       format_number(entropy_sum / static_cast<double>(r))});
      }
    }
  });
  return kExitOk;
}

// ----------------------------------------------------------------- synth

struct SynthOptions {
  long n = 2000;
  int dim = 5;
  int classes = 2;
  double censoring = 0.3;
  std::string out;
  std::string truth_out;
};

int run_synth(const SynthOptions& o, std::uint64_t seed, std::ostream& err) {
  if (o.n < 2) throw UsageFailure("--n must be >= 2");
  if (o.dim < 1) throw UsageFailure("--dim must be >= 1");
  if (o.classes < 1) throw UsageFailure("--classes must be >= 1");
  if (!(o.censoring >= 0.0 && o.censoring < 1.0)) throw UsageFailure("--censoring must lie in [0, 1)");
  const std::string truth_out = o.truth_out.empty() ? with_suffix(o.out, ".truth.json") : o.truth_out;
  print_config(err, "synth", seed,
               {{"n", o.n}, {"dim", o.dim}, {"classes", o.classes}, {"censoring", o.censoring},
                {"out", o.out}, {"truth_out", truth_out}});

  const auto data = generate_synthetic(static_cast<std::size_t>(o.n), static_cast<std::size_t>(o.dim),
                                       static_cast<std::size_t>(o.classes), o.censoring, seed);
  Dataset ds;
  ds.records = data.records;
  save_csv(o.out, ds);
  write_to(truth_out, err, [&](std::ostream& os) { os << ground_truth_to_json(data.truth) << '\n'; });
  err << "realized censoring rate " << format_number(data.truth.censoring_rate) << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  int classes = 2;
  std::string gating = "soft";
  double lambda_entropy = 0.0;
  double lambda_gap = 0.0;
  int pmax = 2;
  double lr = 1e-2;
  int epochs = 500;
  int patience = 20;
  double temperature = 1.0;
  std::string model_out;
  std::string history_out;
};

int run_train(const TrainOptions& o, std::uint64_t seed, std::ostream& err) {
  if (o.classes < 1) throw UsageFailure("--classes must be >= 1");
  if (o.gating != "soft" && o.gating != "hard") throw UsageFailure("--gating must be soft or hard");
  if (!(o.lambda_entropy >= 0.0) || !(o.lambda_gap >= 0.0)) {
    throw UsageFailure("regularizer weights must be >= 0");
  }
  if (o.pmax < 2) throw UsageFailure("--pmax must be >= 2");
  if (!(o.lr > 0.0)) throw UsageFailure("--lr must be > 0");
  if (o.epochs < 1) throw UsageFailure("--epochs must be >= 1");
  if (o.patience < 0) throw UsageFailure("--patience must be >= 0");
  if (!(o.temperature > 0.0)) throw UsageFailure("--temperature must be > 0");
  const std::string history_out =
      o.history_out.empty() ? with_suffix(o.model_out, ".history.csv") : o.history_out;
  print_config(err, "train", seed,
               {{"data", o.data}, {"classes", o.classes}, {"gating", o.gating},
                {"lambda_entropy", o.lambda_entropy}, {"lambda_gap", o.lambda_gap},
                {"pmax", o.pmax}, {"lr", o.lr}, {"epochs", o.epochs}, {"patience", o.patience},
                {"temperature", o.temperature}, {"model_out", o.model_out},
                {"history_out", history_out}});

  const auto data = load_csv(o.data);
  TrainConfig cfg;
  cfg.classes = static_cast<std::size_t>(o.classes);
  cfg.objective.gating_mode = o.gating == "hard" ? GatingMode::Hard : GatingMode::Soft;
  cfg.objective.lambda_entropy = o.lambda_entropy;
  cfg.objective.lambda_gap = o.lambda_gap;
  cfg.objective.p_max = o.pmax;
  cfg.adam.learning_rate = o.lr;
  cfg.max_epochs = o.epochs;
  cfg.patience = o.patience;
  cfg.temperature = o.temperature;

  const auto outcome = train(data.records, cfg, SplitFractions{}, seed);
  save_model(o.model_out, ModelFile{outcome.params, outcome.stats, cfg.objective});
  write_to(history_out, err, [&](std::ostream& os) {
    os << "epoch,train_objective,validation_nll,validation_c_index\n";
    for (const auto& e : outcome.report.epochs) {
      os << csv_row({std::to_string(e.epoch), format_number(e.train_objective),
                     format_number(e.validation_nll), format_number(e.validation_c_index)});
    }
  });

  const auto& best = outcome.report.epochs[static_cast<std::size_t>(outcome.report.best_epoch)];
  err << "best epoch " << outcome.report.best_epoch << " of " << outcome.report.epochs.size()
      << " (" << (outcome.report.stop_reason == StopReason::EarlyStopping ? "early stop" : "max epochs")
      << "), validation NLL " << format_number(best.validation_nll) << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ eval

struct EvalOptions {
  std::string data;
  std::string model;
  long bootstrap = 200;
  double confidence = 0.95;
  std::string out;
};

int run_eval(const EvalOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  if (o.bootstrap < 1) throw UsageFailure("--bootstrap must be >= 1");
  if (!(o.confidence > 0.0 && o.confidence < 1.0)) throw UsageFailure("--confidence must lie in (0, 1)");
  print_config(err, "eval", seed,
               {{"data", o.data}, {"model", o.model}, {"bootstrap", o.bootstrap},
                {"confidence", o.confidence}, {"out", o.out}});

  const auto model = load_model(o.model);
  const auto data = load_csv(o.data);
  if (data.records.empty()) throw DataError(o.data + " has no records");
  if (static_cast<std::size_t>(data.records.front().features.size()) != model.params.dim()) {
    throw DataError(o.data + " has " + std::to_string(data.records.front().features.size()) +
                    " features, model expects " + std::to_string(model.params.dim()));
  }
  const auto records = zscore(data.records, model.stats).first;
  const GatingMode mode = model.config.gating_mode;
  std::function<double(const std::vector<SurvivalRecord>&)> metric =
      [&](const std::vector<SurvivalRecord>& rs) {
        return concordance_index(risk_scores(model.params, rs, mode), rs);
      };
  auto engine = engine_for(seed, Stream::Bootstrap);
  const auto ci = bootstrap_ci(metric, records, static_cast<std::size_t>(o.bootstrap),
                               o.confidence, engine());

  auto body = [&](std::ostream& os) {
    os << "c_index,ci_lower,ci_upper\n"
       << csv_row({format_number(ci.point), format_number(ci.lower), format_number(ci.upper)});
  };
  body(out);
  if (!o.out.empty()) write_to(o.out, out, body);
  if (ci.skipped > 0) err << ci.skipped << " bootstrap resamples had no comparable pairs\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-variable Cox models and Jensen-gap bounds", "lvcox"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 7;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();

  BoundsOptions bo;
  auto* bounds = app.add_subcommand("bounds", "Compare tight and Dragomir Jensen-gap bounds");
  bounds->add_option("--p-min", bo.p_min, "Smallest exponent (>= 2)")->capture_default_str();
  bounds->add_option("--p-max", bo.p_max, "Largest exponent")->capture_default_str();
  bounds->add_option("--family", bo.family, "pos, neg or both")->capture_default_str();
  bounds->add_option("--lower-mean", bo.lower_mean, "Mean of L")->capture_default_str();
  bounds->add_option("--upper-mean", bo.upper_mean, "Mean of U")->capture_default_str();
  bounds->add_option("--sigma", bo.sigma, "Std. deviation of L and U")->capture_default_str();
  bounds->add_option("--samples", bo.samples, "Intervals per exponent")->capture_default_str();
  bounds->add_option("--out", bo.out, "Per-interval CSV ('-' for stdout)")->capture_default_str();
  bounds->add_option("--summary-out", bo.summary_out, "Per-exponent summary CSV (default: stderr)");

  ApproxOptions ao;
  auto* approx = app.add_subcommand("approx-check", "Exact versus approximate event probability");
  approx->add_option("--classes", ao.classes, "Latent classes K")->capture_default_str();
  approx->add_option("--risk-size", ao.risk_size, "Risk-set size R")->capture_default_str();
  approx->add_option("--trials", ao.trials, "Random instances")->capture_default_str();
  approx->add_option("--temperatures", ao.temperatures, "Comma-separated; 0 means one-hot")
      ->delimiter(',')
      ->capture_default_str();
  approx->add_flag("--worked-example", ao.worked_example,
                   "Use factors (1,2) and (1,3) with uniform posteriors");
  approx->add_option("--out", ao.out, "CSV output ('-' for stdout)")->capture_default_str();

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic latent-mixture dataset");
  synth->add_option("--n", so.n, "Records")->capture_default_str();
  synth->add_option("--dim", so.dim, "Features")->capture_default_str();
  synth->add_option("--classes", so.classes, "True latent classes")->capture_default_str();
  synth->add_option("--censoring", so.censoring, "Target censoring rate")->capture_default_str();
  synth->add_option("--out", so.out, "Data CSV")->required();
  synth->add_option("--truth-out", so.truth_out, "Ground-truth JSON (default: <out>.truth.json)");

  TrainOptions to;
  auto* trn = app.add_subcommand("train", "Fit a latent-variable Cox model");
  trn->add_option("--data", to.data, "Training CSV")->required();
  trn->add_option("--classes", to.classes, "Latent classes K (1 = Cox)")->capture_default_str();
  trn->add_option("--gating", to.gating, "soft or hard")->capture_default_str();
  trn->add_option("--lambda-entropy", to.lambda_entropy, "Entropy weight")->capture_default_str();
  trn->add_option("--lambda-gap", to.lambda_gap, "Jensen-gap weight")->capture_default_str();
  trn->add_option("--pmax", to.pmax, "Largest gap exponent")->capture_default_str();
  trn->add_option("--lr", to.lr, "ADAM learning rate")->capture_default_str();
  trn->add_option("--epochs", to.epochs, "Maximum epochs")->capture_default_str();
  trn->add_option("--patience", to.patience, "Early-stopping patience")->capture_default_str();
  trn->add_option("--temperature", to.temperature, "Gating temperature")->capture_default_str();
  trn->add_option("--model-out", to.model_out, "Model JSON")->required();
  trn->add_option("--history-out", to.history_out,
                  "Per-epoch CSV (default: <model-out>.history.csv)");

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "C-index with a bootstrap interval");
  eval->add_option("--data", eo.data, "Evaluation CSV")->required();
  eval->add_option("--model", eo.model, "Model JSON")->required();
  eval->add_option("--bootstrap", eo.bootstrap, "Bootstrap resamples")->capture_default_str();
  eval->add_option("--confidence", eo.confidence, "Interval level")->capture_default_str();
  eval->add_option("--out", eo.out, "Also write the result CSV here");

  auto usage = [&]() -> std::string {
    for (auto* sub : {bounds, approx, synth, trn, eval}) {
      if (sub->parsed()) return sub->help();
    }
    return app.help();
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success&) {
    out << usage();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return kExitUsage;
  }

  try {
    if (bounds->parsed()) return run_bounds(bo, seed, out, err);
    if (approx->parsed()) return run_approx_check(ao, seed, out, err);
    if (synth->parsed()) return run_synth(so, seed, err);
    if (trn->parsed()) return run_train(to, seed, err);
    if (eval->parsed()) return run_eval(eo, seed, out, err);
  } catch (const UsageFailure& e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return kExitUsage;
  } catch (const BudgetError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lvcox::cli
