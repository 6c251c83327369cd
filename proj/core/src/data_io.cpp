#include "lvcox/data_io.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lvcox/errors.hpp"

namespace lvcox {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, const std::string& source, std::size_t row,
                  const std::string& column) {
  double value = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError(source + ": row " + std::to_string(row) + ", column '" + column +
                    "': non-numeric value '" + std::string(cell) + "'");
  }
  return value;
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream,
                            std::uint64_t attempt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(attempt)};
  return std::mt19937_64(seq);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

const json& require_key(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(std::string("model file is missing required key \"") + key + "\"");
  }
  return obj.at(key);
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* key) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw SchemaError(std::string("\"") + key + "\" must be a nonempty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaError(std::string("\"") + key + "\" rows must have equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw SchemaError(std::string("\"") + key + "\" must be numeric");
      m(r, c) = cell.get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const char* key) {
  if (!j.is_array()) throw SchemaError(std::string("\"") + key + "\" must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(std::string("\"") + key + "\" must be numeric");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

Dataset read_csv(std::istream& in, const DatasetSchema& schema, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": missing header row");
  std::vector<std::string> header;
  for (auto f : split_fields(line)) header.emplace_back(f);

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(std::distance(header.begin(), it));
  };
  if (schema.time_column == schema.event_column) {
    throw SchemaError("time and event columns must differ");
  }
  const std::size_t time_col = column_of(schema.time_column);
  const std::size_t event_col = column_of(schema.event_column);

  Dataset data;
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != time_col && c != event_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      if (name == schema.time_column || name == schema.event_column) {
        throw SchemaError("feature column '" + name + "' duplicates time/event");
      }
      feature_cols.push_back(column_of(name));
    }
  }
  for (std::size_t c : feature_cols) data.feature_names.push_back(header[c]);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    SurvivalRecord rec;
    rec.time = parse_cell(fields[time_col], source, row, header[time_col]);
    if (!(rec.time > 0.0)) {
      throw DataError(source + ": row " + std::to_string(row) + ": time must be > 0, got " +
                      std::string(fields[time_col]));
    }
    const double ev = parse_cell(fields[event_col], source, row, header[event_col]);
    if (ev != 0.0 && ev != 1.0) {
      throw DataError(source + ": row " + std::to_string(row) + ": event must be 0 or 1, got " +
                      std::string(fields[event_col]));
    }
    rec.event = ev == 1.0;
    rec.features.resize(static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      rec.features[static_cast<Eigen::Index>(f)] =
          parse_cell(fields[feature_cols[f]], source, row, header[feature_cols[f]]);
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, schema, path.string());
}

void write_csv(std::ostream& out, const Dataset& data) {
  const std::size_t d = data.records.empty()
                            ? data.feature_names.size()
                            : static_cast<std::size_t>(data.records.front().features.size());
  out << "time,event";
  for (std::size_t f = 0; f < d; ++f) {
    out << ',' << (f < data.feature_names.size() ? data.feature_names[f] : "f" + std::to_string(f));
  }
  out << '\n';
  for (const auto& r : data.records) {
    if (static_cast<std::size_t>(r.features.size()) != d) {
      throw DimensionError("records disagree on feature count");
    }
    out << format_number(r.time) << ',' << (r.event ? 1 : 0);
    for (Eigen::Index f = 0; f < r.features.size(); ++f) out << ',' << format_number(r.features[f]);
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, data);
}

std::pair<std::vector<SurvivalRecord>, NormalizationStats> zscore(
    const std::vector<SurvivalRecord>& records, const std::optional<NormalizationStats>& stats) {
  if (records.empty()) throw DataError("cannot normalize an empty record list");
  const auto d = records.front().features.size();
  for (const auto& r : records) {
    if (r.features.size() != d) throw DimensionError("records disagree on feature count");
  }

  NormalizationStats s;
  if (stats) {
    if (stats->mean.size() != d || stats->stddev.size() != d) {
      throw DimensionError("normalization stats have " + std::to_string(stats->mean.size()) +
                           " features, records have " + std::to_string(d));
    }
    s = *stats;
  } else {
    const double n = static_cast<double>(records.size());
    s.mean = Eigen::VectorXd::Zero(d);
    for (const auto& r : records) s.mean += r.features;
    s.mean /= n;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (const auto& r : records) var += (r.features - s.mean).array().square().matrix();
    s.stddev = (var / n).array().sqrt().max(NormalizationStats::kStddevFloor);
  }

  std::vector<SurvivalRecord> out = records;
  for (auto& r : out) {
    for (Eigen::Index f = 0; f < d; ++f) {
      r.features[f] = s.stddev[f] <= NormalizationStats::kStddevFloor
                          ? 0.0
                          : (r.features[f] - s.mean[f]) / s.stddev[f];
    }
  }
  return {std::move(out), std::move(s)};
}

DataSplits split(const std::vector<SurvivalRecord>& records, const SplitFractions& fractions,
                 std::uint64_t seed) {
  const std::array<double, 3> frac{fractions.train, fractions.validation, fractions.test};
  for (double f : frac) {
    if (!(f > 0.0)) throw DomainError("split fractions must all be positive");
  }
  if (std::abs(frac[0] + frac[1] + frac[2] - 1.0) > 1e-9) {
    throw DomainError("split fractions must sum to 1");
  }

  std::vector<std::size_t> events;
  std::vector<std::size_t> censored;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (records[i].event ? events : censored).push_back(i);
  }

  auto engine = make_engine(seed, 0x5b1d);
  std::array<std::vector<std::size_t>, 3> assigned;
  for (auto* stratum : {&events, &censored}) {
    std::shuffle(stratum->begin(), stratum->end(), engine);
    const double n = static_cast<double>(stratum->size());
    // largest-remainder allocation; ties go to the earlier split
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = frac[s] * n;
      counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainder[s] = exact - static_cast<double>(counts[s]);
      used += counts[s];
    }
    std::array<std::size_t, 3> rank{0, 1, 2};
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t r = 0; used < stratum->size(); ++r, ++used) counts[rank[r % 3]] += 1;

    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      assigned[s].insert(assigned[s].end(), stratum->begin() + static_cast<long>(offset),
                         stratum->begin() + static_cast<long>(offset + counts[s]));
      offset += counts[s];
    }
  }

  DataSplits out;
  std::array<std::vector<SurvivalRecord>*, 3> targets{&out.train, &out.validation, &out.test};
  static constexpr const char* kNames[] = {"train", "validation", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    if (assigned[s].empty()) throw DataError(std::string(kNames[s]) + " split is empty");
    std::sort(assigned[s].begin(), assigned[s].end());
    for (std::size_t i : assigned[s]) targets[s]->push_back(records[i]);
  }
  return out;
}

SyntheticData generate_synthetic(std::size_t n, std::size_t dim, std::size_t classes,
                                 double censor_target, std::uint64_t seed) {
  if (n < 2) throw DomainError("synthetic data needs n >= 2");
  if (dim < 1) throw DomainError("synthetic data needs dim >= 1");
  if (classes < 1) throw DomainError("synthetic data needs at least one class");
  if (!(censor_target >= 0.0) || !(censor_target < 1.0)) {
    throw DomainError("censoring target must lie in [0, 1)");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  const auto k = static_cast<Eigen::Index>(classes);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> unit_exp(1.0);

  auto feature_rng = make_engine(seed, 1);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index f = 0; f < d; ++f) x(i, f) = normal(feature_rng);
  }

  SyntheticData out;
  auto& truth = out.truth;
  auto gate_rng = make_engine(seed, 2);
  truth.gating_hyperplanes.resize(k, d);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index f = 0; f < d; ++f) truth.gating_hyperplanes(c, f) = normal(gate_rng);
  }

  // Redraw beta with the next attempt seed until the classes are separable.
  for (std::uint64_t attempt = 0;; ++attempt) {
    auto beta_rng = make_engine(seed, 3, attempt);
    truth.beta.resize(k, d);
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index f = 0; f < d; ++f) truth.beta(c, f) = normal(beta_rng);
      truth.beta.row(c).normalize();
    }
    bool separable = true;
    for (Eigen::Index a = 0; a < k && separable; ++a) {
      for (Eigen::Index b = a + 1; b < k; ++b) {
        if (truth.beta.row(a).dot(truth.beta.row(b)) >= 0.9) separable = false;
      }
    }
    if (separable || dim == 1) break;
    if (attempt > 1000) throw ConvergenceError("could not draw separable class coefficients");
  }

  auto time_rng = make_engine(seed, 4);
  std::vector<double> event_time(n);
  std::vector<double> censor_draw(n);
  truth.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    Eigen::Index cls = 0;
    (truth.gating_hyperplanes * x.row(row).transpose()).maxCoeff(&cls);
    truth.classes[i] = static_cast<std::size_t>(cls);
    const double rate = std::exp(truth.beta.row(cls).dot(x.row(row)));
    event_time[i] = std::max(unit_exp(time_rng), std::numeric_limits<double>::min()) / rate;
    censor_draw[i] = std::max(unit_exp(time_rng), std::numeric_limits<double>::min());
  }

  // censored iff censor_draw / lambda < T  <=>  lambda > censor_draw / T
  auto censored_fraction = [&](double lambda) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += censor_draw[i] / lambda < event_time[i];
    return static_cast<double>(c) / static_cast<double>(n);
  };
  double lambda = 0.0;
  if (censor_target > 0.0) {
    double lo = -40.0;
    double hi = 40.0;
    bool found = false;
    for (int iter = 0; iter < 50; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double frac = censored_fraction(std::exp(mid));
      if (std::abs(frac - censor_target) <= 0.03) {
        lambda = std::exp(mid);
        found = true;
        break;
      }
      (frac < censor_target ? lo : hi) = mid;
    }
    if (!found) {
      throw ConvergenceError("censoring-rate bisection did not reach target " +
                             format_number(censor_target) + " within 50 iterations");
    }
  }
  truth.censor_hazard = lambda;

  std::size_t censored = 0;
  out.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SurvivalRecord rec;
    rec.features = x.row(static_cast<Eigen::Index>(i)).transpose();
    const double censor_time = lambda > 0.0 ? censor_draw[i] / lambda
                                            : std::numeric_limits<double>::infinity();
    rec.event = event_time[i] <= censor_time;
    rec.time = rec.event ? event_time[i] : censor_time;
    censored += rec.event ? 0 : 1;
    out.records.push_back(std::move(rec));
  }
  truth.censoring_rate = static_cast<double>(censored) / static_cast<double>(n);
  return out;
}

std::string model_to_json(const ModelFile& model) {
  model.params.validate();
  const auto& cfg = model.config;
  json config = {
      {"gating_mode", cfg.gating_mode == GatingMode::Soft ? "soft" : "hard"},
      {"lambda_entropy", cfg.lambda_entropy},
      {"lambda_gap", cfg.lambda_gap},
      {"p_max", cfg.p_max},
      {"eps_support", cfg.eps_support},
      {"straight_through", cfg.straight_through},
      {"series_weights", cfg.series_weights},
  };
  json doc = {
      {"version", kModelFormatVersion},
      {"beta", matrix_to_json(model.params.beta)},
      {"gating_weights", matrix_to_json(model.params.gating_weights)},
      {"gating_bias", vector_to_json(model.params.gating_bias)},
      {"temperature", model.params.temperature},
      {"norm_mean", vector_to_json(model.stats.mean)},
      {"norm_std", vector_to_json(model.stats.stddev)},
      {"config", std::move(config)},
  };
  return doc.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  }
  const auto& version = require_key(doc, "version");
  int v = 0;
  if (version.is_number_integer()) {
    v = version.get<int>();
  } else if (version.is_string()) {
    try {
      v = std::stoi(version.get<std::string>());
    } catch (const std::exception&) {
      throw VersionError("unreadable model format version");
    }
  } else {
    throw VersionError("unreadable model format version");
  }
  if (v != kModelFormatVersion) {
    throw VersionError("model format version " + std::to_string(v) +
                       " is not supported (reader version " +
                       std::to_string(kModelFormatVersion) + ")");
  }

  ModelFile m;
  try {
    m.params.beta = matrix_from_json(require_key(doc, "beta"), "beta");
    m.params.gating_weights = matrix_from_json(require_key(doc, "gating_weights"), "gating_weights");
    m.params.gating_bias = vector_from_json(require_key(doc, "gating_bias"), "gating_bias");
    m.params.temperature = require_key(doc, "temperature").get<double>();
    m.stats.mean = vector_from_json(require_key(doc, "norm_mean"), "norm_mean");
    m.stats.stddev = vector_from_json(require_key(doc, "norm_std"), "norm_std");

    const auto& cfg = require_key(doc, "config");
    const auto mode = require_key(cfg, "gating_mode").get<std::string>();
    if (mode != "soft" && mode != "hard") throw SchemaError("unknown gating_mode '" + mode + "'");
    m.config.gating_mode = mode == "soft" ? GatingMode::Soft : GatingMode::Hard;
    m.config.lambda_entropy = require_key(cfg, "lambda_entropy").get<double>();
    m.config.lambda_gap = require_key(cfg, "lambda_gap").get<double>();
    m.config.p_max = require_key(cfg, "p_max").get<int>();
    m.config.eps_support = require_key(cfg, "eps_support").get<double>();
    m.config.straight_through = cfg.value("straight_through", true);
    m.config.series_weights = cfg.value("series_weights", std::vector<double>{});
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  }

  try {
    m.params.validate();
    m.config.validate();
  } catch (const UsageError& e) {
    throw SchemaError(std::string("inconsistent model file: ") + e.what());
  }
  if (static_cast<std::size_t>(m.stats.mean.size()) != m.params.dim() ||
      m.stats.stddev.size() != m.stats.mean.size()) {
    throw SchemaError("normalization stats do not match the model dimension");
  }
  return m;
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  const auto text = model_to_json(model);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

std::string ground_truth_to_json(const SyntheticGroundTruth& truth) {
  json doc = {
      {"classes", truth.classes},
      {"beta", matrix_to_json(truth.beta)},
      {"gating_hyperplanes", matrix_to_json(truth.gating_hyperplanes)},
      {"censoring_rate", truth.censoring_rate},
      {"censor_hazard", truth.censor_hazard},
  };
  return doc.dump(2) + "\n";
}

}  // namespace lvcox
