#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lvcox/hazard_model.hpp"

namespace lvcox {

struct DatasetSchema {
  std::string time_column = "time";
  std::string event_column = "event";
  // Empty selects every other column, in file order.
  std::vector<std::string> feature_columns;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<SurvivalRecord> records;
};

// Parses a header-first CSV. Throws SchemaError for a missing column and
// DataError naming the row and column for any bad cell.
Dataset read_csv(std::istream& in, const DatasetSchema& schema = {},
                 const std::string& source = "<stream>");
Dataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema = {});

// Writes `time,event,<features>` with 17 significant digits. Unnamed
// features are written as f0, f1, ...
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::filesystem::path& path, const Dataset& data);

// %.17g formatting shared by every CSV writer in the project.
std::string format_number(double value);

struct NormalizationStats {
  static constexpr double kStddevFloor = 1e-12;

  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // population convention, floored
};

// Fits on `records` when `stats` is empty, otherwise only applies `stats`.
// Features whose stddev sits at the floor map to 0.
std::pair<std::vector<SurvivalRecord>, NormalizationStats> zscore(
    const std::vector<SurvivalRecord>& records,
    const std::optional<NormalizationStats>& stats = std::nullopt);

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct DataSplits {
  std::vector<SurvivalRecord> train;
  std::vector<SurvivalRecord> validation;
  std::vector<SurvivalRecord> test;
};

// Seeded shuffle stratified by the event flag. Each split keeps the input
// order of its records.
DataSplits split(const std::vector<SurvivalRecord>& records,
                 const SplitFractions& fractions, std::uint64_t seed);

struct SyntheticGroundTruth {
  std::vector<std::size_t> classes;     // true class per record
  Eigen::MatrixXd beta;                 // K_true x d, unit-norm rows
  Eigen::MatrixXd gating_hyperplanes;   // K_true x d
  double censoring_rate = 0.0;          // realized fraction censored
  double censor_hazard = 0.0;           // exponential censoring rate (0 = none)
};

struct SyntheticData {
  std::vector<SurvivalRecord> records;
  SyntheticGroundTruth truth;
};

// Latent-mixture proportional-hazards data: x ~ N(0, I), class = argmax of
// K_true random hyperplanes, T ~ Exp(exp(beta_class . x)), exponential
// censoring tuned by bisection to within 0.03 of `censor_target`.
SyntheticData generate_synthetic(std::size_t n, std::size_t dim, std::size_t classes,
                                 double censor_target, std::uint64_t seed);

inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
  ModelParams params;
  NormalizationStats stats;
  ObjectiveConfig config;
};

std::string model_to_json(const ModelFile& model);
ModelFile model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile load_model(const std::filesystem::path& path);

std::string ground_truth_to_json(const SyntheticGroundTruth& truth);

}  // namespace lvcox
