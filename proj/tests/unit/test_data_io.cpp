#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "lvcox/data_io.hpp"
#include "lvcox/errors.hpp"
#include "support/fixtures.hpp"

using namespace lvcox;

namespace {

Dataset parse(const std::string& text, const DatasetSchema& schema = {}) {
  std::istringstream in(text);
  return read_csv(in, schema, "test.csv");
}

std::string message_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

bool same_records(const std::vector<SurvivalRecord>& a, const std::vector<SurvivalRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].time != b[i].time || a[i].event != b[i].event) return false;
    if (a[i].features != b[i].features) return false;
  }
  return true;
}

std::size_t count_events(const std::vector<SurvivalRecord>& rs) {
  std::size_t n = 0;
  for (const auto& r : rs) n += r.event ? 1 : 0;
  return n;
}

std::vector<SurvivalRecord> one_dim(const std::vector<double>& xs) {
  std::vector<SurvivalRecord> out;
  for (double x : xs) out.push_back({Eigen::VectorXd::Constant(1, x), 1.0, true});
  return out;
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto d = parse("time,event,f0\n2.5,1,0.3\n");
  REQUIRE(d.records.size() == 1);
  CHECK(d.records[0].time == 2.5);
  CHECK(d.records[0].event);
  CHECK(d.records[0].features.size() == 1);
  CHECK(d.records[0].features[0] == 0.3);
  CHECK(d.feature_names == std::vector<std::string>{"f0"});

  // column order and a schema-selected subset
  DatasetSchema schema;
  schema.time_column = "T";
  schema.event_column = "E";
  schema.feature_columns = {"b"};
  const auto s = parse("a,E,b,T\n9,0,4,1.5\n8,1,5,0.5\n", schema);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[1].time == 0.5);
  CHECK(s.records[1].features[0] == 5.0);
  CHECK_FALSE(s.records[0].event);

  // CRLF line endings and blank trailing lines
  CHECK(parse("time,event,x\r\n1,0,2\r\n\n").records.size() == 1);
}

TEST_CASE("csv errors name the row and column") {
  const auto zero_time = message_of("time,event,f0\n1,1,0\n0,1,0.3\n");
  CHECK(zero_time.find("row 2") != std::string::npos);
  CHECK_THROWS_AS(parse("time,event,f0\n0,1,0.3\n"), DataError);
  CHECK_THROWS_AS(parse("time,event,f0\n-1,1,0.3\n"), DataError);
  CHECK_THROWS_AS(parse("time,event,f0\n1,2,0.3\n"), DataError);

  const auto bad_cell = message_of("time,event,f0\n1,1,abc\n");
  CHECK(bad_cell.find("row 1") != std::string::npos);
  CHECK(bad_cell.find("f0") != std::string::npos);

  CHECK_THROWS_AS(parse("event,f0\n1,0.3\n"), SchemaError);
  CHECK(message_of("event,f0\n1,0.3\n").find("time") != std::string::npos);
  CHECK_THROWS_AS(parse("time,event,f0\n1,1\n"), DataError);
  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/lvcox.csv"), DataError);
}

TEST_CASE("csv round trip") {
  const auto three = parse("time,event,f0,f1\n1.25,1,0.1,-3\n2,0,1e-300,7.5\n3.75,1,-0.0,2\n");
  std::ostringstream out;
  write_csv(out, three);
  const auto back = parse(out.str());
  CHECK(same_records(three.records, back.records));
  CHECK(back.feature_names == three.feature_names);

  std::mt19937_64 rng(100);
  std::uniform_int_distribution<std::size_t> dims(1, 6);
  std::uniform_int_distribution<std::size_t> sizes(1, 40);
  std::normal_distribution<double> wide(0.0, 1e3);
  for (int t = 0; t < 100; ++t) {
    Dataset data;
    auto records = fixtures::random_records(sizes(rng), dims(rng), rng);
    for (auto& r : records) {
      r.time *= std::exp(wide(rng) / 200.0);
      r.features *= std::abs(wide(rng));
    }
    data.records = records;
    std::ostringstream o;
    write_csv(o, data);
    const auto parsed = parse(o.str());
    CHECK(same_records(records, parsed.records));
  }

  const auto dir = std::filesystem::temp_directory_path() / "lvcox_test_data_io";
  std::filesystem::create_directories(dir);
  save_csv(dir / "three.csv", three);
  CHECK(same_records(load_csv(dir / "three.csv").records, three.records));
  std::filesystem::remove_all(dir);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(1.0) == "1");
  CHECK(std::stod(format_number(0.1)) == 0.1);
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("z-scoring") {
  const auto [norm, stats] = zscore(one_dim({1.0, 3.0}));
  CHECK(norm[0].features[0] == doctest::Approx(-1.0));
  CHECK(norm[1].features[0] == doctest::Approx(1.0));
  CHECK(stats.mean[0] == 2.0);
  CHECK(stats.stddev[0] == 1.0);

  const auto [flat, flat_stats] = zscore(one_dim({4.0, 4.0, 4.0}));
  for (const auto& r : flat) CHECK(r.features[0] == 0.0);
  CHECK(flat_stats.stddev[0] == NormalizationStats::kStddevFloor);

  std::mt19937_64 rng(5);
  auto records = fixtures::random_records(50, 4, rng);
  for (auto& r : records) r.features = r.features * 3.0 + Eigen::VectorXd::Constant(4, 7.0);
  const auto once = zscore(records).first;
  const auto [twice, refit] = zscore(once);
  for (Eigen::Index f = 0; f < 4; ++f) {
    CHECK(std::abs(refit.mean[f]) < 1e-12);
    CHECK(refit.stddev[f] == doctest::Approx(1.0).epsilon(1e-12));
  }

  // apply-only with fixed stats
  const auto applied = zscore(one_dim({5.0}), stats).first;
  CHECK(applied[0].features[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(zscore(records, stats), DimensionError);
  CHECK_THROWS_AS(zscore({}), DataError);
}

TEST_CASE("stratified split") {
  std::vector<SurvivalRecord> ten;
  for (int i = 0; i < 10; ++i) {
    ten.push_back({Eigen::VectorXd::Constant(1, i), 1.0 + i, i % 2 == 0});
  }
  const auto s = split(ten, {0.6, 0.2, 0.2}, 7);
  CHECK(s.train.size() == 6);
  CHECK(s.validation.size() == 2);
  CHECK(s.test.size() == 2);
  CHECK(count_events(s.train) == 3);
  CHECK(count_events(s.validation) == 1);
  CHECK(count_events(s.test) == 1);

  const auto again = split(ten, {0.6, 0.2, 0.2}, 7);
  CHECK(same_records(s.train, again.train));
  CHECK(same_records(s.validation, again.validation));
  CHECK(same_records(s.test, again.test));

  CHECK_THROWS_AS(split(ten, {1.0, 0.0, 0.0}, 7), DomainError);
  CHECK_THROWS_AS(split(ten, {0.5, 0.2, 0.2}, 7), DomainError);
  CHECK_THROWS_AS(split(one_dim({1.0, 2.0}), {0.6, 0.2, 0.2}, 7), DataError);
}

TEST_CASE("split is a partition with stratification bounds") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> sizes(10, 300);
  for (int t = 0; t < 50; ++t) {
    auto records = fixtures::random_records(sizes(rng), 1, rng, 0.4);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].features[0] = static_cast<double>(i);
    const SplitFractions fr{0.6, 0.2, 0.2};
    const auto s = split(records, fr, static_cast<std::uint64_t>(t));
    std::vector<int> seen(records.size(), 0);
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      double last = -1.0;
      for (const auto& r : *part) {
        const auto idx = static_cast<std::size_t>(r.features[0]);
        seen[idx] += 1;
        CHECK(r.features[0] > last);  // input order kept
        last = r.features[0];
      }
    }
    for (int c : seen) CHECK(c == 1);
    const double events = static_cast<double>(count_events(records));
    CHECK(std::abs(static_cast<double>(count_events(s.train)) - fr.train * events) <= 1.0);
    CHECK(std::abs(static_cast<double>(count_events(s.validation)) - fr.validation * events) <= 1.0);
    CHECK(std::abs(static_cast<double>(count_events(s.test)) - fr.test * events) <= 1.0);
  }
}

TEST_CASE("synthetic generator") {
  const auto none = generate_synthetic(200, 3, 2, 0.0, 7);
  for (const auto& r : none.records) CHECK(r.event);
  CHECK(none.truth.censoring_rate == 0.0);

  const auto d = generate_synthetic(2000, 5, 2, 0.3, 7);
  CHECK(d.records.size() == 2000);
  CHECK(d.truth.censoring_rate >= 0.27);
  CHECK(d.truth.censoring_rate <= 0.33);
  const double realized = 1.0 - static_cast<double>(count_events(d.records)) / 2000.0;
  CHECK(realized == doctest::Approx(d.truth.censoring_rate));
  for (Eigen::Index k = 0; k < d.truth.beta.rows(); ++k) {
    CHECK(d.truth.beta.row(k).norm() == doctest::Approx(1.0));
  }
  for (const auto& r : d.records) CHECK(r.time > 0.0);

  const auto again = generate_synthetic(2000, 5, 2, 0.3, 7);
  CHECK(same_records(d.records, again.records));
  CHECK(d.truth.classes == again.truth.classes);

  CHECK_THROWS_AS(generate_synthetic(1, 5, 2, 0.3, 7), DomainError);
  CHECK_THROWS_AS(generate_synthetic(10, 5, 2, 1.0, 7), DomainError);
}

TEST_CASE("synthetic classes are separable") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = generate_synthetic(50, 5, 2, 0.0, seed);
    const double cosine = d.truth.beta.row(0).dot(d.truth.beta.row(1));
    CHECK(cosine < 0.9);
    // classes are the argmax of the gating hyperplanes
    for (std::size_t i = 0; i < d.records.size(); ++i) {
      Eigen::Index best = 0;
      (d.truth.gating_hyperplanes * d.records[i].features).maxCoeff(&best);
      CHECK(static_cast<std::size_t>(best) == d.truth.classes[i]);
    }
  }
}

TEST_CASE("model json") {
  std::mt19937_64 rng(9);
  ModelFile m;
  m.params = fixtures::random_params(2, 3, rng);
  m.params.temperature = 0.37;
  m.stats.mean = Eigen::Vector3d(0.1, 1.0 / 3.0, -2.0);
  m.stats.stddev = Eigen::Vector3d(1.0, 2.0 / 7.0, 1e-12);
  m.config.gating_mode = GatingMode::Hard;
  m.config.lambda_entropy = 0.01;
  m.config.lambda_gap = 0.2;
  m.config.p_max = 4;
  m.config.series_weights = {0.5, 0.25, 0.125};

  const auto back = model_from_json(model_to_json(m));
  CHECK((back.params.beta - m.params.beta).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((back.params.gating_weights - m.params.gating_weights).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((back.params.gating_bias - m.params.gating_bias).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(back.params.temperature == 0.37);
  CHECK(back.stats.mean == m.stats.mean);
  CHECK(back.stats.stddev == m.stats.stddev);
  CHECK(back.config.gating_mode == GatingMode::Hard);
  CHECK(back.config.p_max == 4);
  CHECK(back.config.series_weights == m.config.series_weights);
  CHECK(back.config.lambda_entropy == 0.01);

  auto j = nlohmann::json::parse(model_to_json(m));
  for (const char* key : {"version", "beta", "gating_weights", "gating_bias", "temperature",
                          "norm_mean", "norm_std", "config"}) {
    CHECK(j.contains(key));
  }

  auto missing = j;
  missing.erase("beta");
  CHECK_THROWS_AS(model_from_json(missing.dump()), SchemaError);
  try {
    model_from_json(missing.dump());
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }

  auto v2 = j;
  v2["version"] = "2";
  CHECK_THROWS_AS(model_from_json(v2.dump()), VersionError);
  v2["version"] = 2;
  CHECK_THROWS_AS(model_from_json(v2.dump()), VersionError);
  auto no_version = j;
  no_version.erase("version");
  CHECK_THROWS_AS(model_from_json(no_version.dump()), SchemaError);

  CHECK_THROWS_AS(model_from_json("{not json"), SchemaError);

  const auto path = std::filesystem::temp_directory_path() / "lvcox_model_test.json";
  save_model(path, m);
  CHECK(load_model(path).params.beta == back.params.beta);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), DataError);
}
