#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "lvcox/data_io.hpp"

namespace fs = std::filesystem;
using lvcox::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& file) const { return (path_ / file).string(); }

 private:
  fs::path path_;
};

}  // namespace

TEST_CASE("bounds subcommand") {
  const auto r = invoke({"bounds", "--p-min", "2", "--p-max", "2", "--family", "pos", "--samples",
                         "1", "--sigma", "0"});
  REQUIRE(r.code == 0);
  const auto table = rows(r.out);
  REQUIRE(table.size() == 2);
  CHECK(table[0] == std::vector<std::string>{"p", "family", "L", "U", "tight", "dragomir",
                                             "empirical_max"});
  CHECK(std::stod(table[1][2]) == 1.0);
  CHECK(std::stod(table[1][3]) == 2.0);
  CHECK(std::stod(table[1][4]) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::stod(table[1][5]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.err.find("resolved config") != std::string::npos);
  CHECK(r.err.find("tight_mean") != std::string::npos);

  const auto both = invoke({"bounds", "--p-max", "4", "--samples", "10"});
  REQUIRE(both.code == 0);
  CHECK(rows(both.out).size() == 1 + 3 * 2 * 10);

  CHECK(invoke({"bounds", "--samples", "0"}).code == 2);
  CHECK(invoke({"bounds", "--p-min", "1"}).code == 2);
  CHECK(invoke({"bounds", "--p-min", "5", "--p-max", "4"}).code == 2);
  CHECK(invoke({"bounds", "--family", "odd"}).code == 2);
  CHECK(invoke({"bounds", "--sigma", "0", "--lower-mean", "3"}).code == 2);
  CHECK(invoke({"bounds", "--no-such-flag"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("bounds output is reproducible") {
  TempDir dir("lvcox_cli_bounds");
  const std::vector<std::string> base{"--seed", "11", "bounds", "--p-max", "6", "--samples", "50"};
  auto a = base;
  a.insert(a.end(), {"--out", dir / "a.csv", "--summary-out", dir / "as.csv"});
  auto b = base;
  b.insert(b.end(), {"--out", dir / "b.csv", "--summary-out", dir / "bs.csv"});
  REQUIRE(invoke(a).code == 0);
  REQUIRE(invoke(b).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "as.csv") == slurp(dir / "bs.csv"));
  CHECK(rows(slurp(dir / "as.csv")).size() == 1 + 5 * 2);
  // a different seed draws different intervals
  CHECK(invoke({"--seed", "12", "bounds", "--p-max", "6", "--samples", "50"}).out != slurp(dir / "a.csv"));
}

TEST_CASE("approx-check subcommand") {
  const auto r = invoke({"approx-check", "--worked-example", "--temperatures", "1,0"});
  REQUIRE(r.code == 0);
  const auto table = rows(r.out);
  REQUIRE(table.size() == 3);
  CHECK(table[0] == std::vector<std::string>{"trial", "tau", "exact", "approx", "abs_gap",
                                             "entropy_mean"});
  CHECK(std::stod(table[1][2]) == doctest::Approx(0.454167).epsilon(1e-6));
  CHECK(std::stod(table[1][3]) == doctest::Approx(0.428571).epsilon(1e-6));
  CHECK(std::stod(table[2][4]) == 0.0);

  const auto random = invoke({"approx-check", "--classes", "3", "--risk-size", "5", "--trials", "4"});
  REQUIRE(random.code == 0);
  const auto rt = rows(random.out);
  CHECK(rt.size() == 1 + 4 * 6);
  for (std::size_t i = 1; i < rt.size(); ++i) {
    if (rt[i][1] == "0") CHECK(std::stod(rt[i][4]) < 1e-12);
  }
  CHECK(invoke({"approx-check", "--classes", "3", "--risk-size", "5", "--trials", "4"}).out ==
        random.out);

  const auto budget = invoke({"approx-check", "--classes", "2", "--risk-size", "24"});
  CHECK(budget.code == 2);
  CHECK(budget.err.find("16777216") != std::string::npos);
  CHECK(invoke({"approx-check", "--temperatures", "1,-1"}).code == 2);
  CHECK(invoke({"approx-check", "--trials", "0"}).code == 2);
}

TEST_CASE("synth, train and eval") {
  TempDir dir("lvcox_cli_pipeline");
  REQUIRE(invoke({"synth", "--n", "100", "--censoring", "0", "--out", dir / "d.csv"}).code == 0);
  CHECK(fs::exists(dir / "d.truth.json"));
  const auto data = lvcox::load_csv(dir / "d.csv");
  CHECK(data.records.size() == 100);
  for (const auto& rec : data.records) CHECK(rec.event);

  REQUIRE(invoke({"train", "--data", dir / "d.csv", "--classes", "1", "--epochs", "5",
                  "--model-out", dir / "m.json", "--history-out", dir / "h.csv"})
              .code == 0);
  CHECK(rows(slurp(dir / "h.csv")).size() == 1 + 5);

  const auto ev = invoke({"eval", "--data", dir / "d.csv", "--model", dir / "m.json", "--bootstrap",
                          "50", "--out", dir / "e.csv"});
  REQUIRE(ev.code == 0);
  CHECK(ev.out == slurp(dir / "e.csv"));
  const auto et = rows(ev.out);
  REQUIRE(et.size() == 2);
  CHECK(std::stod(et[1][1]) <= std::stod(et[1][2]));

  CHECK(invoke({"train", "--data", dir / "missing.csv", "--model-out", dir / "x.json"}).code == 1);
  CHECK(invoke({"train", "--data", dir / "d.csv", "--model-out", dir / "x.json", "--gating",
                "medium"})
            .code == 2);
  CHECK(invoke({"train", "--model-out", dir / "x.json"}).code == 2);
  CHECK(invoke({"eval", "--data", dir / "d.csv", "--model", dir / "d.truth.json"}).code == 1);
  CHECK(invoke({"eval", "--data", dir / "d.csv", "--model", dir / "m.json", "--bootstrap", "0"})
            .code == 2);
}

TEST_CASE("eval on a perfectly ranked toy set") {
  TempDir dir("lvcox_cli_eval");
  {
    std::ofstream csv(dir / "toy.csv");
    csv << "time,event,x\n";
    for (int i = 1; i <= 20; ++i) csv << i << ",1," << -i << '\n';
  }
  lvcox::ModelFile m;
  m.params = lvcox::ModelParams::zeros(1, 1);
  m.params.beta(0, 0) = 1.0;
  m.stats.mean = Eigen::VectorXd::Zero(1);
  m.stats.stddev = Eigen::VectorXd::Ones(1);
  lvcox::save_model(dir / "toy.json", m);
  const auto r = invoke({"eval", "--data", dir / "toy.csv", "--model", dir / "toy.json"});
  REQUIRE(r.code == 0);
  CHECK(std::stod(rows(r.out)[1][0]) == 1.0);
}

TEST_CASE("hard gating training descends") {
  TempDir dir("lvcox_cli_hard");
  REQUIRE(invoke({"synth", "--out", dir / "d.csv"}).code == 0);
  REQUIRE(invoke({"train", "--data", dir / "d.csv", "--gating", "hard", "--classes", "2",
                  "--model-out", dir / "m.json", "--history-out", dir / "h.csv"})
              .code == 0);
  const auto h = rows(slurp(dir / "h.csv"));
  const auto model = lvcox::load_model(dir / "m.json");
  CHECK(model.config.gating_mode == lvcox::GatingMode::Hard);
  double best = std::stod(h[1][2]);
  for (std::size_t i = 2; i < h.size(); ++i) best = std::min(best, std::stod(h[i][2]));
  CHECK(best < std::stod(h[1][2]));
}

TEST_CASE("pipeline outputs are byte-identical across runs") {
  TempDir dir("lvcox_cli_determinism");
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    REQUIRE(invoke({"--seed", "5", "synth", "--n", "300", "--out", dir / (t + ".csv")}).code == 0);
    REQUIRE(invoke({"--seed", "5", "train", "--data", dir / (t + ".csv"), "--epochs", "30",
                    "--lambda-entropy", "0.01", "--lambda-gap", "0.1", "--model-out",
                    dir / (t + ".json")})
                .code == 0);
  }
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.truth.json") == slurp(dir / "b.truth.json"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.history.csv") == slurp(dir / "b.history.csv"));
}
