#include <gtest/gtest.h>
#include <sys/wait.h>

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "fepls/csv.hpp"
#include "fepls/fepls.hpp"
#include "fepls/model_io.hpp"
#include "fepls/rng.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fepls;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv_cells(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path dir_;
  static std::string bin_;

  static void SetUpTestSuite() {
    const char* bin = std::getenv("FEPLS_CLI_PATH");
    ASSERT_NE(bin, nullptr) << "FEPLS_CLI_PATH must point at the CLI binary";
    bin_ = bin;
    ASSERT_TRUE(fs::exists(bin_));
    dir_ = fs::temp_directory_path() / "fepls_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_inputs();
  }

  // one smooth functional predictor; functional and binary responses
  static void write_inputs() {
    Rng rng = Rng::stream(314, 1);
    const int n = 40, n_new = 5, g = 21;
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(g, 0.0, 1.0);
    auto curves = [&](int count, Eigen::MatrixXd& vals, Eigen::MatrixXd& score) {
      vals.resize(count, g);
      score.resize(count, 3);
      for (int i = 0; i < count; ++i) {
        double a = rng.normal(0.0, 2.0), b = rng.normal(0.0, 1.0),
               c = rng.normal(0.0, 0.5);
        score.row(i) << a, b, c;
        for (int k = 0; k < g; ++k) {
          double t = grid(k);
          // measurement noise keeps the projected coordinates full rank
          vals(i, k) = a * std::sqrt(2.0) * std::sin(2 * M_PI * t) +
                       b * std::sqrt(2.0) * std::cos(2 * M_PI * t) + c +
                       rng.normal(0.0, 0.15);
        }
      }
    };
    Eigen::MatrixXd xv, sc, xnv, scn;
    curves(n, xv, sc);
    curves(n_new, xnv, scn);
    write_functional_csv((dir_ / "x.csv").string(), grid, xv);
    write_functional_csv((dir_ / "xnew.csv").string(), grid, xnv);

    Eigen::MatrixXd yv(n, g);
    for (int i = 0; i < n; ++i) {
      double s = 0.8 * sc(i, 0) - 0.4 * sc(i, 1);
      for (int k = 0; k < g; ++k) {
        double t = grid(k);
        yv(i, k) = s * std::sqrt(2.0) * std::sin(2 * M_PI * t) + 0.3 * sc(i, 2) +
                   rng.normal(0.0, 0.05);
      }
    }
    write_functional_csv((dir_ / "y.csv").string(), grid, yv);

    Eigen::MatrixXd labels(n, 1);
    for (int i = 0; i < n; ++i) {
      double p = 1.0 / (1.0 + std::exp(-(1.2 * sc(i, 0) - 0.5)));
      labels(i, 0) = rng.uniform() < p ? 1.0 : 0.0;
    }
    write_matrix_csv((dir_ / "labels.csv").string(), labels);
  }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  // run the binary, capture exit code and both streams
  static int run(const std::string& args) {
    std::string cmd = bin_ + " " + args + " > " + path("stdout.txt") + " 2> " +
                      path("stderr.txt");
    int raw = std::system(cmd.c_str());
    EXPECT_TRUE(WIFEXITED(raw));
    return WEXITSTATUS(raw);
  }

  static std::string out() { return slurp(dir_ / "stdout.txt"); }
  static std::string err() { return slurp(dir_ / "stderr.txt"); }
};

fs::path CliTest::dir_;
std::string CliTest::bin_;

TEST_F(CliTest, FitPredictRoundTripMatchesLibraryExactly) {
  int rc = run("fit --predictors " + path("x.csv") + " --response " + path("y.csv") +
               " --basis spline:nknots=5 --response-basis spline:nknots=4" +
               " --method fepls --dim 2 --out " + path("model.json"));
  ASSERT_EQ(rc, 0) << err();
  EXPECT_TRUE(fs::exists(path("model.json")));
  ASSERT_TRUE(fs::exists(path("model.json.config.json")));
  nlohmann::json cfg = nlohmann::json::parse(slurp(path("model.json.config.json")));
  EXPECT_EQ(cfg.at("command"), "fit");
  EXPECT_EQ(cfg.at("selected_dim"), 2);
  EXPECT_NE(out().find("u=2"), std::string::npos);

  rc = run("predict --model " + path("model.json") + " --new " + path("xnew.csv") +
           " --grid 0:1:0.25 --out " + path("pred.csv"));
  ASSERT_EQ(rc, 0) << err();
  auto cells = read_csv_cells(path("pred.csv"));
  ASSERT_EQ(cells.size(), 6u);  // grid header + 5 subjects
  ASSERT_EQ(cells[0].size(), 5u);
  EXPECT_EQ(std::stod(cells[0][1]), 0.25);

  // the CSV must reproduce an in-process prediction bit for bit
  LoadedModel lm = load_model(path("model.json"));
  ASSERT_EQ(lm.type, "fepls");
  std::vector<PredictorBlock> preds = {read_functional_csv(path("xnew.csv"))};
  Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  Eigen::MatrixXd expect = predict_function(*lm.fepls, preds, grid);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k)
      EXPECT_EQ(std::stod(cells[i + 1][k]), expect(i, k)) << i << "," << k;
}

TEST_F(CliTest, IntervalWritesOrderedBounds) {
  ASSERT_EQ(run("fit --predictors " + path("x.csv") + " --response " + path("y.csv") +
                " --basis spline:nknots=5 --response-basis spline:nknots=4" +
                " --method fepls --dim 2 --out " + path("model.json")),
            0);
  int rc = run("interval --model " + path("model.json") + " --new " + path("xnew.csv") +
               " --t0 0.3 --t0 0.7 --kind prediction --level 0.9 --out " +
               path("iv.csv"));
  ASSERT_EQ(rc, 0) << err();
  auto cells = read_csv_cells(path("iv.csv"));
  ASSERT_EQ(cells.size(), 11u);  // header + 5 subjects x 2 points
  EXPECT_EQ(cells[0],
            (std::vector<std::string>{"subject", "t0", "point", "lower", "upper",
                                      "kind", "level"}));
  for (std::size_t r = 1; r < cells.size(); ++r) {
    double point = std::stod(cells[r][2]);
    double lower = std::stod(cells[r][3]);
    double upper = std::stod(cells[r][4]);
    EXPECT_LT(lower, point);
    EXPECT_LT(point, upper);
    EXPECT_EQ(cells[r][5], "prediction");
    EXPECT_EQ(std::stod(cells[r][6]), 0.9);
  }
  EXPECT_EQ(std::stod(cells[1][1]), 0.3);
  EXPECT_EQ(std::stod(cells[2][1]), 0.7);
}

TEST_F(CliTest, SelectDimWritesBicTable) {
  int rc = run("select-dim --predictors " + path("x.csv") + " --response " +
               path("y.csv") +
               " --basis spline:nknots=5 --response-basis spline:nknots=4" +
               " --u-max 3 --out " + path("bic.csv"));
  ASSERT_EQ(rc, 0) << err();
  EXPECT_NE(out().find("selected u = "), std::string::npos);
  auto cells = read_csv_cells(path("bic.csv"));
  ASSERT_EQ(cells.size(), 5u);  // header + u in 0..3
  EXPECT_EQ(cells[0][0], "u");
  EXPECT_EQ(cells[0][3], "bic");
  for (int u = 0; u <= 3; ++u) {
    EXPECT_EQ(std::stoi(cells[u + 1][0]), u);
    EXPECT_EQ(cells[u + 1][4], "1");  // ok flag
    EXPECT_TRUE(std::isfinite(std::stod(cells[u + 1][3])));
  }
  nlohmann::json cfg = nlohmann::json::parse(slurp(path("bic.csv.config.json")));
  int u_hat = cfg.at("selected_u").get<int>();
  EXPECT_GE(u_hat, 0);
  EXPECT_LE(u_hat, 3);

  // binary flavor drives the logistic selection path
  rc = run("select-dim --predictors " + path("x.csv") + " --response " +
           path("labels.csv") +
           " --response-type binary --basis spline:nknots=5 --u-max 2 --out " +
           path("bic_bin.csv"));
  ASSERT_EQ(rc, 0) << err();
  EXPECT_EQ(read_csv_cells(path("bic_bin.csv")).size(), 4u);
}

TEST_F(CliTest, BinaryFitPredictsProbabilities) {
  int rc = run("fit --predictors " + path("x.csv") + " --response " +
               path("labels.csv") +
               " --response-type binary --basis spline:nknots=5 --method glm --out " +
               path("logit.json"));
  ASSERT_EQ(rc, 0) << err();
  rc = run("predict --model " + path("logit.json") + " --new " + path("xnew.csv") +
           " --out " + path("probs.csv"));
  ASSERT_EQ(rc, 0) << err();
  auto cells = read_csv_cells(path("probs.csv"));
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0], (std::vector<std::string>{"prob", "label"}));
  for (std::size_t r = 1; r < cells.size(); ++r) {
    double p = std::stod(cells[r][0]);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_EQ(cells[r][1], p >= 0.5 ? "1" : "0");
  }
}

TEST_F(CliTest, BaselineFitSelectsComponentsByCv) {
  int rc = run("fit --predictors " + path("x.csv") + " --response " + path("y.csv") +
               " --basis spline:nknots=5 --response-basis spline:nknots=4" +
               " --method pls --seed 11 --out " + path("pls.json"));
  ASSERT_EQ(rc, 0) << err();
  nlohmann::json cfg = nlohmann::json::parse(slurp(path("pls.json.config.json")));
  int comp = cfg.at("selected_components").get<int>();
  EXPECT_GE(comp, 1);
  EXPECT_LE(comp, 5);
  rc = run("predict --model " + path("pls.json") + " --new " + path("xnew.csv") +
           " --grid 0.5 --out " + path("pls_pred.csv"));
  ASSERT_EQ(rc, 0) << err();
  EXPECT_EQ(read_csv_cells(path("pls_pred.csv")).size(), 6u);
}

TEST_F(CliTest, SimulateEmitsCsvAndJsonReports) {
  int rc = run("simulate --scenario vector_response --methods ols --n 20,30"
               " --reps 2 --test-size 50 --seed 3 --format csv --out " +
               path("report.csv"));
  ASSERT_EQ(rc, 0) << err();
  auto cells = read_csv_cells(path("report.csv"));
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(cells[0],
            (std::vector<std::string>{"scenario", "method", "n", "mean", "mc_se",
                                      "reps"}));
  EXPECT_EQ(cells[1][2], "20");
  EXPECT_EQ(cells[2][2], "30");

  rc = run("simulate --scenario vector_response --methods ols --n 20 --reps 2"
           " --test-size 50 --seed 3 --format json --out " +
           path("report.json"));
  ASSERT_EQ(rc, 0) << err();
  nlohmann::json rep = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_EQ(rep.at("scenario"), "vector_response");
  ASSERT_EQ(rep.at("cells").size(), 1u);
  EXPECT_TRUE(rep.at("cells")[0].at("complete").get<bool>());
  EXPECT_EQ(rep.at("cells")[0].at("reps"), 2);

  nlohmann::json cfg = nlohmann::json::parse(slurp(path("report.json.config.json")));
  EXPECT_EQ(cfg.at("eigen_var").size(), 13u);  // resolved scenario constants
}

TEST_F(CliTest, UserErrorsExitWithCodeTwo) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("fit --no-such-flag"), 2);
  EXPECT_EQ(run(""), 2);  // missing subcommand

  // missing input file
  EXPECT_EQ(run("fit --predictors " + path("absent.csv") + " --response " +
                path("y.csv") +
                " --basis spline:nknots=5 --response-basis spline:nknots=4"),
            2);
  EXPECT_NE(err().find("error:"), std::string::npos);

  // malformed basis spec
  EXPECT_EQ(run("fit --predictors " + path("x.csv") + " --response " + path("y.csv") +
                " --basis wavelet:m=3 --response-basis spline:nknots=4"),
            2);

  // intervals require an envelope model
  ASSERT_EQ(run("fit --predictors " + path("x.csv") + " --response " + path("y.csv") +
                " --basis spline:nknots=5 --response-basis spline:nknots=4" +
                " --method ols --out " + path("ols.json")),
            0);
  EXPECT_EQ(run("interval --model " + path("ols.json") + " --new " + path("xnew.csv") +
                " --t0 0.5 --out " + path("iv2.csv")),
            2);
  EXPECT_NE(err().find("error:"), std::string::npos);

  // bad labels
  std::ofstream bad(path("bad_labels.csv"));
  bad << "0\n2\n1\n";
  bad.close();
  EXPECT_EQ(run("fit --predictors " + path("x.csv") + " --response " +
                path("bad_labels.csv") +
                " --response-type binary --basis spline:nknots=5 --method glm"),
            2);
}

}  // namespace
