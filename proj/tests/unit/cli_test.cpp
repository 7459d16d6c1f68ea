#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ockham/cli.hpp"

namespace ockham::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ockham_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  int run_args(const std::vector<std::string>& args) {
    diag_.str("");
    try {
      return run(parse_args(args), diag_);
    } catch (const UsageError& e) {
      diag_ << e.what();
      return 2;
    }
  }

  std::string polynomial_csv() const {
    std::ostringstream s;
    s << "x,y\n";
    for (int i = 0; i < 30; ++i) {
      const double x = -1.5 + 0.1 * i;
      s << x << "," << 1.0 - 0.5 * x + 0.25 * x * x + 0.1 * std::sin(7.0 * i) << "\n";
    }
    return s.str();
  }

  fs::path dir_;
  std::ostringstream diag_;
};

TEST_F(CliTest, ParsesTheEvidenceExample) {
  const RunConfig c =
      parse_args({"evidence", "--data", "d.csv", "--sigma", "1", "--lambda", "1", "--out", "r.json"});
  EXPECT_EQ(c.command, Command::Evidence);
  EXPECT_EQ(c.data_path, std::optional<std::string>("d.csv"));
  EXPECT_EQ(c.output_path, "r.json");
  EXPECT_EQ(c.format, Format::Json);
  EXPECT_EQ(c.param("sigma"), "1");
  EXPECT_EQ(c.param("seed"), "0");
  EXPECT_EQ(c.param("estimator"), "glm-exact");
}

TEST_F(CliTest, ExpandsDegreeRanges) {
  const RunConfig c = parse_args({"select", "--degrees", "0..9", "--sigma", "1", "--lambda", "1",
                                  "--data", "d.csv", "--out", "s.csv", "--format", "csv"});
  EXPECT_EQ(c.format, Format::Csv);
  EXPECT_EQ(detail::parse_degrees(c.param("degrees")),
            (std::vector<unsigned>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(detail::parse_degrees("0..2,5"), (std::vector<unsigned>{0, 1, 2, 5}));
  EXPECT_THROW((void)detail::parse_degrees("3..1"), UsageError);
  EXPECT_THROW((void)detail::parse_degrees("1,1"), UsageError);
}

TEST_F(CliTest, FormatFollowsTheOutputExtension) {
  EXPECT_EQ(parse_args({"mackay-demo", "--out", "m.csv"}).format, Format::Csv);
  EXPECT_EQ(parse_args({"mackay-demo", "--out", "m.json"}).format, Format::Json);
  EXPECT_EQ(parse_args({"mackay-demo", "--out", "m.csv", "--format", "json"}).format, Format::Json);
}

void expect_usage_error(const std::vector<std::string>& args, const std::string& fragment) {
  try {
    (void)parse_args(args);
    FAIL() << "expected a usage error containing '" << fragment << "'";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST_F(CliTest, RejectsNonPositiveSigma) {
  expect_usage_error({"evidence", "--sigma", "-1", "--lambda", "1", "--data", "d.csv"},
                     "sigma must be positive");
  expect_usage_error({"evidence", "--sigma", "1", "--lambda", "0", "--data", "d.csv"},
                     "lambda must be positive");
}

TEST_F(CliTest, MalformedNumbersReportThePosition) {
  expect_usage_error({"evidence", "--sigma", "1.5x", "--lambda", "1", "--data", "d.csv"},
                     "'1.5x' at position 3");
  expect_usage_error({"poly-demo", "--reps", "ten"}, "position 0");
}

TEST_F(CliTest, UnknownKeysAreRejectedWithTheToken) {
  expect_usage_error({"evidence", "--sigma", "1", "--lambda", "1", "--data", "d.csv", "--colour", "red"},
                     "--colour");
  expect_usage_error({"mackay-demo", "--data", "d.csv"}, "--data");
  expect_usage_error({"frobnicate"}, "frobnicate");
}

TEST_F(CliTest, MissingRequiredKeysAreNamed) {
  expect_usage_error({"evidence", "--lambda", "1", "--data", "d.csv"}, "--sigma");
  expect_usage_error({"select", "--sigma", "1", "--lambda", "1", "--data", "d.csv"}, "--degrees");
  expect_usage_error({"evidence", "--sigma", "1", "--lambda", "1"}, "--data");
  expect_usage_error({"decompose", "--log-evidence", "-2"}, "--log-fit");
}

TEST_F(CliTest, HelpPrintsTheGrammar) {
  try {
    (void)parse_args({"--help"});
    FAIL() << "expected help";
  } catch (const HelpRequested& h) {
    for (const auto name : kCommandNames) {
      EXPECT_NE(h.text.find(std::string(name)), std::string::npos) << name;
    }
  }
}

TEST_F(CliTest, RefusesToOverwriteTheInput) {
  const std::string data = write("d.csv", "y\n1\n");
  expect_usage_error({"evidence", "--sigma", "1", "--lambda", "1", "--data", data, "--out", data},
                     "overwrite");
}

TEST_F(CliTest, EvidenceWorkedExample) {
  const std::string data = write("d.csv", "y\n2\n");
  const std::string out = path("r.json");
  ASSERT_EQ(run_args({"evidence", "--data", data, "--sigma", "1", "--lambda", "1", "--out", out}), 0)
      << diag_.str();
  const Json doc = Json::parse(slurp(out));
  EXPECT_NEAR(doc["result"]["log_evidence"].get<double>(), -2.265512, 1e-6);
  EXPECT_NEAR(doc["result"]["flexibility"].get<double>(), 0.846574, 1e-6);
  EXPECT_NEAR(doc["result"]["log_fit"].get<double>(), -1.418939, 1e-6);
  EXPECT_EQ(doc["result"]["estimator"], "glm-exact");
  EXPECT_EQ(doc["config"]["params"]["seed"], "0");
  EXPECT_TRUE(doc.contains("diagnostics"));
  EXPECT_FALSE(fs::exists(out + ".tmp"));
}

TEST_F(CliTest, MackayDemoCsvHasTwoCrossoverRows) {
  const std::string out = path("m.csv");
  ASSERT_EQ(run_args({"mackay-demo", "--lambda-simple", "10", "--lambda-complex", "0.1", "--out", out}), 0)
      << diag_.str();
  std::istringstream in(slurp(out));
  std::string line;
  std::string header;
  int grid = 0;
  int cross = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = line;
      continue;
    }
    if (line.rfind("grid,", 0) == 0) ++grid;
    if (line.rfind("crossover,", 0) == 0) {
      ++cross;
      const auto last = line.substr(line.rfind(',') + 1);
      EXPECT_LT(std::stod(last), 1e-8);
    }
  }
  EXPECT_EQ(header, "kind,y,log_evidence_simple,log_evidence_complex,difference");
  EXPECT_EQ(grid, 501);
  EXPECT_EQ(cross, 2);
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  const std::string data = write("xy.csv", polynomial_csv());
  const std::vector<std::vector<std::string>> commands{
      {"risk", "--degrees", "0,2", "--sigma", "0.5", "--lambda", "1", "--reps", "40", "--seed", "9"},
      {"evidence", "--data", data, "--degrees", "2", "--sigma", "0.3", "--lambda", "1", "--estimator",
       "importance-sampling", "--samples", "5000", "--seed", "4"},
      {"poly-demo", "--reps", "5", "--n", "30", "--seed", "2", "--format", "csv"},
      {"bic-sweep", "--ns", "10,100,1000", "--seed", "13"}};
  for (const auto& base : commands) {
    auto a = base;
    auto b = base;
    a.insert(a.end(), {"--out", path("a.out")});
    b.insert(b.end(), {"--out", path("b.out")});
    ASSERT_EQ(run_args(a), 0) << diag_.str();
    ASSERT_EQ(run_args(b), 0) << diag_.str();
    // The argv echo names the output file, so compare with that line removed.
    auto strip = [](std::string s, const std::string& name) {
      for (std::size_t pos; (pos = s.find(name)) != std::string::npos;) s.replace(pos, name.size(), "OUT");
      return s;
    };
    EXPECT_EQ(strip(slurp(path("a.out")), path("a.out")), strip(slurp(path("b.out")), path("b.out")))
        << base[0];
  }
  // Same output path twice: identical bytes, no normalization needed.
  const std::vector<std::string> args{"risk", "--degrees", "0,3", "--sigma", "1", "--lambda", "1",
                                      "--reps", "30", "--out", path("same.json")};
  ASSERT_EQ(run_args(args), 0);
  const std::string first = slurp(path("same.json"));
  ASSERT_EQ(run_args(args), 0);
  EXPECT_EQ(first, slurp(path("same.json")));
}

TEST_F(CliTest, EchoedArgvRoundTrips) {
  const std::string data = write("xy.csv", polynomial_csv());
  const std::vector<std::vector<std::string>> commands{
      {"select", "--data", data, "--degrees", "0..3", "--sigma", "0.2", "--lambda", "1", "--rule",
       "max-posterior", "--weights", "0.4,0.3,0.2,0.1", "--out", path("s.json")},
      {"decompose", "--data", data, "--degrees", "1,2", "--sigma", "0.2", "--lambda", "2", "--out",
       path("d.csv")},
      {"fit", "--data", data, "--degrees", "2", "--sigma=0.2", "--lambda", "1", "--out", path("f.json")},
      {"mackay-demo", "--y-min", "-5", "--y-max", "5", "--grid", "21", "--out", path("m.csv")}};
  for (const auto& args : commands) {
    const RunConfig original = parse_args(args);
    ASSERT_EQ(run(original, diag_), 0) << diag_.str();
    std::vector<std::string> echoed;
    const std::string text = slurp(original.output_path);
    if (original.format == Format::Json) {
      echoed = Json::parse(text)["config"]["argv"].get<std::vector<std::string>>();
    } else {
      const auto pos = text.find("# argv: ");
      ASSERT_NE(pos, std::string::npos);
      const auto end = text.find('\n', pos);
      echoed = Json::parse(text.substr(pos + 8, end - pos - 8)).get<std::vector<std::string>>();
    }
    EXPECT_EQ(parse_args(echoed), original) << args[0];
  }
}

TEST_F(CliTest, SelectPicksTheGeneratingDegree) {
  const std::string data = write("xy.csv", polynomial_csv());
  const std::string out = path("s.json");
  ASSERT_EQ(run_args({"select", "--data", data, "--degrees", "0..5", "--sigma", "0.1", "--lambda",
                      "1", "--out", out}),
            0)
      << diag_.str();
  const Json doc = Json::parse(slurp(out));
  EXPECT_EQ(doc["result"]["chosen_degree"], 2);
  EXPECT_EQ(doc["result"]["models"].size(), 6u);
}

TEST_F(CliTest, DecomposeNumbers) {
  const std::string out = path("d.json");
  ASSERT_EQ(run_args({"decompose", "--log-evidence", "-2.265512", "--log-fit", "-1.418939",
                      "--penalty", "1", "--out", out}),
            0);
  const Json doc = Json::parse(slurp(out));
  EXPECT_NEAR(doc["result"]["flexibility"].get<double>(), 0.846573, 1e-12);
  EXPECT_NEAR(doc["result"]["pen_prime"].get<double>(), 0.153427, 1e-12);
}

TEST_F(CliTest, EstimatorsAgreeThroughTheCli) {
  const std::string data = write("xy.csv", polynomial_csv());
  std::vector<double> values;
  for (const std::string est : {"glm-exact", "quadrature", "laplace"}) {
    const std::string out = path(est + ".json");
    ASSERT_EQ(run_args({"evidence", "--data", data, "--degrees", "1", "--sigma", "0.5", "--lambda",
                        "1", "--estimator", est, "--out", out}),
              0)
        << diag_.str();
    values.push_back(Json::parse(slurp(out))["result"]["log_evidence"].get<double>());
  }
  EXPECT_NEAR(values[1], values[0], 1e-4);
  EXPECT_NEAR(values[2], values[0], 1e-6);
}

TEST_F(CliTest, DomainErrorsExitWithOne) {
  const std::string ys = write("y.csv", "y\n1\n2\n");
  EXPECT_EQ(run_args({"evidence", "--data", ys, "--degrees", "1", "--sigma", "1", "--lambda", "1",
                      "--out", path("o.json")}),
            1);
  EXPECT_NE(diag_.str().find("x column"), std::string::npos);
  EXPECT_EQ(run_args({"evidence", "--data", path("missing.csv"), "--sigma", "1", "--lambda", "1",
                      "--out", path("o.json")}),
            1);
  EXPECT_FALSE(fs::exists(path("o.json")));
  EXPECT_EQ(main_entry({"evidence", "--sigma", "1"}, diag_), 2);
}

TEST_F(CliTest, InputFileIsLeftUntouched) {
  const std::string content = polynomial_csv();
  const std::string data = write("xy.csv", content);
  const auto stamp = fs::last_write_time(data);
  ASSERT_EQ(run_args({"fit", "--data", data, "--degrees", "0..2", "--sigma", "1", "--lambda", "1",
                      "--out", path("f.json")}),
            0);
  EXPECT_EQ(slurp(data), content);
  EXPECT_EQ(fs::last_write_time(data), stamp);
}

TEST(ReadCsv, AcceptsEitherColumnOrder) {
  std::istringstream a("y,x\n1,10\n2,20\n");
  const Dataset d = read_csv(a, "a");
  ASSERT_TRUE(d.x.has_value());
  EXPECT_EQ((*d.x)(1), 20.0);
  EXPECT_EQ(d.y(1), 2.0);
  std::istringstream b("\xEF\xBB\xBFy\r\n1.5\r\n\r\n-2e3\r\n");
  const Dataset e = read_csv(b, "b");
  EXPECT_FALSE(e.x.has_value());
  EXPECT_EQ(e.y.size(), 2);
  EXPECT_EQ(e.y(1), -2000.0);
}

TEST(ReadCsv, RejectsBadRowsWithTheRowNumber) {
  std::istringstream a("x,y\n1,2\n3,four\n");
  try {
    (void)read_csv(a, "a");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  std::istringstream b("x,y\n1\n");
  EXPECT_THROW((void)read_csv(b, "b"), Error);
  std::istringstream c("x,z\n1,2\n");
  EXPECT_THROW((void)read_csv(c, "c"), Error);
  std::istringstream d("y\n");
  EXPECT_THROW((void)read_csv(d, "d"), Error);
}

TEST(Output, SeventeenSignificantDigits) {
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_real(-2.2655121234846454)), -2.2655121234846454);
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(real(std::nan("")), Json("nan"));
}

}  // namespace
}  // namespace ockham::cli
