// End-to-end subprocess tests for the mda_bench CLI: exit codes, CSV schema,
// determinism, and the summary artifacts of each subcommand. The binary path
// comes from argv[1] (wired up by CMake) or the MDA_BENCH_BIN variable.
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

std::string g_bench_bin;

constexpr const char* kHeader =
    "step,loss,grad_norm_sq,effective_lr,alpha,beta,lambda,c,dist_x0_sq";

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

CmdResult run_cmd(const std::string& args) {
  CmdResult res;
  const std::string cmd = "\"" + g_bench_bin + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed: " + cmd);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) {
    res.output.append(buf, n);
  }
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("mda_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "bench.cfg";
  std::ofstream out(path);
  out << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  EXPECT_TRUE(in.good()) << "cannot open " << path;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

// Everything after the (single) header line, skipping # metadata.
std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  bool seen_header = false;
  for (const auto& line : split_lines(csv)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> fields;
  std::stringstream ss(row);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double field_as_double(const std::string& row, std::size_t index) {
  const auto fields = split_csv(row);
  EXPECT_LT(index, fields.size()) << row;
  return std::stod(fields.at(index));
}

}  // namespace

TEST(RunCommand, WritesTraceWithSchemaAndExitsZero) {
  const fs::path dir = fresh_dir("run_min");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "n = 10\n"
                                    "cond = 10\n"
                                    "seed = 3\n"
                                    "[optimizer]\n"
                                    "kind = sgd\n"
                                    "[schedule]\n"
                                    "base_lr = 0.01\n"
                                    "[run]\n"
                                    "T = 10\n"
                                    "seeds = 5\n");
  const fs::path out = dir / "out";
  const auto res =
      run_cmd("run --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(res.exit_code, 0) << res.output;
  EXPECT_NE(res.output.find("wrote 1 trace file(s)"), std::string::npos)
      << res.output;

  const std::string csv = slurp(out / "sgd_seed5.csv");
  const auto lines = split_lines(csv);
  ASSERT_GE(lines.size(), 8u);
  EXPECT_EQ(lines[0].rfind("# problem: ", 0), 0u) << lines[0];
  EXPECT_EQ(lines[1].rfind("# optimizer: ", 0), 0u) << lines[1];
  EXPECT_EQ(lines[2].rfind("# schedule: ", 0), 0u) << lines[2];
  EXPECT_EQ(lines[3], "# T: 10");
  EXPECT_EQ(lines[4], "# seed: 5");
  EXPECT_EQ(lines[5].rfind("# generator: ", 0), 0u) << lines[5];
  EXPECT_EQ(lines[6].rfind("# artifact_version: ", 0), 0u) << lines[6];
  EXPECT_EQ(lines[7], kHeader);

  const auto rows = data_rows(csv);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows.front().rfind("0,", 0), 0u);
  EXPECT_EQ(rows.back().rfind("9,", 0), 0u);
  for (const auto& row : rows) {
    EXPECT_EQ(split_csv(row).size(), 9u) << row;
  }

  EXPECT_TRUE(fs::exists(out / "summary.txt"));
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
}

TEST(RunCommand, UnknownKeyIsConfigErrorNamingTheKey) {
  const fs::path dir = fresh_dir("run_unknown_key");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "[schedule]\n"
                                    "learnig_rate = 0.1\n"
                                    "[run]\n"
                                    "T = 10\n");
  const auto res = run_cmd("run --config " + cfg.string() + " --out " +
                           (dir / "out").string());
  EXPECT_EQ(res.exit_code, 2) << res.output;
  EXPECT_NE(res.output.find("learnig_rate"), std::string::npos) << res.output;
}

TEST(RunCommand, DivergenceAbortsWithExitThreeAndTruncatedTrace) {
  const fs::path dir = fresh_dir("run_diverge");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "n = 10\n"
                                    "cond = 10\n"
                                    "seed = 3\n"
                                    "[optimizer]\n"
                                    "kind = sgd\n"
                                    "[schedule]\n"
                                    "base_lr = 1000\n"
                                    "[run]\n"
                                    "T = 500\n"
                                    "seeds = 1\n");
  const fs::path out = dir / "out";
  const auto res =
      run_cmd("run --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(res.exit_code, 3) << res.output;
  EXPECT_NE(res.output.find("aborted"), std::string::npos) << res.output;

  const std::string csv = slurp(out / "sgd_seed1.csv");
  const auto pos = csv.find("# aborted: step ");
  ASSERT_NE(pos, std::string::npos);
  const long abort_step = std::strtol(csv.c_str() + pos + 16, nullptr, 10);
  const auto rows = data_rows(csv);
  EXPECT_EQ(rows.size(), static_cast<std::size_t>(abort_step) + 1);
  EXPECT_LT(rows.size(), 500u);
}

TEST(RunCommand, ReplayIsByteIdentical) {
  const fs::path dir = fresh_dir("run_replay");
  const std::string text =
      "[problem]\n"
      "kind = quadratic\n"
      "n = 8\n"
      "cond = 10\n"
      "sigma = 1\n"
      "seed = 42\n"
      "[optimizer]\n"
      "kind = mda\n"
      "[schedule]\n"
      "base_lr = 0.05\n"
      "c0 = 0.5\n"
      "[run]\n"
      "T = 50\n"
      "seeds = 7\n";
  const fs::path cfg = write_config(dir, text);
  const fs::path out_a = dir / "a";
  const fs::path out_b = dir / "b";
  ASSERT_EQ(
      run_cmd("run --config " + cfg.string() + " --out " + out_a.string())
          .exit_code,
      0);
  ASSERT_EQ(
      run_cmd("run --config " + cfg.string() + " --out " + out_b.string())
          .exit_code,
      0);
  EXPECT_EQ(slurp(out_a / "mda_seed7.csv"), slurp(out_b / "mda_seed7.csv"));
  EXPECT_EQ(slurp(out_a / "summary.csv"), slurp(out_b / "summary.csv"));
}

TEST(RunCommand, SeedOffsetShiftsEverySeed) {
  const fs::path dir = fresh_dir("run_offset");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "sigma = 1\n"
                                    "[optimizer]\n"
                                    "kind = sgd\n"
                                    "[schedule]\n"
                                    "base_lr = 0.01\n"
                                    "[run]\n"
                                    "T = 5\n"
                                    "seeds = 1, 2\n");
  const fs::path out = dir / "out";
  const auto res = run_cmd("run --config " + cfg.string() + " --out " +
                           out.string() + " --seed-offset 10");
  EXPECT_EQ(res.exit_code, 0) << res.output;
  EXPECT_TRUE(fs::exists(out / "sgd_seed11.csv"));
  EXPECT_TRUE(fs::exists(out / "sgd_seed12.csv"));
  EXPECT_NE(slurp(out / "sgd_seed11.csv").find("# seed: 11"),
            std::string::npos);
}

TEST(RunCommand, MissingConfigFlagIsConfigError) {
  const auto res = run_cmd("run");
  EXPECT_EQ(res.exit_code, 2) << res.output;
  EXPECT_NE(res.output.find("--config"), std::string::npos) << res.output;
}

TEST(CompareCommand, AveragedRunBeatsPlainDualAveragingOnLogistic) {
  const fs::path dir = fresh_dir("compare_order");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = logistic\n"
                                    "n_samples = 100\n"
                                    "n_features = 10\n"
                                    "seed = 7\n"
                                    "[optimizer]\n"
                                    "kinds = mda, da\n"
                                    "da_beta = nesterov\n"
                                    "[schedule]\n"
                                    "base_lr = 1.0\n"
                                    "c0 = 0.5\n"
                                    "[run]\n"
                                    "T = 500\n"
                                    "seeds = 1\n");
  const fs::path out = dir / "out";
  const auto res =
      run_cmd("compare --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(res.exit_code, 0) << res.output;

  const std::string csv = slurp(out / "comparison.csv");
  const auto rows = data_rows(csv);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(split_csv(rows[0]).front(), "mda");
  EXPECT_EQ(split_csv(rows[1]).front(), "da_nesterov");
  const double mda_loss = field_as_double(rows[0], 2);
  const double da_loss = field_as_double(rows[1], 2);
  EXPECT_NEAR(mda_loss, 0.470914, 1e-3);
  EXPECT_LT(mda_loss, da_loss);
  // Deterministic problem with one seed: standard errors are degenerate and
  // the text table must say so.
  EXPECT_NE(slurp(out / "comparison.txt").find("[1]"), std::string::npos);
}

TEST(CompareCommand, NeedsAtLeastTwoOptimizers) {
  const fs::path dir = fresh_dir("compare_single");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "[optimizer]\n"
                                    "kinds = mda\n"
                                    "[run]\n"
                                    "T = 10\n");
  const auto res = run_cmd("compare --config " + cfg.string() + " --out " +
                           (dir / "out").string());
  EXPECT_EQ(res.exit_code, 2) << res.output;
  EXPECT_NE(res.output.find("at least 2"), std::string::npos) << res.output;
}

TEST(AblateCommand, EmitsThreeRungsWithNesterovBetaRecursion) {
  const fs::path dir = fresh_dir("ablate_small");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "n = 4\n"
                                    "cond = 5\n"
                                    "seed = 2\n"
                                    "[schedule]\n"
                                    "base_lr = 0.05\n"
                                    "c0 = 0.5\n"
                                    "[run]\n"
                                    "T = 30\n"
                                    "seeds = 1, 2\n");
  const fs::path out = dir / "out";
  const auto res =
      run_cmd("ablate --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(res.exit_code, 0) << res.output;

  const auto rows = data_rows(slurp(out / "ablation.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(split_csv(rows[0]).front(), "rung1_da_nesterov");
  EXPECT_EQ(split_csv(rows[1]).front(), "rung2_plus_momentum");
  EXPECT_EQ(split_csv(rows[2]).front(), "rung3_plus_sqrt_lambda");
  for (int seed = 1; seed <= 2; ++seed) {
    for (const char* tag : {"rung1_da_nesterov", "rung2_plus_momentum",
                            "rung3_plus_sqrt_lambda"}) {
      EXPECT_TRUE(fs::exists(out / (std::string(tag) + "_seed" +
                                    std::to_string(seed) + ".csv")));
    }
  }

  // beta_0 = 1, beta_{k+1} = beta_k + 1/beta_k: 1, 2, 2.5, 2.9.
  const auto trace = data_rows(slurp(out / "rung1_da_nesterov_seed1.csv"));
  ASSERT_EQ(trace.size(), 30u);
  EXPECT_DOUBLE_EQ(field_as_double(trace[0], 5), 1.0);
  EXPECT_DOUBLE_EQ(field_as_double(trace[1], 5), 2.0);
  EXPECT_DOUBLE_EQ(field_as_double(trace[2], 5), 2.5);
  EXPECT_DOUBLE_EQ(field_as_double(trace[3], 5), 2.9);
  for (const auto& row : trace) {
    EXPECT_DOUBLE_EQ(field_as_double(row, 6), 1.0) << row;  // lambda_k = 1
  }
}

TEST(RateCommand, FitsNegativeSlopeOnNoisyQuadratic) {
  const fs::path dir = fresh_dir("rate_small");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "n = 6\n"
                                    "cond = 4\n"
                                    "sigma = 1\n"
                                    "seed = 3\n"
                                    "[schedule]\n"
                                    "c0 = 0.5\n"
                                    "[run]\n"
                                    "seeds = 1, 2, 3\n"
                                    "[rate]\n"
                                    "T_values = 50, 100, 200\n");
  const fs::path out = dir / "out";
  const auto res =
      run_cmd("rate --config " + cfg.string() + " --out " + out.string());
  EXPECT_EQ(res.exit_code, 0) << res.output;
  EXPECT_NE(res.output.find("fitted log-log slope:"), std::string::npos)
      << res.output;

  const std::string csv = slurp(out / "rate.csv");
  const auto pos = csv.find("# slope,");
  ASSERT_NE(pos, std::string::npos);
  const double slope = std::strtod(csv.c_str() + pos + 8, nullptr);
  EXPECT_LT(slope, 0.0);
  EXPECT_GT(slope, -2.0);
  EXPECT_EQ(data_rows(csv).size(), 3u);
  EXPECT_TRUE(fs::exists(out / "rate.txt"));
}

TEST(RateCommand, NeedsAtLeastThreeHorizons) {
  const fs::path dir = fresh_dir("rate_short");
  const fs::path cfg = write_config(dir,
                                    "[problem]\n"
                                    "kind = quadratic\n"
                                    "sigma = 1\n"
                                    "[rate]\n"
                                    "T_values = 100\n");
  const auto res = run_cmd("rate --config " + cfg.string() + " --out " +
                           (dir / "out").string());
  EXPECT_EQ(res.exit_code, 2) << res.output;
  EXPECT_NE(res.output.find("at least 3"), std::string::npos) << res.output;
}

TEST(VerifyCommand, AllSuitesPass) {
  const auto res = run_cmd("verify");
  EXPECT_EQ(res.exit_code, 0) << res.output;
  EXPECT_NE(res.output.find("[ok]"), std::string::npos) << res.output;
  EXPECT_NE(res.output.find("all 8 suites passed"), std::string::npos)
      << res.output;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cmd("").exit_code, 2);
  EXPECT_EQ(run_cmd("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cmd("run --bogus 1").exit_code, 2);
}

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  if (argc > 1) {
    g_bench_bin = argv[1];
  } else if (const char* env = std::getenv("MDA_BENCH_BIN")) {
    g_bench_bin = env;
  } else {
    std::fprintf(stderr,
                 "usage: test_cli <path-to-mda_bench> (or set MDA_BENCH_BIN)\n");
    return 1;
  }
  return RUN_ALL_TESTS();
}
