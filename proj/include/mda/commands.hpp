#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "mda/analysis.hpp"
#include "mda/config.hpp"
#include "mda/run.hpp"
#include "mda/trace_io.hpp"
#include "mda/verify.hpp"

namespace mda {

constexpr int kExitSuccess = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericalAbort = 3;

namespace cmd_detail {

// Runs fn(0..n_jobs-1) across up to `jobs` workers. Workers own no shared
// mutable state beyond the atomic cursor; results land in caller-owned slots
// so output order stays deterministic regardless of scheduling.
inline void parallel_for(std::size_t n_jobs, int jobs, const std::function<void(std::size_t)>& fn) {
  const int n_workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(std::min<std::size_t>(n_jobs, 64))));
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n_jobs) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

struct SeedStats {
  double mean = 0.0;
  double se = 0.0;  // unbiased sample standard error; 0 (degenerate) for n = 1
  bool degenerate = false;
};

inline SeedStats seed_stats(const std::vector<double>& xs) {
  SeedStats st;
  const std::size_t n = xs.size();
  for (double v : xs) st.mean += v;
  st.mean /= static_cast<double>(n);
  if (n < 2) {
    st.degenerate = true;
    return st;
  }
  double ss = 0.0;
  for (double v : xs) ss += (v - st.mean) * (v - st.mean);
  st.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return st;
}

inline double min_grad_norm_sq(const RunTrace& trace) {
  double best = std::numeric_limits<double>::infinity();
  for (const TraceRow& r : trace.rows) best = std::min(best, r.grad_norm_sq);
  return best;
}

struct GroupSummary {
  std::string label;
  std::size_t n_seeds = 0;
  SeedStats final_loss;
  SeedStats min_grad;
  long long aborted = 0;
  std::string flag;  // e.g. non-monotone marker in the ablation table
};

inline GroupSummary summarize_group(const std::string& label, const Problem& prob,
                                    const std::vector<const RunTrace*>& traces) {
  GroupSummary g;
  g.label = label;
  g.n_seeds = traces.size();
  std::vector<double> losses, grads;
  for (const RunTrace* t : traces) {
    losses.push_back(prob.value(t->final_x));
    grads.push_back(min_grad_norm_sq(*t));
    if (t->aborted) g.aborted += 1;
  }
  g.final_loss = seed_stats(losses);
  g.min_grad = seed_stats(grads);
  return g;
}

inline void write_group_table(const std::string& txt_path, const std::string& csv_path,
                              const std::string& first_column,
                              const std::vector<GroupSummary>& groups, std::ostream& echo,
                              const std::vector<std::string>& footnotes) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open for writing: " + csv_path);
  csv << first_column
      << ",n_seeds,final_loss_mean,final_loss_se,min_grad_norm_sq_mean,min_grad_norm_sq_se,"
         "aborted_runs,se_degenerate,flag\n";
  for (const GroupSummary& g : groups) {
    csv << g.label << ',' << g.n_seeds << ',' << format_double17(g.final_loss.mean) << ','
        << format_double17(g.final_loss.se) << ',' << format_double17(g.min_grad.mean) << ','
        << format_double17(g.min_grad.se) << ',' << g.aborted << ','
        << (g.final_loss.degenerate ? 1 : 0) << ',' << g.flag << "\n";
  }
  csv.flush();
  if (!csv) throw std::runtime_error("write failed: " + csv_path);

  std::size_t width = first_column.size();
  for (const GroupSummary& g : groups) width = std::max(width, g.label.size());
  std::ostringstream table;
  table << first_column << std::string(width - first_column.size() + 2, ' ')
        << "seeds  final_loss (mean +- se)      min_grad_norm_sq (mean +- se)\n";
  for (const GroupSummary& g : groups) {
    std::string loss = fmt6(g.final_loss.mean) + " +- " + fmt6(g.final_loss.se);
    std::string grad = fmt6(g.min_grad.mean) + " +- " + fmt6(g.min_grad.se);
    if (g.final_loss.degenerate) loss += " [1]";
    table << g.label << std::string(width - g.label.size() + 2, ' ') << g.n_seeds
          << std::string(g.n_seeds >= 10 ? 5 : 6, ' ') << loss
          << std::string(loss.size() < 29 ? 29 - loss.size() : 1, ' ') << grad;
    if (!g.flag.empty()) table << "  <- " << g.flag;
    if (g.aborted > 0) table << "  [" << g.aborted << " aborted]";
    table << "\n";
  }
  bool any_degenerate = false;
  for (const GroupSummary& g : groups) any_degenerate |= g.final_loss.degenerate;
  if (any_degenerate) {
    table << "[1] single seed: standard error is degenerate and reported as 0\n";
  }
  for (const std::string& note : footnotes) table << note << "\n";

  std::ofstream txt(txt_path);
  if (!txt) throw std::runtime_error("cannot open for writing: " + txt_path);
  txt << table.str();
  txt.flush();
  if (!txt) throw std::runtime_error("write failed: " + txt_path);
  echo << table.str();
}

// Runs every (optimizer, seed) pair of the config and writes one trace CSV
// each, in config order. Returns traces indexed [opt][seed].
inline std::vector<std::vector<RunTrace>> run_grid_and_dump(const BenchConfig& cfg, int jobs) {
  const std::size_t n_opts = cfg.optimizers.size();
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::vector<RunTrace>> traces(n_opts, std::vector<RunTrace>(n_seeds));
  parallel_for(n_opts * n_seeds, jobs, [&](std::size_t i) {
    const std::size_t oi = i / n_seeds;
    const std::size_t si = i % n_seeds;
    traces[oi][si] =
        run(cfg.problem, cfg.optimizers[oi], cfg.schedule, cfg.T, cfg.seeds[si], cfg.mode);
  });
  for (std::size_t oi = 0; oi < n_opts; ++oi) {
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const std::string path = cfg.output_dir + "/" + cfg.optimizer_tags[oi] + "_seed" +
                               std::to_string(cfg.seeds[si]) + ".csv";
      write_trace_csv_file(path, traces[oi][si]);
    }
  }
  return traces;
}

inline int report_aborts(const std::vector<std::vector<RunTrace>>& traces, std::ostream& err) {
  int aborted = 0;
  for (const auto& group : traces) {
    for (const RunTrace& t : group) {
      if (t.aborted) {
        ++aborted;
        err << "numerical abort: " << t.optimizer_id << " seed " << t.seed << " at step "
            << t.abort_step << " (" << t.abort_reason << ")\n";
      }
    }
  }
  return aborted;
}

inline BenchConfig load_or_throw(const std::string& config_path, const std::string& out_override,
                                 std::uint64_t seed_offset) {
  BenchConfig cfg = load_bench_config(config_path, seed_offset);
  if (!out_override.empty()) cfg.output_dir = out_override;
  return cfg;
}

}  // namespace cmd_detail

// Shared exit-code behavior: 0 success, 2 config error, 3 numerical abort.
inline int cmd_run(const std::string& config_path, const std::string& out_override, int jobs,
                   std::uint64_t seed_offset, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  try {
    cfg = cmd_detail::load_or_throw(config_path, out_override, seed_offset);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    std::filesystem::create_directories(cfg.output_dir);
    const auto traces = cmd_detail::run_grid_and_dump(cfg, jobs);
    std::vector<cmd_detail::GroupSummary> groups;
    for (std::size_t oi = 0; oi < cfg.optimizers.size(); ++oi) {
      std::vector<const RunTrace*> ptrs;
      for (const RunTrace& t : traces[oi]) ptrs.push_back(&t);
      groups.push_back(cmd_detail::summarize_group(cfg.optimizer_tags[oi], cfg.problem, ptrs));
    }
    cmd_detail::write_group_table(cfg.output_dir + "/summary.txt", cfg.output_dir + "/summary.csv",
                                  "optimizer", groups, out, {});
    out << "wrote " << cfg.optimizers.size() * cfg.seeds.size() << " trace file(s) to "
        << cfg.output_dir << "\n";
    if (cmd_detail::report_aborts(traces, err) > 0) return kExitNumericalAbort;
    return kExitSuccess;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

inline int cmd_compare(const std::string& config_path, const std::string& out_override, int jobs,
                       std::uint64_t seed_offset, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  try {
    cfg = cmd_detail::load_or_throw(config_path, out_override, seed_offset);
    if (cfg.optimizers.size() < 2) {
      throw ConfigError(config_path + ": compare needs at least 2 optimizers (optimizer.kinds)");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    std::filesystem::create_directories(cfg.output_dir);
    const auto traces = cmd_detail::run_grid_and_dump(cfg, jobs);
    std::vector<cmd_detail::GroupSummary> groups;
    for (std::size_t oi = 0; oi < cfg.optimizers.size(); ++oi) {
      std::vector<const RunTrace*> ptrs;
      for (const RunTrace& t : traces[oi]) ptrs.push_back(&t);
      groups.push_back(cmd_detail::summarize_group(cfg.optimizer_tags[oi], cfg.problem, ptrs));
    }
    cmd_detail::write_group_table(cfg.output_dir + "/comparison.txt",
                                  cfg.output_dir + "/comparison.csv", "optimizer", groups, out, {});
    if (cmd_detail::report_aborts(traces, err) > 0) return kExitNumericalAbort;
    return kExitSuccess;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

// Three-rung ladder: plain dual averaging with the classical beta recursion
// and lambda = 1; the same plus the averaged primal step (momentum); and the
// full method with lambda growing as sqrt(k+1). Mean final loss is expected
// to be non-increasing down the ladder; a rung that rises by more than the
// combined standard error is flagged, not failed.
inline int cmd_ablate(const std::string& config_path, const std::string& out_override, int jobs,
                      std::uint64_t seed_offset, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  try {
    cfg = cmd_detail::load_or_throw(config_path, out_override, seed_offset);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    std::filesystem::create_directories(cfg.output_dir);
    const double c0 = cfg.schedule.c0;
    const std::vector<std::string> rung_tags = {"rung1_da_nesterov", "rung2_plus_momentum",
                                                "rung3_plus_sqrt_lambda"};
    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<std::vector<RunTrace>> traces(3, std::vector<RunTrace>(n_seeds));

    OptimizerConfig da_nesterov;
    da_nesterov.kind = "da";
    da_nesterov.da_beta = DaBetaMode::nesterov;
    OptimizerConfig full;
    full.kind = "mda";

    cmd_detail::parallel_for(3 * n_seeds, jobs, [&](std::size_t i) {
      const std::size_t rung = i / n_seeds;
      const std::size_t si = i % n_seeds;
      const std::uint64_t seed = cfg.seeds[si];
      if (rung == 0) {
        traces[0][si] = run(cfg.problem, da_nesterov, cfg.schedule, cfg.T, seed, cfg.mode);
      } else if (rung == 1) {
        traces[1][si] = run_averaged_da_nesterov(cfg.problem, c0, cfg.T, seed, cfg.mode);
      } else {
        traces[2][si] = run(cfg.problem, full, cfg.schedule, cfg.T, seed, cfg.mode);
      }
    });
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t si = 0; si < n_seeds; ++si) {
        write_trace_csv_file(cfg.output_dir + "/" + rung_tags[r] + "_seed" +
                                 std::to_string(cfg.seeds[si]) + ".csv",
                             traces[r][si]);
      }
    }

    std::vector<cmd_detail::GroupSummary> groups;
    for (std::size_t r = 0; r < 3; ++r) {
      std::vector<const RunTrace*> ptrs;
      for (const RunTrace& t : traces[r]) ptrs.push_back(&t);
      groups.push_back(cmd_detail::summarize_group(rung_tags[r], cfg.problem, ptrs));
    }
    for (std::size_t r = 1; r < 3; ++r) {
      const double slack = std::sqrt(groups[r].final_loss.se * groups[r].final_loss.se +
                                     groups[r - 1].final_loss.se * groups[r - 1].final_loss.se);
      if (groups[r].final_loss.mean > groups[r - 1].final_loss.mean + slack) {
        groups[r].flag = "non-monotone";
      }
    }
    std::vector<std::string> footnotes;
    if (cfg.T < 10) {
      footnotes.push_back("note: T = " + std::to_string(cfg.T) +
                          " is too short a horizon for the ladder ordering to be meaningful");
    }
    cmd_detail::write_group_table(cfg.output_dir + "/ablation.txt",
                                  cfg.output_dir + "/ablation.csv", "rung", groups, out,
                                  footnotes);
    if (cmd_detail::report_aborts(traces, err) > 0) return kExitNumericalAbort;
    return kExitSuccess;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

// For each configured horizon T, runs the averaged dual-averaging method at
// eta = 1/sqrt(T), seed-averages the trajectory mean of
// (||grad f(x_k)||^2 + ||grad f(z_k)||^2) / 2, and fits the log-log slope.
inline int cmd_rate(const std::string& config_path, const std::string& out_override, int jobs,
                    std::uint64_t seed_offset, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  try {
    cfg = cmd_detail::load_or_throw(config_path, out_override, seed_offset);
    if (cfg.rate_T_values.size() < 3) {
      throw ConfigError(config_path + ": rate fit needs at least 3 values in rate.T_values");
    }
    for (long long t : cfg.rate_T_values) {
      if (t < 1) throw ConfigError(config_path + ": rate.T_values must be >= 1");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  try {
    std::filesystem::create_directories(cfg.output_dir);
    const std::size_t n_t = cfg.rate_T_values.size();
    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<std::vector<double>> metric(n_t, std::vector<double>(n_seeds, 0.0));
    cmd_detail::parallel_for(n_t * n_seeds, jobs, [&](std::size_t i) {
      const std::size_t ti = i / n_seeds;
      const std::size_t si = i % n_seeds;
      const MdaTheoremStats st = mda_theorem_run(cfg.problem, cfg.schedule.c0,
                                                 cfg.rate_T_values[ti], cfg.seeds[si], 1);
      metric[ti][si] = st.lhs_mean_grad_sq;
    });

    std::vector<RatePoint> points;
    std::vector<cmd_detail::SeedStats> stats;
    for (std::size_t ti = 0; ti < n_t; ++ti) {
      const cmd_detail::SeedStats st = cmd_detail::seed_stats(metric[ti]);
      stats.push_back(st);
      points.push_back({static_cast<double>(cfg.rate_T_values[ti]), st.mean});
    }
    double slope = 0.0;
    try {
      slope = rate_fit(points);
    } catch (const std::invalid_argument& e) {
      err << "config error: cannot fit rate: " << e.what() << "\n";
      return kExitConfigError;
    }

    std::ofstream csv(cfg.output_dir + "/rate.csv");
    if (!csv) throw std::runtime_error("cannot open for writing: " + cfg.output_dir + "/rate.csv");
    csv << "T,mean_grad_sq_mean,mean_grad_sq_se\n";
    for (std::size_t ti = 0; ti < n_t; ++ti) {
      csv << cfg.rate_T_values[ti] << ',' << format_double17(stats[ti].mean) << ','
          << format_double17(stats[ti].se) << "\n";
    }
    csv << "# slope," << format_double17(slope) << "\n";
    csv.flush();
    if (!csv) throw std::runtime_error("write failed: " + cfg.output_dir + "/rate.csv");

    std::ostringstream table;
    table << "T         mean_grad_sq (mean +- se over " << n_seeds << " seed"
          << (n_seeds == 1 ? "" : "s") << ")\n";
    for (std::size_t ti = 0; ti < n_t; ++ti) {
      const std::string t_str = std::to_string(cfg.rate_T_values[ti]);
      table << t_str << std::string(t_str.size() < 10 ? 10 - t_str.size() : 1, ' ')
            << cmd_detail::fmt6(stats[ti].mean) << " +- " << cmd_detail::fmt6(stats[ti].se)
            << "\n";
    }
    table << "fitted log-log slope: " << cmd_detail::fmt6(slope) << "\n";
    std::ofstream txt(cfg.output_dir + "/rate.txt");
    if (!txt) throw std::runtime_error("cannot open for writing: " + cfg.output_dir + "/rate.txt");
    txt << table.str();
    txt.flush();
    if (!txt) throw std::runtime_error("write failed: " + cfg.output_dir + "/rate.txt");
    out << table.str();
    return kExitSuccess;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

// Runs every property suite; exit 0 iff all pass, 1 otherwise.
inline int cmd_verify(const std::string& out_override, std::ostream& out, std::ostream& err) {
  const std::vector<CheckResult> results = run_verification();
  std::ostringstream report;
  bool all_passed = true;
  for (const CheckResult& r : results) {
    report << (r.passed ? "[ok]   " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_passed &= r.passed;
  }
  report << (all_passed ? "all " + std::to_string(results.size()) + " suites passed"
                        : "verification FAILED") << "\n";
  out << report.str();
  if (!out_override.empty()) {
    try {
      std::filesystem::create_directories(out_override);
      std::ofstream f(out_override + "/verify_report.txt");
      if (!f) throw std::runtime_error("cannot open for writing: " + out_override +
                                       "/verify_report.txt");
      f << report.str();
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitConfigError;
    }
  }
  if (!all_passed) {
    for (const CheckResult& r : results) {
      if (!r.passed) {
        err << "first failing suite: " << r.name << ": " << r.detail << "\n";
        break;
      }
    }
    return kExitVerifyFailure;
  }
  return kExitSuccess;
}

}  // namespace mda
