#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mda/core.hpp"

namespace mda {

// Shortest round-trip formatting for 64-bit floats; CSVs are exact replay
// records, not presentation output.
inline std::string format_double17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline constexpr const char* kTraceHeader =
    "step,loss,grad_norm_sq,effective_lr,alpha,beta,lambda,c,dist_x0_sq";

inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << "# problem: " << trace.problem_id << "\n";
  os << "# optimizer: " << trace.optimizer_id << "\n";
  os << "# schedule: " << trace.schedule_id << "\n";
  os << "# T: " << trace.total_steps << "\n";
  os << "# seed: " << trace.seed << "\n";
  os << "# generator: " << RngStream::generator_name() << "\n";
  os << "# artifact_version: " << kArtifactVersion << "\n";
  if (trace.aborted) {
    os << "# aborted: step " << trace.abort_step << " (" << trace.abort_reason << ")\n";
  }
  os << kTraceHeader << "\n";
  for (const TraceRow& r : trace.rows) {
    os << r.step << ',' << format_double17(r.loss) << ',' << format_double17(r.grad_norm_sq)
       << ',' << format_double17(r.effective_lr) << ',' << format_double17(r.alpha) << ','
       << format_double17(r.beta) << ',' << format_double17(r.lambda) << ','
       << format_double17(r.c) << ',' << format_double17(r.dist_x0_sq) << "\n";
  }
}

inline void write_trace_csv_file(const std::string& path, const RunTrace& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_trace_csv(f, trace);
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace mda
