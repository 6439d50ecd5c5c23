#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "mda/core.hpp"
#include "mda/optimizers.hpp"
#include "mda/problems.hpp"
#include "mda/schedules.hpp"

namespace mda {

enum class ReturnMode { last_iterate, average_iterate };

// Coefficient family for the `da` kind: beta_k = sqrt(k+1) with
// lambda_k = eta_k sqrt(k+1) (flat effective step), or Nesterov's classical
// beta_0 = 1, beta_{k+1} = beta_k + 1/beta_k with lambda_k = 1 (the schedule's
// learning rate is unused in that mode).
enum class DaBetaMode { sqrt_k, nesterov };

struct OptimizerConfig {
  std::string kind = "sgd";  // sgd | sgdm | adam | da | mda | reg_sgd | spa
  double momentum = 0.9;     // sgdm
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  DaBetaMode da_beta = DaBetaMode::sqrt_k;

  std::string describe() const {
    std::ostringstream os;
    if (kind == "sgdm") {
      os << "sgdm(momentum=" << momentum << ")";
    } else if (kind == "adam") {
      os << "adam(beta1=" << adam_beta1 << ",beta2=" << adam_beta2 << ",eps=" << adam_eps << ")";
    } else if (kind == "da") {
      os << "da(beta=" << (da_beta == DaBetaMode::nesterov ? "nesterov" : "sqrt") << ")";
    } else {
      os << kind;
    }
    return os.str();
  }
};

inline bool is_known_optimizer(const std::string& kind) {
  return kind == "sgd" || kind == "sgdm" || kind == "adam" || kind == "da" || kind == "mda" ||
         kind == "reg_sgd" || kind == "spa";
}

// Runs T steps of the chosen method from the problem's start point and
// records one TraceRow per step, taken at the pre-step iterate. Replay is
// deterministic in (problem id, optimizer, schedule, T, seed). A non-finite
// objective or iterate aborts the run; the trace then ends at the abort step
// and final_x is the last finite iterate (or the running average of the
// finite iterates in average mode).
inline RunTrace run(const Problem& prob, const OptimizerConfig& opt, const ScheduleSpec& sched,
                    long long T, std::uint64_t seed,
                    ReturnMode mode = ReturnMode::last_iterate) {
  if (T < 1) throw std::invalid_argument("run: T < 1");
  if (!is_known_optimizer(opt.kind)) {
    throw std::invalid_argument("run: unknown optimizer '" + opt.kind + "'");
  }
  sched.validate();

  RunTrace trace;
  trace.problem_id = prob.id;
  trace.optimizer_id = opt.describe();
  trace.schedule_id = sched.describe();
  trace.total_steps = T;
  trace.seed = seed;
  trace.rows.reserve(static_cast<std::size_t>(T));

  RngStream rng = RngStream::substream(seed, 0);

  using AnyState = std::variant<Vector, SgdmState, AdamState, DaState, MdaState, RegSgdState,
                                SpaState>;
  AnyState state{prob.x0};
  if (opt.kind == "sgdm") state.emplace<SgdmState>(prob.x0);
  else if (opt.kind == "adam") state.emplace<AdamState>(prob.x0);
  else if (opt.kind == "da") state.emplace<DaState>(prob.x0);
  else if (opt.kind == "mda") state.emplace<MdaState>(prob.x0);
  else if (opt.kind == "reg_sgd") state.emplace<RegSgdState>(prob.x0);
  else if (opt.kind == "spa") state.emplace<SpaState>(prob.x0);

  auto current_x = [&]() -> const Vector& {
    return std::visit(
        [](auto& s) -> const Vector& {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Vector>) return s;
          else return s.x;
        },
        state);
  };

  double nesterov_beta = 1.0;
  double nesterov_beta_prev = 1.0;

  Vector avg_sum(prob.x0.size(), 0.0);
  long long avg_count = 0;

  auto finish = [&](long long steps_done) {
    (void)steps_done;
    if (mode == ReturnMode::average_iterate) {
      trace.final_x = avg_sum;
      for (double& v : trace.final_x) v /= static_cast<double>(avg_count);
    } else {
      trace.final_x = current_x();
    }
  };

  for (long long k = 0; k < T; ++k) {
    const Vector& x = current_x();
    const double eta = sched.eta_at(k);

    TraceRow row;
    row.step = k;
    row.loss = prob.value(x);
    Vector gfull = prob.full_grad(x);
    row.grad_norm_sq = norm_sq(gfull);
    row.dist_x0_sq = dist_sq(x, prob.x0);
    row.effective_lr = eta;

    if (opt.kind == "da") {
      if (opt.da_beta == DaBetaMode::sqrt_k) {
        row.lambda = lambda_stepsize(k, eta);
        row.beta = beta_scaling(k);
        row.alpha = alpha_prop1_sqrt(k, eta);
        row.effective_lr = effective_lr(row.lambda, row.beta);
      } else {
        row.lambda = 1.0;
        row.beta = nesterov_beta;
        row.alpha = k == 0 ? 0.0 : 1.0 / nesterov_beta_prev;
        row.effective_lr = effective_lr(row.lambda, row.beta);
      }
      row.c = 1.0;
    } else if (opt.kind == "mda") {
      row.lambda = lambda_stepsize(k, eta);
      row.beta = beta_scaling(k);
      row.alpha = alpha_prop1_sqrt(k, eta);
      row.c = sched.c_at(k);
    } else if (opt.kind == "reg_sgd") {
      row.alpha = alpha_prop1_sqrt(k, eta);
    } else if (opt.kind == "spa") {
      row.c = sched.c_at(k);
    }
    trace.rows.push_back(row);

    axpy(1.0, x, avg_sum);
    avg_count += 1;

    if (!std::isfinite(row.loss) || !std::isfinite(row.grad_norm_sq)) {
      trace.aborted = true;
      trace.abort_step = k;
      trace.abort_reason = "non-finite objective";
      finish(k);
      return trace;
    }

    const Vector g = prob.stochastic ? prob.stoch_grad(x, rng) : gfull;

    if (opt.kind == "sgd") {
      sgd_step(std::get<Vector>(state), g, eta);
    } else if (opt.kind == "sgdm") {
      sgdm_step(std::get<SgdmState>(state), g, eta, opt.momentum);
    } else if (opt.kind == "adam") {
      adam_step(std::get<AdamState>(state), g, eta, opt.adam_beta1, opt.adam_beta2, opt.adam_eps);
    } else if (opt.kind == "da") {
      if (opt.da_beta == DaBetaMode::sqrt_k) {
        da_step(std::get<DaState>(state), g, lambda_stepsize(k, eta), beta_scaling(k));
      } else {
        da_step(std::get<DaState>(state), g, 1.0, nesterov_beta);
        nesterov_beta_prev = nesterov_beta;
        nesterov_beta += 1.0 / nesterov_beta;
      }
    } else if (opt.kind == "mda") {
      mda_step(std::get<MdaState>(state), g, eta, sched.c_at(k));
    } else if (opt.kind == "reg_sgd") {
      reg_sgd_step(std::get<RegSgdState>(state), g, eta, alpha_prop1_sqrt(k, eta));
    } else {
      spa_step(std::get<SpaState>(state), g, eta, sched.c_at(k));
    }

    if (!all_finite(current_x())) {
      trace.aborted = true;
      trace.abort_step = k;
      trace.abort_reason = "non-finite iterate";
      finish(k);
      return trace;
    }
  }

  // close the average over x_0..x_T
  axpy(1.0, current_x(), avg_sum);
  avg_count += 1;
  finish(T);
  return trace;
}

// Dual averaging with Nesterov coefficients plus the averaged primal step:
// the middle rung of the ablation ladder (momentum added, original lambda).
inline RunTrace run_averaged_da_nesterov(const Problem& prob, double c0, long long T,
                                         std::uint64_t seed,
                                         ReturnMode mode = ReturnMode::last_iterate) {
  if (T < 1) throw std::invalid_argument("run_averaged_da_nesterov: T < 1");
  if (!(c0 > 0.0 && c0 <= 1.0)) {
    throw std::invalid_argument("run_averaged_da_nesterov: c0 not in (0,1]");
  }

  RunTrace trace;
  trace.problem_id = prob.id;
  std::ostringstream os;
  os << "da(beta=nesterov)+momentum(c0=" << c0 << ")";
  trace.optimizer_id = os.str();
  trace.schedule_id = "none";
  trace.total_steps = T;
  trace.seed = seed;
  trace.rows.reserve(static_cast<std::size_t>(T));

  RngStream rng = RngStream::substream(seed, 0);
  DaState z_seq(prob.x0);  // carries the un-averaged dual-averaging iterate
  Vector x = prob.x0;
  double beta = 1.0;
  double beta_prev = 1.0;

  Vector avg_sum(prob.x0.size(), 0.0);
  long long avg_count = 0;

  auto finish = [&]() {
    if (mode == ReturnMode::average_iterate) {
      trace.final_x = avg_sum;
      for (double& v : trace.final_x) v /= static_cast<double>(avg_count);
    } else {
      trace.final_x = x;
    }
  };

  for (long long k = 0; k < T; ++k) {
    TraceRow row;
    row.step = k;
    row.loss = prob.value(x);
    Vector gfull = prob.full_grad(x);
    row.grad_norm_sq = norm_sq(gfull);
    row.dist_x0_sq = dist_sq(x, prob.x0);
    row.lambda = 1.0;
    row.beta = beta;
    row.alpha = k == 0 ? 0.0 : 1.0 / beta_prev;
    row.effective_lr = effective_lr(1.0, beta);
    row.c = c0;
    trace.rows.push_back(row);

    axpy(1.0, x, avg_sum);
    avg_count += 1;

    if (!std::isfinite(row.loss) || !std::isfinite(row.grad_norm_sq)) {
      trace.aborted = true;
      trace.abort_step = k;
      trace.abort_reason = "non-finite objective";
      finish();
      return trace;
    }

    const Vector g = prob.stochastic ? prob.stoch_grad(x, rng) : gfull;
    da_step(z_seq, g, 1.0, beta);
    beta_prev = beta;
    beta += 1.0 / beta;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = (1.0 - c0) * x[i] + c0 * z_seq.x[i];
    }

    if (!all_finite(x)) {
      trace.aborted = true;
      trace.abort_step = k;
      trace.abort_reason = "non-finite iterate";
      finish();
      return trace;
    }
  }

  axpy(1.0, x, avg_sum);
  avg_count += 1;
  finish();
  return trace;
}

}  // namespace mda
