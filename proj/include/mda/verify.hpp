#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "mda/analysis.hpp"
#include "mda/core.hpp"
#include "mda/optimizers.hpp"
#include "mda/problems.hpp"
#include "mda/run.hpp"
#include "mda/schedules.hpp"

namespace mda {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // first failing case, or a one-line success summary
};

namespace verify_detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Deterministic probe points: the start point plus standard normal draws.
inline std::vector<Vector> probe_points(const Problem& prob, int extra, std::uint64_t seed) {
  std::vector<Vector> pts{prob.x0};
  RngStream rng = RngStream::substream(seed, 9);
  for (int i = 0; i < extra; ++i) {
    Vector x(prob.x0.size());
    for (double& v : x) v = rng.normal();
    pts.push_back(std::move(x));
  }
  return pts;
}

inline bool gradients_close(const Vector& got, const Vector& want, double rel_tol,
                            double abs_floor, std::string& why) {
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double scale = std::max(abs_floor, std::abs(want[i]));
    if (!(std::abs(got[i] - want[i]) <= rel_tol * scale)) {
      std::ostringstream os;
      os << "coordinate " << i << ": analytic " << fmt(got[i]) << " vs central-difference "
         << fmt(want[i]);
      why = os.str();
      return false;
    }
  }
  return true;
}

}  // namespace verify_detail

// The four analytic inequalities of the decaying regularization strength,
// swept exhaustively over k <= 10^6 for small, unit, and large step sizes.
inline CheckResult check_schedule_inequalities() {
  CheckResult res{"schedule_inequalities", false, ""};
  const double etas[] = {0.1, 1.0, 10.0};
  const long long k_max = 1000000;
  for (double eta : etas) {
    double a = alpha_reg(0, eta);
    for (long long k = 0; k <= k_max; ++k) {
      const double a_next = alpha_reg(k + 1, eta);
      const double diff = a_next - a;
      std::string failed;
      if (!(a_next <= a)) {
        failed = "monotonicity";
      } else if (!(a <= 1.0 / (2.0 * eta * (static_cast<double>(k) + 1.0)))) {
        failed = "upper bound 1/(2 eta (k+1))";
      } else if (!(diff <= -1.0 / (4.0 * eta * std::pow(static_cast<double>(k) + 2.0, 1.5) *
                                   std::sqrt(static_cast<double>(k) + 3.0)))) {
        failed = "difference bound";
      } else if (!(a * diff <= 0.0) || !(a_next * diff <= 0.0)) {
        failed = "sign products";
      }
      if (!failed.empty()) {
        res.detail = failed + " fails at k=" + std::to_string(k) +
                     ", eta=" + verify_detail::fmt(eta) + ", alpha_k=" + verify_detail::fmt(a);
        return res;
      }
      a = a_next;
    }
  }
  res.passed = true;
  res.detail = "4 inequalities over k <= 10^6, eta in {0.1, 1, 10}";
  return res;
}

// Dual averaging and SGD with decaying L2 regularization trace identical
// iterates under eta_k = lambda_k / beta_k, alpha_k = (beta_k - beta_{k-1}) /
// lambda_k.
inline CheckResult check_prop1_equivalence() {
  CheckResult res{"prop1_equivalence", false, ""};
  const Problem problems[] = {make_quadratic(10, 1.8, 0.0, 42), make_logistic(60, 8, 60, 11)};
  const double etas[] = {0.1, 0.5, 1.0};
  const long long T = 200;
  const double tol = 1e-9;
  for (const Problem& prob : problems) {
    for (double eta : etas) {
      DaState da(prob.x0);
      RegSgdState reg(prob.x0);
      double worst = 0.0;
      for (long long k = 0; k < T; ++k) {
        da_step(da, prob.full_grad(da.x), lambda_stepsize(k, eta), beta_scaling(k));
        reg_sgd_step(reg, prob.full_grad(reg.x), eta, alpha_prop1_sqrt(k, eta));
        worst = std::max(worst, max_abs_diff(da.x, reg.x));
      }
      if (!(worst <= tol)) {
        res.detail = prob.id + ", eta=" + verify_detail::fmt(eta) +
                     ": max iterate gap " + verify_detail::fmt(worst) + " > 1e-9";
        return res;
      }
    }
  }
  res.passed = true;
  res.detail = "quadratic + logistic, eta in {0.1, 0.5, 1}, T=200, gap <= 1e-9";
  return res;
}

// SGD with momentum and the averaged-primal form coincide under
// c = 1 - beta, eta = alpha / (1 - beta).
inline CheckResult check_spa_sgdm_equivalence() {
  CheckResult res{"spa_sgdm_equivalence", false, ""};
  const Problem problems[] = {make_quadratic(10, 1.8, 0.0, 42), make_logistic(60, 8, 60, 11)};
  const double pairs[][2] = {{0.1, 0.9}, {0.01, 0.99}, {0.5, 0.0}};
  const long long T = 200;
  const double tol = 1e-9;
  for (const Problem& prob : problems) {
    for (const auto& ab : pairs) {
      const double alpha = ab[0], beta = ab[1];
      const SpaParams sp = spa_params_from_sgdm(alpha, beta);
      SgdmState sgdm(prob.x0);
      SpaState spa(prob.x0);
      double worst = 0.0;
      for (long long k = 0; k < T; ++k) {
        sgdm_step(sgdm, prob.full_grad(sgdm.x), alpha, beta);
        spa_step(spa, prob.full_grad(spa.x), sp.eta, sp.c);
        worst = std::max(worst, max_abs_diff(sgdm.x, spa.x));
      }
      if (!(worst <= tol)) {
        res.detail = prob.id + ", alpha=" + verify_detail::fmt(alpha) +
                     ", beta=" + verify_detail::fmt(beta) + ": max iterate gap " +
                     verify_detail::fmt(worst) + " > 1e-9";
        return res;
      }
    }
  }
  res.passed = true;
  res.detail = "3 parameter pairs on quadratic + logistic, T=200, gap <= 1e-9";
  return res;
}

// With c = 1 the averaged method collapses onto plain dual averaging.
inline CheckResult check_mda_da_collapse() {
  CheckResult res{"mda_da_collapse", false, ""};
  const Problem prob = make_quadratic(10, 5.0, 0.0, 42);
  const double eta = 0.3;
  const long long T = 500;
  MdaState mda_st(prob.x0);
  DaState da_st(prob.x0);
  double worst = 0.0;
  for (long long k = 0; k < T; ++k) {
    mda_step(mda_st, prob.full_grad(mda_st.x), eta, 1.0);
    da_step(da_st, prob.full_grad(da_st.x), lambda_stepsize(k, eta), beta_scaling(k));
    worst = std::max(worst, max_abs_diff(mda_st.x, da_st.x));
  }
  if (!(worst <= 1e-12)) {
    res.detail = "max iterate gap " + verify_detail::fmt(worst) + " > 1e-12";
    return res;
  }
  res.passed = true;
  res.detail = "c=1 trajectory gap <= 1e-12 over T=500";
  return res;
}

// Analytic gradients against central differences on every problem family.
inline CheckResult check_fd_gradients() {
  CheckResult res{"fd_gradient", false, ""};
  struct Case {
    Problem prob;
    double h;
    double rel_tol;
    double abs_floor;
  };
  const Case cases[] = {
      {make_quadratic(10, 10.0, 0.0, 42), 1e-6, 1e-8, 1.0},  // abs tol 1e-8
      {make_logistic(60, 8, 60, 11), 1e-6, 1e-6, 1.0},
      {make_rosenbrock(6), 1e-6, 1e-5, 1.0},
      {make_tiny_mlp(8, 120, 120, 3), 1e-5, 1e-4, 0.1},
  };
  for (const Case& c : cases) {
    for (const Vector& x : verify_detail::probe_points(c.prob, 2, 17)) {
      const Vector got = c.prob.full_grad(x);
      const Vector want = fd_gradient(c.prob.value, x, c.h);
      std::string why;
      if (!verify_detail::gradients_close(got, want, c.rel_tol, c.abs_floor, why)) {
        res.detail = c.prob.id + ": " + why;
        return res;
      }
    }
  }
  res.passed = true;
  res.detail = "4 problem families x 3 probe points";
  return res;
}

// Minibatch gradients are unbiased: the empirical mean over many draws sits
// within three standard errors of the full-batch gradient, per coordinate.
inline CheckResult check_minibatch_unbiasedness() {
  CheckResult res{"minibatch_unbiasedness", false, ""};
  const Problem prob = make_logistic(60, 8, 5, 11);
  const int n_draws = 10000;
  RngStream rng = RngStream::substream(23, 0);
  int probe_idx = 0;
  for (const Vector& x : verify_detail::probe_points(prob, 4, 29)) {
    const Vector full = prob.full_grad(x);
    Vector mean(x.size(), 0.0);
    Vector m2(x.size(), 0.0);  // sum of squared deviations, Welford
    for (int i = 0; i < n_draws; ++i) {
      const Vector g = prob.stoch_grad(x, rng);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double delta = g[j] - mean[j];
        mean[j] += delta / (i + 1);
        m2[j] += delta * (g[j] - mean[j]);
      }
    }
    for (std::size_t j = 0; j < mean.size(); ++j) {
      const double se = std::sqrt(m2[j] / (n_draws - 1) / n_draws);
      if (!(std::abs(mean[j] - full[j]) <= 3.0 * se + 1e-12)) {
        res.detail = "probe " + std::to_string(probe_idx) + ", coordinate " + std::to_string(j) +
                     ": |mean - full| = " + verify_detail::fmt(std::abs(mean[j] - full[j])) +
                     " > 3 se = " + verify_detail::fmt(3.0 * se);
        return res;
      }
    }
    ++probe_idx;
  }
  res.passed = true;
  res.detail = "5 probe points x 10^4 draws, all coordinates within 3 se";
  return res;
}

// Descent inequality audit: zero flagged violations across the admissible
// (c, eta) grid on deterministic problems, plus a negative control above the
// step-size cap where the step-length coefficient must flip sign.
inline CheckResult check_descent_audit() {
  CheckResult res{"descent_audit", false, ""};
  const Problem problems[] = {make_quadratic(10, 1.0, 0.0, 5), make_logistic(40, 4, 40, 11)};
  const double cs[] = {0.2, 0.5, 1.0};
  const double fracs[] = {0.25, 0.6, 0.95};
  const long long steps = 500;
  for (const Problem& prob : problems) {
    const double L = prob.smoothness.value();
    for (double c : cs) {
      for (double frac : fracs) {
        const double eta = frac * max_stepsize(L, c);
        const SpaTrajectory traj = run_spa_exact(prob, eta, c, steps);
        const DescentAudit audit = check_descent_inequality(prob, traj, L);
        if (audit.violations != 0) {
          res.detail = prob.id + ", c=" + verify_detail::fmt(c) +
                       ", eta=" + verify_detail::fmt(eta) + ": " +
                       std::to_string(audit.violations) + " violations, worst residual " +
                       verify_detail::fmt(audit.worst_residual);
          return res;
        }
      }
    }
    // Negative control: 1.5x the cap at c = 0.2. The audit must detect the
    // positive coefficient (detection, not absence, is what is asserted).
    const double eta_hot = 1.5 * max_stepsize(L, 0.2);
    const SpaTrajectory hot = run_spa_exact(prob, eta_hot, 0.2, 60);
    const DescentAudit control = check_descent_inequality(prob, hot, L);
    if (!control.bracket_positive) {
      res.detail = prob.id + ": negative control at eta=" + verify_detail::fmt(eta_hot) +
                   " failed to flag a positive step-length coefficient (bracket=" +
                   verify_detail::fmt(control.bracket) + ")";
      return res;
    }
  }
  res.passed = true;
  res.detail = "9-point (c, eta) grid clean on 2 problems; control flags positive coefficient";
  return res;
}

// Seed-averaged stationarity bound: the measured left-hand side stays below
// the analytic right-hand side with estimated noise and radius constants.
inline CheckResult check_bound_soundness() {
  CheckResult res{"bound_soundness", false, ""};
  const Problem prob = make_quadratic(10, 10.0, 1.0, 3);
  const double c = 0.5;
  const long long T = 10000;
  const int n_seeds = 20;

  double lhs = 0.0, f_x0 = 0.0, f_zT1 = 0.0, f_xT = 0.0;
  double sigma_hat = 0.0, r_hat = 0.0;
  for (int s = 1; s <= n_seeds; ++s) {
    const MdaTheoremStats st = mda_theorem_run(prob, c, T, static_cast<std::uint64_t>(s));
    lhs += st.lhs_mean_grad_sq / n_seeds;
    f_x0 += st.f_x0_gap / n_seeds;
    f_zT1 += st.f_zT1_gap / n_seeds;
    f_xT += st.f_xT_gap / n_seeds;
    sigma_hat = std::max(sigma_hat, st.sigma_hat_sq);
    r_hat = std::max(r_hat, st.r_hat_sq);
  }
  TheoremConstants tc;
  tc.L = prob.smoothness.value();
  tc.sigma_sq = sigma_hat;
  tc.R_sq = r_hat;
  tc.c = c;
  tc.T = T;
  tc.f_x0_gap = f_x0;
  tc.f_zT_gap = f_zT1;
  tc.f_xT_gap = f_xT;
  const BoundBreakdown rhs = mda_bound_rhs(tc);
  if (!(lhs <= rhs.total)) {
    res.detail = "seed-averaged lhs " + verify_detail::fmt(lhs) + " > bound " +
                 verify_detail::fmt(rhs.total);
    return res;
  }
  res.passed = true;
  res.detail = "20 seeds, T=10^4: lhs " + verify_detail::fmt(lhs) + " <= bound " +
               verify_detail::fmt(rhs.total);
  return res;
}

inline std::vector<CheckResult> run_verification() {
  return {
      check_schedule_inequalities(), check_prop1_equivalence(), check_spa_sgdm_equivalence(),
      check_mda_da_collapse(),       check_fd_gradients(),      check_minibatch_unbiasedness(),
      check_descent_audit(),         check_bound_soundness(),
  };
}

}  // namespace mda
