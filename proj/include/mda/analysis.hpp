#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mda/core.hpp"
#include "mda/optimizers.hpp"
#include "mda/problems.hpp"
#include "mda/schedules.hpp"

namespace mda {

// Largest constant step size for which the averaged-primal descent argument
// keeps its step-length coefficient negative: (c + 1/2) / L.
inline double max_stepsize(double L, double c) {
  if (!(L > 0.0)) throw std::invalid_argument("max_stepsize: L <= 0");
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("max_stepsize: c not in (0,1]");
  return (c + 0.5) / L;
}

// Per-step potential
//   Gamma = (1/eta^2) f_z_next + (L/eta)(1/c - 1) f_x
//         + (L / (2 eta c_next^2)) dx_norm_sq,
// with f-values passed as gaps f(.) - f* so the result is translation
// invariant. These are the gamma_literal term weights; the audit below also
// offers the squared-eta telescoping variant.
inline double lyapunov_gamma(double f_z_next_gap, double f_x_gap, double dx_norm_sq, double eta,
                             double c, double c_next, double L) {
  if (!(eta > 0.0)) throw std::invalid_argument("lyapunov_gamma: eta <= 0");
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("lyapunov_gamma: c not in (0,1]");
  if (!(c_next > 0.0 && c_next <= 1.0)) {
    throw std::invalid_argument("lyapunov_gamma: c_next not in (0,1]");
  }
  return f_z_next_gap / (eta * eta) + (L / eta) * (1.0 / c - 1.0) * f_x_gap +
         L / (2.0 * eta * c_next * c_next) * dx_norm_sq;
}

// Coefficient of L * ||x_k - x_{k-1}||^2 / 2 on the descent-inequality RHS
// (constant eta and c):
//   (1/eta^2)(1/c - 1 + eta L)(1/c - 1) + (L/eta)(1/c - 1)^2 - 1/(eta^2 c^2).
// Negative iff eta < c(2 - c) / (L(1 - c)); note this boundary drops below
// max_stepsize for small c, where the coefficient turns positive while the
// step size is still "allowed". A positive coefficient only adds slack to
// the RHS, so it is reported as a sign flag rather than a failure.
inline double descent_bracket(double eta, double c, double L) {
  if (!(eta > 0.0)) throw std::invalid_argument("descent_bracket: eta <= 0");
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("descent_bracket: c not in (0,1]");
  const double u = 1.0 / c - 1.0;
  return (u + eta * L) * u / (eta * eta) + (L / eta) * u * u - 1.0 / (eta * eta * c * c);
}

// Averaged-primal trajectory with exact (full) gradients, kept densely so the
// descent audit can evaluate values and gradients at every x_k and z_k.
struct SpaTrajectory {
  double eta = 0.0;
  double c = 1.0;
  std::vector<Vector> xs;  // x_0 .. x_K
  std::vector<Vector> zs;  // z_0 .. z_K, z_0 = x_0
};

inline SpaTrajectory run_spa_exact(const Problem& prob, double eta, double c,
                                   long long n_steps) {
  if (prob.stochastic) {
    throw std::invalid_argument("run_spa_exact: needs a deterministic problem");
  }
  if (!(eta > 0.0)) throw std::invalid_argument("run_spa_exact: eta <= 0");
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("run_spa_exact: c not in (0,1]");
  if (n_steps < 2) throw std::invalid_argument("run_spa_exact: n_steps < 2");

  SpaTrajectory traj;
  traj.eta = eta;
  traj.c = c;
  traj.xs.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.zs.reserve(static_cast<std::size_t>(n_steps) + 1);
  SpaState st(prob.x0);
  traj.xs.push_back(st.x);
  traj.zs.push_back(st.z);
  for (long long k = 0; k < n_steps; ++k) {
    spa_step(st, prob.full_grad(st.x), eta, c);
    if (!all_finite(st.x) || !all_finite(st.z)) {
      throw std::runtime_error("run_spa_exact: diverged at step " + std::to_string(k));
    }
    traj.xs.push_back(st.x);
    traj.zs.push_back(st.z);
  }
  return traj;
}

// Which window of iterates the potential difference Gamma_k - Gamma_{k+1}
// pairs with the step-k inequality. `gamma_literal` uses lyapunov_gamma's
// exact term weights: Gamma_k holds z_{k+1}, x_k, ||x_{k+1}-x_k||^2 with an
// unsquared eta on the step-length term. `telescoping` shifts the same
// formula one index down (Gamma_k holds z_k, x_{k-1}, ||x_k-x_{k-1}||^2)
// with eta^2 on the step-length term. Only the shifted pairing actually
// telescopes against the per-step terms; the literal one fails numerically
// even in benign settings, so it is kept as an opt-in.
enum class GammaConvention { gamma_literal, telescoping };

struct DescentRecord {
  long long k = 0;
  double gamma = 0.0;
  double inequality_lhs = 0.0;
  double inequality_rhs = 0.0;
  double residual = 0.0;  // rhs - lhs, negative means violated
};

struct DescentAudit {
  std::vector<DescentRecord> records;
  double bracket = 0.0;  // step-length coefficient, constant across k here
  bool bracket_positive = false;
  long long violations = 0;
  double worst_residual = std::numeric_limits<double>::infinity();
};

// Evaluates, per step k, the descent inequality
//   (1/2eta)(||grad f(x_k)||^2 + ||grad f(z_k)||^2)
//     <= Gamma_k - Gamma_{k+1} + L ||grad f(x_k)||^2
//        + (1/2) bracket * L ||x_k - x_{k-1}||^2
// along an exact-gradient trajectory, with x_{-1} := x_0. A record is flagged
// as a violation when residual < -rel_tol * max(1, |Gamma_k|).
inline DescentAudit check_descent_inequality(const Problem& prob, const SpaTrajectory& traj,
                                             double L,
                                             GammaConvention conv = GammaConvention::telescoping,
                                             double rel_tol = 1e-6) {
  if (prob.stochastic) {
    throw std::invalid_argument("check_descent_inequality: needs a deterministic problem");
  }
  if (!(L > 0.0)) throw std::invalid_argument("check_descent_inequality: L <= 0");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("check_descent_inequality: rel_tol < 0");
  if (traj.xs.size() != traj.zs.size() || traj.xs.size() < 4) {
    throw std::invalid_argument("check_descent_inequality: trajectory too short");
  }
  const double eta = traj.eta;
  const double c = traj.c;
  const std::size_t n_pts = traj.xs.size();

  std::vector<double> fx_gap(n_pts), fz_gap(n_pts), gx_sq(n_pts), gz_sq(n_pts), dx_sq(n_pts);
  for (std::size_t j = 0; j < n_pts; ++j) {
    fx_gap[j] = prob.value(traj.xs[j]);
    fz_gap[j] = prob.value(traj.zs[j]);
    gx_sq[j] = norm_sq(prob.full_grad(traj.xs[j]));
    gz_sq[j] = norm_sq(prob.full_grad(traj.zs[j]));
    dx_sq[j] = j == 0 ? 0.0 : dist_sq(traj.xs[j], traj.xs[j - 1]);
  }
  double f_ref;
  if (prob.f_star.has_value()) {
    f_ref = *prob.f_star;
  } else {
    f_ref = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_pts; ++j) f_ref = std::min({f_ref, fx_gap[j], fz_gap[j]});
  }
  for (std::size_t j = 0; j < n_pts; ++j) {
    fx_gap[j] -= f_ref;
    fz_gap[j] -= f_ref;
  }

  // step-length coefficient of the potential's third term
  const double rho = conv == GammaConvention::telescoping
                         ? L / (2.0 * eta * eta * c * c)
                         : L / (2.0 * eta * c * c);
  auto window = [&](std::size_t j) {
    const double f_prev_x = j == 0 ? fx_gap[0] : fx_gap[j - 1];
    return fz_gap[j] / (eta * eta) + (L / eta) * (1.0 / c - 1.0) * f_prev_x + rho * dx_sq[j];
  };

  DescentAudit audit;
  audit.bracket = descent_bracket(eta, c, L);
  audit.bracket_positive = audit.bracket > 0.0;
  const std::size_t n_checks = n_pts - 3;  // both conventions need points up to k+2
  audit.records.reserve(n_checks + 1);
  for (std::size_t k = 0; k <= n_checks; ++k) {
    DescentRecord rec;
    rec.k = static_cast<long long>(k);
    const std::size_t lo = conv == GammaConvention::telescoping ? k : k + 1;
    rec.gamma = window(lo);
    rec.inequality_lhs = (gx_sq[k] + gz_sq[k]) / (2.0 * eta);
    rec.inequality_rhs = rec.gamma - window(lo + 1) + L * gx_sq[k] +
                         0.5 * audit.bracket * L * dx_sq[k];
    rec.residual = rec.inequality_rhs - rec.inequality_lhs;
    if (rec.residual < -rel_tol * std::max(1.0, std::abs(rec.gamma))) audit.violations += 1;
    audit.worst_residual = std::min(audit.worst_residual, rec.residual);
    audit.records.push_back(rec);
  }
  return audit;
}

// Every symbol of the stationarity bound, with f-values as gaps.
struct TheoremConstants {
  double L = 0.0;
  double sigma_sq = 0.0;
  double R_sq = 0.0;
  double c = 1.0;
  long long T = 0;
  double f_x0_gap = 0.0;
  double f_zT_gap = 0.0;  // gap at z_{T+1}
  double f_xT_gap = 0.0;  // gap at x_T

  double eta() const { return 1.0 / std::sqrt(static_cast<double>(T)); }

  // alpha_T = sqrt(T) (1 - sqrt(T+1)/sqrt(T+2)), in cancellation-free form.
  // Coincides with alpha_reg(T, 1/sqrt(T)).
  double alpha_T() const {
    const double t = static_cast<double>(T);
    const double r2 = std::sqrt(t + 2.0);
    const double r1 = std::sqrt(t + 1.0);
    return std::sqrt(t) / (r2 * (r2 + r1));
  }
};

struct BoundBreakdown {
  double term_z = 0.0;      // 2 (f_x0_gap - f_zT_gap) / sqrt(T)
  double term_x = 0.0;      // 2 (1/c - 1)((L+1) f_x0_gap - (L+alpha_T) f_xT_gap) / T
  double term_sigma = 0.0;  // 2 (L/sqrt(T) + log(T+1)/T) sigma^2
  double term_r = 0.0;      // 2 (L log T / T + 2 log T / sqrt(T)) R^2
  double total = 0.0;
};

// Right-hand side of the stationarity bound for the averaged dual-averaging
// method at eta = 1/sqrt(T). The hypothesis T >= L^2/c^2 is enforced.
inline BoundBreakdown mda_bound_rhs(const TheoremConstants& tc) {
  if (tc.T < 1) throw std::invalid_argument("mda_bound_rhs: T < 1");
  if (!(tc.c > 0.0 && tc.c <= 1.0)) throw std::invalid_argument("mda_bound_rhs: c not in (0,1]");
  if (!(tc.L >= 0.0) || !(tc.sigma_sq >= 0.0) || !(tc.R_sq >= 0.0)) {
    throw std::invalid_argument("mda_bound_rhs: negative constant");
  }
  const double t = static_cast<double>(tc.T);
  if (t * tc.c * tc.c < tc.L * tc.L) {
    throw std::invalid_argument("mda_bound_rhs: hypothesis T >= L^2/c^2 violated");
  }
  const double rt = std::sqrt(t);
  BoundBreakdown b;
  b.term_z = 2.0 * (tc.f_x0_gap - tc.f_zT_gap) / rt;
  b.term_x = 2.0 * (1.0 / tc.c - 1.0) *
             ((tc.L + 1.0) * tc.f_x0_gap - (tc.L + tc.alpha_T()) * tc.f_xT_gap) / t;
  b.term_sigma = 2.0 * (tc.L / rt + std::log(t + 1.0) / t) * tc.sigma_sq;
  b.term_r = 2.0 * (tc.L * std::log(t) / t + 2.0 * std::log(t) / rt) * tc.R_sq;
  b.total = b.term_z + b.term_x + b.term_sigma + b.term_r;
  return b;
}

// Plain-SGD counterpart at eta = 1/sqrt(T): gap/sqrt(T) + L sigma^2 / (2T).
inline double sgd_bound_rhs(double f_x0_gap, double L, double sigma_sq, long long T) {
  if (T < 1) throw std::invalid_argument("sgd_bound_rhs: T < 1");
  const double t = static_cast<double>(T);
  return f_x0_gap / std::sqrt(t) + L * sigma_sq / (2.0 * t);
}

struct RatePoint {
  double T = 0.0;
  double metric = 0.0;
};

// Least-squares slope of log(metric) against log(T); the empirical rate
// exponent.
inline double rate_fit(const std::vector<RatePoint>& points) {
  if (points.size() < 3) throw std::invalid_argument("rate_fit: need at least 3 points");
  std::vector<double> xs(points.size()), ys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].T > 0.0)) throw std::invalid_argument("rate_fit: nonpositive T");
    if (!(points[i].metric > 0.0)) throw std::invalid_argument("rate_fit: nonpositive metric");
    xs[i] = std::log(points[i].T);
    ys[i] = std::log(points[i].metric);
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  if (!(den > 0.0)) throw std::invalid_argument("rate_fit: degenerate T values");
  return num / den;
}

// One full trajectory's worth of evidence for the stationarity bound at
// eta = 1/sqrt(T): runs T+1 averaged dual-averaging steps so z_{T+1} exists,
// accumulates the bound's LHS over k = 0..T, and estimates the oracle
// second moment (max over visited x_k of a small sampled mean) and the
// visited-domain radius (max over all x_k and z_k).
struct MdaTheoremStats {
  double lhs_mean_grad_sq = 0.0;  // (1/2T) sum_k (||gx_k||^2 + ||gz_k||^2)
  double sigma_hat_sq = 0.0;
  double r_hat_sq = 0.0;
  double f_x0_gap = 0.0;
  double f_zT1_gap = 0.0;
  double f_xT_gap = 0.0;
};

inline MdaTheoremStats mda_theorem_run(const Problem& prob, double c, long long T,
                                       std::uint64_t seed, int noise_samples = 4) {
  if (T < 1) throw std::invalid_argument("mda_theorem_run: T < 1");
  if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("mda_theorem_run: c not in (0,1]");
  if (noise_samples < 1) throw std::invalid_argument("mda_theorem_run: noise_samples < 1");

  const double eta = 1.0 / std::sqrt(static_cast<double>(T));
  RngStream rng = RngStream::substream(seed, 0);
  RngStream noise_rng = RngStream::substream(seed, 1);  // keeps the trajectory replayable
  MdaState st(prob.x0);

  double lhs_sum = 0.0;
  double sigma_hat = 0.0;
  double r_hat = 0.0;
  double min_f = std::numeric_limits<double>::infinity();
  double f_x0 = 0.0, f_xT = 0.0;

  for (long long k = 0; k <= T; ++k) {
    const double fx = prob.value(st.x);
    min_f = std::min(min_f, fx);
    if (k == 0) f_x0 = fx;
    if (k == T) f_xT = fx;

    lhs_sum += norm_sq(prob.full_grad(st.x)) + norm_sq(prob.full_grad(st.z));
    r_hat = std::max({r_hat, dist_sq(st.x, prob.x0), dist_sq(st.z, prob.x0)});

    double second_moment = 0.0;
    for (int s = 0; s < noise_samples; ++s) {
      second_moment += norm_sq(prob.stoch_grad(st.x, noise_rng));
    }
    sigma_hat = std::max(sigma_hat, second_moment / noise_samples);

    const Vector g = prob.stochastic ? prob.stoch_grad(st.x, rng) : prob.full_grad(st.x);
    mda_step(st, g, eta, c);
    if (!all_finite(st.x) || !all_finite(st.z)) {
      throw std::runtime_error("mda_theorem_run: diverged at step " + std::to_string(k));
    }
  }

  const double f_zT1 = prob.value(st.z);
  min_f = std::min(min_f, f_zT1);
  r_hat = std::max({r_hat, dist_sq(st.x, prob.x0), dist_sq(st.z, prob.x0)});

  const double f_ref = prob.f_star.has_value() ? *prob.f_star : min_f;
  MdaTheoremStats stats;
  stats.lhs_mean_grad_sq = lhs_sum / (2.0 * static_cast<double>(T));
  stats.sigma_hat_sq = sigma_hat;
  stats.r_hat_sq = r_hat;
  stats.f_x0_gap = f_x0 - f_ref;
  stats.f_zT1_gap = f_zT1 - f_ref;
  stats.f_xT_gap = f_xT - f_ref;
  return stats;
}

}  // namespace mda
