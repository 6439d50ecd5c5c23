#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mda {

// beta_k = sqrt(k + 1)
inline double beta_scaling(long long k) {
  if (k < 0) throw std::invalid_argument("beta_scaling: k < 0");
  return std::sqrt(static_cast<double>(k) + 1.0);
}

// lambda_k = eta_k * sqrt(k + 1)
inline double lambda_stepsize(long long k, double eta_k) {
  if (k < 0) throw std::invalid_argument("lambda_stepsize: k < 0");
  if (!(eta_k > 0.0)) throw std::invalid_argument("lambda_stepsize: eta_k <= 0");
  return eta_k * std::sqrt(static_cast<double>(k) + 1.0);
}

// Decaying regularization strength
//   alpha_k = (sqrt(k+2) - sqrt(k+1)) / (eta_k * sqrt(k+2)),
// evaluated as 1 / (eta_k * sqrt(k+2) * (sqrt(k+2) + sqrt(k+1))) so the
// difference of nearby square roots never cancels. Behaves like 1/(2 eta k).
inline double alpha_reg(long long k, double eta_k) {
  if (k < 0) throw std::invalid_argument("alpha_reg: k < 0");
  if (!(eta_k > 0.0)) throw std::invalid_argument("alpha_reg: eta_k <= 0");
  const double r2 = std::sqrt(static_cast<double>(k) + 2.0);
  const double r1 = std::sqrt(static_cast<double>(k) + 1.0);
  return 1.0 / (eta_k * r2 * (r2 + r1));
}

// alpha_k = (beta_k - beta_{k-1}) / lambda_k for arbitrary coefficient
// sequences, with the convention beta_{-1} := beta_0 (hence alpha_0 = 0).
template <typename BetaFn, typename LambdaFn>
double alpha_prop1(long long k, BetaFn&& beta, LambdaFn&& lambda) {
  if (k < 0) throw std::invalid_argument("alpha_prop1: k < 0");
  const double lam = lambda(k);
  if (!(lam > 0.0)) throw std::invalid_argument("alpha_prop1: lambda_k <= 0");
  if (k == 0) return 0.0;
  return (beta(k) - beta(k - 1)) / lam;
}

// alpha_prop1 specialized to beta_k = sqrt(k+1), lambda_k = eta_k sqrt(k+1),
// in cancellation-free form. Satisfies alpha_prop1_sqrt(k, eta) ==
// alpha_reg(k-1, eta) for k >= 1.
inline double alpha_prop1_sqrt(long long k, double eta_k) {
  if (k < 0) throw std::invalid_argument("alpha_prop1_sqrt: k < 0");
  if (!(eta_k > 0.0)) throw std::invalid_argument("alpha_prop1_sqrt: eta_k <= 0");
  if (k == 0) return 0.0;
  const double r1 = std::sqrt(static_cast<double>(k) + 1.0);
  const double r0 = std::sqrt(static_cast<double>(k));
  return 1.0 / (eta_k * r1 * (r1 + r0));
}

inline double effective_lr(double lambda_k, double beta_k) {
  if (!(beta_k > 0.0)) throw std::invalid_argument("effective_lr: beta_k <= 0");
  return lambda_k / beta_k;
}

// Momentum compensation: when the learning rate drops below its initial
// value, the averaging coefficient rises in proportion, capped at 1.
inline double compensated_c(double c0, double eta0, double eta_k) {
  if (!(c0 > 0.0 && c0 <= 1.0)) throw std::invalid_argument("compensated_c: c0 not in (0,1]");
  if (!(eta0 > 0.0) || !(eta_k > 0.0)) throw std::invalid_argument("compensated_c: eta <= 0");
  return std::min(1.0, c0 * eta0 / eta_k);
}

enum class LrShape { flat, warmup_linear_decay, stagewise_linear };

// One stage of a stagewise schedule: at floor(at_frac * T) the multiplier
// starts ramping linearly from its previous value to `multiplier`, reaching
// it after floor(ramp_frac * T) steps (at least one step).
struct Stage {
  double at_frac = 0.0;
  double multiplier = 1.0;
  double ramp_frac = 0.0;
};

struct ScheduleSpec {
  double base_lr = 0.1;
  LrShape shape = LrShape::flat;
  long long total_steps = 0;       // required by non-flat shapes
  long long warmup_steps = 0;      // warmup_linear_decay only
  std::vector<Stage> stages;       // stagewise_linear only
  double c0 = 1.0;
  bool compensate_momentum = false;

  static ScheduleSpec flat(double eta, double c0_ = 1.0, bool compensate = false) {
    ScheduleSpec s;
    s.base_lr = eta;
    s.c0 = c0_;
    s.compensate_momentum = compensate;
    s.validate();
    return s;
  }

  // eta_k = 1/sqrt(T), flat: the step size under which the O(1/sqrt(T))
  // stationarity guarantee is stated.
  static ScheduleSpec inv_sqrt_t(long long T, double c0_ = 1.0) {
    if (T <= 0) throw std::invalid_argument("inv_sqrt_t: T <= 0");
    ScheduleSpec s;
    s.base_lr = 1.0 / std::sqrt(static_cast<double>(T));
    s.total_steps = T;
    s.c0 = c0_;
    s.validate();
    return s;
  }

  void validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("schedule: base_lr <= 0");
    if (!(c0 > 0.0 && c0 <= 1.0)) throw std::invalid_argument("schedule: c0 not in (0,1]");
    if (shape == LrShape::warmup_linear_decay) {
      if (total_steps <= 0) throw std::invalid_argument("schedule: warmup needs total_steps");
      if (warmup_steps <= 0 || warmup_steps >= total_steps) {
        throw std::invalid_argument("schedule: warmup_steps must lie in (0, total_steps)");
      }
    }
    if (shape == LrShape::stagewise_linear) {
      if (total_steps <= 0) throw std::invalid_argument("schedule: stagewise needs total_steps");
      double prev = -1.0;
      for (const Stage& st : stages) {
        if (!(st.at_frac >= 0.0 && st.at_frac <= 1.0)) {
          throw std::invalid_argument("schedule: stage at_frac outside [0,1]");
        }
        if (st.at_frac <= prev) throw std::invalid_argument("schedule: stages not increasing");
        if (!(st.multiplier > 0.0)) throw std::invalid_argument("schedule: stage multiplier <= 0");
        if (!(st.ramp_frac >= 0.0 && st.ramp_frac <= 1.0)) {
          throw std::invalid_argument("schedule: stage ramp_frac outside [0,1]");
        }
        prev = st.at_frac;
      }
    }
  }

  double eta_at(long long k) const {
    if (k < 0) throw std::invalid_argument("eta_at: k < 0");
    switch (shape) {
      case LrShape::flat:
        return base_lr;
      case LrShape::warmup_linear_decay: {
        if (k < warmup_steps) {
          return base_lr * static_cast<double>(k + 1) / static_cast<double>(warmup_steps);
        }
        const double span = static_cast<double>(total_steps - warmup_steps);
        return base_lr * (1.0 - static_cast<double>(k - warmup_steps) / span);
      }
      case LrShape::stagewise_linear: {
        double mult = 1.0;
        double prev = 1.0;
        for (const Stage& st : stages) {
          const long long start =
              std::llround(st.at_frac * static_cast<double>(total_steps));
          if (k < start) break;
          const long long ramp = std::max<long long>(
              1, std::llround(st.ramp_frac * static_cast<double>(total_steps)));
          if (k >= start + ramp - 1) {
            mult = st.multiplier;
          } else {
            const double t = static_cast<double>(k - start + 1) / static_cast<double>(ramp);
            mult = prev + (st.multiplier - prev) * t;
          }
          prev = st.multiplier;
        }
        return base_lr * mult;
      }
    }
    throw std::logic_error("eta_at: unhandled shape");
  }

  // Averaging coefficient used at step k.
  double c_at(long long k) const {
    if (!compensate_momentum) return c0;
    return compensated_c(c0, eta_at(0), eta_at(k));
  }

  std::string describe() const {
    std::ostringstream os;
    switch (shape) {
      case LrShape::flat:
        os << "flat";
        break;
      case LrShape::warmup_linear_decay:
        os << "warmup_linear_decay(warmup=" << warmup_steps << ")";
        break;
      case LrShape::stagewise_linear: {
        os << "stagewise[";
        bool first = true;
        for (const Stage& st : stages) {
          if (!first) os << ";";
          os << st.at_frac << ":" << st.multiplier << ":" << st.ramp_frac;
          first = false;
        }
        os << "]";
        break;
      }
    }
    os << ",base_lr=" << base_lr << ",c0=" << c0
       << ",compensate=" << (compensate_momentum ? 1 : 0);
    return os.str();
  }
};

}  // namespace mda
