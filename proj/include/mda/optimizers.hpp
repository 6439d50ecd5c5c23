#pragma once

#include <cmath>
#include <stdexcept>

#include "mda/core.hpp"
#include "mda/schedules.hpp"

namespace mda {

// x <- x - eta_k g
inline void sgd_step(Vector& x, const Vector& g, double eta_k) {
  axpy(-eta_k, g, x);
}

// Heavy-ball momentum:
//   m <- beta m + g
//   x <- x - alpha m
struct SgdmState {
  Vector x;
  Vector m;
  explicit SgdmState(Vector x0) : x(std::move(x0)), m(x.size(), 0.0) {}
};

inline void sgdm_step(SgdmState& st, const Vector& g, double alpha, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("sgdm_step: beta not in [0,1)");
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    st.m[i] = beta * st.m[i] + g[i];
    st.x[i] -= alpha * st.m[i];
  }
}

// Adam with bias correction.
struct AdamState {
  Vector x;
  Vector m;
  Vector v;
  long long k = 0;
  explicit AdamState(Vector x0) : x(std::move(x0)), m(x.size(), 0.0), v(x.size(), 0.0) {}
};

inline void adam_step(AdamState& st, const Vector& g, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  st.k += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.k));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.k));
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    st.x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// Dual averaging against the proximity function centered at x0:
//   s_k = s_{k-1} + lambda_k g_k
//   x_{k+1} = x0 - s_k / beta_k
struct DaState {
  Vector x0;
  Vector s;
  Vector x;
  long long k = 0;
  explicit DaState(Vector start) : x0(std::move(start)), s(x0.size(), 0.0), x(x0) {}
};

inline void da_step(DaState& st, const Vector& g, double lambda_k, double beta_k) {
  if (!(beta_k > 0.0)) throw std::invalid_argument("da_step: beta_k <= 0");
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    st.s[i] += lambda_k * g[i];
    st.x[i] = st.x0[i] - st.s[i] / beta_k;
  }
  st.k += 1;
}

// Dual averaging with beta_k = sqrt(k+1), lambda_k = eta_k sqrt(k+1), and an
// averaged primal iterate:
//   z_{k+1} = x0 - s_k / beta_k
//   x_{k+1} = (1 - c) x_k + c z_{k+1}
// With c == 1 the x and z sequences coincide and the method reduces to
// da_step under the same coefficients.
struct MdaState {
  Vector x0;
  Vector s;
  Vector z;
  Vector x;
  long long k = 0;
  explicit MdaState(Vector start) : x0(std::move(start)), s(x0.size(), 0.0), z(x0), x(x0) {}
};

inline void mda_step(MdaState& st, const Vector& g, double eta_k, double c_next) {
  if (!(c_next > 0.0 && c_next <= 1.0)) throw std::invalid_argument("mda_step: c not in (0,1]");
  const double lam = lambda_stepsize(st.k, eta_k);
  const double bet = beta_scaling(st.k);
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    st.s[i] += lam * g[i];
    st.z[i] = st.x0[i] - st.s[i] / bet;
    st.x[i] = (1.0 - c_next) * st.x[i] + c_next * st.z[i];
  }
  st.k += 1;
}

// SGD with decaying L2 regularization pulled toward the start point:
//   x <- x - eta_k g - eta_k alpha_k (x - x0)
// With eta_k = lambda_k / beta_k and alpha_k = (beta_k - beta_{k-1}) / lambda_k
// this reproduces the da_step trajectory exactly.
struct RegSgdState {
  Vector x0;
  Vector x;
  long long k = 0;
  explicit RegSgdState(Vector start) : x0(std::move(start)), x(x0) {}
};

inline void reg_sgd_step(RegSgdState& st, const Vector& g, double eta_k, double alpha_k) {
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    st.x[i] -= eta_k * g[i] + eta_k * alpha_k * (st.x[i] - st.x0[i]);
  }
  st.k += 1;
}

// Stochastic primal averaging:
//   z_{k+1} = z_k - eta_k g_k
//   x_{k+1} = (1 - c) x_k + c z_{k+1}
struct SpaState {
  Vector x;
  Vector z;
  explicit SpaState(Vector start) : x(start), z(std::move(start)) {}
};

inline void spa_step(SpaState& st, const Vector& g, double eta_k, double c_next) {
  if (!(c_next > 0.0 && c_next <= 1.0)) throw std::invalid_argument("spa_step: c not in (0,1]");
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    st.z[i] -= eta_k * g[i];
    st.x[i] = (1.0 - c_next) * st.x[i] + c_next * st.z[i];
  }
}

// Parameter map under which spa_step reproduces sgdm_step's x trajectory
// (started from z_0 = x_0, m_0 = 0): c = 1 - beta, eta = alpha / (1 - beta).
struct SpaParams {
  double eta = 0.0;
  double c = 1.0;
};

inline SpaParams spa_params_from_sgdm(double alpha, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw std::invalid_argument("spa_params_from_sgdm: beta not in [0,1)");
  }
  return SpaParams{alpha / (1.0 - beta), 1.0 - beta};
}

}  // namespace mda
