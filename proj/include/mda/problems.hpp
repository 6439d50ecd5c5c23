#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mda/core.hpp"

namespace mda {

// A benchmark objective. value/full_grad are exact; stoch_grad draws an
// unbiased estimate (equal to full_grad for deterministic instances, which
// then consume no randomness). Closures capture immutable data, so a Problem
// can be shared across threads as long as each run owns its RngStream.
struct Problem {
  std::string id;
  int dim = 0;
  bool stochastic = false;
  std::optional<double> smoothness;  // documented Lipschitz bound, if known
  double sigma_sq = 0.0;             // gradient noise second-moment proxy
  std::optional<double> f_star;
  std::optional<Vector> x_star;
  Vector x0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> full_grad;
  std::function<Vector(const Vector&, RngStream&)> stoch_grad;
};

// Central-difference gradient, the reference oracle for gradient checks.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h <= 0");
  Vector g(x.size(), 0.0);
  Vector xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// f(x) = 1/2 (x - x*)' A (x - x*) with A diagonal, eigenvalues log-spaced on
// [1, cond] (a single coordinate gets cond), so the smoothness constant is
// exactly cond. x* has standard normal entries drawn from `seed`; the start
// point is the origin. sigma > 0 adds N(0, sigma^2/n) noise per coordinate to
// stochastic gradients, i.e. E||noise||^2 = sigma^2.
inline Problem make_quadratic(int n, double cond, double sigma, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("quadratic: n < 1");
  if (!(cond >= 1.0)) throw std::invalid_argument("quadratic: cond < 1");
  if (sigma < 0.0) throw std::invalid_argument("quadratic: sigma < 0");

  auto eig = std::make_shared<Vector>(n, cond);
  if (n > 1) {
    for (int i = 0; i < n; ++i) {
      (*eig)[i] = std::pow(cond, static_cast<double>(i) / static_cast<double>(n - 1));
    }
  }
  RngStream rng = RngStream::substream(seed, 0);
  auto xs = std::make_shared<Vector>(gaussian_vector(rng, static_cast<std::size_t>(n), 1.0));

  Problem p;
  std::ostringstream id;
  id << "quadratic(n=" << n << ",cond=" << cond << ",sigma=" << sigma << ",seed=" << seed << ")";
  p.id = id.str();
  p.dim = n;
  p.stochastic = sigma > 0.0;
  p.smoothness = cond;
  p.sigma_sq = sigma * sigma;
  p.f_star = 0.0;
  p.x_star = *xs;
  p.x0 = Vector(n, 0.0);
  p.value = [eig, xs](const Vector& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - (*xs)[i];
      acc += 0.5 * (*eig)[i] * d * d;
    }
    return acc;
  };
  p.full_grad = [eig, xs](const Vector& x) {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = (*eig)[i] * (x[i] - (*xs)[i]);
    return g;
  };
  const double coord_sigma = sigma / std::sqrt(static_cast<double>(n));
  p.stoch_grad = [eig, xs, coord_sigma](const Vector& x, RngStream& r) {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = (*eig)[i] * (x[i] - (*xs)[i]);
    if (coord_sigma > 0.0) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += coord_sigma * r.normal();
    }
    return g;
  };
  return p;
}

namespace detail {

// log(1 + e^t) without overflow
inline double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

// 1 / (1 + e^t)
inline double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

struct LogisticData {
  int n = 0;                 // samples
  int d = 0;                 // features
  std::vector<double> a;     // row-major n x d
  std::vector<double> y;     // +1 / -1

  double margin(const Vector& x, int i) const {
    double t = 0.0;
    for (int j = 0; j < d; ++j) t += a[static_cast<std::size_t>(i) * d + j] * x[j];
    return y[i] * t;
  }

  double sample_loss(const Vector& x, int i) const { return softplus(-margin(x, i)); }

  void add_sample_grad(const Vector& x, int i, double weight, Vector& g) const {
    const double t = margin(x, i);
    const double w = weight * (-y[i] * sigmoid_neg(t));
    for (int j = 0; j < d; ++j) g[j] += w * a[static_cast<std::size_t>(i) * d + j];
  }
};

// Solve H x = b for symmetric positive definite H (row-major d x d), in place
// Cholesky. Small d only.
inline Vector spd_solve(std::vector<double> H, Vector b, int d) {
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = H[static_cast<std::size_t>(i) * d + j];
      for (int k = 0; k < j; ++k) {
        sum -= H[static_cast<std::size_t>(i) * d + k] * H[static_cast<std::size_t>(j) * d + k];
      }
      if (i == j) {
        if (!(sum > 0.0)) throw std::runtime_error("spd_solve: matrix not positive definite");
        H[static_cast<std::size_t>(i) * d + j] = std::sqrt(sum);
      } else {
        H[static_cast<std::size_t>(i) * d + j] = sum / H[static_cast<std::size_t>(j) * d + j];
      }
    }
  }
  for (int i = 0; i < d; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= H[static_cast<std::size_t>(i) * d + k] * b[k];
    b[i] = sum / H[static_cast<std::size_t>(i) * d + i];
  }
  for (int i = d - 1; i >= 0; --i) {
    double sum = b[i];
    for (int k = i + 1; k < d; ++k) sum -= H[static_cast<std::size_t>(k) * d + i] * b[k];
    b[i] = sum / H[static_cast<std::size_t>(i) * d + i];
  }
  return b;
}

}  // namespace detail

// Binary logistic regression on synthetic nearly-separable data: labels are
// the sign of a noisy linear margin and every tenth sample is flipped, which
// keeps the minimizer finite. Features are scaled by 1/sqrt(d) so row norms
// hover around 1. The optimal value is computed once at construction by a
// damped Newton solve. Smoothness bound: max_i ||a_i||^2 / 4.
inline Problem make_logistic(int n_samples, int n_features, int batch, std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("logistic: n_samples < 2");
  if (n_features < 1) throw std::invalid_argument("logistic: n_features < 1");
  if (batch < 1 || batch > n_samples) throw std::invalid_argument("logistic: bad batch");

  auto data = std::make_shared<detail::LogisticData>();
  data->n = n_samples;
  data->d = n_features;
  data->a.resize(static_cast<std::size_t>(n_samples) * n_features);
  data->y.resize(n_samples);

  RngStream feat = RngStream::substream(seed, 0);
  RngStream noise = RngStream::substream(seed, 1);
  Vector w(n_features);
  for (int j = 0; j < n_features; ++j) w[j] = feat.normal();
  const double wn = std::sqrt(norm_sq(w));
  for (int j = 0; j < n_features; ++j) w[j] /= wn;

  const double scale = 1.0 / std::sqrt(static_cast<double>(n_features));
  for (int i = 0; i < n_samples; ++i) {
    double m = 0.0;
    for (int j = 0; j < n_features; ++j) {
      const double z = feat.normal();
      m += z * w[j];
      data->a[static_cast<std::size_t>(i) * n_features + j] = z * scale;
    }
    double label = (m + 0.5 * noise.normal()) >= 0.0 ? 1.0 : -1.0;
    if (i % 10 == 3) label = -label;
    data->y[i] = label;
  }

  double max_row_sq = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    double s = 0.0;
    for (int j = 0; j < n_features; ++j) {
      const double v = data->a[static_cast<std::size_t>(i) * n_features + j];
      s += v * v;
    }
    max_row_sq = std::max(max_row_sq, s);
  }

  Problem p;
  std::ostringstream id;
  id << "logistic(n_samples=" << n_samples << ",n_features=" << n_features << ",batch=" << batch
     << ",seed=" << seed << ")";
  p.id = id.str();
  p.dim = n_features;
  p.stochastic = batch < n_samples;
  p.smoothness = 0.25 * max_row_sq;
  p.x0 = Vector(n_features, 0.0);
  p.value = [data](const Vector& x) {
    double acc = 0.0;
    for (int i = 0; i < data->n; ++i) acc += data->sample_loss(x, i);
    return acc / static_cast<double>(data->n);
  };
  p.full_grad = [data](const Vector& x) {
    Vector g(x.size(), 0.0);
    const double w = 1.0 / static_cast<double>(data->n);
    for (int i = 0; i < data->n; ++i) data->add_sample_grad(x, i, w, g);
    return g;
  };
  if (p.stochastic) {
    const int b = batch;
    p.stoch_grad = [data, b](const Vector& x, RngStream& r) {
      Vector g(x.size(), 0.0);
      const double w = 1.0 / static_cast<double>(b);
      for (int s = 0; s < b; ++s) {
        const int i = static_cast<int>(r.uniform_index(static_cast<std::size_t>(data->n)));
        data->add_sample_grad(x, i, w, g);
      }
      return g;
    };
  } else {
    p.stoch_grad = [grad = p.full_grad](const Vector& x, RngStream&) { return grad(x); };
  }

  // Damped Newton for the optimal value.
  {
    Vector x(n_features, 0.0);
    double fx = p.value(x);
    for (int it = 0; it < 100; ++it) {
      Vector g = p.full_grad(x);
      double gmax = 0.0;
      for (double v : g) gmax = std::max(gmax, std::abs(v));
      if (gmax <= 1e-13) break;
      std::vector<double> H(static_cast<std::size_t>(n_features) * n_features, 0.0);
      for (int i = 0; i < n_samples; ++i) {
        const double t = data->margin(x, i);
        const double s = detail::sigmoid_neg(t);
        const double wgt = s * (1.0 - s) / static_cast<double>(n_samples);
        const double* ai = &data->a[static_cast<std::size_t>(i) * n_features];
        for (int r = 0; r < n_features; ++r) {
          for (int c = 0; c <= r; ++c) {
            H[static_cast<std::size_t>(r) * n_features + c] += wgt * ai[r] * ai[c];
          }
        }
      }
      for (int r = 0; r < n_features; ++r) {
        H[static_cast<std::size_t>(r) * n_features + r] += 1e-12;
        for (int c = r + 1; c < n_features; ++c) {
          H[static_cast<std::size_t>(r) * n_features + c] =
              H[static_cast<std::size_t>(c) * n_features + r];
        }
      }
      Vector dir = detail::spd_solve(std::move(H), g, n_features);
      double step = 1.0;
      bool moved = false;
      for (int half = 0; half < 40; ++half) {
        Vector xt = x;
        axpy(-step, dir, xt);
        const double ft = p.value(xt);
        if (ft < fx) {
          x = std::move(xt);
          fx = ft;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (!all_finite(x) || std::sqrt(norm_sq(x)) > 1e6) {
      throw std::runtime_error("logistic: minimizer did not stay bounded; instance looks separable");
    }
    p.f_star = fx;
    p.x_star = x;
  }

  // Noise proxy: mean squared norm of minibatch gradients at the start point.
  if (p.stochastic) {
    RngStream est = RngStream::substream(seed, 2);
    double acc = 0.0;
    const int reps = 64;
    for (int s = 0; s < reps; ++s) acc += norm_sq(p.stoch_grad(p.x0, est));
    p.sigma_sq = acc / reps;
  }
  return p;
}

// Chained Rosenbrock over disjoint coordinate pairs:
//   f(x) = sum over pairs (a, b) of 100 (a^2 - b)^2 + (a - 1)^2.
// Minimum 0 at the all-ones point; start is the classic (-1.2, 1, ...).
// Smoothness holds only locally; over [-2, 2]^n a Gershgorin bound on the
// pairwise Hessian blocks gives L <= 6402.
inline Problem make_rosenbrock(int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("rosenbrock: n must be even and >= 2");

  Problem p;
  std::ostringstream id;
  id << "rosenbrock(n=" << n << ")";
  p.id = id.str();
  p.dim = n;
  p.stochastic = false;
  p.smoothness = 6402.0;
  p.sigma_sq = 0.0;
  p.f_star = 0.0;
  p.x_star = Vector(n, 1.0);
  p.x0.resize(n);
  for (int i = 0; i < n; i += 2) {
    p.x0[i] = -1.2;
    p.x0[i + 1] = 1.0;
  }
  p.value = [](const Vector& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
      const double a = x[i], b = x[i + 1];
      const double q = a * a - b;
      acc += 100.0 * q * q + (a - 1.0) * (a - 1.0);
    }
    return acc;
  };
  p.full_grad = [](const Vector& x) {
    Vector g(x.size(), 0.0);
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) {
      const double a = x[i], b = x[i + 1];
      const double q = a * a - b;
      g[i] = 400.0 * a * q + 2.0 * (a - 1.0);
      g[i + 1] = -200.0 * q;
    }
    return g;
  };
  p.stoch_grad = [grad = p.full_grad](const Vector& x, RngStream&) { return grad(x); };
  return p;
}

namespace detail {

struct MlpData {
  int n_hidden = 0;
  int n = 0;
  std::vector<double> pts;  // row-major n x 2
  std::vector<int> labels;  // 0 / 1

  int dim() const { return 5 * n_hidden + 2; }

  // Parameter layout: W1 (n_hidden x 2), b1, W2 (2 x n_hidden), b2.
  double sample_loss_grad(const Vector& th, int i, double weight, Vector* g) const {
    const int h = n_hidden;
    const double u0 = pts[static_cast<std::size_t>(i) * 2];
    const double u1 = pts[static_cast<std::size_t>(i) * 2 + 1];
    const int y = labels[i];

    std::vector<double> hid(h);
    for (int j = 0; j < h; ++j) {
      const double pre = th[2 * j] * u0 + th[2 * j + 1] * u1 + th[2 * h + j];
      hid[j] = std::tanh(pre);
    }
    double o0 = th[5 * h], o1 = th[5 * h + 1];
    for (int j = 0; j < h; ++j) {
      o0 += th[3 * h + j] * hid[j];
      o1 += th[4 * h + j] * hid[j];
    }
    const double m = std::max(o0, o1);
    const double lse = m + std::log(std::exp(o0 - m) + std::exp(o1 - m));
    const double loss = lse - (y == 0 ? o0 : o1);
    if (g == nullptr) return weight * loss;

    const double p0 = std::exp(o0 - lse);
    const double p1 = std::exp(o1 - lse);
    const double d0 = weight * (p0 - (y == 0 ? 1.0 : 0.0));
    const double d1 = weight * (p1 - (y == 1 ? 1.0 : 0.0));
    (*g)[5 * h] += d0;
    (*g)[5 * h + 1] += d1;
    for (int j = 0; j < h; ++j) {
      (*g)[3 * h + j] += d0 * hid[j];
      (*g)[4 * h + j] += d1 * hid[j];
      const double dh = th[3 * h + j] * d0 + th[4 * h + j] * d1;
      const double dpre = (1.0 - hid[j] * hid[j]) * dh;
      (*g)[2 * j] += dpre * u0;
      (*g)[2 * j + 1] += dpre * u1;
      (*g)[2 * h + j] += dpre;
    }
    return weight * loss;
  }
};

}  // namespace detail

// Two-layer tanh network with softmax cross-entropy on a two-spiral dataset.
// Non-convex and small; used where a curved loss surface is wanted. No
// global smoothness constant is reported. At all-zero parameters the loss is
// log(2) exactly.
inline Problem make_tiny_mlp(int n_hidden, int n_samples, int batch, std::uint64_t seed) {
  if (n_hidden < 1) throw std::invalid_argument("tiny_mlp: n_hidden < 1");
  if (n_samples < 2) throw std::invalid_argument("tiny_mlp: n_samples < 2");
  if (batch < 1 || batch > n_samples) throw std::invalid_argument("tiny_mlp: bad batch");

  auto data = std::make_shared<detail::MlpData>();
  data->n_hidden = n_hidden;
  data->n = n_samples;
  data->pts.resize(static_cast<std::size_t>(n_samples) * 2);
  data->labels.resize(n_samples);

  RngStream gen = RngStream::substream(seed, 0);
  for (int i = 0; i < n_samples; ++i) {
    const int c = i % 2;
    const int j = i / 2;
    const int per_class = (n_samples + 1 - c) / 2;
    const double t = (static_cast<double>(j) + 0.5) / static_cast<double>(per_class);
    const double r = 0.15 + 0.85 * t;
    const double phi = 3.5 * 3.14159265358979323846 * t + c * 3.14159265358979323846 +
                       0.2 * gen.normal();
    data->pts[static_cast<std::size_t>(i) * 2] = r * std::cos(phi);
    data->pts[static_cast<std::size_t>(i) * 2 + 1] = r * std::sin(phi);
    data->labels[i] = c;
  }

  Problem p;
  std::ostringstream id;
  id << "tiny_mlp(n_hidden=" << n_hidden << ",n_samples=" << n_samples << ",batch=" << batch
     << ",seed=" << seed << ")";
  p.id = id.str();
  p.dim = data->dim();
  p.stochastic = batch < n_samples;

  RngStream init = RngStream::substream(seed, 3);
  p.x0.assign(p.dim, 0.0);
  const double w2_scale = 0.8 / std::sqrt(static_cast<double>(n_hidden));
  for (int j = 0; j < 2 * n_hidden; ++j) p.x0[j] = 0.8 * init.normal();
  for (int j = 3 * n_hidden; j < 5 * n_hidden; ++j) p.x0[j] = w2_scale * init.normal();

  p.value = [data](const Vector& th) {
    double acc = 0.0;
    const double w = 1.0 / static_cast<double>(data->n);
    for (int i = 0; i < data->n; ++i) acc += data->sample_loss_grad(th, i, w, nullptr);
    return acc;
  };
  p.full_grad = [data](const Vector& th) {
    Vector g(th.size(), 0.0);
    const double w = 1.0 / static_cast<double>(data->n);
    for (int i = 0; i < data->n; ++i) data->sample_loss_grad(th, i, w, &g);
    return g;
  };
  if (p.stochastic) {
    const int b = batch;
    p.stoch_grad = [data, b](const Vector& th, RngStream& r) {
      Vector g(th.size(), 0.0);
      const double w = 1.0 / static_cast<double>(b);
      for (int s = 0; s < b; ++s) {
        const int i = static_cast<int>(r.uniform_index(static_cast<std::size_t>(data->n)));
        data->sample_loss_grad(th, i, w, &g);
      }
      return g;
    };
  } else {
    p.stoch_grad = [grad = p.full_grad](const Vector& th, RngStream&) { return grad(th); };
  }

  if (p.stochastic) {
    RngStream est = RngStream::substream(seed, 4);
    double acc = 0.0;
    const int reps = 64;
    for (int s = 0; s < reps; ++s) acc += norm_sq(p.stoch_grad(p.x0, est));
    p.sigma_sq = acc / reps;
  }
  return p;
}

}  // namespace mda
