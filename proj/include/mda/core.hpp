#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mda {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Dense 64-bit float vector. All numerics in this library run in double.
using Vector = std::vector<double>;

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// y += a * x
inline void axpy(double a, const Vector& x, Vector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("axpy: size mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double norm_sq(const Vector& a) { return dot(a, a); }

inline double dist_sq(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dist_sq: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("max_abs_diff: size mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

inline bool all_finite(const Vector& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded pseudo-random stream. Copies replicate the stream exactly, so two
// holders of the same state generate identical draws. Normal deviates come
// from the Marsaglia polar method on top of the raw engine rather than
// std::normal_distribution, which keeps the draw sequence under our control.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  // Derived stream for run `index` under a base seed. The mixing keeps
  // substreams from aliasing each other or the base stream.
  static RngStream substream(std::uint64_t seed, std::uint64_t index) {
    return RngStream(splitmix64(seed ^ splitmix64(0x9e3779b97f4a7c15ULL + index)));
  }

  static const char* generator_name() { return "mt19937_64-polar"; }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform index in [0, n). Multiply-shift; bias is O(n / 2^64).
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    return static_cast<std::size_t>(wide >> 64);
  }

  // Standard normal deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// N(0, sigma^2) i.i.d. entries; sigma == 0 yields zeros without consuming
// any randomness.
inline Vector gaussian_vector(RngStream& rng, std::size_t n, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_vector: sigma < 0");
  Vector v(n, 0.0);
  if (sigma == 0.0) return v;
  for (std::size_t i = 0; i < n; ++i) v[i] = sigma * rng.normal();
  return v;
}

// One record per optimizer step k, taken at the pre-step iterate x_k.
// loss and grad_norm_sq use the exact (full) objective and gradient so traces
// are comparable across stochastic and deterministic runs.
struct TraceRow {
  long long step = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double effective_lr = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  double c = 0.0;
  double dist_x0_sq = 0.0;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  Vector final_x;       // per the run's return mode
  bool aborted = false;
  long long abort_step = -1;
  std::string abort_reason;

  // replay key + provenance, serialized as CSV metadata
  std::string problem_id;
  std::string optimizer_id;
  std::string schedule_id;
  long long total_steps = 0;
  std::uint64_t seed = 0;
};

}  // namespace mda
