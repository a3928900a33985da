#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftk {

using Vec = std::vector<double>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- error types surfaced through the CLI exit codes ----

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- small dense vector helpers (d is expected <= 100 throughout) ----

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double dist2(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline Vec sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec add(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec scaled(const Vec& a, double c) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
  return r;
}

inline void axpy(double c, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

// ---- square matrix, row major ----

struct Matrix {
  int n = 0;
  std::vector<double> a;

  Matrix() = default;
  explicit Matrix(int dim) : n(dim), a(static_cast<std::size_t>(dim) * dim, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }

  static Matrix identity(int dim) {
    Matrix m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  void add_scaled(const Matrix& other, double c) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * other.a[i];
  }
};

struct SymEigen {
  Vec values;               // ascending
  std::vector<Vec> vectors; // vectors[i] pairs with values[i]
};

// Cyclic Jacobi rotations for symmetric matrices. Deterministic sweep order,
// off-diagonal tolerance 1e-12 relative to the initial Frobenius norm.
inline SymEigen jacobi_eigen(Matrix m, int max_sweeps = 100) {
  const int n = m.n;
  if (n <= 0) throw std::invalid_argument("jacobi_eigen: empty matrix");
  Matrix v = Matrix::identity(n);
  double fro = 0.0;
  for (double x : m.a) fro += x * x;
  fro = std::sqrt(fro);
  const double tol = 1e-12 * (fro > 0 ? fro : 1.0);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (std::sqrt(2.0 * off) <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0)
                             ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                             : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEigen out;
  out.values.resize(n);
  out.vectors.assign(n, Vec(n));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (m(order[j], order[j]) < m(order[i], order[i])) std::swap(order[i], order[j]);
  for (int i = 0; i < n; ++i) {
    out.values[i] = m(order[i], order[i]);
    for (int k = 0; k < n; ++k) out.vectors[i][k] = v(k, order[i]);
  }
  return out;
}

inline double lambda_min(const Matrix& m) { return jacobi_eigen(m).values.front(); }
inline double lambda_max(const Matrix& m) { return jacobi_eigen(m).values.back(); }

// ---- deterministic counter-based randomness ----
//
// Samplers must be pure functions of (n, k, seed); we derive a per-draw
// stream by hashing the indices with splitmix64 so replays are bit-identical
// across platforms.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {
    // burn-in decorrelates nearby seeds
    splitmix64(state);
    splitmix64(state);
  }

  static Rng from_keys(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                       std::uint64_t d = 0) {
    std::uint64_t s = a;
    s = splitmix64(s) ^ (b + 0x9e3779b97f4a7c15ULL);
    s = splitmix64(s) ^ (c + 0x7f4a7c15f39cc060ULL);
    s = splitmix64(s) ^ (d + 0xd1342543de82ef95ULL);
    return Rng(s);
  }

  std::uint64_t next_u64() { return splitmix64(state); }

  // uniform on (0,1), never exactly 0 or 1
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; self-contained so the stream is identical on every platform
  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vec gaussian_vec(int d) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = gaussian();
    return v;
  }

  Vec unit_vec(int d) {
    Vec v = gaussian_vec(d);
    double nv = norm2(v);
    while (nv < 1e-12) {
      v = gaussian_vec(d);
      nv = norm2(v);
    }
    for (auto& x : v) x /= nv;
    return v;
  }

  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }
};

// mean and standard error of a sample
struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

inline MeanSE mean_se(const Vec& xs) {
  MeanSE r;
  r.count = xs.size();
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (static_cast<double>(xs.size() - 1))) /
           std::sqrt(static_cast<double>(xs.size()));
  }
  return r;
}

}  // namespace driftk
