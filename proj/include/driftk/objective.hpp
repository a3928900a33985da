#pragma once

#include <algorithm>
#include <memory>

#include "driftk/common.hpp"

namespace driftk {

// ---- feasible sets: boxes and Euclidean balls only, both project in closed form ----

enum class SetKind { Box, Ball };

struct FeasibleSet {
  SetKind kind = SetKind::Ball;
  int dim = 0;
  Vec lo, hi;      // box
  Vec center;      // ball
  double radius = 0.0;

  static FeasibleSet box(Vec lower, Vec upper) {
    if (lower.size() != upper.size() || lower.empty())
      throw std::invalid_argument("box: bound size mismatch");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw std::invalid_argument("box: requires lower < upper and finite bounds");
    FeasibleSet s;
    s.kind = SetKind::Box;
    s.dim = static_cast<int>(lower.size());
    s.lo = std::move(lower);
    s.hi = std::move(upper);
    return s;
  }

  static FeasibleSet ball(Vec c, double r) {
    if (c.empty() || !(r > 0.0) || !std::isfinite(r))
      throw std::invalid_argument("ball: radius must be positive and finite");
    FeasibleSet s;
    s.kind = SetKind::Ball;
    s.dim = static_cast<int>(c.size());
    s.center = std::move(c);
    s.radius = r;
    return s;
  }

  double diameter() const {
    if (kind == SetKind::Ball) return 2.0 * radius;
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    return std::sqrt(s);
  }

  double diameter2() const {
    const double d = diameter();
    return d * d;
  }

  Vec centroid() const {
    if (kind == SetKind::Ball) return center;
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }

  // per-axis half extent, used to place probe points
  double half_extent(int axis) const {
    return kind == SetKind::Ball ? radius : 0.5 * (hi[axis] - lo[axis]);
  }

  bool contains(const Vec& x, double tol = 1e-9) const {
    if (static_cast<int>(x.size()) != dim) return false;
    if (kind == SetKind::Box) {
      for (int i = 0; i < dim; ++i)
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
      return true;
    }
    return dist2(x, center) <= radius + tol;
  }
};

// Euclidean projection; identity on feasible points, closed form for both kinds.
inline Vec project(const FeasibleSet& set, const Vec& x) {
  if (static_cast<int>(x.size()) != set.dim)
    throw std::invalid_argument("project: dimension mismatch");
  if (set.kind == SetKind::Box) {
    Vec y(x.size());
    for (int i = 0; i < set.dim; ++i) y[i] = std::clamp(x[i], set.lo[i], set.hi[i]);
    return y;
  }
  const Vec d = sub(x, set.center);
  const double r = norm2(d);
  if (r <= set.radius) return x;
  return add(set.center, scaled(d, set.radius / r));
}

// ---- samples and loss models ----

struct Sample {
  Vec z;  // regression/classification: features w concatenated with target y
};

struct LossModel {
  virtual ~LossModel() = default;
  virtual int dim() const = 0;
  virtual double loss(const Vec& x, const Vec& z) const = 0;
  virtual Vec grad(const Vec& x, const Vec& z) const = 0;
  virtual bool has_hessian() const { return false; }
  virtual Matrix hessian(const Vec& /*x*/, const Vec& /*z*/) const {
    throw std::logic_error("hessian capability missing");
  }
};

// 0.5 (y - w'x)^2 + 0.5 lambda |x|^2 with z = (w, y)
struct PenalizedQuadraticLoss final : LossModel {
  int d;
  double lambda;

  PenalizedQuadraticLoss(int dim_in, double lambda_in) : d(dim_in), lambda(lambda_in) {
    if (d < 1 || lambda < 0) throw std::invalid_argument("PenalizedQuadraticLoss: bad params");
  }

  int dim() const override { return d; }

  double loss(const Vec& x, const Vec& z) const override {
    double wx = 0.0;
    for (int i = 0; i < d; ++i) wx += z[i] * x[i];
    const double r = z[d] - wx;
    return 0.5 * r * r + 0.5 * lambda * dot(x, x);
  }

  Vec grad(const Vec& x, const Vec& z) const override {
    double wx = 0.0;
    for (int i = 0; i < d; ++i) wx += z[i] * x[i];
    const double r = z[d] - wx;
    Vec g(d);
    for (int i = 0; i < d; ++i) g[i] = -r * z[i] + lambda * x[i];
    return g;
  }

  bool has_hessian() const override { return true; }

  Matrix hessian(const Vec& /*x*/, const Vec& z) const override {
    Matrix h(d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) h(i, j) = z[i] * z[j];
      h(i, i) += lambda;
    }
    return h;
  }
};

// 0.5 max(1 - y w'x, 0)^2 + 0.5 lambda |x|^2 with z = (w, y), y in {-1, +1}.
// The second derivative jumps at the margin, so no hessian capability.
struct SmoothedHingeLoss final : LossModel {
  int d;
  double lambda;

  SmoothedHingeLoss(int dim_in, double lambda_in) : d(dim_in), lambda(lambda_in) {
    if (d < 1 || lambda < 0) throw std::invalid_argument("SmoothedHingeLoss: bad params");
  }

  int dim() const override { return d; }

  double loss(const Vec& x, const Vec& z) const override {
    double wx = 0.0;
    for (int i = 0; i < d; ++i) wx += z[i] * x[i];
    const double m = std::max(1.0 - z[d] * wx, 0.0);
    return 0.5 * m * m + 0.5 * lambda * dot(x, x);
  }

  Vec grad(const Vec& x, const Vec& z) const override {
    double wx = 0.0;
    for (int i = 0; i < d; ++i) wx += z[i] * x[i];
    const double m = std::max(1.0 - z[d] * wx, 0.0);
    Vec g(d);
    for (int i = 0; i < d; ++i) g[i] = -z[d] * m * z[i] + lambda * x[i];
    return g;
  }
};

// ---- stochastic task sequences ----
//
// sample(n, k, run_seed, stream) must be a pure function of its arguments and
// the immutable task description; stream 0 is training, stream 1 is test data.

struct TaskSequence {
  virtual ~TaskSequence() = default;
  virtual int dim() const = 0;
  virtual int horizon() const = 0;
  virtual const LossModel& loss_model() const = 0;
  virtual Sample sample(int n, int k, std::uint64_t run_seed, int stream = 0) const = 0;
  virtual bool has_analytic() const { return false; }
  virtual Vec minimizer(int /*n*/) const { throw std::logic_error("no analytic minimizer"); }
  virtual double exact_gap(int /*n*/, const Vec& /*x*/) const {
    throw std::logic_error("no analytic objective");
  }
};

// ---- empirical statistics over batches ----

inline Vec empirical_gradient(const LossModel& model, const Vec& x,
                              const std::vector<Sample>& batch) {
  if (batch.empty()) throw std::invalid_argument("empirical_gradient: empty batch");
  Vec g(model.dim(), 0.0);
  for (const Sample& s : batch) axpy(1.0, model.grad(x, s.z), g);
  for (auto& v : g) v /= static_cast<double>(batch.size());
  return g;
}

inline double empirical_loss(const LossModel& model, const Vec& x,
                             const std::vector<Sample>& batch) {
  if (batch.empty()) throw std::invalid_argument("empirical_loss: empty batch");
  double s = 0.0;
  for (const Sample& smp : batch) s += model.loss(x, smp.z);
  return s / static_cast<double>(batch.size());
}

inline Matrix empirical_hessian(const LossModel& model, const Vec& x,
                                const std::vector<Sample>& batch) {
  if (batch.empty()) throw std::invalid_argument("empirical_hessian: empty batch");
  if (!model.has_hessian()) throw std::logic_error("hessian capability missing");
  Matrix h(model.dim());
  for (const Sample& s : batch) h.add_scaled(model.hessian(x, s.z), 1.0);
  for (auto& v : h.a) v /= static_cast<double>(batch.size());
  return h;
}

}  // namespace driftk
