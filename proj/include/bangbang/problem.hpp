#pragma once

// The problem contract: an objective J on piecewise-constant controls and its
// switching field sigma_u = dJ(u), with pairing(sigma_u, v) equal to the
// directional derivative of the discretized J. Problems are immutable and
// must accept fields on any mesh of their domain.

#include <cmath>
#include <cstddef>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>

#include "bangbang/error.hpp"
#include "bangbang/meshfield.hpp"

namespace bangbang {

/// Scalar function of (t, y) that also writes its gradient in y when
/// `grad_y` is non-empty.
using ScalarFn = std::function<double(double t, std::span<const double> y,
                                      std::span<double> grad_y)>;

class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual std::size_t control_dim() const = 0;
  /// Interval the controls are defined on.
  virtual std::pair<double, double> domain() const { return {0.0, 1.0}; }

  virtual double evaluate(const ControlField& u) const = 0;
  virtual DualField switching(const ControlField& u) const = 0;

  /// t -> J(u + t d). Problems with cheap restrictions override this.
  virtual std::function<double(double)> section(const ControlField& u,
                                                const ControlField& d) const {
    return [this, u, d](double t) {
      ControlField w = u;
      auto wv = w.values();
      auto dv = d.values();
      for (std::size_t k = 0; k < wv.size(); ++k) wv[k] += t * dv[k];
      return evaluate(w);
    };
  }

 protected:
  void check_dim(const ControlField& u) const {
    if (u.dim() != control_dim()) {
      fail(ErrorKind::incompatible_field, name() + ": control dimension mismatch");
    }
  }
};

using ProblemPtr = std::shared_ptr<const Problem>;

namespace detail {

/// Per-mesh memo for mesh-dependent data (weights, matrices). Keys are
/// weakly held so dead meshes never alias live ones.
template <class T>
class MeshCache {
 public:
  template <class Make>
  std::shared_ptr<const T> get(const MeshPtr& mesh, Make&& make) const {
    {
      std::lock_guard lock(mutex_);
      for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (auto live = it->mesh.lock(); live && live == mesh) {
          entries_.splice(entries_.begin(), entries_, it);
          return entries_.front().value;
        }
      }
    }
    auto value = std::make_shared<const T>(make(mesh));
    std::lock_guard lock(mutex_);
    entries_.push_front({mesh, value});
    if (entries_.size() > kCapacity) entries_.pop_back();
    return value;
  }

 private:
  static constexpr std::size_t kCapacity = 16;
  struct Entry {
    std::weak_ptr<const Mesh1D> mesh;
    std::shared_ptr<const T> value;
  };
  mutable std::mutex mutex_;
  mutable std::list<Entry> entries_;
};

}  // namespace detail

/// J(u) - <xi, u>; sigma' = sigma - xi. `xi` is prolonged onto finer meshes.
class LinearlyPerturbed final : public Problem {
 public:
  LinearlyPerturbed(ProblemPtr base, DualField xi) : base_(std::move(base)), xi_(std::move(xi)) {
    if (xi_.dim() != base_->control_dim()) {
      fail(ErrorKind::incompatible_field, "perturbation dimension mismatch");
    }
  }

  std::string name() const override { return base_->name() + "-xi"; }
  std::size_t control_dim() const override { return base_->control_dim(); }
  std::pair<double, double> domain() const override { return base_->domain(); }
  const DualField& perturbation() const { return xi_; }
  const ProblemPtr& base() const { return base_; }

  double evaluate(const ControlField& u) const override {
    return base_->evaluate(u) - pairing(xi_on(u.mesh()), u);
  }

  DualField switching(const ControlField& u) const override {
    DualField s = base_->switching(u);
    s -= xi_on(u.mesh());
    return s;
  }

  std::function<double(double)> section(const ControlField& u,
                                        const ControlField& d) const override {
    const DualField xi = xi_on(u.mesh());
    const double xu = pairing(xi, u);
    const double xd = pairing(xi, d);
    auto inner = base_->section(u, d);
    return [inner, xu, xd](double t) { return inner(t) - (xu + t * xd); };
  }

 private:
  DualField xi_on(const MeshPtr& mesh) const {
    if (same_mesh(xi_.mesh(), mesh)) return xi_;
    return prolong_to(xi_, mesh);
  }

  ProblemPtr base_;
  DualField xi_;
};

inline ProblemPtr with_linear_perturbation(ProblemPtr problem, DualField xi) {
  return std::make_shared<LinearlyPerturbed>(std::move(problem), std::move(xi));
}

/// J(u) + (eta/p) sum_i mu_i sum_j |u_ij|^p; sigma' = sigma + eta |u|^{p-2} u.
class PRegularized final : public Problem {
 public:
  PRegularized(ProblemPtr base, double p, double eta)
      : base_(std::move(base)), p_(p), eta_(eta) {
    if (!(p_ >= 2.0)) fail(ErrorKind::validation, "p-regularizer requires p >= 2");
    if (!(eta_ > 0.0)) fail(ErrorKind::validation, "p-regularizer requires eta > 0");
  }

  std::string name() const override { return base_->name() + "-preg"; }
  std::size_t control_dim() const override { return base_->control_dim(); }
  std::pair<double, double> domain() const override { return base_->domain(); }
  double p() const { return p_; }
  double eta() const { return eta_; }

  double evaluate(const ControlField& u) const override {
    return base_->evaluate(u) + regularizer(u);
  }

  DualField switching(const ControlField& u) const override {
    DualField s = base_->switching(u);
    s += regularizer_gradient(u);
    return s;
  }

  /// The cellwise field eta |u|^{p-2} u.
  DualField regularizer_gradient(const ControlField& u) const {
    DualField g(u.mesh(), u.dim());
    auto gv = g.values();
    auto uv = u.values();
    for (std::size_t k = 0; k < uv.size(); ++k) {
      gv[k] = eta_ * (p_ == 2.0 ? uv[k] : std::pow(std::abs(uv[k]), p_ - 2.0) * uv[k]);
    }
    return g;
  }

  double regularizer(const ControlField& u) const {
    const Mesh1D& mesh = *u.mesh();
    CompensatedSum s;
    for (std::size_t i = 0; i < mesh.cells(); ++i) {
      double cell = 0.0;
      for (double v : u.cell(i)) cell += p_ == 2.0 ? v * v : std::pow(std::abs(v), p_);
      s += mesh.measure(i) * cell;
    }
    return eta_ / p_ * s.value();
  }

  std::function<double(double)> section(const ControlField& u,
                                        const ControlField& d) const override {
    auto inner = base_->section(u, d);
    if (p_ == 2.0) {
      // |u + t d|^2 integrates to a + 2 b t + c t^2
      const Mesh1D& mesh = *u.mesh();
      CompensatedSum a, b, c;
      for (std::size_t i = 0; i < mesh.cells(); ++i) {
        for (std::size_t j = 0; j < u.dim(); ++j) {
          const double mu = mesh.measure(i);
          a += mu * u(i, j) * u(i, j);
          b += mu * u(i, j) * d(i, j);
          c += mu * d(i, j) * d(i, j);
        }
      }
      const double k = eta_ / 2;
      return [inner, k, a = a.value(), b = b.value(), c = c.value()](double t) {
        return inner(t) + k * (a + t * (2 * b + t * c));
      };
    }
    return [this, inner, u, d](double t) {
      const Mesh1D& mesh = *u.mesh();
      CompensatedSum s;
      for (std::size_t i = 0; i < mesh.cells(); ++i) {
        double cell = 0.0;
        for (std::size_t j = 0; j < u.dim(); ++j) {
          cell += std::pow(std::abs(u(i, j) + t * d(i, j)), p_);
        }
        s += mesh.measure(i) * cell;
      }
      return inner(t) + eta_ / p_ * s.value();
    };
  }

 private:
  ProblemPtr base_;
  double p_;
  double eta_;
};

inline ProblemPtr with_p_regularizer(ProblemPtr problem, double p, double eta) {
  return std::make_shared<PRegularized>(std::move(problem), p, eta);
}

}  // namespace bangbang
