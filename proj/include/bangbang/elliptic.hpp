#pragma once

// Semilinear elliptic problem on (0, l) with homogeneous Dirichlet data:
//
//   -y'' + d(x, y) = u,    J(u) = int L(x, y) dx.
//
// States live on the mesh nodes. The discrete system is the 3-point stencil
// in flux form with lumped nodal masses M_j = (h_{j-1} + h_j) / 2:
//
//   K y + M d(y) = M b(u),   b_j = (h_{j-1} u_{j-1} + h_j u_j) / (h_{j-1} + h_j),
//
// which on uniform meshes is the central-difference Laplacian. J is the
// mass-lumped (trapezoid) quadrature of L over the nodes.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bangbang/error.hpp"
#include "bangbang/ode.hpp"
#include "bangbang/problem.hpp"

namespace bangbang {

struct EllipticSpec {
  double length = 1.0;
  ScalarFn reaction;  // d(x, y), nondecreasing in y
  ScalarFn tracking;  // L(x, y)
  double ua = -1.0;
  double ub = 1.0;
  double newton_tol = 1e-12;
  std::size_t newton_max_iter = 100;
};

struct EllipticState {
  std::vector<double> nodes;     // x_j, size N+1
  std::vector<double> y;         // y_j, y_0 = y_N = 0
  double residual = 0.0;         // |F(y)|_inf at exit
  std::size_t newton_iterations = 0;
};

namespace detail {

/// Solves a tridiagonal system in place (Thomas algorithm); `sub[i]` couples
/// rows i and i+1 symmetrically.
inline void solve_symmetric_tridiagonal(std::vector<double> diag, const std::vector<double>& off,
                                        std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  std::vector<double> c(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double f = off[i - 1] / diag[i - 1];
      diag[i] -= f * off[i - 1];
      rhs[i] -= f * rhs[i - 1];
    }
    if (diag[i] == 0.0 || !std::isfinite(diag[i])) {
      fail(ErrorKind::nonconvergence, "singular tridiagonal system in elliptic solve");
    }
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - off[i] * rhs[i + 1]) / diag[i];
}

}  // namespace detail

class EllipticProblem final : public Problem {
 public:
  EllipticProblem(std::string name, EllipticSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
    if (!(spec_.length > 0)) fail(ErrorKind::validation, "elliptic domain length must be > 0");
    if (!(spec_.ua < spec_.ub)) fail(ErrorKind::validation, "elliptic bounds need ua < ub");
    if (!spec_.reaction) spec_.reaction = constant_fn(0.0);
    if (!spec_.tracking) fail(ErrorKind::validation, "elliptic problem needs a tracking integrand");
  }

  std::string name() const override { return name_; }
  std::size_t control_dim() const override { return 1; }
  std::pair<double, double> domain() const override { return {0.0, spec_.length}; }
  const EllipticSpec& spec() const { return spec_; }

  EllipticState solve(const ControlField& u) const {
    check(u);
    const Mesh1D& mesh = *u.mesh();
    const std::size_t cells = mesh.cells();
    EllipticState st;
    st.nodes.assign(mesh.boundaries().begin(), mesh.boundaries().end());
    st.y.assign(cells + 1, 0.0);
    if (cells < 2) return st;
    const std::size_t n = cells - 1;  // interior unknowns: nodes 1..N-1

    std::vector<double> load(n);  // (M b)_j
    double load_scale = 1.0;
    for (std::size_t j = 1; j < cells; ++j) {
      load[j - 1] = 0.5 * (mesh.measure(j - 1) * u(j - 1, 0) + mesh.measure(j) * u(j, 0));
      load_scale = std::max(load_scale, std::abs(load[j - 1]));
    }
    const double tol = spec_.newton_tol * load_scale;

    std::vector<double> y(n, 0.0);
    std::vector<double> diag(n), off(n > 0 ? n - 1 : 0), res(n), step(n);
    auto residual = [&](const std::vector<double>& yy, std::vector<double>& out,
                        std::vector<double>* jac_diag) {
      double norm = 0.0;
      for (std::size_t j = 1; j < cells; ++j) {
        const std::size_t r = j - 1;
        const double hl = mesh.measure(j - 1);
        const double hr = mesh.measure(j);
        const double yl = r > 0 ? yy[r - 1] : 0.0;
        const double yr = r + 1 < n ? yy[r + 1] : 0.0;
        const double mass = 0.5 * (hl + hr);
        double dy = 0.0;
        const double y1[1] = {yy[r]};
        double g1[1] = {0.0};
        const double react = spec_.reaction(st.nodes[j], y1, jac_diag ? std::span<double>(g1) : std::span<double>());
        dy = g1[0];
        out[r] = (yy[r] - yl) / hl + (yy[r] - yr) / hr + mass * react - load[r];
        if (jac_diag) (*jac_diag)[r] = 1.0 / hl + 1.0 / hr + mass * dy;
        norm = std::max(norm, std::abs(out[r]));
      }
      return norm;
    };
    for (std::size_t r = 0; r + 1 < n; ++r) off[r] = -1.0 / mesh.measure(r + 1);

    double norm = residual(y, res, &diag);
    std::size_t it = 0;
    while (!(norm <= tol)) {
      if (it >= spec_.newton_max_iter || !std::isfinite(norm)) {
        fail(ErrorKind::nonconvergence, name_ + ": Newton stagnated after " +
                                            std::to_string(it) + " iterations (residual " +
                                            format_double(norm) + ")");
      }
      step = res;
      detail::solve_symmetric_tridiagonal(diag, off, step);
      // damped update: halve until the residual decreases
      double alpha = 1.0;
      std::vector<double> trial(n), trial_res(n);
      double trial_norm = INFINITY;
      for (int k = 0; k < 40; ++k) {
        for (std::size_t r = 0; r < n; ++r) trial[r] = y[r] - alpha * step[r];
        trial_norm = residual(trial, trial_res, nullptr);
        if (trial_norm < (1.0 - 1e-4 * alpha) * norm || trial_norm <= tol) break;
        alpha *= 0.5;
      }
      if (!(trial_norm < norm) && !(trial_norm <= tol)) {
        fail(ErrorKind::nonconvergence, name_ + ": Newton line search failed (residual " +
                                            format_double(norm) + ")");
      }
      y = trial;
      norm = residual(y, res, &diag);
      ++it;
    }
    for (std::size_t r = 0; r < n; ++r) st.y[r + 1] = y[r];
    st.residual = norm;
    st.newton_iterations = it;
    return st;
  }

  double evaluate(const ControlField& u) const override {
    const EllipticState st = solve(u);
    return objective(*u.mesh(), st);
  }

  DualField switching(const ControlField& u) const override {
    const EllipticState st = solve(u);
    const Mesh1D& mesh = *u.mesh();
    const std::size_t cells = mesh.cells();
    DualField sigma(u.mesh(), 1);
    if (cells < 2) return sigma;
    const std::size_t n = cells - 1;
    std::vector<double> diag(n), off(n > 0 ? n - 1 : 0), rhs(n);
    for (std::size_t j = 1; j < cells; ++j) {
      const std::size_t r = j - 1;
      const double hl = mesh.measure(j - 1);
      const double hr = mesh.measure(j);
      const double mass = 0.5 * (hl + hr);
      const double y1[1] = {st.y[j]};
      double g[1] = {0.0};
      spec_.reaction(st.nodes[j], y1, g);
      diag[r] = 1.0 / hl + 1.0 / hr + mass * g[0];
      double gl[1] = {0.0};
      spec_.tracking(st.nodes[j], y1, gl);
      rhs[r] = mass * gl[0];
    }
    for (std::size_t r = 0; r + 1 < n; ++r) off[r] = -1.0 / mesh.measure(r + 1);
    detail::solve_symmetric_tridiagonal(diag, off, rhs);  // rhs <- adjoint p
    auto p = [&](std::size_t node) { return node == 0 || node == cells ? 0.0 : rhs[node - 1]; };
    for (std::size_t l = 0; l < cells; ++l) sigma(l, 0) = 0.5 * (p(l) + p(l + 1));
    return sigma;
  }

  double objective(const Mesh1D& mesh, const EllipticState& st) const {
    const std::size_t cells = mesh.cells();
    CompensatedSum s;
    for (std::size_t j = 0; j <= cells; ++j) {
      const double hl = j > 0 ? mesh.measure(j - 1) : 0.0;
      const double hr = j < cells ? mesh.measure(j) : 0.0;
      const double y1[1] = {st.y[j]};
      s += 0.5 * (hl + hr) * spec_.tracking(st.nodes[j], y1, {});
    }
    return s.value();
  }

 private:
  void check(const ControlField& u) const {
    check_dim(u);
    const Mesh1D& mesh = *u.mesh();
    if (std::abs(mesh.a()) > 1e-12 || std::abs(mesh.b() - spec_.length) > 1e-12 * spec_.length) {
      fail(ErrorKind::incompatible_field, name_ + ": control mesh must cover (0, l)");
    }
  }

  std::string name_;
  EllipticSpec spec_;
};

inline EllipticState elliptic_solve(const EllipticProblem& problem, const ControlField& u) {
  return problem.solve(u);
}

inline DualField elliptic_switching(const EllipticProblem& problem, const ControlField& u) {
  return problem.switching(u);
}

}  // namespace bangbang
