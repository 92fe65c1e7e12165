#pragma once

// Control-affine ODE problem
//
//   y' = f_0(t, y) + sum_i f_i(t, y) u_i,   y(0) = y_0,
//   J(u) = s_T(y(T)) + int_0^T [g_0(t, y) + sum_i g_i(t, y) u_i] dt,
//
// integrated by classical RK4 with one step per cell. The running cost is
// carried as an extra state so that J is a function of the RK4 trajectory
// only; the switching field is the reverse-mode derivative of that discrete
// map, hence the exact gradient of the discretized J.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bangbang/error.hpp"
#include "bangbang/expression.hpp"
#include "bangbang/problem.hpp"

namespace bangbang {

struct OdeSpec {
  double horizon = 1.0;
  std::vector<double> y0;
  std::size_t controls = 1;
  /// drift[k]: k-th component of f_0.
  std::vector<ScalarFn> drift;
  /// control_fields[i][k]: k-th component of f_{i+1}.
  std::vector<std::vector<ScalarFn>> control_fields;
  ScalarFn running_cost;                      // g_0
  std::vector<ScalarFn> control_costs;        // g_1..g_m
  ScalarFn terminal_cost;                     // s_T(y); t argument is T
};

/// ScalarFn backed by an expression in (t, y0..y{n-1}); `y` aliases y0 when n == 1.
inline ScalarFn expression_fn(const std::string& text, std::size_t state_dim,
                              const std::string& time_name = "t") {
  std::vector<std::string> names{time_name};
  for (std::size_t k = 0; k < state_dim; ++k) names.push_back("y" + std::to_string(k));
  std::vector<std::pair<std::string, std::size_t>> aliases;
  if (state_dim == 1) aliases.push_back({"y", 1});
  auto expr = std::make_shared<Expression>(Expression::parse(text, names, aliases));
  return [expr, state_dim](double t, std::span<const double> y, std::span<double> grad) {
    std::array<double, kMaxExpressionVars> vars{};
    vars[0] = t;
    for (std::size_t k = 0; k < state_dim; ++k) vars[k + 1] = y[k];
    std::array<double, kMaxExpressionVars> g{};
    const double v = expr->eval(std::span<const double>(vars.data(), state_dim + 1),
                                std::span<double>(g.data(), state_dim + 1));
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = g[k + 1];
    return v;
  };
}

inline ScalarFn constant_fn(double c) {
  return [c](double, std::span<const double>, std::span<double> grad) {
    for (double& g : grad) g = 0.0;
    return c;
  };
}

struct OdeTrajectory {
  std::vector<double> times;   // nodes, size N+1
  std::vector<double> states;  // (N+1) x n, node-major
  std::vector<double> cost;    // accumulated running cost at nodes
  std::size_t state_dim = 0;

  std::span<const double> at(std::size_t node) const {
    return {states.data() + node * state_dim, state_dim};
  }
};

class OdeAffineProblem final : public Problem {
 public:
  OdeAffineProblem(std::string name, OdeSpec spec) : name_(std::move(name)), spec_(std::move(spec)) {
    const std::size_t n = spec_.y0.size();
    if (!(spec_.horizon > 0)) fail(ErrorKind::validation, "ODE horizon must be > 0");
    if (n == 0 || n + 1 > kMaxExpressionVars) {
      fail(ErrorKind::validation, "ODE state dimension out of range");
    }
    if (spec_.controls == 0) fail(ErrorKind::validation, "ODE needs at least one control");
    if (spec_.drift.size() != n) fail(ErrorKind::validation, "f0 must have n components");
    if (spec_.control_fields.size() != spec_.controls) {
      fail(ErrorKind::validation, "need one control vector field per control");
    }
    for (const auto& f : spec_.control_fields) {
      if (f.size() != n) fail(ErrorKind::validation, "control vector fields need n components");
    }
    if (!spec_.running_cost) spec_.running_cost = constant_fn(0.0);
    if (!spec_.terminal_cost) spec_.terminal_cost = constant_fn(0.0);
    if (spec_.control_costs.empty()) spec_.control_costs.assign(spec_.controls, constant_fn(0.0));
    if (spec_.control_costs.size() != spec_.controls) {
      fail(ErrorKind::validation, "need one control cost per control");
    }
  }

  std::string name() const override { return name_; }
  std::size_t control_dim() const override { return spec_.controls; }
  std::pair<double, double> domain() const override { return {0.0, spec_.horizon}; }
  std::size_t state_dim() const { return spec_.y0.size(); }
  const OdeSpec& spec() const { return spec_; }

  OdeTrajectory forward(const ControlField& u) const {
    check(u);
    const std::size_t n = state_dim();
    const std::size_t cells = u.cells();
    const Mesh1D& mesh = *u.mesh();
    OdeTrajectory traj;
    traj.state_dim = n;
    traj.times.resize(cells + 1);
    traj.states.resize((cells + 1) * n);
    traj.cost.resize(cells + 1);
    std::vector<double> y(spec_.y0);
    double z = 0.0;
    traj.times[0] = mesh.left(0);
    std::copy(y.begin(), y.end(), traj.states.begin());
    traj.cost[0] = 0.0;
    Work w(n, spec_.controls);
    for (std::size_t k = 0; k < cells; ++k) {
      const double t = mesh.left(k);
      const double h = mesh.measure(k);
      step(t, h, u.cell(k), y, z, w);
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(y[r])) {
          fail(ErrorKind::integration_failure,
               "ODE state became non-finite in step " + std::to_string(k) + " (t=" +
                   format_double(t) + ")");
        }
      }
      if (!std::isfinite(z)) {
        fail(ErrorKind::integration_failure,
             "running cost became non-finite in step " + std::to_string(k));
      }
      traj.times[k + 1] = mesh.right(k);
      std::copy(y.begin(), y.end(), traj.states.begin() + (k + 1) * n);
      traj.cost[k + 1] = z;
    }
    return traj;
  }

  double evaluate(const ControlField& u) const override {
    const OdeTrajectory traj = forward(u);
    return spec_.terminal_cost(spec_.horizon, traj.at(u.cells()), {}) + traj.cost.back();
  }

  DualField switching(const ControlField& u) const override {
    const OdeTrajectory traj = forward(u);
    const std::size_t n = state_dim();
    const std::size_t m = spec_.controls;
    const Mesh1D& mesh = *u.mesh();
    DualField sigma(u.mesh(), m);

    std::vector<double> lambda(n, 0.0);
    spec_.terminal_cost(spec_.horizon, traj.at(u.cells()), lambda);

    Work w(n, m);
    std::vector<double> bar_u(m);
    for (std::size_t k = u.cells(); k-- > 0;) {
      const double t = mesh.left(k);
      const double h = mesh.measure(k);
      std::vector<double> y(traj.at(k).begin(), traj.at(k).end());
      adjoint_step(t, h, u.cell(k), y, lambda, bar_u, w);
      for (std::size_t i = 0; i < m; ++i) sigma(k, i) = bar_u[i] / h;
    }
    return sigma;
  }

 private:
  // Scratch storage for one RK4 step (stage states, slopes, Jacobians).
  struct Work {
    Work(std::size_t n, std::size_t m)
        : n(n), m(m), stage_y(4, std::vector<double>(n)), slope_y(4, std::vector<double>(n)),
          slope_z(4, 0.0), fy(n * n), fu(n * m), gy(n), gu(m), grad(n) {}
    std::size_t n, m;
    std::vector<std::vector<double>> stage_y;
    std::vector<std::vector<double>> slope_y;
    std::vector<double> slope_z;
    std::vector<double> fy;  // d F_y / d y, row-major n x n
    std::vector<double> fu;  // d F_y / d u, row-major n x m (columns f_i)
    std::vector<double> gy;  // d F_z / d y
    std::vector<double> gu;  // d F_z / d u (g_i values)
    std::vector<double> grad;
  };

  void check(const ControlField& u) const {
    check_dim(u);
    const auto [a, b] = domain();
    const Mesh1D& mesh = *u.mesh();
    if (std::abs(mesh.a() - a) > 1e-12 * (1 + std::abs(a)) ||
        std::abs(mesh.b() - b) > 1e-12 * (1 + std::abs(b))) {
      fail(ErrorKind::incompatible_field, name_ + ": control mesh must cover [0, T]");
    }
  }

  /// Slope F(t, y; u) and, with `jac`, its partial derivatives.
  void rhs(double t, std::span<const double> y, std::span<const double> u,
           std::span<double> dy, double& dz, Work& w, bool jac) const {
    const std::size_t n = w.n;
    const std::size_t m = w.m;
    std::span<double> grad = jac ? std::span<double>(w.grad) : std::span<double>();
    if (jac) {
      std::fill(w.fy.begin(), w.fy.end(), 0.0);
      std::fill(w.gy.begin(), w.gy.end(), 0.0);
    }
    for (std::size_t r = 0; r < n; ++r) {
      dy[r] = spec_.drift[r](t, y, grad);
      if (jac) {
        for (std::size_t c = 0; c < n; ++c) w.fy[r * n + c] += grad[c];
      }
      for (std::size_t i = 0; i < m; ++i) {
        const double fi = spec_.control_fields[i][r](t, y, grad);
        dy[r] += fi * u[i];
        if (jac) {
          w.fu[r * m + i] = fi;
          for (std::size_t c = 0; c < n; ++c) w.fy[r * n + c] += u[i] * grad[c];
        }
      }
    }
    dz = spec_.running_cost(t, y, grad);
    if (jac) {
      for (std::size_t c = 0; c < n; ++c) w.gy[c] += grad[c];
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = spec_.control_costs[i](t, y, grad);
      dz += gi * u[i];
      if (jac) {
        w.gu[i] = gi;
        for (std::size_t c = 0; c < n; ++c) w.gy[c] += u[i] * grad[c];
      }
    }
  }

  void stages(double t, double h, std::span<const double> u, std::span<const double> y,
              Work& w) const {
    static constexpr double kOffset[4] = {0.0, 0.5, 0.5, 1.0};
    const std::size_t n = w.n;
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t r = 0; r < n; ++r) {
        w.stage_y[s][r] = s == 0 ? y[r] : y[r] + kOffset[s] * h * w.slope_y[s - 1][r];
      }
      rhs(t + kOffset[s] * h, w.stage_y[s], u, w.slope_y[s], w.slope_z[s], w, false);
    }
  }

  void step(double t, double h, std::span<const double> u, std::vector<double>& y, double& z,
            Work& w) const {
    stages(t, h, u, y, w);
    for (std::size_t r = 0; r < w.n; ++r) {
      y[r] += h / 6.0 *
              (w.slope_y[0][r] + 2.0 * w.slope_y[1][r] + 2.0 * w.slope_y[2][r] + w.slope_y[3][r]);
    }
    z += h / 6.0 * (w.slope_z[0] + 2.0 * w.slope_z[1] + 2.0 * w.slope_z[2] + w.slope_z[3]);
  }

  /// Maps lambda = dJ/dy_{k+1} to dJ/dy_k and writes dJ/du_k into bar_u.
  /// The cost state's adjoint is identically 1 since no slope depends on it.
  void adjoint_step(double t, double h, std::span<const double> u, const std::vector<double>& y,
                    std::vector<double>& lambda, std::vector<double>& bar_u, Work& w) const {
    static constexpr double kOffset[4] = {0.0, 0.5, 0.5, 1.0};
    static constexpr double kWeight[4] = {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0};
    const std::size_t n = w.n;
    const std::size_t m = w.m;
    stages(t, h, u, y, w);

    std::vector<std::vector<double>> bar_k(4, std::vector<double>(n));
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t r = 0; r < n; ++r) bar_k[s][r] = kWeight[s] * h * lambda[r];
    }
    std::vector<double> bar_y(lambda);
    std::fill(bar_u.begin(), bar_u.end(), 0.0);
    std::vector<double> dy(n);
    double dz = 0.0;
    std::vector<double> bar_stage(n);
    for (std::size_t s = 4; s-- > 0;) {
      const double bar_kz = kWeight[s] * h;
      rhs(t + kOffset[s] * h, w.stage_y[s], u, dy, dz, w, true);
      for (std::size_t c = 0; c < n; ++c) {
        double acc = w.gy[c] * bar_kz;
        for (std::size_t r = 0; r < n; ++r) acc += w.fy[r * n + c] * bar_k[s][r];
        bar_stage[c] = acc;
      }
      for (std::size_t i = 0; i < m; ++i) {
        double acc = w.gu[i] * bar_kz;
        for (std::size_t r = 0; r < n; ++r) acc += w.fu[r * m + i] * bar_k[s][r];
        bar_u[i] += acc;
      }
      for (std::size_t c = 0; c < n; ++c) {
        bar_y[c] += bar_stage[c];
        if (s > 0) bar_k[s - 1][c] += kOffset[s] * h * bar_stage[c];
      }
    }
    lambda = std::move(bar_y);
  }

  std::string name_;
  OdeSpec spec_;
};

/// Nodal states of the RK4 trajectory.
inline OdeTrajectory ode_forward(const OdeAffineProblem& problem, const ControlField& u) {
  return problem.forward(u);
}

inline DualField ode_switching(const OdeAffineProblem& problem, const ControlField& u) {
  return problem.switching(u);
}

}  // namespace bangbang
