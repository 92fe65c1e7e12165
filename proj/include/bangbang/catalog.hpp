#pragma once

// Built-in instances. All use U = [-1, 1] on [0, 1].
//
//   A  J(u) = int (t - 1/2) u            sign-rule minimizer, J* = -1/4
//   B  J(u) = (int u)^2 + (int t u)^2    u* = 0 is a non-bang-bang minimizer
//   C  y' = u, y(0) = 0, J = int y       sigma(t) = 1 - t, u* = -1
//   E  -y'' = u, J = int y^2 / 2         tracking of y_d = 0

#include <memory>
#include <string>

#include "bangbang/admissible.hpp"
#include "bangbang/elliptic.hpp"
#include "bangbang/moment.hpp"
#include "bangbang/ode.hpp"
#include "bangbang/problem.hpp"

namespace bangbang::catalog {

inline ProblemPtr instance_a() {
  return std::make_shared<MomentProblem>(
      "instance_a", 1,
      std::vector<MomentProblem::Weight>{MomentProblem::polynomial_weight({-0.5, 1.0})},
      Polynomial::linear({1.0}));
}

inline ProblemPtr instance_b() {
  return std::make_shared<MomentProblem>(
      "instance_b", 1,
      std::vector<MomentProblem::Weight>{MomentProblem::polynomial_weight({1.0}),
                                         MomentProblem::polynomial_weight({0.0, 1.0})},
      Polynomial::sum_of_squares(2));
}

/// J == 0.
inline ProblemPtr zero_problem(std::size_t control_dim = 1) {
  return std::make_shared<MomentProblem>("zero", control_dim, std::vector<MomentProblem::Weight>{},
                                         Polynomial(0, {}));
}

inline ProblemPtr instance_c() {
  OdeSpec spec;
  spec.horizon = 1.0;
  spec.y0 = {0.0};
  spec.controls = 1;
  spec.drift = {constant_fn(0.0)};
  spec.control_fields = {{constant_fn(1.0)}};
  spec.running_cost = [](double, std::span<const double> y, std::span<double> grad) {
    if (!grad.empty()) grad[0] = 1.0;
    return y[0];
  };
  spec.control_costs = {constant_fn(0.0)};
  spec.terminal_cost = constant_fn(0.0);
  return std::make_shared<OdeAffineProblem>("instance_c", std::move(spec));
}

inline ProblemPtr instance_e() {
  EllipticSpec spec;
  spec.length = 1.0;
  spec.reaction = constant_fn(0.0);
  spec.tracking = [](double, std::span<const double> y, std::span<double> grad) {
    if (!grad.empty()) grad[0] = y[0];
    return 0.5 * y[0] * y[0];
  };
  spec.ua = -1.0;
  spec.ub = 1.0;
  return std::make_shared<EllipticProblem>("instance_e", std::move(spec));
}

inline ControlSet unit_box() { return ControlSet::interval(-1.0, 1.0); }

/// Sign-rule minimizer of instance A: +1 where t < 1/2, -1 elsewhere.
inline ControlField instance_a_minimizer(const MeshPtr& mesh) {
  return ControlField::from_cells(mesh, 1, [&](std::size_t i, std::span<double> out) {
    out[0] = mesh->midpoint(i) < 0.5 ? 1.0 : -1.0;
  });
}

inline ProblemPtr by_name(const std::string& name) {
  if (name == "instance_a") return instance_a();
  if (name == "instance_b") return instance_b();
  if (name == "instance_c") return instance_c();
  if (name == "instance_e") return instance_e();
  if (name == "zero") return zero_problem();
  fail(ErrorKind::validation, "unknown catalog instance '" + name + "'");
}

}  // namespace bangbang::catalog
