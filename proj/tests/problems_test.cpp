#include <gtest/gtest.h>

#include <cmath>

#include "bangbang/catalog.hpp"
#include "bangbang/random.hpp"

namespace bangbang {
namespace {

using catalog::unit_box;

ControlField random_interior(const MeshPtr& mesh, std::size_t m, Rng& rng) {
  return ControlField::from_cells(mesh, m, [&](std::size_t, std::span<double> out) {
    for (double& v : out) v = rng.uniform(-0.8, 0.8);
  });
}

// Smooth random perturbation direction plus a cellwise random part.
ControlField random_direction(const MeshPtr& mesh, std::size_t m, Rng& rng) {
  const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), w = rng.uniform(1, 8);
  return ControlField::from_cells(mesh, m, [&](std::size_t i, std::span<double> out) {
    for (double& v : out) {
      v = 0.1 * (a * std::sin(w * mesh->midpoint(i)) + b + 0.5 * rng.uniform(-1, 1));
    }
  });
}

// Central finite-difference oracle for the directional derivative.
double fd_derivative(const Problem& p, const ControlField& u, const ControlField& d,
                     double eps = 1e-6) {
  ControlField up = u, um = u;
  for (std::size_t k = 0; k < u.values().size(); ++k) {
    up.values()[k] += eps * d.values()[k];
    um.values()[k] -= eps * d.values()[k];
  }
  return (p.evaluate(up) - p.evaluate(um)) / (2 * eps);
}

void expect_gradient_consistent(const Problem& p, const MeshPtr& mesh, std::uint64_t seed,
                                int pairs, double tol) {
  Rng rng(seed, 0);
  for (int k = 0; k < pairs; ++k) {
    auto u = random_interior(mesh, p.control_dim(), rng);
    auto d = random_direction(mesh, p.control_dim(), rng);
    const double fd = fd_derivative(p, u, d);
    const double an = pairing(p.switching(u), d);
    EXPECT_LE(std::abs(fd - an) / (1 + std::abs(fd)), tol) << p.name() << " pair " << k;
  }
}

ProblemPtr nonlinear_ode() {
  OdeSpec spec;
  spec.horizon = 2.0;
  spec.y0 = {0.5, -0.2};
  spec.controls = 2;
  spec.drift = {expression_fn("y1", 2), expression_fn("-sin(y0) - 0.1*y1", 2)};
  spec.control_fields = {{expression_fn("0", 2), expression_fn("1 + 0.2*cos(y0)", 2)},
                         {expression_fn("0.3", 2), expression_fn("0.1*t", 2)}};
  spec.running_cost = expression_fn("y0^2 + 0.5*y1^2", 2);
  spec.control_costs = {expression_fn("0.1*y0", 2), expression_fn("0.05", 2)};
  spec.terminal_cost = expression_fn("(y0 - 1)^2", 2);
  return std::make_shared<OdeAffineProblem>("ode2", std::move(spec));
}

ProblemPtr cubic_elliptic() {
  EllipticSpec spec;
  spec.reaction = expression_fn("y^3 + y", 1, "x");
  spec.tracking = expression_fn("0.5*(y - 0.1*sin(pi*x))^2", 1, "x");
  return std::make_shared<EllipticProblem>("elliptic_cubic", std::move(spec));
}

TEST(MomentProblem, InstanceAValues) {
  auto a = catalog::instance_a();
  auto mesh = Mesh1D::uniform(0, 1, 1024);
  EXPECT_NEAR(a->evaluate(catalog::instance_a_minimizer(mesh)), -0.25, 1e-12);
  auto sigma = a->switching(ControlField(mesh, 1, 0.3));
  for (std::size_t i = 0; i < mesh->cells(); ++i) {
    EXPECT_NEAR(sigma(i, 0), mesh->midpoint(i) - 0.5, 1e-15);
  }
}

TEST(MomentProblem, InstanceBValues) {
  auto b = catalog::instance_b();
  auto mesh = Mesh1D::uniform(0, 1, 64);
  EXPECT_EQ(b->evaluate(ControlField(mesh, 1, 0.0)), 0.0);
  // u = 1: moments (1, 1/2) -> 1.25; sigma = 2 + t
  EXPECT_NEAR(b->evaluate(ControlField(mesh, 1, 1.0)), 1.25, 1e-14);
  auto s = b->switching(ControlField(mesh, 1, 1.0));
  for (std::size_t i = 0; i < mesh->cells(); ++i) EXPECT_NEAR(s(i, 0), 2 + mesh->midpoint(i), 1e-14);
}

TEST(MomentProblem, SectionMatchesEvaluate) {
  auto b = catalog::instance_b();
  auto mesh = Mesh1D::uniform(0, 1, 32);
  Rng rng(1, 2);
  auto u = random_interior(mesh, 1, rng);
  auto d = random_direction(mesh, 1, rng);
  auto f = b->section(u, d);
  for (double t : {0.0, 0.3, 1.0}) {
    ControlField w = u;
    for (std::size_t k = 0; k < w.values().size(); ++k) w.values()[k] += t * d.values()[k];
    EXPECT_NEAR(f(t), b->evaluate(w), 1e-14);
  }
}

TEST(OdeForward, Examples) {
  auto c = std::static_pointer_cast<const OdeAffineProblem>(catalog::instance_c());
  auto mesh = Mesh1D::uniform(0, 1, 1000);
  auto traj = ode_forward(*c, ControlField(mesh, 1, -1.0));
  EXPECT_NEAR(traj.at(1000)[0], -1.0, 1e-10);

  // u = 0, f0 = 0: the state never moves
  OdeSpec spec;
  spec.y0 = {0.7, -2.0};
  spec.drift = {constant_fn(0), constant_fn(0)};
  spec.control_fields = {{expression_fn("y0", 2), expression_fn("1", 2)}};
  OdeAffineProblem still("still", spec);
  auto t2 = still.forward(ControlField(mesh, 1, 0.0));
  EXPECT_EQ(t2.at(1000)[0], 0.7);
  EXPECT_EQ(t2.at(1000)[1], -2.0);

  auto sign = ode_forward(*c, catalog::instance_a_minimizer(mesh));
  EXPECT_NEAR(sign.at(1000)[0], 0.0, 1e-12);
  EXPECT_NEAR(sign.at(500)[0], 0.5, 1e-12);
}

TEST(OdeForward, BlowUpIsReported) {
  OdeSpec spec;
  spec.y0 = {1.0};
  spec.drift = {expression_fn("y^2*1e6", 1)};
  spec.control_fields = {{constant_fn(0)}};
  OdeAffineProblem blow("blow", spec);
  try {
    blow.forward(ControlField(Mesh1D::uniform(0, 1, 10), 1, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::integration_failure);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(OdeSwitching, InstanceCAdjoint) {
  auto c = catalog::instance_c();
  auto mesh = Mesh1D::uniform(0, 1, 1000);
  auto sigma = c->switching(ControlField(mesh, 1, 0.2));
  double worst = 0;
  for (std::size_t i = 0; i < mesh->cells(); ++i) {
    worst = std::max(worst, std::abs(sigma(i, 0) - (1 - mesh->midpoint(i))));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(OdeSwitching, ConstantTerminalCostHasZeroGradient) {
  OdeSpec spec;
  spec.y0 = {0.0};
  spec.drift = {constant_fn(0)};
  spec.control_fields = {{constant_fn(1)}};
  spec.terminal_cost = constant_fn(3.0);
  OdeAffineProblem p("const", spec);
  auto s = p.switching(ControlField(Mesh1D::uniform(0, 1, 50), 1, 0.5));
  for (double v : s.values()) EXPECT_EQ(v, 0.0);
}

TEST(OdeSwitching, RejectsWrongDomain) {
  auto c = catalog::instance_c();
  EXPECT_THROW(c->evaluate(ControlField(Mesh1D::uniform(0, 2, 10), 1, 0.0)), Error);
}

TEST(GradientConsistency, AllFamilies) {
  expect_gradient_consistent(*catalog::instance_a(), Mesh1D::uniform(0, 1, 200), 1, 100, 1e-5);
  expect_gradient_consistent(*catalog::instance_b(), Mesh1D::uniform(0, 1, 200), 2, 100, 1e-5);
  expect_gradient_consistent(*catalog::instance_c(), Mesh1D::uniform(0, 1, 200), 3, 100, 1e-5);
  expect_gradient_consistent(*nonlinear_ode(), Mesh1D::uniform(0, 2, 100), 4, 100, 1e-5);
  expect_gradient_consistent(*catalog::instance_e(), Mesh1D::uniform(0, 1, 128), 5, 100, 1e-5);
  expect_gradient_consistent(*cubic_elliptic(), Mesh1D::uniform(0, 1, 128), 6, 100, 1e-5);
}

TEST(GradientConsistency, NonUniformMeshes) {
  auto m1 = Mesh1D::from_boundaries({0, 0.1, 0.15, 0.4, 0.5, 0.8, 0.85, 1.0})->refined(3);
  expect_gradient_consistent(*cubic_elliptic(), m1, 7, 20, 1e-5);
  expect_gradient_consistent(*catalog::instance_c(), m1, 8, 20, 1e-5);
  auto m2 = Mesh1D::from_boundaries({0, 0.3, 0.35, 1.2, 2.0})->refined(4);
  expect_gradient_consistent(*nonlinear_ode(), m2, 9, 20, 1e-5);
}

TEST(Elliptic, PoissonClosedForms) {
  auto e = std::static_pointer_cast<const EllipticProblem>(catalog::instance_e());
  auto mesh = Mesh1D::uniform(0, 1, 512);
  ControlField one(mesh, 1, 1.0);
  auto st = elliptic_solve(*e, one);
  EXPECT_NEAR(st.y[256], 0.125, 1e-4);
  EXPECT_LE(st.residual, 1e-12);
  EXPECT_NEAR(e->evaluate(one), 1.0 / 240.0, 1e-5);
}

TEST(Elliptic, CubicReactionZeroFixedPoint) {
  EllipticSpec spec;
  spec.reaction = expression_fn("y^3", 1, "x");
  spec.tracking = expression_fn("0.5*(y - 1)^2", 1, "x");
  EllipticProblem p("cubic", spec);
  auto mesh = Mesh1D::uniform(0, 1, 256);
  ControlField zero(mesh, 1, 0.0);
  auto st = p.solve(zero);
  for (double y : st.y) EXPECT_EQ(y, 0.0);
  // linearized adjoint at y = 0: -p'' = dL/dy = -1  ->  p = -x(1-x)/2
  auto sigma = p.switching(zero);
  for (std::size_t i = 0; i < mesh->cells(); ++i) {
    const double x = mesh->midpoint(i);
    EXPECT_NEAR(sigma(i, 0), -x * (1 - x) / 2, 1e-5);
  }
}

TEST(Elliptic, NewtonConvergesForStiffReaction) {
  EllipticSpec spec;
  spec.reaction = expression_fn("exp(5*y) - 1", 1, "x");
  spec.tracking = expression_fn("0.5*y^2", 1, "x");
  spec.ua = -50;
  spec.ub = 50;
  EllipticProblem p("stiff", spec);
  auto st = p.solve(ControlField(Mesh1D::uniform(0, 1, 128), 1, 40.0));
  EXPECT_LE(st.residual, 1e-12 * 1.0);
  EXPECT_GT(st.newton_iterations, 1u);
}

TEST(Elliptic, StagnationIsNonconvergence) {
  EllipticSpec spec;
  spec.reaction = expression_fn("y^3", 1, "x");
  spec.tracking = expression_fn("y", 1, "x");
  spec.newton_max_iter = 1;
  EllipticProblem p("cap", spec);
  try {
    p.solve(ControlField(Mesh1D::uniform(0, 1, 64), 1, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::nonconvergence);
  }
}

TEST(MeshRefinement, ObjectiveConverges) {
  struct Case {
    ProblemPtr p;
    double a, b;
  };
  for (const auto& c : {Case{nonlinear_ode(), 0, 2}, Case{cubic_elliptic(), 0, 1}}) {
    auto coarse = Mesh1D::uniform(c.a, c.b, 16);
    auto u = ControlField::from_cells(coarse, c.p->control_dim(), [&](std::size_t i, std::span<double> out) {
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::sin(3.0 * coarse->midpoint(i) + j);
    });
    double prev_diff = INFINITY;
    for (int k = 0; k < 4; ++k) {
      const double jk = c.p->evaluate(refine_and_prolong(u, k));
      const double jk1 = c.p->evaluate(refine_and_prolong(u, k + 1));
      const double h = (c.b - c.a) / (16 << k);
      EXPECT_LE(std::abs(jk - jk1), 1.0 * h) << c.p->name();
      EXPECT_LT(std::abs(jk - jk1), prev_diff * 1.01);
      prev_diff = std::abs(jk - jk1);
    }
  }
}

// Rademacher oscillations of fixed L1 size: switching fields converge.
TEST(OscillationRobustness, SwitchingConvergesUnderWeakPerturbations) {
  for (const auto& p : {catalog::instance_b(), nonlinear_ode()}) {
    const auto [a, b] = p->domain();
    auto coarse = Mesh1D::uniform(a, b, 8);
    ControlField base(coarse, p->control_dim(), 0.1);
    double prev = INFINITY;
    for (int n = 1; n <= 4; ++n) {
      auto u = refine_and_prolong(base, n + 2);
      ControlField w(u.mesh(), u.dim());
      const std::size_t stride = std::size_t{1} << (n + 2 - n);
      for (std::size_t i = 0; i < u.cells(); ++i) {
        for (std::size_t j = 0; j < u.dim(); ++j) w(i, j) = (i / stride) % 2 == 0 ? 0.5 : -0.5;
      }
      (void)stride;
      const double diff = linf_norm(p->switching(u + w) - p->switching(u));
      EXPECT_LT(diff, prev) << p->name() << " level " << n;
      prev = diff;
    }
  }
}

TEST(LinearPerturbation, Examples) {
  auto mesh = Mesh1D::uniform(0, 1, 64);
  auto a = catalog::instance_a();
  ControlField u(mesh, 1, 0.4);
  auto same = with_linear_perturbation(a, DualField(mesh, 1, 0.0));
  EXPECT_EQ(same->evaluate(u), a->evaluate(u));

  auto zero = with_linear_perturbation(catalog::zero_problem(), DualField(mesh, 1, 1.0));
  EXPECT_DOUBLE_EQ(zero->evaluate(ControlField(mesh, 1, 1.0)), -1.0);

  auto flipped = with_linear_perturbation(a, DualField(mesh, 1, -0.6));
  auto v = lmo_field(unit_box(), flipped->switching(u));
  for (double x : v.values()) EXPECT_EQ(x, -1.0);

  Rng rng(3, 3);
  auto xi = DualField::from_cells(mesh, 1, [&](std::size_t, std::span<double> o) { o[0] = rng.uniform(-1, 1); });
  auto pert = with_linear_perturbation(catalog::instance_b(), xi);
  auto diff = pert->switching(u) - catalog::instance_b()->switching(u);
  for (std::size_t i = 0; i < mesh->cells(); ++i) EXPECT_NEAR(diff(i, 0), -xi(i, 0), 1e-15);
}

TEST(LinearPerturbation, ProlongsOntoFinerMeshes) {
  auto mesh = Mesh1D::uniform(0, 1, 8);
  auto xi = DualField::cell_average(mesh, [](double t) { return t; });
  auto p = with_linear_perturbation(catalog::zero_problem(), xi);
  auto u = refine_and_prolong(ControlField(mesh, 1, 1.0), 3);
  EXPECT_NEAR(p->evaluate(u), -0.5, 1e-15);
}

TEST(PRegularizer, Examples) {
  auto mesh = Mesh1D::uniform(0, 1, 64);
  auto a = catalog::instance_a();
  auto reg = with_p_regularizer(a, 2.0, 0.1);
  ControlField zero(mesh, 1, 0.0);
  EXPECT_EQ(reg->evaluate(zero), a->evaluate(zero));
  auto s0 = reg->switching(zero) - a->switching(zero);
  EXPECT_EQ(linf_norm(s0), 0.0);

  ControlField one(mesh, 1, 1.0);
  EXPECT_NEAR(reg->evaluate(one) - a->evaluate(one), 0.05, 1e-15);
  auto s1 = reg->switching(one) - a->switching(one);
  for (double v : s1.values()) EXPECT_NEAR(v, 0.1, 1e-15);

  EXPECT_THROW(with_p_regularizer(a, 1.5, 0.1), Error);
  EXPECT_THROW(with_p_regularizer(a, 2.0, 0.0), Error);
}

TEST(PRegularizer, ClampedMinimizerIsCritical) {
  auto mesh = Mesh1D::uniform(0, 1, 256);
  const double eta = 0.2;
  auto reg = with_p_regularizer(catalog::instance_a(), 2.0, eta);
  auto u = ControlField::from_cells(mesh, 1, [&](std::size_t i, std::span<double> o) {
    o[0] = std::clamp(-(mesh->midpoint(i) - 0.5) / eta, -1.0, 1.0);
  });
  auto s = reg->switching(u);
  for (std::size_t i = 0; i < mesh->cells(); ++i) {
    EXPECT_LE(kkt_residual_pointwise(unit_box(), u.cell(i), s.cell(i)), 1e-14);
  }
}

TEST(PRegularizer, SectionMatchesEvaluate) {
  auto mesh = Mesh1D::uniform(0, 1, 40);
  Rng rng(21, 0);
  for (double p : {2.0, 3.0}) {
    auto reg = with_p_regularizer(catalog::instance_b(), p, 0.3);
    auto u = ControlField::from_cells(mesh, 1, [&](std::size_t, std::span<double> o) { o[0] = rng.uniform(-1, 1); });
    auto d = ControlField::from_cells(mesh, 1, [&](std::size_t, std::span<double> o) { o[0] = rng.uniform(-1, 1); });
    auto phi = reg->section(u, d);
    for (double t : {0.0, 0.25, 0.5, 1.0}) {
      ControlField v = u;
      for (std::size_t k = 0; k < v.values().size(); ++k) v.values()[k] += t * d.values()[k];
      EXPECT_NEAR(phi(t), reg->evaluate(v), 1e-14) << p << " " << t;
    }
  }
}

TEST(PRegularizer, HigherPowerGradient) {
  auto reg = with_p_regularizer(catalog::instance_b(), 3.0, 0.7);
  expect_gradient_consistent(*reg, Mesh1D::uniform(0, 1, 100), 12, 30, 1e-6);
}

}  // namespace
}  // namespace bangbang
