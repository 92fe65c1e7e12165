#include <gtest/gtest.h>

#include <cmath>

#include "bangbang/catalog.hpp"
#include "bangbang/simplex.hpp"
#include "bangbang/solver.hpp"

namespace bangbang {
namespace {

using catalog::unit_box;

std::size_t cells_differing(const ControlField& u, const ControlField& v, double tol = 1e-9) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < u.cells(); ++i) {
    for (std::size_t j = 0; j < u.dim(); ++j) {
      if (std::abs(u(i, j) - v(i, j)) > tol) {
        ++n;
        break;
      }
    }
  }
  return n;
}

// Brute-force oracle: the L1-ball lmo as an LP with split variables
// u = center + p - q and a slack on the budget row.
double l1ball_lp_objective(const DualField& c, const ControlField& center, double gamma,
                           const Box& box) {
  const Mesh1D& mesh = *center.mesh();
  const std::size_t n = center.values().size();
  LinearProgram lp(1, 2 * n + 1);
  double base = 0.0;
  for (std::size_t i = 0; i < mesh.cells(); ++i) {
    for (std::size_t j = 0; j < center.dim(); ++j) {
      const std::size_t k = i * center.dim() + j;
      const double mu = mesh.measure(i);
      base += mu * c(i, j) * center(i, j);
      lp.c[k] = mu * c(i, j);
      lp.c[n + k] = -mu * c(i, j);
      lp.upper[k] = box.hi[j] - center(i, j);
      lp.upper[n + k] = center(i, j) - box.lo[j];
      lp.at(0, k) = mu;
      lp.at(0, n + k) = mu;
    }
  }
  lp.at(0, 2 * n) = 1.0;
  lp.b[0] = gamma;
  auto r = solve_lp(lp);
  EXPECT_EQ(r.status, LpStatus::optimal);
  return base + r.objective;
}

TEST(FrankWolfe, InstanceA) {
  auto mesh = Mesh1D::uniform(0, 1, 1024);
  auto rep = frank_wolfe(*catalog::instance_a(), unit_box(), mesh);
  EXPECT_TRUE(rep.converged);
  EXPECT_NEAR(rep.J, -0.25, 2e-6);
  EXPECT_LE(cells_differing(rep.u, catalog::instance_a_minimizer(mesh)), 2u);
  EXPECT_LE(rep.residual, 1e-3);
  EXPECT_EQ(rep.residual, criticality_residual(*catalog::instance_a(), rep.u, unit_box()));
}

TEST(FrankWolfe, ZeroObjective) {
  auto mesh = Mesh1D::uniform(0, 1, 16);
  auto rep = frank_wolfe(*catalog::zero_problem(), unit_box(), mesh);
  EXPECT_EQ(rep.iters, 0u);
  EXPECT_EQ(rep.gap, 0.0);
  EXPECT_TRUE(rep.converged);
}

TEST(FrankWolfe, InstanceC) {
  auto mesh = Mesh1D::uniform(0, 1, 1000);
  auto rep = frank_wolfe(*catalog::instance_c(), unit_box(), mesh);
  EXPECT_NEAR(rep.J, -0.5, 1e-4);
  for (double v : rep.u.values()) EXPECT_EQ(v, -1.0);
}

TEST(FrankWolfe, DescentAndAtomExtremality) {
  struct Case {
    ProblemPtr p;
    MeshPtr mesh;
  };
  OdeSpec spec;
  spec.horizon = 1.0;
  spec.y0 = {0.3};
  spec.drift = {expression_fn("-y + 0.5*sin(3*t)", 1)};
  spec.control_fields = {{expression_fn("1 + 0.5*y^2", 1)}};
  spec.running_cost = expression_fn("(y - 0.2)^2", 1);
  spec.control_costs = {constant_fn(0.0)};
  spec.terminal_cost = constant_fn(0.0);
  auto ode = std::make_shared<OdeAffineProblem>("ode_track", spec);
  EllipticSpec es;
  es.reaction = expression_fn("y^3", 1, "x");
  es.tracking = expression_fn("0.5*(y - 0.05*sin(2*pi*x))^2", 1, "x");
  auto ell = std::make_shared<EllipticProblem>("ell", es);

  for (const auto& c : {Case{catalog::instance_b(), Mesh1D::uniform(0, 1, 64)},
                        Case{ode, Mesh1D::uniform(0, 1, 64)},
                        Case{ell, Mesh1D::uniform(0, 1, 64)}}) {
    const auto set = unit_box();
    std::size_t atoms = 0;
    LinearOracle checked = [&](const ControlField&, const DualField& s) {
      ControlField v = lmo_field(set, s);
      EXPECT_EQ(extreme_defect(v, set, 0.0), 0.0);
      ++atoms;
      return v;
    };
    SolveOptions opts;
    opts.max_iter = 300;
    auto rep = detail::conditional_gradient(*c.p, default_start(set, c.mesh), checked, set, opts);
    EXPECT_GT(atoms, 0u);
    for (std::size_t k = 1; k < rep.trace.size(); ++k) {
      EXPECT_LE(rep.trace[k].J, rep.trace[k - 1].J) << c.p->name() << " iteration " << k;
    }
    EXPECT_LT(rep.trace.back().gap, rep.trace.front().gap);
  }
}

TEST(FrankWolfe, ArmijoAlsoDescends) {
  SolveOptions opts;
  opts.line_search = LineSearch::armijo;
  opts.max_iter = 200;
  auto rep = frank_wolfe(*catalog::instance_b(), unit_box(), Mesh1D::uniform(0, 1, 32), opts);
  for (std::size_t k = 1; k < rep.trace.size(); ++k) EXPECT_LE(rep.trace[k].J, rep.trace[k - 1].J);
}

// A problem whose switching field has the wrong sign.
class WrongGradient final : public Problem {
 public:
  std::string name() const override { return "wrong"; }
  std::size_t control_dim() const override { return 1; }
  double evaluate(const ControlField& u) const override { return pairing(DualField(u.mesh(), 1, 1.0), u); }
  DualField switching(const ControlField& u) const override { return DualField(u.mesh(), 1, -1.0); }
};

TEST(FrankWolfe, InconsistentGradientIsInternalError) {
  try {
    frank_wolfe(WrongGradient{}, unit_box(), Mesh1D::uniform(0, 1, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::internal);
  }
}

TEST(FrankWolfe, RejectsInfeasibleStartAndBadOptions) {
  auto mesh = Mesh1D::uniform(0, 1, 4);
  EXPECT_THROW(frank_wolfe(*catalog::instance_a(), unit_box(), ControlField(mesh, 1, 2.0)), Error);
  SolveOptions bad;
  bad.tol_gap = 0;
  EXPECT_THROW(frank_wolfe(*catalog::instance_a(), unit_box(), mesh, bad), Error);
}

TEST(LmoL1Ball, Examples) {
  const auto set = unit_box();
  auto mesh2 = Mesh1D::uniform(0, 1, 2);
  auto u = lmo_l1ball(DualField(mesh2, 1, 1.0), ControlField(mesh2, 1, 0.0), 0.5, set);
  EXPECT_EQ(u(0, 0), -1.0);
  EXPECT_EQ(u(1, 0), 0.0);
  EXPECT_EQ(pairing(DualField(mesh2, 1, 1.0), u), -0.5);

  auto mesh = Mesh1D::uniform(0, 1, 10);
  Rng rng(5, 0);
  auto c = DualField::from_cells(mesh, 1, [&](std::size_t, std::span<double> o) { o[0] = rng.uniform(-1, 1); });
  auto center = ControlField::from_cells(mesh, 1, [&](std::size_t, std::span<double> o) { o[0] = rng.uniform(-1, 1); });
  auto plain = lmo_field(set, c);
  auto big = lmo_l1ball(c, center, l1_distance(plain, center) + 0.1, set);
  EXPECT_EQ(cells_differing(big, plain, 0.0), 0u);
  auto none = lmo_l1ball(c, center, 0.0, set);
  EXPECT_EQ(cells_differing(none, center, 0.0), 0u);

  EXPECT_THROW(lmo_l1ball(c, ControlField(mesh, 1, 3.0), 0.1, set), Error);
  EXPECT_THROW(lmo_l1ball(c, center, -1.0, set), Error);
}

TEST(LmoL1Ball, MatchesBruteForceLp) {
  Rng rng(11, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cells = 1 + rng.index(8);
    const std::size_t m = 1 + rng.index(2);
    std::vector<double> bounds{0.0};
    for (std::size_t i = 0; i < cells; ++i) bounds.push_back(bounds.back() + rng.uniform(0.05, 0.4));
    auto mesh = Mesh1D::from_boundaries(bounds);
    Vec lo(m), hi(m);
    for (std::size_t j = 0; j < m; ++j) {
      lo[j] = rng.uniform(-2, 0);
      hi[j] = lo[j] + rng.uniform(0.1, 3);
    }
    const auto set = ControlSet::box(lo, hi);
    auto c = DualField::from_cells(mesh, m, [&](std::size_t, std::span<double> o) {
      for (double& v : o) v = rng.uniform() < 0.1 ? 0.0 : rng.uniform(-1, 1);
    });
    auto center = ControlField::from_cells(mesh, m, [&](std::size_t, std::span<double> o) {
      for (std::size_t j = 0; j < m; ++j) {
        const double r = rng.uniform();
        o[j] = r < 0.2 ? lo[j] : r < 0.4 ? hi[j] : rng.uniform(lo[j], hi[j]);
      }
    });
    const double gamma = rng.uniform(0, 1.2 * l1_distance(lmo_field(set, c), center));
    auto u = lmo_l1ball(c, center, gamma, set);
    EXPECT_TRUE(field_in_set(u, set, 0.0));
    EXPECT_LE(l1_distance(u, center), gamma + 1e-12);
    EXPECT_NEAR(pairing(c, u), l1ball_lp_objective(c, center, gamma, set.as_box()), 1e-12)
        << "trial " << trial;
  }
}

TEST(LmoL1Ball, BudgetIsTightWhenActive) {
  Rng rng(12, 0);
  const auto set = ControlSet::box({-1, 0}, {1, 2});
  for (int trial = 0; trial < 200; ++trial) {
    auto mesh = Mesh1D::uniform(0, 1, 1 + rng.index(20));
    auto c = DualField::from_cells(mesh, 2, [&](std::size_t, std::span<double> o) {
      for (double& v : o) v = rng.uniform(-1, 1);
    });
    auto center = ControlField::from_cells(mesh, 2, [&](std::size_t, std::span<double> o) {
      o[0] = rng.uniform(-1, 1);
      o[1] = rng.uniform(0, 2);
    });
    const double full = l1_distance(lmo_field(set, c), center);
    const double gamma = rng.uniform(0, full);
    EXPECT_NEAR(l1_distance(lmo_l1ball(c, center, gamma, set), center), gamma, 1e-12);
  }
}

TEST(SolveLocalized, InactiveBallMatchesGlobal) {
  auto mesh = Mesh1D::uniform(0, 1, 64);
  auto p = catalog::instance_b();
  auto glob = frank_wolfe(*p, unit_box(), mesh);
  auto center = ControlField(mesh, 1, 0.5);
  auto loc = solve_localized(p, DualField(mesh, 1, 0.0), center, 10.0, unit_box());
  EXPECT_NEAR(loc.J, glob.J, 1e-8);
}

TEST(SolveLocalized, InstanceAConstantShift) {
  auto mesh = Mesh1D::uniform(0, 1, 1000);
  auto ustar = catalog::instance_a_minimizer(mesh);
  for (double delta : {0.013, 0.05, 0.1}) {
    auto rep = solve_localized(catalog::instance_a(), DualField(mesh, 1, delta), ustar, 0.5, unit_box());
    // cells with 0 < c < delta flip from -1 to +1
    double expected = 0;
    for (std::size_t i = 0; i < mesh->cells(); ++i) {
      const double c = mesh->midpoint(i) - 0.5;
      if (c > 0 && c < delta) expected += 2 * mesh->measure(i);
    }
    EXPECT_NEAR(l1_distance(rep.u, ustar), expected, 1e-12) << delta;
  }
}

TEST(SolveLocalized, StrictMinimizerStaysPut) {
  auto mesh = Mesh1D::uniform(0, 1, 128);
  auto ustar = catalog::instance_a_minimizer(mesh);
  auto rep = solve_localized(catalog::instance_a(), DualField(mesh, 1, 0.0), ustar, 1e-3, unit_box());
  EXPECT_EQ(cells_differing(rep.u, ustar, 0.0), 0u);
}

TEST(Multistart, ConvexInstanceAgrees) {
  auto mesh = Mesh1D::uniform(0, 1, 256);
  SolveOptions opts;
  opts.seed = 99;
  auto ms = multistart_global(*catalog::instance_a(), unit_box(), mesh, 6, opts);
  EXPECT_LE(ms.J_spread, 1e-8);
  EXPECT_EQ(ms.runs.size(), 6u);
}

TEST(Multistart, SingleStartIsFrankWolfe) {
  auto mesh = Mesh1D::uniform(0, 1, 64);
  auto ms = multistart_global(*catalog::instance_b(), unit_box(), mesh, 1);
  auto fw = frank_wolfe(*catalog::instance_b(), unit_box(), mesh);
  EXPECT_EQ(ms.best_run().J, fw.J);
  EXPECT_EQ(ms.best_run().iters, fw.iters);
  EXPECT_EQ(cells_differing(ms.best_run().u, fw.u, 0.0), 0u);
}

TEST(Multistart, InstanceBReachesZero) {
  auto mesh = Mesh1D::uniform(0, 1, 64);
  SolveOptions opts;
  opts.seed = 3;
  auto ms = multistart_global(*catalog::instance_b(), unit_box(), mesh, 5, opts);
  for (const auto& r : ms.runs) EXPECT_NEAR(r.J, 0.0, 1e-8);
}

TEST(Multistart, ThreadCountDoesNotChangeResults) {
  auto mesh = Mesh1D::uniform(0, 1, 32);
  SolveOptions one, four;
  one.seed = four.seed = 17;
  one.threads = 1;
  four.threads = 4;
  auto a = multistart_global(*catalog::instance_b(), unit_box(), mesh, 6, one);
  auto b = multistart_global(*catalog::instance_b(), unit_box(), mesh, 6, four);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(CriticalityResidual, Examples) {
  auto mesh = Mesh1D::uniform(0, 1, 1024);
  EXPECT_LE(criticality_residual(*catalog::instance_a(), catalog::instance_a_minimizer(mesh), unit_box()), 1e-3);
  auto m1000 = Mesh1D::uniform(0, 1, 1000);
  EXPECT_NEAR(criticality_residual(*catalog::instance_c(), ControlField(m1000, 1, 1.0), unit_box()), 1.0, 1e-3);
  EXPECT_EQ(criticality_residual(*catalog::zero_problem(), ControlField(mesh, 1, 0.3), unit_box()), 0.0);
}

TEST(CriticalityResidual, ZeroExactlyWhenGapIsZero) {
  auto mesh = Mesh1D::uniform(0, 1, 40);
  auto a = catalog::instance_a();
  const auto set = unit_box();
  Rng rng(21, 0);
  int critical = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const double p_bad = trial % 3 == 0 ? 0.0 : 0.05;
    auto sigma = a->switching(ControlField(mesh, 1, 0.0));
    auto u = ControlField::from_cells(mesh, 1, [&](std::size_t i, std::span<double> o) {
      const double good = sigma(i, 0) > 0 ? -1.0 : 1.0;
      const double r = rng.uniform();
      o[0] = r < p_bad ? -good : r < 2 * p_bad ? rng.uniform(-1, 1) : good;
    });
    const double gap = pairing(sigma, u) - pairing(sigma, lmo_field(set, sigma));
    const double res = criticality_residual(*a, u, set);
    EXPECT_EQ(gap <= 1e-15, res == 0.0);
    critical += res == 0.0;
  }
  EXPECT_GT(critical, 50);
  EXPECT_LT(critical, 250);
}

TEST(SolveReport, JsonShape) {
  auto rep = frank_wolfe(*catalog::instance_a(), unit_box(), Mesh1D::uniform(0, 1, 8));
  auto j = to_json(rep);
  EXPECT_TRUE(j.contains("J") && j.contains("gap") && j.contains("residual") && j.contains("iters"));
  EXPECT_EQ(j["trace"].size(), rep.trace.size());
  EXPECT_EQ(j["trace"][0]["k"], 0);
  EXPECT_EQ(nlohmann::json::parse(j.dump())["J"].get<double>(), rep.J);
}

}  // namespace
}  // namespace bangbang
