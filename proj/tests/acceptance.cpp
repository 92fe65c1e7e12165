// Acceptance criteria 1-12. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "bangbang/analysis.hpp"
#include "bangbang/catalog.hpp"
#include "bangbang/cli.hpp"
#include "bangbang/gradcheck.hpp"
#include "bangbang/simplex.hpp"
#include "bangbang/solver.hpp"

using namespace bangbang;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
  template <class T>
  void note(const std::string& key, const T& value) {
    detail << ' ' << key << '=' << value;
  }
};

std::string g(double v) { return format_double(v); }

const ControlSet& box() {
  static const ControlSet set = catalog::unit_box();
  return set;
}

void c1(Check& c) {
  auto mesh = Mesh1D::uniform(0, 1, 1024);
  auto a = catalog::instance_a();
  auto rep = frank_wolfe(*a, box(), mesh);
  const auto sign_rule = catalog::instance_a_minimizer(mesh);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < mesh->cells(); ++i) differ += std::abs(rep.u(i, 0) - sign_rule(i, 0)) > 1e-9;
  const double res = criticality_residual(*a, rep.u, box());
  c.note("J", g(rep.J));
  c.note("cells_differing", differ);
  c.note("residual", g(res));
  c.expect(std::abs(rep.J + 0.25) <= 2e-6, "J = -0.25 +- 2e-6");
  c.expect(differ <= 2, "<= 2 cells differ from the sign rule");
  c.expect(res <= 1e-3, "criticality residual <= 1e-3");
}

void c2(Check& c) {
  auto mesh = Mesh1D::uniform(0, 1, 1000);
  auto p = catalog::instance_c();
  Rng rng(2024, 0);
  auto u = ControlField::from_cells(mesh, 1, [&](std::size_t, std::span<double> o) { o[0] = rng.uniform(-1, 1); });
  auto sigma = p->switching(u);
  double worst = 0;
  for (std::size_t i = 0; i < mesh->cells(); ++i) worst = std::max(worst, std::abs(sigma(i, 0) - (1 - mesh->midpoint(i))));
  GradcheckOptions go;
  go.directions = 20;
  go.seed = 2;
  auto gc = gradcheck(*p, box(), mesh, go);
  c.note("sigma_err", g(worst));
  c.note("gradcheck_max_rel", g(gc.max_rel_error));
  c.expect(worst <= 1e-4, "|sigma - (1 - t)| <= 1e-4");
  c.expect(gc.entries.size() == 20 && gc.max_rel_error <= 1e-5, "gradcheck <= 1e-5 over 20 directions");
}

void c3(Check& c) {
  auto e = std::static_pointer_cast<const EllipticProblem>(catalog::instance_e());
  auto mesh = Mesh1D::uniform(0, 1, 512);
  ControlField one(mesh, 1, 1.0);
  auto st = elliptic_solve(*e, one);
  const double mid = st.y[256];
  const double J = e->evaluate(one);
  GradcheckOptions go;
  go.seed = 3;
  go.tol = 1e-4;
  auto gc = gradcheck(*e, box(), mesh, go);
  c.note("y_half", g(mid));
  c.note("J", g(J));
  c.note("gradcheck_max_rel", g(gc.max_rel_error));
  c.expect(std::abs(mid - 0.125) <= 1e-4, "y(1/2) = 0.125 +- 1e-4");
  c.expect(std::abs(J - 1.0 / 240) <= 1e-5, "J = 1/240 +- 1e-5");
  c.expect(gc.max_rel_error <= 1e-4, "gradcheck <= 1e-4");
}

void c4(Check& c) {
  ControlField zero(Mesh1D::uniform(0, 1, 1), 1, 0.0);
  const auto bank = TestBank::monomials(8);
  const double delta0 = clustering_radius(zero, box());
  double worst_dist = 0, worst_ratio = INFINITY;
  for (double delta : {0.05, 0.1, delta0}) {
    double prev = 0;
    for (int n = 1; n <= 12; ++n) {
      auto f = clustering_sequence(zero, box(), delta, n);
      worst_dist = std::max(worst_dist, std::abs(l1_distance(f.field, prolong_to(zero, f.field.mesh())) - delta));
      const double gap = weak_gap(f.field, prolong_to(zero, f.field.mesh()), bank);
      if (n > 1) worst_ratio = std::min(worst_ratio, prev / gap);
      prev = gap;
    }
  }
  c.note("delta0", g(delta0));
  c.note("max_distance_error", g(worst_dist));
  c.note("min_decay_ratio", g(worst_ratio));
  c.expect(delta0 == 1.0, "delta0 = 1 for u* = 0 on [-1, 1]");
  c.expect(worst_dist <= 1e-10, "distance = delta within 1e-10");
  c.expect(worst_ratio >= 1.8, "weak gap decays by >= 1.8 per level");
}

void c5(Check& c) {
  ControlField zero(Mesh1D::uniform(0, 1, 1), 1, 0.0);
  auto r = vpcasas_check(*catalog::instance_b(), zero, box(), 0.1, 1e-6, 12);
  // moments of the level-n member: (0.1 2^{-n-1})^2 and 0
  int expected = 1;
  while (std::pow(0.1 * std::ldexp(1.0, -expected - 1), 2) > 1e-6) ++expected;
  c.note("n", r.witness.levels);
  c.note("oracle_n", expected);
  c.note("J", g(r.j_gap));
  c.expect(r.j_gap <= 1e-6, "J(f_n) <= 1e-6");
  c.expect(r.witness.levels <= 12, "n <= 12");
  c.expect(r.witness.levels == expected, "n matches the closed form");
}

void c6(Check& c) {
  auto mesh = Mesh1D::uniform(0, 1, 1024);
  const auto bank = TestBank::monomials(8);
  auto vertex = adversarial_weak_ball(ControlField(mesh, 1, 1.0), box(), 1e-4, bank);
  auto centre = adversarial_weak_ball(ControlField(mesh, 1, 0.0), box(), 1e-4, bank);
  c.note("vertex", g(vertex.distance));
  c.note("centre", g(centre.distance));
  c.expect(vertex.distance <= 1e-2, "u* = 1 gives <= 1e-2");
  c.expect(centre.distance >= 0.5, "u* = 0 gives >= 0.5");
}

void c7(Check& c) {
  const std::size_t n = 1024;
  auto mesh = Mesh1D::uniform(0, 1, n);
  const std::vector<double> deltas{0.01, 0.02, 0.05, 0.1};
  auto rec = stability_probe(catalog::instance_a(), catalog::instance_a_minimizer(mesh), box(), 0.5, deltas, 50, 7);
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    const double e = rec.summary["modulus"][d]["epsilon_hat"].get<double>();
    c.note("A@" + g(deltas[d]), g(e));
    c.expect(e <= 4 * deltas[d] + 4.0 / n, "A modulus <= 4 delta + 4/N at " + g(deltas[d]));
  }
  auto b = stability_probe(catalog::instance_b(), ControlField(Mesh1D::uniform(0, 1, 64), 1, 0.0), box(), 0.5,
                           {0.01}, 50, 7);
  const double eb = b.summary["modulus"][0]["epsilon_hat"].get<double>();
  c.note("B@0.01", g(eb));
  c.expect(eb >= 0.2, "B modulus >= 0.2 at delta = 0.01");
}

void c8(Check& c) {
  const std::size_t n = 1024;
  auto mesh = Mesh1D::uniform(0, 1, n);
  auto rec = subregularity_probe(catalog::instance_a(), catalog::instance_a_minimizer(mesh), box(), 0.3, 100, 8,
                                 {0.01, 0.05});
  for (const auto& e : rec.summary["by_residual"]) {
    const double r = e["residual"].get<double>();
    const double d = e["max_distance"].get<double>();
    c.note("A@" + g(r), g(d));
    c.expect(d <= 4 * r + 4.0 / n, "A distance <= 4r + 4/N at r = " + g(r));
  }
  auto b = subregularity_probe(catalog::instance_b(), ControlField(Mesh1D::uniform(0, 1, 64), 1, 0.0), box(), 0.3,
                               100, 8, {1e-10});
  double witness = 0;
  for (const auto& row : b.rows) {
    if (row.residual <= 1e-10) witness = std::max(witness, row.distance);
  }
  c.note("B_witness_distance", g(witness));
  c.expect(witness >= 0.1, "B has a residual <= 1e-10 sample at distance >= 0.1");
}

void c9(Check& c) {
  const std::size_t n = 1024;
  auto mesh = Mesh1D::uniform(0, 1, n);
  auto rec = regularization_path(catalog::instance_a(), catalog::instance_a_minimizer(mesh), box(), 2.0,
                                 {0.4, 0.2, 0.1, 0.05, 0.025});
  double worst = 0;
  for (const auto& row : rec.rows) {
    worst = std::max(worst, std::abs(row.distance - row.param));
    c.expect(row.perturbation_norm <= row.param, "linf(xi) <= eta at " + g(row.param));
  }
  c.note("max_distance_error", g(worst));
  c.expect(rec.rows.size() == 5, "five path points");
  c.expect(worst <= 2.0 / n + 1e-4, "distance = eta +- (2/N + 1e-4)");
}

void c10(Check& c) {
  auto mesh = Mesh1D::uniform(0, 1, 256);
  for (const auto& p : {catalog::zero_problem(), catalog::instance_a()}) {
    auto rec = genericity_probe(p, box(), mesh, {0.1, 0.01}, 100, 10);
    for (const auto& e : rec.summary["by_epsilon"]) {
      const auto& f = e["bang_bang_fraction"];
      const std::string tag = p->name() + "@" + g(e["epsilon"].get<double>());
      c.note(tag, f.is_null() ? std::string("n/a") : g(f.get<double>()));
      c.note(tag + "_degenerate", e["degenerate"].get<int>());
      c.expect(!f.is_null() && f.get<double>() == 1.0, "bang-bang fraction 1.0 for " + tag);
    }
  }
}

void c11(Check& c) {
  Rng rng(11, 0);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t cells = 1 + rng.index(8);
    const std::size_t m = 1 + rng.index(2);
    std::vector<double> b{0.0};
    for (std::size_t i = 1; i < cells; ++i) b.push_back(b.back() + rng.uniform(0.1, 1.0));
    b.push_back(b.back() + rng.uniform(0.1, 1.0));
    auto mesh = Mesh1D::from_boundaries(b);
    Vec lo(m), hi(m);
    for (std::size_t j = 0; j < m; ++j) {
      lo[j] = rng.uniform(-2, 0);
      hi[j] = lo[j] + rng.uniform(0.1, 2);
    }
    const auto set = ControlSet::box(lo, hi);
    auto center = ControlField::from_cells(mesh, m, [&](std::size_t, std::span<double> o) {
      for (std::size_t j = 0; j < m; ++j) o[j] = rng.uniform(lo[j], hi[j]);
    });
    auto cost = DualField::from_cells(mesh, m, [&](std::size_t, std::span<double> o) {
      for (double& x : o) x = rng.uniform(-1, 1);
    });
    const double gamma = rng.uniform(0, 2 * (b.back() - b.front()));
    const double found = pairing(cost, lmo_l1ball(cost, center, gamma, set));

    // LP over u = center + p - q with sum mu (p + q) + s = gamma
    const std::size_t nv = center.values().size();
    LinearProgram lp(1, 2 * nv + 1);
    double base = 0;
    for (std::size_t i = 0; i < cells; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t k = i * m + j;
        const double mu = mesh->measure(i);
        base += mu * cost(i, j) * center(i, j);
        lp.c[k] = mu * cost(i, j);
        lp.c[nv + k] = -mu * cost(i, j);
        lp.upper[k] = hi[j] - center(i, j);
        lp.upper[nv + k] = center(i, j) - lo[j];
        lp.at(0, k) = mu;
        lp.at(0, nv + k) = mu;
      }
    }
    lp.at(0, 2 * nv) = 1.0;
    lp.b[0] = gamma;
    auto r = solve_lp(lp);
    c.expect(r.status == LpStatus::optimal, "LP optimal");
    worst = std::max(worst, std::abs(found - (base + r.objective)));
  }
  c.note("max_objective_difference", g(worst));
  c.expect(worst <= 1e-12, "difference <= 1e-12");
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[e.path().filename().string()] = ss.str();
  }
  return files;
}

void c12(Check& c) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "bangbang_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(root / name) << text;
    return (root / name).string();
  };
  const auto a = write("a.cfg", R"cfg(
    problem = instance_a
    mesh { cells = 128 }
    seed = 12
    growth { samples = 60 }
    stability { delta = [0.01, 0.05]; samples = 10 }
    subreg { samples = 30 }
    genericity { samples = 20 }
    weakball { epsilon = 1e-3 }
  )cfg");
  const auto b = write("b.cfg", R"cfg(
    problem = instance_b
    mesh { cells = 4 }
    seed = 12
    reference = constant(value = [0])
    cluster { levels = 6; epsilon = 1e-5 }
  )cfg");
  const std::vector<std::pair<std::string, std::string>> runs{
      {"growth", a},   {"probe-stability", a}, {"probe-subreg", a}, {"probe-genericity", a},
      {"regpath", a},  {"weakball", a},        {"gradcheck", a},    {"cluster", b}};
  std::ostringstream sink;
  for (const char* dir : {"r1", "r2"}) {
    for (const auto& [cmd, cfg] : runs) {
      std::vector<std::string> args{"bangbang", cmd, "--config", cfg, "--out-dir", (root / dir).string()};
      std::vector<const char*> argv;
      for (const auto& s : args) argv.push_back(s.c_str());
      const int code = cli::run(static_cast<int>(argv.size()), argv.data(), sink, sink);
      c.expect(code == 0, cmd + " exit 0");
    }
  }
  const auto s1 = snapshot(root / "r1"), s2 = snapshot(root / "r2");
  std::size_t differing = 0;
  for (const auto& [name, text] : s1) differing += !s2.count(name) || s2.at(name) != text;
  c.note("files", s1.size());
  c.note("differing", differing);
  c.expect(s1.size() == s2.size() && differing == 0, "byte-identical outputs");
  c.expect(s1.size() >= 2 * 5 + 2 + 1 + 6 + 2, "every run wrote its files");
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"instance A solve", c1},
      {"ODE adjoint and gradcheck", c2},
      {"elliptic closed forms", c3},
      {"clustering distance and weak decay", c4},
      {"near-optimal clustering witness", c5},
      {"weak-ball dichotomy", c6},
      {"stability modulus", c7},
      {"subregularity", c8},
      {"regularization path", c9},
      {"genericity", c10},
      {"l1-ball oracle vs LP", c11},
      {"reproducibility", c12},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[k].second(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !c.ok;
    std::printf("%s %2zu %s:%s (%.1fs)\n", c.ok ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                c.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
