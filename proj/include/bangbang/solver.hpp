#pragma once

// Conditional-gradient (Frank-Wolfe) solver over pointwise control sets.
//
// Each iteration takes the cellwise lmo of the switching field as the atom
// and moves toward it with a 1D line search on the section t -> J(u + t d).
// The same loop drives the L1-ball-localized problems through a different
// oracle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bangbang/admissible.hpp"
#include "bangbang/error.hpp"
#include "bangbang/meshfield.hpp"
#include "bangbang/parallel.hpp"
#include "bangbang/problem.hpp"
#include "bangbang/random.hpp"

namespace bangbang {

enum class LineSearch { golden, armijo };

struct SolveOptions {
  std::size_t max_iter = 5000;
  double tol_gap = 1e-8;        // relative: gap <= tol_gap * (1 + |J|)
  double tol_residual = 0.0;    // absolute KKT residual; 0 disables the check
  LineSearch line_search = LineSearch::golden;
  int golden_iters = 60;
  std::uint64_t seed = 0;
  std::size_t threads = 0;      // 0: BANGBAND_THREADS or hardware
  bool keep_trace = true;

  void validate() const {
    if (!(tol_gap > 0)) fail(ErrorKind::validation, "tol_gap must be > 0");
    if (max_iter < 1) fail(ErrorKind::validation, "max_iter must be >= 1");
    if (!(tol_residual >= 0)) fail(ErrorKind::validation, "tol_residual must be >= 0");
    if (golden_iters < 1) fail(ErrorKind::validation, "golden_iters must be >= 1");
  }
};

struct TracePoint {
  std::size_t k;
  double J;
  double gap;
};

struct SolveReport {
  ControlField u;
  double J = 0.0;
  double gap = 0.0;
  double residual = 0.0;  // NaN when the set is not a box
  std::size_t iters = 0;
  bool converged = false;
  double wall_seconds = 0.0;
  std::vector<TracePoint> trace;
};

/// Report as JSON. Wall time is left out so that reruns are byte-identical.
inline nlohmann::json to_json(const SolveReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : r.trace) trace.push_back({{"k", p.k}, {"J", p.J}, {"gap", p.gap}});
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"J", num(r.J)},           {"gap", num(r.gap)},
          {"residual", num(r.residual)}, {"iters", r.iters},
          {"converged", r.converged}, {"trace", std::move(trace)}};
}

/// max over cells of the pointwise KKT residual for the box `set`.
inline double criticality_residual(const ControlField& u, const DualField& sigma,
                                   const ControlSet& set) {
  require_same_layout(u, sigma);
  double res = 0.0;
  for (std::size_t i = 0; i < u.cells(); ++i) {
    res = std::max(res, kkt_residual_pointwise(set, u.cell(i), sigma.cell(i)));
  }
  return res;
}

inline double criticality_residual(const Problem& problem, const ControlField& u,
                                   const ControlSet& set) {
  return criticality_residual(u, problem.switching(u), set);
}

/// Minimizer of pairing(c, u) over fields pointwise in the box with
/// l1_distance(u, center) <= gamma. Continuous knapsack: every (cell,
/// component) can move toward its lmo value at gain |c| per unit of L1 mass;
/// the most profitable moves are bought first.
inline ControlField lmo_l1ball(const DualField& c, const ControlField& center, double gamma,
                               const ControlSet& set) {
  if (!(gamma >= 0)) fail(ErrorKind::validation, "l1 ball radius must be >= 0");
  require_same_layout(c, center);
  if (center.dim() != set.dim()) fail(ErrorKind::incompatible_field, "center/set dimension mismatch");
  const Box& box = set.as_box();
  if (!field_in_set(center, set, set.default_tol())) {
    fail(ErrorKind::precondition, "l1 ball center is not feasible");
  }
  const Mesh1D& mesh = *center.mesh();
  const std::size_t m = center.dim();

  struct Item {
    double density;
    std::size_t cell;
    std::size_t comp;
    double target;
  };
  std::vector<Item> items;
  items.reserve(center.values().size());
  for (std::size_t i = 0; i < mesh.cells(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double cj = c(i, j);
      const double target = cj < 0 ? box.hi[j] : box.lo[j];
      if (target != center(i, j)) items.push_back({std::abs(cj), i, j, target});
    }
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& x, const Item& y) { return x.density > y.density; });

  ControlField u = center;
  double budget = gamma;
  for (const Item& it : items) {
    if (budget <= 0) break;
    const double mu = mesh.measure(it.cell);
    const double start = center(it.cell, it.comp);
    const double cost = mu * std::abs(it.target - start);
    if (cost <= budget) {
      u(it.cell, it.comp) = it.target;
      budget -= cost;
    } else {
      const double step = budget / mu;
      u(it.cell, it.comp) = it.target > start ? std::min(start + step, it.target)
                                              : std::max(start - step, it.target);
      budget = 0;
    }
  }
  return u;
}

/// Atom for the conditional-gradient loop: given u and sigma_u, the
/// minimizer of pairing(sigma_u, v) over the feasible region.
using LinearOracle = std::function<ControlField(const ControlField& u, const DualField& sigma)>;

namespace detail {

inline double golden_section(const std::function<double(double)>& f, int iters, double& best_t) {
  const double invphi = (std::sqrt(5.0) - 1) / 2;
  double a = 0.0, b = 1.0;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int k = 0; k < iters; ++k) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  best_t = f1 <= f2 ? x1 : x2;
  return std::min(f1, f2);
}

inline SolveReport conditional_gradient(const Problem& problem, ControlField u,
                                        const LinearOracle& oracle, const ControlSet& set,
                                        const SolveOptions& opts) {
  opts.validate();
  const auto clock_start = std::chrono::steady_clock::now();
  SolveReport rep;
  double J = problem.evaluate(u);
  DualField sigma = problem.switching(u);
  auto residual_of = [&](const ControlField& x, const DualField& s) {
    return set.is_box() ? criticality_residual(x, s, set) : std::numeric_limits<double>::quiet_NaN();
  };
  const double stall_gap = std::sqrt(std::numeric_limits<double>::epsilon());

  std::size_t k = 0;
  double gap = 0.0;
  for (;; ++k) {
    ControlField v = oracle(u, sigma);
    gap = std::max(0.0, pairing(sigma, u) - pairing(sigma, v));
    if (opts.keep_trace) rep.trace.push_back({k, J, gap});
    const bool gap_ok = gap <= opts.tol_gap * (1 + std::abs(J));
    if (gap_ok && (opts.tol_residual <= 0 || residual_of(u, sigma) <= opts.tol_residual)) {
      rep.converged = true;
      break;
    }
    if (k >= opts.max_iter) break;

    ControlField d = v;
    d -= u;
    const auto phi = problem.section(u, d);
    double t = 1.0;
    double Jt = phi(1.0);
    if (opts.line_search == LineSearch::golden) {
      double tg = 0.0;
      const double Jg = golden_section(phi, opts.golden_iters, tg);
      if (Jg < Jt) {
        Jt = Jg;
        t = tg;
      }
    } else {
      while (Jt > J - 1e-4 * t * gap && t > 1e-12) {
        t *= 0.5;
        Jt = phi(t);
      }
    }
    for (int h = 0; !(Jt < J) && h < 40; ++h) {  // non-unimodal sections
      const double ts = std::ldexp(1.0, -h - 1);
      const double Js = phi(ts);
      if (Js < Jt) {
        Jt = Js;
        t = ts;
      }
    }
    if (!(Jt < J)) {
      if (Jt > J + 1e-12 * (1 + std::abs(J)) || gap > stall_gap * (1 + std::abs(J)) ||
          !std::isfinite(Jt)) {
        fail(ErrorKind::internal, problem.name() + ": objective did not decrease along a descent "
                                                   "direction (gap " + format_double(gap) +
                                      "); switching field inconsistent with J");
      }
      break;  // progress below rounding level
    }
    auto uv = u.values();
    auto dv = d.values();
    for (std::size_t q = 0; q < uv.size(); ++q) uv[q] += t * dv[q];
    // keep iterates inside the set despite rounding in u + t (v - u)
    if (t == 1.0) u = v;
    J = problem.evaluate(u);
    sigma = problem.switching(u);
  }
  rep.iters = k;
  rep.J = J;
  rep.gap = gap;
  rep.residual = residual_of(u, sigma);
  rep.u = std::move(u);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return rep;
}

}  // namespace detail

/// Default start: the cellwise lmo of the zero field.
inline ControlField default_start(const ControlSet& set, const MeshPtr& mesh) {
  return lmo_field(set, DualField(mesh, set.dim(), 0.0));
}

inline SolveReport frank_wolfe(const Problem& problem, const ControlSet& set,
                               const ControlField& start, const SolveOptions& opts = {}) {
  if (start.dim() != set.dim() || start.dim() != problem.control_dim()) {
    fail(ErrorKind::incompatible_field, "start field, set and problem dimensions differ");
  }
  if (!field_in_set(start, set, set.default_tol())) {
    fail(ErrorKind::precondition, "start field is not feasible");
  }
  return detail::conditional_gradient(
      problem, start, [&](const ControlField&, const DualField& s) { return lmo_field(set, s); },
      set, opts);
}

inline SolveReport frank_wolfe(const Problem& problem, const ControlSet& set, const MeshPtr& mesh,
                               const SolveOptions& opts = {}) {
  return frank_wolfe(problem, set, default_start(set, mesh), opts);
}

/// min J(u) - <xi, u> over the box intersected with the L1 ball of radius
/// gamma around center, started at the center.
inline SolveReport solve_localized(const ProblemPtr& problem, const DualField& xi,
                                   const ControlField& center, double gamma,
                                   const ControlSet& set, const SolveOptions& opts = {}) {
  if (!(gamma >= 0)) fail(ErrorKind::validation, "localization radius must be >= 0");
  const auto perturbed = with_linear_perturbation(problem, xi);
  if (!field_in_set(center, set, set.default_tol())) {
    fail(ErrorKind::precondition, "localization center is not feasible");
  }
  return detail::conditional_gradient(
      *perturbed, center,
      [&](const ControlField&, const DualField& s) { return lmo_l1ball(s, center, gamma, set); },
      set, opts);
}

/// Random vertex field: every cell draws one vertex of the set.
inline ControlField random_vertex_field(const ControlSet& set, const MeshPtr& mesh, Rng& rng) {
  const auto& verts = set.vertices();
  return ControlField::from_cells(mesh, set.dim(), [&](std::size_t, std::span<double> out) {
    const Vec& v = verts[rng.index(verts.size())];
    std::copy(v.begin(), v.end(), out.begin());
  });
}

struct MultistartReport {
  std::size_t best = 0;
  std::vector<SolveReport> runs;
  double J_spread = 0.0;  // max J - min J over the runs

  const SolveReport& best_run() const { return runs[best]; }
};

/// Start 0 is the default start; start k >= 1 is a random vertex field drawn
/// from stream k of the master seed. Ties keep the lowest start index.
inline MultistartReport multistart_global(const Problem& problem, const ControlSet& set,
                                          const MeshPtr& mesh, std::size_t n_starts,
                                          const SolveOptions& opts = {}) {
  if (n_starts < 1) fail(ErrorKind::validation, "n_starts must be >= 1");
  opts.validate();
  MultistartReport out;
  out.runs.resize(n_starts);
  parallel_for(
      n_starts,
      [&](std::size_t k) {
        ControlField start = default_start(set, mesh);
        if (k > 0) {
          Rng rng(opts.seed, k);
          start = random_vertex_field(set, mesh, rng);
        }
        out.runs[k] = frank_wolfe(problem, set, start, opts);
      },
      opts.threads);
  double lo = out.runs[0].J, hi = out.runs[0].J;
  for (std::size_t k = 1; k < n_starts; ++k) {
    if (out.runs[k].J < out.runs[out.best].J) out.best = k;
    lo = std::min(lo, out.runs[k].J);
    hi = std::max(hi, out.runs[k].J);
  }
  out.J_spread = hi - lo;
  return out;
}

inline nlohmann::json to_json(const MultistartReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"J", run.J}, {"gap", run.gap}, {"iters", run.iters}, {"converged", run.converged}});
  }
  return {{"best", r.best}, {"J_spread", r.J_spread}, {"report", to_json(r.best_run())},
          {"runs", std::move(runs)}};
}

}  // namespace bangbang
