#pragma once

// Finite-difference check of a problem's switching field: central
// differences of J along random directions against pairing(sigma_u, d).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"

#include "bangbang/admissible.hpp"
#include "bangbang/meshfield.hpp"
#include "bangbang/problem.hpp"
#include "bangbang/random.hpp"

namespace bangbang {

struct GradcheckOptions {
  std::size_t directions = 20;
  double step = 1e-4;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  /// Optional hook applied to sigma before pairing; tests use it to corrupt
  /// the switching field.
  std::function<void(DualField&)> tamper;
};

struct GradcheckEntry {
  double finite_difference;
  double analytic;
  double rel_error;
};

struct GradcheckReport {
  ControlField point;
  std::vector<GradcheckEntry> entries;
  std::size_t worst = 0;
  ControlField worst_direction;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Random point strictly inside the set: a random convex combination of
/// the vertices pulled halfway toward their centroid.
inline ControlField interior_point(const ControlSet& set, const MeshPtr& mesh, Rng& rng) {
  const auto& verts = set.vertices();
  Vec centroid(set.dim(), 0.0);
  for (const auto& v : verts) {
    for (std::size_t j = 0; j < v.size(); ++j) centroid[j] += v[j] / double(verts.size());
  }
  return ControlField::from_cells(mesh, set.dim(), [&](std::size_t, std::span<double> out) {
    std::vector<double> w(verts.size());
    double total = 0.0;
    for (double& x : w) total += (x = -std::log(1.0 - rng.uniform()));
    for (std::size_t j = 0; j < out.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < verts.size(); ++k) s += w[k] / total * verts[k][j];
      out[j] = 0.5 * (s + centroid[j]);
    }
  });
}

/// Relative error |fd - an| / max(|fd|, |an|, 1e-12); a direction passes
/// when it is at most opts.tol.
inline GradcheckReport gradcheck(const Problem& problem, const ControlSet& set, const MeshPtr& mesh,
                                 const GradcheckOptions& opts = {}) {
  if (opts.directions < 1) fail(ErrorKind::validation, "gradcheck needs at least one direction");
  if (!(opts.step > 0)) fail(ErrorKind::validation, "gradcheck step must be > 0");
  Rng point_rng(opts.seed, 0);
  GradcheckReport rep;
  rep.point = interior_point(set, mesh, point_rng);
  DualField sigma = problem.switching(rep.point);
  if (opts.tamper) opts.tamper(sigma);
  for (std::size_t k = 0; k < opts.directions; ++k) {
    Rng rng(opts.seed, k + 1);
    ControlField d = ControlField::from_cells(mesh, set.dim(), [&](std::size_t, std::span<double> out) {
      for (double& x : out) x = rng.uniform(-1, 1);
    });
    ControlField up = rep.point, um = rep.point;
    for (std::size_t q = 0; q < d.values().size(); ++q) {
      up.values()[q] += opts.step * d.values()[q];
      um.values()[q] -= opts.step * d.values()[q];
    }
    const double fd = (problem.evaluate(up) - problem.evaluate(um)) / (2 * opts.step);
    const double an = pairing(sigma, d);
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-12});
    rep.entries.push_back({fd, an, rel});
    if (k == 0 || rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst = k;
      rep.worst_direction = d;
    }
  }
  rep.passed = rep.max_rel_error <= opts.tol;
  return rep;
}

inline nlohmann::json to_json(const GradcheckReport& r, double tol) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"fd", e.finite_difference}, {"analytic", e.analytic}, {"rel_error", e.rel_error}});
  }
  return {{"passed", r.passed}, {"tol", tol}, {"max_rel_error", r.max_rel_error},
          {"worst", r.worst}, {"directions", std::move(entries)}};
}

}  // namespace bangbang
