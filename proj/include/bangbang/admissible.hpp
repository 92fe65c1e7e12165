#pragma once

// Pointwise control sets U (boxes and vertex-listed polytopes) and the
// cellwise oracles built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bangbang/error.hpp"
#include "bangbang/meshfield.hpp"
#include "bangbang/simplex.hpp"

namespace bangbang {

using Vec = std::vector<double>;

struct Box {
  Vec lo;
  Vec hi;
};

struct Polytope {
  std::vector<Vec> vertices;
};

class ControlSet {
 public:
  static ControlSet box(Vec lo, Vec hi) {
    if (lo.empty() || lo.size() != hi.size()) {
      fail(ErrorKind::validation, "box bounds need matching non-empty lo/hi");
    }
    for (std::size_t j = 0; j < lo.size(); ++j) {
      if (!(lo[j] < hi[j]) || !std::isfinite(lo[j]) || !std::isfinite(hi[j])) {
        fail(ErrorKind::validation, "box requires finite lo < hi in every component");
      }
    }
    ControlSet s;
    s.shape_ = Box{std::move(lo), std::move(hi)};
    s.finish();
    return s;
  }

  static ControlSet interval(double lo, double hi) { return box({lo}, {hi}); }

  /// Polytope from its vertex list; duplicates are dropped and every vertex
  /// must be extreme (not in the hull of the others).
  static ControlSet polytope(std::vector<Vec> vertices) {
    if (vertices.size() < 2) fail(ErrorKind::validation, "polytope needs >= 2 vertices");
    const std::size_t m = vertices.front().size();
    if (m == 0) fail(ErrorKind::validation, "polytope vertices must be non-empty");
    for (const auto& v : vertices) {
      if (v.size() != m) fail(ErrorKind::validation, "polytope vertices differ in dimension");
      for (double x : v) {
        if (!std::isfinite(x)) fail(ErrorKind::validation, "polytope vertex is not finite");
      }
    }
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    if (vertices.size() < 2) fail(ErrorKind::validation, "polytope needs >= 2 distinct vertices");
    for (std::size_t k = 0; k < vertices.size(); ++k) {
      std::vector<Vec> others;
      for (std::size_t l = 0; l < vertices.size(); ++l) {
        if (l != k) others.push_back(vertices[l]);
      }
      if (hull_distance(others, vertices[k]) <= 1e-12) {
        fail(ErrorKind::validation, "polytope vertex is not an extreme point");
      }
    }
    ControlSet s;
    s.shape_ = Polytope{std::move(vertices)};
    s.finish();
    return s;
  }

  std::size_t dim() const { return vertices_.front().size(); }
  bool is_box() const { return std::holds_alternative<Box>(shape_); }
  const Box& as_box() const {
    if (!is_box()) fail(ErrorKind::validation, "operation is only defined for box control sets");
    return std::get<Box>(shape_);
  }
  /// ext U, in lexicographic order.
  const std::vector<Vec>& vertices() const { return vertices_; }
  double diameter() const { return diameter_; }
  /// max vertex Euclidean norm.
  double sup_norm() const { return sup_norm_; }

  /// Bang-bang tolerance: 1e-9 times the diameter.
  double default_tol() const { return 1e-9 * diameter_; }

  bool contains(std::span<const double> v, double tol = 0.0) const {
    if (v.size() != dim()) return false;
    if (is_box()) {
      const Box& b = as_box();
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] < b.lo[j] - tol || v[j] > b.hi[j] + tol) return false;
      }
      return true;
    }
    return hull_distance(vertices_, Vec(v.begin(), v.end())) <= tol;
  }

  /// argmin over ext U of c.v; ties go to the lexicographically smallest vertex.
  Vec lmo(std::span<const double> c) const {
    if (is_box()) {
      const Box& b = as_box();
      Vec v(dim());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = c[j] < 0 ? b.hi[j] : b.lo[j];
      return v;
    }
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < vertices_.size(); ++k) {
      double val = 0.0;
      for (std::size_t j = 0; j < dim(); ++j) val += c[j] * vertices_[k][j];
      if (val < best_val) {
        best_val = val;
        best = k;
      }
    }
    return vertices_[best];
  }

  /// Infinity-norm distance to the nearest vertex.
  double vertex_distance(std::span<const double> v) const {
    if (is_box()) {
      const Box& b = as_box();
      double d = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        d = std::max(d, std::min(std::abs(v[j] - b.lo[j]), std::abs(v[j] - b.hi[j])));
      }
      return d;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& vert : vertices_) {
      double d = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) d = std::max(d, std::abs(v[j] - vert[j]));
      best = std::min(best, d);
    }
    return best;
  }

  std::string describe() const;

 private:
  ControlSet() = default;

  void finish() {
    if (is_box()) {
      const Box& b = std::get<Box>(shape_);
      const std::size_t m = b.lo.size();
      if (m > 20) fail(ErrorKind::validation, "box dimension too large for vertex listing");
      vertices_.clear();
      for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        Vec v(m);
        for (std::size_t j = 0; j < m; ++j) {
          // component 0 is the most significant bit, so the listing is lexicographic
          v[j] = (mask >> (m - 1 - j)) & 1 ? b.hi[j] : b.lo[j];
        }
        vertices_.push_back(std::move(v));
      }
    } else {
      vertices_ = std::get<Polytope>(shape_).vertices;
    }
    diameter_ = 0.0;
    sup_norm_ = 0.0;
    for (const auto& v : vertices_) {
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      sup_norm_ = std::max(sup_norm_, std::sqrt(n2));
      for (const auto& w : vertices_) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) d2 += (v[j] - w[j]) * (v[j] - w[j]);
        diameter_ = std::max(diameter_, std::sqrt(d2));
      }
    }
  }

  /// min over convex weights lambda of |sum_k lambda_k v_k - x|_inf, via LP.
  static double hull_distance(const std::vector<Vec>& verts, const Vec& x) {
    const std::size_t k = verts.size();
    const std::size_t m = x.size();
    // variables: lambda (k), s (1), slack+ (m), slack- (m)
    // rows:  sum lambda = 1
    //        V lambda - x + s - p = 0   (p >= 0)  => V lambda - x >= -s
    //        V lambda - x - s + q = 0   (q >= 0)  => V lambda - x <= s
    LinearProgram lp(1 + 2 * m, k + 1 + 2 * m);
    for (std::size_t l = 0; l < k; ++l) lp.at(0, l) = 1.0;
    lp.b[0] = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < k; ++l) {
        lp.at(1 + j, l) = verts[l][j];
        lp.at(1 + m + j, l) = verts[l][j];
      }
      lp.at(1 + j, k) = 1.0;
      lp.at(1 + j, k + 1 + j) = -1.0;
      lp.b[1 + j] = x[j];
      lp.at(1 + m + j, k) = -1.0;
      lp.at(1 + m + j, k + 1 + m + j) = 1.0;
      lp.b[1 + m + j] = x[j];
    }
    lp.c[k] = 1.0;
    const LpResult r = solve_lp(lp);
    if (r.status != LpStatus::optimal) return std::numeric_limits<double>::infinity();
    return std::max(0.0, r.x[k]);
  }

  std::variant<Box, Polytope> shape_;
  std::vector<Vec> vertices_;
  double diameter_ = 0.0;
  double sup_norm_ = 0.0;
};

inline std::string ControlSet::describe() const {
  auto list = [](const Vec& v) {
    std::string s = "[";
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (j) s += ",";
      s += format_double(v[j]);
    }
    return s + "]";
  };
  if (is_box()) {
    const Box& b = as_box();
    return "box(lo=" + list(b.lo) + ", hi=" + list(b.hi) + ")";
  }
  std::string s = "polytope(vertices=[";
  for (std::size_t k = 0; k < vertices_.size(); ++k) {
    if (k) s += ",";
    s += list(vertices_[k]);
  }
  return s + "])";
}

inline bool contains(const ControlSet& set, std::span<const double> v, double tol) {
  if (tol < 0) fail(ErrorKind::validation, "tolerance must be >= 0");
  return set.contains(v, tol);
}

inline Vec lmo_pointwise(const ControlSet& set, std::span<const double> c) {
  if (c.size() != set.dim()) fail(ErrorKind::validation, "direction dimension mismatch");
  return set.lmo(c);
}

/// Every cell contained in U (within tol).
inline bool field_in_set(const ControlField& u, const ControlSet& set, double tol) {
  for (std::size_t i = 0; i < u.cells(); ++i) {
    if (!set.contains(u.cell(i), tol)) return false;
  }
  return true;
}

/// Cellwise lmo of a dual field: the extreme-point field minimizing <c, v>.
inline ControlField lmo_field(const ControlSet& set, const DualField& c) {
  if (c.dim() != set.dim()) fail(ErrorKind::incompatible_field, "dual/set dimension mismatch");
  return ControlField::from_cells(c.mesh(), c.dim(), [&](std::size_t i, std::span<double> out) {
    const Vec v = set.lmo(c.cell(i));
    std::copy(v.begin(), v.end(), out.begin());
  });
}

/// Measure of the cells whose value is farther than tol from every vertex.
inline double extreme_defect(const ControlField& u, const ControlSet& set, double tol) {
  if (tol < 0) fail(ErrorKind::validation, "tolerance must be >= 0");
  if (u.dim() != set.dim()) fail(ErrorKind::incompatible_field, "field/set dimension mismatch");
  CompensatedSum s;
  for (std::size_t i = 0; i < u.cells(); ++i) {
    if (set.vertex_distance(u.cell(i)) > tol) s += u.mesh()->measure(i);
  }
  return s.value();
}

inline double extreme_defect(const ControlField& u, const ControlSet& set) {
  return extreme_defect(u, set, set.default_tol());
}

/// Distance of -sigma to the box normal cone at u_x, maximized over components.
inline double kkt_residual_pointwise(const ControlSet& set, std::span<const double> u_x,
                                     std::span<const double> sigma_x) {
  const Box& b = set.as_box();
  const double tol = set.default_tol();
  if (!set.contains(u_x, tol)) fail(ErrorKind::precondition, "kkt residual: point outside set");
  double res = 0.0;
  for (std::size_t j = 0; j < u_x.size(); ++j) {
    const double width = b.hi[j] - b.lo[j];
    const bool at_lo = u_x[j] <= b.lo[j] + 1e-9 * width;
    const bool at_hi = u_x[j] >= b.hi[j] - 1e-9 * width;
    const double s = sigma_x[j];
    double r;
    if (at_lo && at_hi) {
      r = 0.0;
    } else if (at_lo) {
      r = std::max(-s, 0.0);  // N = (-inf, 0]
    } else if (at_hi) {
      r = std::max(s, 0.0);  // N = [0, inf)
    } else {
      r = std::abs(s);
    }
    res = std::max(res, r);
  }
  return res;
}

struct MidpointSplit {
  Vec alpha;
  Vec beta;
  std::size_t component;
  double amplitude;
};

/// Writes u_x as the midpoint of two distinct points of the box, moving
/// along the coordinate with the largest two-sided slack. Empty at vertices.
inline std::optional<MidpointSplit> midpoint_split(const ControlSet& set,
                                                   std::span<const double> u_x,
                                                   double tol) {
  const Box& b = set.as_box();
  if (!set.contains(u_x, tol)) fail(ErrorKind::precondition, "midpoint split: point outside set");
  std::size_t best = 0;
  double slack = -1.0;
  for (std::size_t j = 0; j < u_x.size(); ++j) {
    const double s = std::min(u_x[j] - b.lo[j], b.hi[j] - u_x[j]);
    if (s > slack) {
      slack = s;
      best = j;
    }
  }
  if (slack <= tol) return std::nullopt;
  MidpointSplit out{Vec(u_x.begin(), u_x.end()), Vec(u_x.begin(), u_x.end()), best, slack};
  out.alpha[best] -= slack;
  out.beta[best] += slack;
  return out;
}

inline std::optional<MidpointSplit> midpoint_split(const ControlSet& set,
                                                   std::span<const double> u_x) {
  return midpoint_split(set, u_x, set.default_tol());
}

/// Sampled lower bounds for the radii attached to a reference point. A
/// radius is a lower bound by construction, so unset entries stay at 0.
struct RadiusEstimates {
  struct Entry {
    double value = 0.0;
    std::string probe;
  };
  Entry r_hat;      // strict minimality
  Entry gamma_hat;  // stability
  Entry kappa_hat;  // subregularity
  Entry r_check;    // criticality
};

}  // namespace bangbang
