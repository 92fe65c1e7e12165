#pragma once

// Discretized measure space on an interval and piecewise-constant vector
// fields over it. Controls live in L1, duals (perturbations, switching
// fields) in L-infinity; both are stored cell-major with m components.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bangbang/error.hpp"
#include "bangbang/numeric.hpp"

namespace bangbang {

class Mesh1D;
using MeshPtr = std::shared_ptr<const Mesh1D>;

class Mesh1D {
 public:
  static MeshPtr uniform(double a, double b, std::size_t cells) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
      fail(ErrorKind::validation, "mesh interval must satisfy a < b");
    }
    if (cells == 0) fail(ErrorKind::validation, "mesh needs at least one cell");
    std::vector<double> bounds(cells + 1);
    const double h = (b - a) / static_cast<double>(cells);
    for (std::size_t i = 0; i <= cells; ++i) {
      bounds[i] = a + h * static_cast<double>(i);
    }
    bounds.back() = b;
    std::vector<double> measure(cells, h);
    return MeshPtr(new Mesh1D(std::move(bounds), std::move(measure)));
  }

  /// Non-uniform mesh; cell measures are the boundary differences.
  static MeshPtr from_boundaries(std::vector<double> bounds) {
    std::vector<double> measure;
    if (bounds.size() >= 2) {
      measure.resize(bounds.size() - 1);
      for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        measure[i] = bounds[i + 1] - bounds[i];
      }
    }
    return from_parts(std::move(bounds), std::move(measure));
  }

  /// Explicit boundaries and measures (used by CSV round trips).
  static MeshPtr from_parts(std::vector<double> bounds, std::vector<double> measure) {
    if (bounds.size() < 2 || measure.size() + 1 != bounds.size()) {
      fail(ErrorKind::validation, "mesh needs n+1 boundaries for n cells");
    }
    for (std::size_t i = 0; i < measure.size(); ++i) {
      if (!(bounds[i] < bounds[i + 1])) {
        fail(ErrorKind::validation, "mesh boundaries must be strictly increasing");
      }
      if (!(measure[i] > 0) || !std::isfinite(measure[i])) {
        fail(ErrorKind::validation, "cell measures must be positive and finite");
      }
    }
    return MeshPtr(new Mesh1D(std::move(bounds), std::move(measure)));
  }

  std::size_t cells() const { return measure_.size(); }
  double a() const { return bounds_.front(); }
  double b() const { return bounds_.back(); }
  double left(std::size_t i) const { return bounds_[i]; }
  double right(std::size_t i) const { return bounds_[i + 1]; }
  double midpoint(std::size_t i) const { return 0.5 * (bounds_[i] + bounds_[i + 1]); }
  double measure(std::size_t i) const { return measure_[i]; }
  std::span<const double> boundaries() const { return bounds_; }
  std::span<const double> measures() const { return measure_; }

  double total_measure() const {
    CompensatedSum s;
    for (double m : measure_) s += m;
    return s.value();
  }

  /// Bisects every cell `levels` times. Child measures are exact halves.
  MeshPtr refined(int levels) const {
    if (levels < 0) fail(ErrorKind::validation, "refinement levels must be >= 0");
    std::vector<double> bounds = bounds_;
    std::vector<double> measure = measure_;
    for (int k = 0; k < levels; ++k) {
      std::vector<double> nb;
      std::vector<double> nm;
      nb.reserve(2 * bounds.size());
      nm.reserve(2 * measure.size());
      for (std::size_t i = 0; i < measure.size(); ++i) {
        nb.push_back(bounds[i]);
        nb.push_back(0.5 * (bounds[i] + bounds[i + 1]));
        nm.push_back(0.5 * measure[i]);
        nm.push_back(0.5 * measure[i]);
      }
      nb.push_back(bounds.back());
      bounds = std::move(nb);
      measure = std::move(nm);
    }
    return MeshPtr(new Mesh1D(std::move(bounds), std::move(measure)));
  }

  bool same_as(const Mesh1D& other) const {
    return this == &other || (bounds_ == other.bounds_ && measure_ == other.measure_);
  }

  /// Number of bisection levels taking this mesh to `fine`, or -1.
  int refinement_levels_to(const Mesh1D& fine) const {
    if (fine.cells() % cells() != 0) return -1;
    std::size_t ratio = fine.cells() / cells();
    int levels = 0;
    while (ratio > 1) {
      if (ratio % 2 != 0) return -1;
      ratio /= 2;
      ++levels;
    }
    if (levels == 0) return same_as(fine) ? 0 : -1;
    return refined(levels)->same_as(fine) ? levels : -1;
  }

 private:
  Mesh1D(std::vector<double> bounds, std::vector<double> measure)
      : bounds_(std::move(bounds)), measure_(std::move(measure)) {}

  std::vector<double> bounds_;
  std::vector<double> measure_;
};

inline bool same_mesh(const MeshPtr& a, const MeshPtr& b) {
  return a == b || (a && b && a->same_as(*b));
}

struct ControlTag {};
struct DualTag {};

/// Piecewise-constant m-vector field on a mesh.
template <class Tag>
class Field {
 public:
  Field() = default;

  Field(MeshPtr mesh, std::size_t dim, double fill = 0.0)
      : mesh_(std::move(mesh)), dim_(dim), values_(mesh_->cells() * dim, fill) {
    if (dim_ == 0) fail(ErrorKind::validation, "field dimension must be >= 1");
  }

  Field(MeshPtr mesh, std::size_t dim, std::vector<double> values)
      : mesh_(std::move(mesh)), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) fail(ErrorKind::validation, "field dimension must be >= 1");
    if (values_.size() != mesh_->cells() * dim_) {
      fail(ErrorKind::incompatible_field, "value count must equal cells * dimension");
    }
  }

  /// Field whose value in each cell is `fn(cell)`.
  template <class Fn>
  static Field from_cells(MeshPtr mesh, std::size_t dim, Fn&& fn) {
    Field f(mesh, dim);
    for (std::size_t i = 0; i < mesh->cells(); ++i) {
      auto v = f.cell(i);
      fn(i, v);
    }
    return f;
  }

  /// Scalar field of cell averages of g, by 5-point Gauss-Legendre per cell.
  template <class Fn>
  static Field cell_average(MeshPtr mesh, Fn&& g) {
    Field f(mesh, 1);
    for (std::size_t i = 0; i < mesh->cells(); ++i) {
      f(i, 0) = gauss_average(g, mesh->left(i), mesh->right(i));
    }
    return f;
  }

  const MeshPtr& mesh() const { return mesh_; }
  std::size_t dim() const { return dim_; }
  std::size_t cells() const { return mesh_ ? mesh_->cells() : 0; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double& operator()(std::size_t cell, std::size_t comp) { return values_[cell * dim_ + comp]; }
  double operator()(std::size_t cell, std::size_t comp) const {
    return values_[cell * dim_ + comp];
  }

  std::span<double> cell(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> cell(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }

  /// Reinterprets the same values under another role (control <-> dual).
  template <class Other>
  Field<Other> as() const {
    return Field<Other>(mesh_, dim_, values_);
  }

  Field& operator+=(const Field& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_compatible(o);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  void check_compatible(const Field& o) const {
    if (dim_ != o.dim_ || !same_mesh(mesh_, o.mesh_)) {
      fail(ErrorKind::incompatible_field, "fields live on different meshes or dimensions");
    }
  }

  template <class G>
  static double gauss_average(G&& g, double l, double r) {
    static constexpr std::array<double, 5> nodes = {
        0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
        0.9061798459386640};
    static constexpr std::array<double, 5> weights = {
        0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
        0.2369268850561891};
    const double c = 0.5 * (l + r);
    const double h = 0.5 * (r - l);
    double s = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) s += weights[q] * g(c + h * nodes[q]);
    return 0.5 * s;
  }

 private:
  MeshPtr mesh_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

using ControlField = Field<ControlTag>;
using DualField = Field<DualTag>;

template <class A, class B>
void require_same_layout(const Field<A>& u, const Field<B>& v) {
  if (u.dim() != v.dim() || !same_mesh(u.mesh(), v.mesh())) {
    fail(ErrorKind::incompatible_field, "fields live on different meshes or dimensions");
  }
}

/// |u - v| in L1(X)^m: sum over cells of measure times the component-wise
/// absolute difference.
inline double l1_distance(const ControlField& u, const ControlField& v) {
  require_same_layout(u, v);
  const Mesh1D& mesh = *u.mesh();
  CompensatedSum s;
  for (std::size_t i = 0; i < mesh.cells(); ++i) {
    double cell = 0.0;
    for (std::size_t j = 0; j < u.dim(); ++j) cell += std::abs(u(i, j) - v(i, j));
    s += mesh.measure(i) * cell;
  }
  return s.value();
}

inline double l1_norm(const ControlField& u) {
  return l1_distance(u, ControlField(u.mesh(), u.dim()));
}

template <class Tag>
double linf_norm(const Field<Tag>& f) {
  double best = 0.0;
  for (double v : f.values()) best = std::max(best, std::abs(v));
  return best;
}

/// Integral of xi . u over the mesh.
inline double pairing(const DualField& xi, const ControlField& u) {
  require_same_layout(xi, u);
  const Mesh1D& mesh = *u.mesh();
  CompensatedSum s;
  for (std::size_t i = 0; i < mesh.cells(); ++i) {
    double cell = 0.0;
    for (std::size_t j = 0; j < u.dim(); ++j) cell += xi(i, j) * u(i, j);
    s += mesh.measure(i) * cell;
  }
  return s.value();
}

/// Copies each cell value into its 2^levels children.
template <class Tag>
Field<Tag> refine_and_prolong(const Field<Tag>& f, int levels) {
  if (levels < 0) fail(ErrorKind::validation, "refinement levels must be >= 0");
  if (levels == 0) return f;
  MeshPtr fine = f.mesh()->refined(levels);
  const std::size_t ratio = std::size_t{1} << levels;
  return Field<Tag>::from_cells(fine, f.dim(), [&](std::size_t i, std::span<double> out) {
    const auto src = f.cell(i / ratio);
    std::copy(src.begin(), src.end(), out.begin());
  });
}

/// Prolongs `f` onto `target` when target is a dyadic refinement of f's mesh.
template <class Tag>
Field<Tag> prolong_to(const Field<Tag>& f, const MeshPtr& target) {
  if (same_mesh(f.mesh(), target)) return f;
  const int levels = f.mesh()->refinement_levels_to(*target);
  if (levels < 0) {
    fail(ErrorKind::incompatible_field, "target mesh is not a dyadic refinement");
  }
  Field<Tag> out = refine_and_prolong(f, levels);
  return Field<Tag>(target, out.dim(), std::vector<double>(out.values().begin(), out.values().end()));
}

/// Brings two fields onto the finer of their two meshes.
template <class A, class B>
std::pair<Field<A>, Field<B>> on_common_mesh(const Field<A>& u, const Field<B>& v) {
  if (same_mesh(u.mesh(), v.mesh())) return {u, v};
  if (u.cells() <= v.cells()) return {prolong_to(u, v.mesh()), v};
  return {u, prolong_to(v, u.mesh())};
}

/// Finite family of scalar test functions standing in for the dual of L1.
/// Members are materialized as cell averages on whatever mesh is asked for,
/// and each member is applied to every component separately.
class TestBank {
 public:
  struct Member {
    std::string label;
    std::function<double(double)> fn;
    double sup_norm;
  };

  TestBank() = default;

  /// Monomials t^0..t^degree on [a, b]; sup norms are the continuous ones.
  static TestBank monomials(int degree, double a = 0.0, double b = 1.0) {
    if (degree < 0) fail(ErrorKind::validation, "bank degree must be >= 0");
    TestBank bank;
    for (int k = 0; k <= degree; ++k) {
      const double sup = std::max(std::pow(std::abs(a), k), std::pow(std::abs(b), k));
      bank.add("t^" + std::to_string(k), [k](double t) { return std::pow(t, k); },
               sup > 0 ? sup : 1.0);
    }
    return bank;
  }

  void add(std::string label, std::function<double(double)> fn, double sup_norm) {
    if (!(sup_norm > 0)) fail(ErrorKind::validation, "bank member sup-norm must be > 0");
    members_.push_back({std::move(label), std::move(fn), sup_norm});
  }

  const std::vector<Member>& members() const { return members_; }
  bool empty() const { return members_.empty(); }
  std::size_t size() const { return members_.size(); }

  DualField materialize(std::size_t member, const MeshPtr& mesh) const {
    return DualField::cell_average(mesh, members_.at(member).fn);
  }

 private:
  std::vector<Member> members_;
};

inline constexpr int kDefaultBankDegree = 8;

/// max over bank members phi and components j of |<phi e_j, u - v>| / |phi|_inf.
inline double weak_gap(const ControlField& u, const ControlField& v, const TestBank& bank) {
  if (bank.empty()) fail(ErrorKind::validation, "weak_gap needs a non-empty test bank");
  auto [uu, vv] = on_common_mesh(u, v);
  require_same_layout(uu, vv);
  const MeshPtr& mesh = uu.mesh();
  double gap = 0.0;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    const DualField phi = bank.materialize(k, mesh);
    for (std::size_t j = 0; j < uu.dim(); ++j) {
      CompensatedSum s;
      for (std::size_t i = 0; i < mesh->cells(); ++i) {
        s += mesh->measure(i) * phi(i, 0) * (uu(i, j) - vv(i, j));
      }
      gap = std::max(gap, std::abs(s.value()) / bank.members()[k].sup_norm);
    }
  }
  return gap;
}

// CSV: cell_index,t_left,t_right,measure,v0..v{m-1}

template <class Tag>
void write_csv(std::ostream& os, const Field<Tag>& f) {
  os << "cell_index,t_left,t_right,measure";
  for (std::size_t j = 0; j < f.dim(); ++j) os << ",v" << j;
  os << '\n';
  const Mesh1D& mesh = *f.mesh();
  for (std::size_t i = 0; i < mesh.cells(); ++i) {
    os << i << ',' << format_double(mesh.left(i)) << ',' << format_double(mesh.right(i)) << ','
       << format_double(mesh.measure(i));
    for (std::size_t j = 0; j < f.dim(); ++j) os << ',' << format_double(f(i, j));
    os << '\n';
  }
}

template <class Tag>
std::string to_csv(const Field<Tag>& f) {
  std::ostringstream os;
  write_csv(os, f);
  return os.str();
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

template <class Tag = ControlTag>
Field<Tag> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::validation, "empty field CSV");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 5 || header[0] != "cell_index" || header[1] != "t_left" ||
      header[2] != "t_right" || header[3] != "measure") {
    fail(ErrorKind::validation, "field CSV header must be cell_index,t_left,t_right,measure,v0..");
  }
  const std::size_t dim = header.size() - 4;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[4 + j] != "v" + std::to_string(j)) {
      fail(ErrorKind::validation, "field CSV value columns must be v0..v{m-1}");
    }
  }
  std::vector<double> bounds;
  std::vector<double> measure;
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split_csv_line(line);
    if (cols.size() != header.size()) fail(ErrorKind::validation, "ragged field CSV row");
    if (cols[0] != std::to_string(row)) fail(ErrorKind::validation, "cell_index out of order");
    double l = 0, r = 0, mu = 0;
    if (!parse_double(cols[1], l) || !parse_double(cols[2], r) || !parse_double(cols[3], mu)) {
      fail(ErrorKind::validation, "malformed number in field CSV");
    }
    if (row == 0) {
      bounds.push_back(l);
    } else if (bounds.back() != l) {
      fail(ErrorKind::validation, "field CSV cells are not contiguous");
    }
    bounds.push_back(r);
    measure.push_back(mu);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0;
      if (!parse_double(cols[4 + j], v)) fail(ErrorKind::validation, "malformed field value");
      values.push_back(v);
    }
    ++row;
  }
  MeshPtr mesh = Mesh1D::from_parts(std::move(bounds), std::move(measure));
  return Field<Tag>(mesh, dim, std::move(values));
}

template <class Tag = ControlTag>
Field<Tag> from_csv(const std::string& text) {
  std::istringstream is(text);
  return read_csv<Tag>(is);
}

}  // namespace bangbang
