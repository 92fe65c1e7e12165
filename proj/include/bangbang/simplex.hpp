#pragma once

// Dense two-phase primal simplex for small bounded LPs:
//
//   minimize c.x  subject to  A x = b,  0 <= x <= upper.
//
// Nonbasic variables sit at either bound. Entering variables are priced by
// the largest reduced cost; after a run of degenerate pivots the choice
// falls back to Bland's smallest-index rule, which cannot cycle. Ties in the
// ratio test always go to the smallest index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bangbang/error.hpp"

namespace bangbang {

struct LinearProgram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;      // row-major, rows x cols
  std::vector<double> b;      // rows
  std::vector<double> c;      // cols
  std::vector<double> upper;  // cols, +inf allowed

  LinearProgram() = default;
  LinearProgram(std::size_t m, std::size_t n)
      : rows(m), cols(n), a(m * n, 0.0), b(m, 0.0), c(n, 0.0),
        upper(n, std::numeric_limits<double>::infinity()) {}

  double& at(std::size_t r, std::size_t j) { return a[r * cols + j]; }
  double at(std::size_t r, std::size_t j) const { return a[r * cols + j]; }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
};

struct LpOptions {
  double tolerance = 1e-11;
  std::size_t max_iterations = 200000;
};

namespace detail {

class BoundedSimplex {
 public:
  static constexpr std::size_t kDegenerateRun = 50;

  enum class Status { basic, lower, upper };

  BoundedSimplex(std::size_t m, std::size_t n, std::vector<double> tableau,
                 std::vector<double> upper, std::vector<std::size_t> basis,
                 std::vector<double> basic_values, const LpOptions& opts)
      : m_(m), n_(n), t_(std::move(tableau)), upper_(std::move(upper)),
        basis_(std::move(basis)), xb_(std::move(basic_values)), status_(n, Status::lower),
        opts_(opts) {
    for (std::size_t r = 0; r < m_; ++r) status_[basis_[r]] = Status::basic;
  }

  double& t(std::size_t r, std::size_t j) { return t_[r * n_ + j]; }
  double t(std::size_t r, std::size_t j) const { return t_[r * n_ + j]; }

  /// Runs simplex iterations for `cost` from the current basis.
  LpStatus optimize(const std::vector<double>& cost, std::size_t& iterations) {
    std::vector<double> d = reduced_costs(cost);
    const double tol = opts_.tolerance;
    std::size_t degenerate = 0;
    while (true) {
      if (iterations >= opts_.max_iterations) return LpStatus::iteration_limit;
      // Dantzig pricing; Bland's rule while a run of degenerate pivots lasts
      const bool bland = degenerate >= kDegenerateRun;
      std::size_t enter = n_;
      double dir = 0.0, best = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        if (status_[j] == Status::basic) continue;
        if (upper_[j] <= 0.0 && status_[j] == Status::lower) continue;
        double gain = 0.0, sign = 0.0;
        if (status_[j] == Status::lower && d[j] < -tol) {
          gain = -d[j];
          sign = 1.0;
        } else if (status_[j] == Status::upper && d[j] > tol) {
          gain = d[j];
          sign = -1.0;
        } else {
          continue;
        }
        if (gain > best) {
          enter = j;
          dir = sign;
          best = gain;
          if (bland) break;
        }
      }
      if (enter == n_) return LpStatus::optimal;
      ++iterations;

      double theta = upper_[enter];
      std::size_t leave_row = m_;
      bool leave_to_upper = false;
      for (std::size_t r = 0; r < m_; ++r) {
        const double rate = -dir * t(r, enter);
        if (std::abs(rate) <= tol) continue;
        const std::size_t var = basis_[r];
        double limit;
        bool to_upper;
        if (rate < 0) {
          limit = std::max(0.0, xb_[r]) / -rate;
          to_upper = false;
        } else {
          if (!std::isfinite(upper_[var])) continue;
          limit = std::max(0.0, upper_[var] - xb_[r]) / rate;
          to_upper = true;
        }
        const double eps = tol * (1.0 + std::abs(limit));
        if (limit < theta - eps ||
            (leave_row < m_ && limit <= theta + eps && var < basis_[leave_row])) {
          theta = limit;
          leave_row = r;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(theta)) return LpStatus::unbounded;
      degenerate = theta <= tol ? degenerate + 1 : 0;

      for (std::size_t r = 0; r < m_; ++r) xb_[r] -= dir * theta * t(r, enter);
      if (leave_row == m_) {
        status_[enter] = dir > 0 ? Status::upper : Status::lower;
        continue;
      }
      const double enter_value = (dir > 0 ? 0.0 : upper_[enter]) + dir * theta;
      const std::size_t leaving = basis_[leave_row];
      status_[leaving] = leave_to_upper ? Status::upper : Status::lower;
      pivot(leave_row, enter, d);
      basis_[leave_row] = enter;
      status_[enter] = Status::basic;
      xb_[leave_row] = enter_value;
    }
  }

  std::vector<double> solution() const {
    std::vector<double> x(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (status_[j] == Status::upper) x[j] = upper_[j];
    }
    for (std::size_t r = 0; r < m_; ++r) x[basis_[r]] = xb_[r];
    return x;
  }

  std::vector<double>& upper() { return upper_; }
  const std::vector<std::size_t>& basis() const { return basis_; }
  std::vector<double>& basic_values() { return xb_; }
  Status status(std::size_t j) const { return status_[j]; }

  /// Pivots basic variable in `row` out in favour of column `enter`.
  void force_pivot(std::size_t row, std::size_t enter) {
    std::vector<double> dummy(n_, 0.0);
    const std::size_t leaving = basis_[row];
    status_[leaving] = Status::lower;
    pivot(row, enter, dummy);
    basis_[row] = enter;
    status_[enter] = Status::basic;
    xb_[row] = 0.0;
  }

 private:
  std::vector<double> reduced_costs(const std::vector<double>& cost) const {
    std::vector<double> d(cost);
    for (std::size_t r = 0; r < m_; ++r) {
      const double cb = cost[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < n_; ++j) d[j] -= cb * t(r, j);
    }
    for (std::size_t r = 0; r < m_; ++r) d[basis_[r]] = 0.0;
    return d;
  }

  void pivot(std::size_t row, std::size_t col, std::vector<double>& d) {
    const double p = t(row, col);
    for (std::size_t j = 0; j < n_; ++j) t(row, j) /= p;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == row) continue;
      const double f = t(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n_; ++j) t(r, j) -= f * t(row, j);
      t(r, col) = 0.0;
    }
    const double f = d[col];
    if (f != 0.0) {
      for (std::size_t j = 0; j < n_; ++j) d[j] -= f * t(row, j);
      d[col] = 0.0;
    }
  }

  std::size_t m_;
  std::size_t n_;
  std::vector<double> t_;
  std::vector<double> upper_;
  std::vector<std::size_t> basis_;
  std::vector<double> xb_;
  std::vector<Status> status_;
  LpOptions opts_;
};

}  // namespace detail

inline LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {}) {
  const std::size_t m = lp.rows;
  const std::size_t n = lp.cols;
  if (lp.a.size() != m * n || lp.b.size() != m || lp.c.size() != n || lp.upper.size() != n) {
    fail(ErrorKind::validation, "linear program has inconsistent dimensions");
  }
  for (double u : lp.upper) {
    if (!(u >= 0.0)) fail(ErrorKind::validation, "variable upper bounds must be >= 0");
  }

  // Row scaling (max-abs to 1) and b >= 0, then one artificial per row.
  const std::size_t total = n + m;
  std::vector<double> tableau(m * total, 0.0);
  std::vector<double> rhs(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    double scale = std::abs(lp.b[r]);
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(lp.at(r, j)));
    if (scale == 0.0) scale = 1.0;
    const double sign = lp.b[r] < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) tableau[r * total + j] = sign * lp.at(r, j) / scale;
    tableau[r * total + n + r] = 1.0;
    rhs[r] = sign * lp.b[r] / scale;
  }
  std::vector<double> upper(lp.upper);
  upper.resize(total, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) basis[r] = n + r;

  detail::BoundedSimplex simplex(m, total, std::move(tableau), std::move(upper), basis, rhs,
                                 opts);
  LpResult result;
  std::vector<double> phase1(total, 0.0);
  for (std::size_t r = 0; r < m; ++r) phase1[n + r] = 1.0;
  LpStatus st = simplex.optimize(phase1, result.iterations);
  if (st == LpStatus::iteration_limit) {
    result.status = st;
    return result;
  }
  {
    const auto x = simplex.solution();
    double infeas = 0.0;
    double rhs_scale = 1.0;
    for (std::size_t r = 0; r < m; ++r) {
      infeas += x[n + r];
      rhs_scale = std::max(rhs_scale, rhs[r]);
    }
    if (infeas > 1e-9 * rhs_scale) {
      result.status = LpStatus::infeasible;
      return result;
    }
  }
  // Drive zero-valued artificials out of the basis where possible; the rest
  // belong to redundant rows and are pinned at zero.
  for (std::size_t r = 0; r < m; ++r) {
    if (simplex.basis()[r] < n) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (simplex.status(j) == detail::BoundedSimplex::Status::basic) continue;
      if (std::abs(simplex.t(r, j)) > 1e-9) {
        if (simplex.status(j) != detail::BoundedSimplex::Status::lower) continue;
        simplex.force_pivot(r, j);
        break;
      }
    }
  }
  for (std::size_t r = 0; r < m; ++r) simplex.upper()[n + r] = 0.0;

  double cscale = 0.0;
  for (double v : lp.c) cscale = std::max(cscale, std::abs(v));
  if (cscale == 0.0) cscale = 1.0;
  std::vector<double> phase2(total, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.c[j] / cscale;
  st = simplex.optimize(phase2, result.iterations);
  result.status = st;
  auto x = simplex.solution();
  x.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = std::clamp(x[j], 0.0, lp.upper[j]);
  }
  result.x = std::move(x);
  double obj = 0.0;
  for (std::size_t j = 0; j < n; ++j) obj += lp.c[j] * result.x[j];
  result.objective = obj;
  return result;
}

}  // namespace bangbang
