#pragma once

// Experiment layer: clustering sequences, the weak-ball dichotomy LP, growth
// profiles, and sampled stability / subregularity / genericity /
// regularization probes. Every probe is sample-parallel; sample k draws
// from stream k of the probe seed and writes row k, so records do not
// depend on the worker count.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bangbang/admissible.hpp"
#include "bangbang/error.hpp"
#include "bangbang/meshfield.hpp"
#include "bangbang/numeric.hpp"
#include "bangbang/parallel.hpp"
#include "bangbang/problem.hpp"
#include "bangbang/random.hpp"
#include "bangbang/simplex.hpp"
#include "bangbang/solver.hpp"

namespace bangbang {

// ---------------------------------------------------------------- records

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

struct ProbeRow {
  double param = 0.0;  // delta, kappa, eta or epsilon of the sweep
  std::size_t sample = 0;
  std::string family;
  double perturbation_norm = kNotApplicable;
  double distance = kNotApplicable;
  double residual = kNotApplicable;
  double j_gap = kNotApplicable;
  double defect = kNotApplicable;
  std::string flag;  // "", "boundary", "degenerate", "bound_violation", "error: ..."
};

struct ProbeRecord {
  std::string probe;
  std::string instance;
  std::uint64_t seed = 0;
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<ProbeRow> rows;
  nlohmann::json summary = nlohmann::json::object();

  std::string file_stem() const { return probe + "_" + instance + "_" + std::to_string(seed); }
};

inline const char* kProbeCsvHeader =
    "probe,param,sample,family,perturbation_norm,distance,residual,j_gap,defect,flag";

namespace detail {

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + '"';
}

inline nlohmann::json json_number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline void write_csv(std::ostream& os, const ProbeRecord& rec) {
  os << kProbeCsvHeader << '\n';
  for (const auto& r : rec.rows) {
    os << detail::csv_text(rec.probe) << ',' << format_double(r.param) << ',' << r.sample << ','
       << detail::csv_text(r.family) << ',' << detail::csv_number(r.perturbation_norm) << ','
       << detail::csv_number(r.distance) << ',' << detail::csv_number(r.residual) << ','
       << detail::csv_number(r.j_gap) << ',' << detail::csv_number(r.defect) << ','
       << detail::csv_text(r.flag) << '\n';
  }
}

inline std::string to_csv(const ProbeRecord& rec) {
  std::ostringstream os;
  write_csv(os, rec);
  return os.str();
}

/// Parses the CSV written by write_csv. Fields the header does not know are
/// rejected.
inline std::vector<ProbeRow> read_probe_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kProbeCsvHeader) {
    fail(ErrorKind::validation, "probe CSV: unexpected header");
  }
  std::vector<ProbeRow> rows;
  auto num = [](const std::string& s) {
    double v = kNotApplicable;
    if (!s.empty() && !parse_double(s, v)) fail(ErrorKind::validation, "probe CSV: bad number '" + s + "'");
    return v;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
      const char ch = line[k];
      if (quoted) {
        if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        f.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    f.push_back(std::move(cur));
    if (f.size() != 10) fail(ErrorKind::validation, "probe CSV: expected 10 fields per row");
    ProbeRow r;
    r.param = num(f[1]);
    r.sample = static_cast<std::size_t>(std::stoull(f[2]));
    r.family = f[3];
    r.perturbation_norm = num(f[4]);
    r.distance = num(f[5]);
    r.residual = num(f[6]);
    r.j_gap = num(f[7]);
    r.defect = num(f[8]);
    r.flag = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::json to_json(const ProbeRecord& rec) {
  return {{"probe", rec.probe},   {"instance", rec.instance},       {"seed", rec.seed},
          {"inputs", rec.inputs}, {"rows", rec.rows.size()}, {"summary", rec.summary}};
}

// -------------------------------------------------------------- clustering

struct ClusteringMember {
  ControlField field;  // on the base mesh refined `levels` times
  double delta0 = 0.0;
  int levels = 0;
};

namespace detail {

struct SplitField {
  std::vector<std::optional<MidpointSplit>> cells;
  double delta0 = 0.0;
};

inline SplitField split_field(const ControlField& ustar, const ControlSet& set) {
  SplitField out;
  CompensatedSum s;
  for (std::size_t i = 0; i < ustar.cells(); ++i) {
    out.cells.push_back(midpoint_split(set, ustar.cell(i)));
    if (out.cells.back()) s += ustar.mesh()->measure(i) * out.cells.back()->amplitude;
  }
  out.delta0 = s.value();
  return out;
}

inline int thue_morse_sign(std::size_t i) { return std::popcount(i) % 2 == 0 ? 1 : -1; }

}  // namespace detail

/// Largest admissible clustering radius: half the L1 size of beta - alpha.
inline double clustering_radius(const ControlField& ustar, const ControlSet& set) {
  return detail::split_field(ustar, set).delta0;
}

/// f_n = u* + (delta / delta0)(g_n - u*), where g_n alternates alpha, beta,
/// alpha, ... across the 2^n children of every base cell.
inline ClusteringMember clustering_sequence(const ControlField& ustar, const ControlSet& set,
                                            double delta, int levels) {
  if (levels < 0 || levels > 40) fail(ErrorKind::validation, "clustering levels must be in [0, 40]");
  if (!(delta > 0)) fail(ErrorKind::validation, "clustering radius must be > 0");
  if (ustar.dim() != set.dim()) fail(ErrorKind::incompatible_field, "field/set dimension mismatch");
  const auto split = detail::split_field(ustar, set);
  if (split.delta0 <= 0) {
    fail(ErrorKind::precondition, "clustering: reference field is bang-bang (no non-extremal cell to split)");
  }
  if (delta > split.delta0 * (1 + 1e-12)) {
    fail(ErrorKind::radius_exceeded, "clustering: radius " + format_double(delta) +
                                         " exceeds delta0 = " + format_double(split.delta0));
  }
  const double scale = std::min(1.0, delta / split.delta0);
  const std::size_t ratio = std::size_t{1} << levels;
  MeshPtr fine = ustar.mesh()->refined(levels);
  ControlField f = ControlField::from_cells(fine, ustar.dim(), [&](std::size_t i, std::span<double> out) {
    const std::size_t base = i / ratio;
    const auto src = ustar.cell(base);
    std::copy(src.begin(), src.end(), out.begin());
    if (const auto& sp = split.cells[base]) {
      const double sign = (i % ratio) % 2 == 0 ? -1.0 : 1.0;
      out[sp->component] += sign * scale * sp->amplitude;
    }
  });
  return {std::move(f), split.delta0, levels};
}

struct VpCasasStep {
  int n;
  double j_gap;
};

struct VpCasasResult {
  ClusteringMember witness;
  double j_gap = 0.0;
  std::vector<VpCasasStep> trace;
};

/// First clustering member (n = 1..n_max) with J(f_n) <= J(u*) + eps.
inline VpCasasResult vpcasas_check(const Problem& problem, const ControlField& ustar,
                                   const ControlSet& set, double delta, double eps, int n_max) {
  if (!(eps >= 0)) fail(ErrorKind::validation, "eps must be >= 0");
  if (n_max < 1) fail(ErrorKind::validation, "n_max must be >= 1");
  VpCasasResult out;
  for (int n = 1; n <= n_max; ++n) {
    ClusteringMember f = clustering_sequence(ustar, set, delta, n);
    const double jstar = problem.evaluate(prolong_to(ustar, f.field.mesh()));
    const double gap = problem.evaluate(f.field) - jstar;
    out.trace.push_back({n, gap});
    if (gap <= eps) {
      out.witness = std::move(f);
      out.j_gap = gap;
      return out;
    }
  }
  std::string msg = "vpcasas: no member within eps = " + format_double(eps) + " up to n = " +
                    std::to_string(n_max) + "; trace";
  for (const auto& s : out.trace) msg += " n=" + std::to_string(s.n) + ":" + format_double(s.j_gap);
  fail(ErrorKind::not_found, msg);
}

// ------------------------------------------------------------- weak ball

struct WeakBallResult {
  double distance = 0.0;
  ControlField field;
  bool exact = false;  // true when every coordinate has a single feasible direction
  std::size_t patterns = 0;
};

/// max l1_distance(u, u*) over u pointwise in the box with
/// |<phi e_j, u - u*>| <= eps |phi|_inf for every bank member and component.
///
/// Maximizing the L1 distance is not a convex problem, so it is solved over
/// fixed sign patterns:
/// with u = u* + s r, r in [0, room(s)], each pattern is an LP. Patterns
/// tried: the roomier direction per coordinate, alternating signs, and
/// Thue-Morse tilings of several block lengths (with negations). When u*
/// sits on a face in every coordinate the first pattern is forced and the
/// answer is exact; otherwise it is the best of the tried patterns, a lower
/// bound on the maximum.
inline WeakBallResult adversarial_weak_ball(const ControlField& ustar, const ControlSet& set,
                                            double eps, const TestBank& bank) {
  if (!(eps >= 0)) fail(ErrorKind::validation, "eps must be >= 0");
  if (ustar.dim() != set.dim()) fail(ErrorKind::incompatible_field, "field/set dimension mismatch");
  const Box& box = set.as_box();
  if (!field_in_set(ustar, set, set.default_tol())) fail(ErrorKind::precondition, "weak ball center is infeasible");
  const MeshPtr& mesh = ustar.mesh();
  const std::size_t cells = mesh->cells(), m = ustar.dim(), nv = cells * m;
  const double slack_tol = 1e-12 * set.diameter();

  std::vector<double> up(nv), down(nv);
  bool forced = true;
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t q = i * m + j;
      up[q] = std::max(0.0, box.hi[j] - ustar(i, j));
      down[q] = std::max(0.0, ustar(i, j) - box.lo[j]);
      if (up[q] > slack_tol && down[q] > slack_tol) forced = false;
    }
  }
  std::vector<DualField> phis;
  std::vector<double> sups;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    phis.push_back(bank.materialize(k, mesh));
    sups.push_back(bank.members()[k].sup_norm);
  }

  std::vector<std::vector<int>> patterns;
  {
    std::vector<int> room(nv);
    for (std::size_t q = 0; q < nv; ++q) room[q] = up[q] >= down[q] ? 1 : -1;
    patterns.push_back(room);
    if (!forced) {
      std::vector<int> alt(nv);
      for (std::size_t q = 0; q < nv; ++q) alt[q] = (q / m) % 2 == 0 ? 1 : -1;
      patterns.push_back(alt);
      for (int order = 0; order <= 4; ++order) {
        std::vector<int> tm(nv);
        for (std::size_t q = 0; q < nv; ++q) tm[q] = detail::thue_morse_sign((q / m) >> order);
        patterns.push_back(tm);
      }
      const std::size_t base = patterns.size();
      for (std::size_t p = 1; p < base; ++p) {
        auto neg = patterns[p];
        for (int& s : neg) s = -s;
        patterns.push_back(std::move(neg));
      }
    }
  }

  WeakBallResult best;
  best.distance = -1.0;
  best.exact = forced;
  const std::size_t rows = phis.size() * m;
  for (const auto& pat : patterns) {
    std::vector<std::size_t> var;  // coordinates with room in the pattern direction
    for (std::size_t q = 0; q < nv; ++q) {
      if ((pat[q] > 0 ? up[q] : down[q]) > 0) var.push_back(q);
    }
    LinearProgram lp(rows, var.size() + rows);
    for (std::size_t v = 0; v < var.size(); ++v) {
      const std::size_t q = var[v], i = q / m, j = q % m;
      lp.c[v] = -mesh->measure(i);
      lp.upper[v] = pat[q] > 0 ? up[q] : down[q];
      for (std::size_t k = 0; k < phis.size(); ++k) {
        lp.at(k * m + j, v) = mesh->measure(i) * phis[k](i, 0) * pat[q];
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double cap = eps * sups[r / m];
      lp.b[r] = cap;
      lp.at(r, var.size() + r) = 1.0;
      lp.upper[var.size() + r] = 2 * cap;
    }
    const LpResult res = solve_lp(lp);
    if (res.status != LpStatus::optimal) {
      fail(ErrorKind::internal, "weak ball LP did not reach an optimum (status " +
                                    std::to_string(static_cast<int>(res.status)) + ")");
    }
    ControlField u = ustar;
    for (std::size_t v = 0; v < var.size(); ++v) {
      const std::size_t q = var[v];
      u(q / m, q % m) = std::clamp(ustar(q / m, q % m) + pat[q] * res.x[v], box.lo[q % m], box.hi[q % m]);
    }
    const double d = l1_distance(u, ustar);
    if (d > best.distance) {
      best.distance = d;
      best.field = std::move(u);
    }
  }
  best.patterns = patterns.size();
  return best;
}

// ------------------------------------------------------------ perturbations

namespace detail {

/// Cellwise field with independent uniform random signs scaled to `size`.
inline DualField random_sign_field(const MeshPtr& mesh, std::size_t dim, double size, Rng& rng) {
  return DualField::from_cells(mesh, dim, [&](std::size_t, std::span<double> o) {
    for (double& v : o) v = size * rng.sign();
  });
}

/// Random polynomial of degree <= max_degree per component, rescaled so its
/// cellwise L-infinity norm equals `size`.
inline DualField random_polynomial_field(const MeshPtr& mesh, std::size_t dim, double size,
                                         int max_degree, Rng& rng) {
  const double a = mesh->a(), b = mesh->b();
  std::vector<std::vector<double>> coefs(dim);
  for (auto& c : coefs) {
    c.resize(rng.index(static_cast<std::size_t>(max_degree) + 1) + 1);
    for (double& x : c) x = rng.uniform(-1, 1);
  }
  DualField f(mesh, dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const auto& c = coefs[j];
    auto g = DualField::cell_average(mesh, [&](double t) {
      const double s = 2 * (t - a) / (b - a) - 1;
      double v = 0.0;
      for (std::size_t k = c.size(); k-- > 0;) v = v * s + c[k];
      return v;
    });
    for (std::size_t i = 0; i < mesh->cells(); ++i) f(i, j) = g(i, 0);
  }
  const double n = linf_norm(f);
  if (n > 0) f *= size / n;
  return f;
}

/// Field value at cell i pushed to the vertex of the box farthest from it,
/// or a fraction `w` of the way there.
inline void flip_cell(ControlField& u, const ControlField& ref, std::size_t i, const Box& box, double w) {
  for (std::size_t j = 0; j < u.dim(); ++j) {
    const double x = ref(i, j);
    const double target = x - box.lo[j] > box.hi[j] - x ? box.lo[j] : box.hi[j];
    u(i, j) = x + w * (target - x);
  }
}

inline double flip_cost(const ControlField& ref, std::size_t i, const Box& box) {
  double s = 0.0;
  for (std::size_t j = 0; j < ref.dim(); ++j) {
    const double x = ref(i, j);
    s += std::max(x - box.lo[j], box.hi[j] - x);
  }
  return ref.mesh()->measure(i) * s;
}

/// Flips cells in `order` until the L1 distance to ref reaches `target`;
/// the last cell is flipped fractionally.
inline ControlField flip_until(const ControlField& ref, const Box& box,
                               const std::vector<std::size_t>& order, double target) {
  ControlField u = ref;
  double spent = 0.0;
  for (std::size_t i : order) {
    if (spent >= target) break;
    const double cost = flip_cost(ref, i, box);
    if (cost <= 0) continue;
    const double w = std::min(1.0, (target - spent) / cost);
    flip_cell(u, ref, i, box, w);
    spent += w * cost;
  }
  return u;
}

/// Cells ordered by growing distance from `center`, alternating sides.
inline std::vector<std::size_t> window_order(std::size_t cells, std::size_t center, Rng& rng) {
  std::vector<std::size_t> order{center};
  std::size_t l = center, r = center;
  while (order.size() < cells) {
    const bool left_first = rng.uniform() < 0.5;
    for (int side = 0; side < 2; ++side) {
      const bool left = (side == 0) == left_first;
      if (left && l > 0) order.push_back(--l);
      if (!left && r + 1 < cells) order.push_back(++r);
    }
  }
  return order;
}

inline std::vector<std::size_t> scattered_order(std::size_t cells, Rng& rng) {
  std::vector<std::size_t> order(cells);
  for (std::size_t i = 0; i < cells; ++i) order[i] = i;
  for (std::size_t i = cells; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

/// Cells sorted by |sigma| (sum over components), smallest first.
inline std::vector<std::size_t> cells_by_switching_size(const DualField& sigma) {
  std::vector<double> size(sigma.cells());
  for (std::size_t i = 0; i < sigma.cells(); ++i) {
    for (double v : sigma.cell(i)) size[i] += std::abs(v);
  }
  std::vector<std::size_t> order(sigma.cells());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return size[x] < size[y]; });
  return order;
}

/// u* + tau * TM_i * amplitude_i e_j on the base mesh: a Thue-Morse signed
/// version of the clustering split. L1 distance is tau * delta0.
inline ControlField thue_morse_split(const ControlField& ustar, const SplitField& split, double tau, int order) {
  ControlField u = ustar;
  for (std::size_t i = 0; i < ustar.cells(); ++i) {
    if (const auto& sp = split.cells[i]) {
      u(i, sp->component) += tau * thue_morse_sign(i >> order) * sp->amplitude;
    }
  }
  return u;
}

template <class Fn>
void sweep(std::size_t n, std::size_t threads, Fn&& fn) {
  parallel_for(n, std::forward<Fn>(fn), threads);
}

inline std::string error_flag(const std::exception& e) { return std::string("error: ") + e.what(); }

}  // namespace detail

// ---------------------------------------------------------------- growth

struct GrowthBin {
  double eta;
  double omega;  // min J-gap over samples at distance in [eta, delta]; +inf if none
  std::size_t samples;
  std::optional<std::size_t> argmin;  // row index of the minimizing sample
};

struct GrowthProfile {
  double delta = 0.0;
  std::vector<GrowthBin> bins;
  ProbeRecord record;
};

struct ProbeOptions {
  std::size_t threads = 0;
  SolveOptions solver;
};

/// Upper estimate of eta -> inf { J(u) - J(u*) : eta <= |u - u*| <= delta }.
/// Samples are vertex flips (windows at small |sigma|, windows at random
/// places, scattered sets) plus clustering members when u* is not bang-bang.
/// Because each bin takes the minimum over all samples at distance >= eta,
/// the profile is nondecreasing in eta.
inline GrowthProfile growth_profile(const Problem& problem, const ControlField& ustar,
                                    const ControlSet& set, double delta,
                                    std::vector<double> eta_grid, std::size_t n_samples,
                                    std::uint64_t seed, const ProbeOptions& popts = {}) {
  if (!(delta > 0)) fail(ErrorKind::validation, "growth: delta must be > 0");
  if (eta_grid.empty()) fail(ErrorKind::validation, "growth: empty eta grid");
  std::sort(eta_grid.begin(), eta_grid.end());
  for (double eta : eta_grid) {
    if (!(eta > 0)) fail(ErrorKind::validation, "growth: eta must be > 0");
    if (eta > delta) fail(ErrorKind::validation, "growth: eta " + format_double(eta) + " > delta gives an empty bin");
  }
  const Box& box = set.as_box();
  const double jstar = problem.evaluate(ustar);
  const DualField sigma = problem.switching(ustar);
  const auto near_switch = detail::cells_by_switching_size(sigma);
  const auto split = detail::split_field(ustar, set);
  const bool clusterable = split.delta0 > 0;
  const std::size_t cells = ustar.cells();
  const double eta_min = eta_grid.front();

  GrowthProfile prof;
  prof.delta = delta;
  prof.record.probe = "growth";
  prof.record.instance = problem.name();
  prof.record.seed = seed;
  prof.record.inputs = {{"delta", delta}, {"eta", eta_grid}, {"samples", n_samples}};
  prof.record.rows.resize(n_samples);

  detail::sweep(n_samples, popts.threads, [&](std::size_t s) {
    Rng rng(seed, s);
    ProbeRow& row = prof.record.rows[s];
    row.sample = s;
    row.param = delta;
    // one sample in ten sits exactly on the outer radius
    const double target = s % 10 == 9 ? delta : rng.uniform(eta_min, delta);
    try {
      ControlField u;
      ControlField ref = ustar;
      const std::size_t kind = clusterable ? s % 4 : s % 3;
      if (kind == 3) {
        const int n = 1 + static_cast<int>(rng.index(8));
        u = clustering_sequence(ustar, set, std::min(target, split.delta0), n).field;
        ref = prolong_to(ustar, u.mesh());
        row.family = "clustering";
      } else if (kind == 0) {
        const std::size_t pool = std::max<std::size_t>(1, cells / 50);
        u = detail::flip_until(ustar, box, detail::window_order(cells, near_switch[rng.index(pool)], rng), target);
        row.family = "window_switch";
      } else if (kind == 1) {
        u = detail::flip_until(ustar, box, detail::window_order(cells, rng.index(cells), rng), target);
        row.family = "window_random";
      } else {
        u = detail::flip_until(ustar, box, detail::scattered_order(cells, rng), target);
        row.family = "scattered";
      }
      row.distance = l1_distance(u, ref);
      row.j_gap = problem.evaluate(u) - (kind == 3 ? problem.evaluate(ref) : jstar);
    } catch (const Error& e) {
      row.flag = detail::error_flag(e);
    }
  });

  nlohmann::json bins = nlohmann::json::array();
  for (double eta : eta_grid) {
    GrowthBin bin{eta, std::numeric_limits<double>::infinity(), 0, std::nullopt};
    for (std::size_t r = 0; r < prof.record.rows.size(); ++r) {
      const auto& row = prof.record.rows[r];
      if (!row.flag.empty() || !(row.distance >= eta * (1 - 1e-12)) || row.distance > delta * (1 + 1e-12)) continue;
      ++bin.samples;
      if (row.j_gap < bin.omega) {
        bin.omega = row.j_gap;
        bin.argmin = r;
      }
    }
    prof.bins.push_back(bin);
    bins.push_back({{"eta", eta},
                    {"omega", detail::json_number(bin.omega)},
                    {"samples", bin.samples},
                    {"argmin", bin.argmin ? nlohmann::json(*bin.argmin) : nlohmann::json(nullptr)}});
  }
  prof.record.summary = {{"delta", delta}, {"bins", std::move(bins)}};
  return prof;
}

// -------------------------------------------------------------- stability

/// Empirical stability modulus: for each delta, draws xi with
/// |xi|_inf = delta (cellwise random signs on even samples, polynomials of
/// degree <= 5 on odd ones), solves the localized problem around u* and
/// records |u_xi - u*|. Summary: max distance per delta and its running max.
inline ProbeRecord stability_probe(const ProblemPtr& problem, const ControlField& ustar,
                                   const ControlSet& set, double gamma, std::vector<double> deltas,
                                   std::size_t n_samples, std::uint64_t seed,
                                   const ProbeOptions& popts = {}) {
  if (!(gamma > 0)) fail(ErrorKind::validation, "stability: gamma must be > 0");
  for (double d : deltas) {
    if (!(d >= 0)) fail(ErrorKind::validation, "stability: delta must be >= 0");
  }
  std::sort(deltas.begin(), deltas.end());
  ProbeRecord rec;
  rec.probe = "stability";
  rec.instance = problem->name();
  rec.seed = seed;
  rec.inputs = {{"gamma", gamma}, {"delta", deltas}, {"samples", n_samples}};
  rec.rows.resize(deltas.size() * n_samples);
  const double jstar = problem->evaluate(ustar);

  detail::sweep(rec.rows.size(), popts.threads, [&](std::size_t k) {
    const double delta = deltas[k / n_samples];
    const std::size_t s = k % n_samples;
    Rng rng(seed, k);
    ProbeRow& row = rec.rows[k];
    row.param = delta;
    row.sample = s;
    const bool smooth = s % 2 == 1;
    row.family = smooth ? "polynomial" : "random_sign";
    DualField xi = smooth ? detail::random_polynomial_field(ustar.mesh(), ustar.dim(), delta, 5, rng)
                          : detail::random_sign_field(ustar.mesh(), ustar.dim(), delta, rng);
    row.perturbation_norm = linf_norm(xi);
    try {
      SolveReport rep = solve_localized(problem, xi, ustar, gamma, set, popts.solver);
      row.distance = l1_distance(rep.u, ustar);
      row.residual = rep.residual;
      row.j_gap = problem->evaluate(rep.u) - jstar;
      if (row.distance >= gamma * (1 - 1e-9)) row.flag = "boundary";
      if (!rep.converged) row.flag += row.flag.empty() ? "not_converged" : ";not_converged";
    } catch (const Error& e) {
      row.flag = detail::error_flag(e);
    }
  });

  nlohmann::json per = nlohmann::json::array();
  double envelope = 0.0;
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    double worst = 0.0;
    std::size_t hits = 0, failures = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      const auto& row = rec.rows[d * n_samples + s];
      if (row.flag.rfind("error", 0) == 0) {
        ++failures;
        continue;
      }
      worst = std::max(worst, row.distance);
      hits += row.flag.find("boundary") != std::string::npos;
    }
    envelope = std::max(envelope, worst);
    per.push_back({{"delta", deltas[d]}, {"epsilon_hat", worst}, {"envelope", envelope},
                   {"boundary_hits", hits}, {"failures", failures}});
  }
  rec.summary = {{"gamma", gamma}, {"modulus", std::move(per)}};
  return rec;
}

// ---------------------------------------------------------- subregularity

/// Samples feasible u with |u - u*| <= kappa and records the pointwise KKT
/// residual r(u) against the distance. Families: vertex flips (windows and
/// scattered), clustering members and Thue-Morse signed splits when u* is
/// not bang-bang, and minimizers of the 2-regularized problem. Summary: for
/// each residual bound r, the max distance among samples with r(u) <= r.
inline ProbeRecord subregularity_probe(const ProblemPtr& problem, const ControlField& ustar,
                                       const ControlSet& set, double kappa, std::size_t n_samples,
                                       std::uint64_t seed, std::vector<double> residual_grid,
                                       const ProbeOptions& popts = {}) {
  if (!(kappa > 0)) fail(ErrorKind::validation, "subregularity: kappa must be > 0");
  std::sort(residual_grid.begin(), residual_grid.end());
  const Box& box = set.as_box();
  const auto split = detail::split_field(ustar, set);
  const bool clusterable = split.delta0 > 0;
  const std::size_t cells = ustar.cells();

  ProbeRecord rec;
  rec.probe = "subregularity";
  rec.instance = problem->name();
  rec.seed = seed;
  rec.inputs = {{"kappa", kappa}, {"samples", n_samples}, {"residual_grid", residual_grid}};
  rec.rows.resize(n_samples);
  const double jstar = problem->evaluate(ustar);

  detail::sweep(n_samples, popts.threads, [&](std::size_t s) {
    Rng rng(seed, s);
    ProbeRow& row = rec.rows[s];
    row.param = kappa;
    row.sample = s;
    try {
      ControlField u;
      ControlField ref = ustar;
      const std::size_t kinds = clusterable ? 5 : 3;
      const std::size_t kind = s % kinds;
      if (s == 0) {
        u = ustar;
        row.family = "reference";
      } else if (kind == 0) {
        const double eta = rng.uniform(0.01, 1.0) * kappa;
        auto reg = with_p_regularizer(problem, 2.0, eta);
        u = frank_wolfe(*reg, set, ustar, popts.solver).u;
        row.family = "regularized";
        row.perturbation_norm = eta;
      } else if (kind == 1) {
        u = detail::flip_until(ustar, box, detail::window_order(cells, rng.index(cells), rng), rng.uniform(0, kappa));
        row.family = "window";
      } else if (kind == 2) {
        u = detail::flip_until(ustar, box, detail::scattered_order(cells, rng), rng.uniform(0, kappa));
        row.family = "scattered";
      } else if (kind == 3) {
        const double d = std::min(split.delta0, rng.uniform(0.5, 1.0) * kappa);
        u = detail::thue_morse_split(ustar, split, d / split.delta0, static_cast<int>(rng.index(3)));
        row.family = "thue_morse";
      } else {
        const double d = std::min(split.delta0, rng.uniform(0.5, 1.0) * kappa);
        u = clustering_sequence(ustar, set, d, 1 + static_cast<int>(rng.index(6))).field;
        ref = prolong_to(ustar, u.mesh());
        row.family = "clustering";
      }
      row.distance = l1_distance(u, ref);
      row.residual = criticality_residual(*problem, u, set);
      row.j_gap = problem->evaluate(u) - (ref.cells() == ustar.cells() ? jstar : problem->evaluate(ref));
      if (row.distance > kappa * (1 + 1e-12)) row.flag = "outside_kappa";
    } catch (const Error& e) {
      row.flag = detail::error_flag(e);
    }
  });

  nlohmann::json per = nlohmann::json::array();
  for (double r : residual_grid) {
    double worst = 0.0;
    std::size_t count = 0;
    for (const auto& row : rec.rows) {
      if (!row.flag.empty() || !(row.residual <= r)) continue;
      worst = std::max(worst, row.distance);
      ++count;
    }
    per.push_back({{"residual", r}, {"max_distance", worst}, {"samples", count}});
  }
  rec.summary = {{"kappa", kappa}, {"by_residual", std::move(per)}};
  return rec;
}

// ------------------------------------------------------------- genericity

/// For each epsilon, draws smooth polynomial xi with |xi|_inf <= epsilon,
/// minimizes J(u) - <xi, u> by multistart and records the extreme defect of
/// the best solution. A draw is degenerate when the perturbed switching
/// field vanishes on some cell at the solution, which leaves the minimizer
/// undetermined there.
inline ProbeRecord genericity_probe(const ProblemPtr& problem, const ControlSet& set,
                                    const MeshPtr& mesh, std::vector<double> eps_list,
                                    std::size_t n_samples, std::uint64_t seed,
                                    std::size_t n_starts = 4, const ProbeOptions& popts = {},
                                    double defect_tol = 1e-9) {
  for (double e : eps_list) {
    if (!(e >= 0)) fail(ErrorKind::validation, "genericity: epsilon must be >= 0");
  }
  ProbeRecord rec;
  rec.probe = "genericity";
  rec.instance = problem->name();
  rec.seed = seed;
  rec.inputs = {{"epsilon", eps_list}, {"samples", n_samples}, {"starts", n_starts}};
  rec.rows.resize(eps_list.size() * n_samples);

  detail::sweep(rec.rows.size(), popts.threads, [&](std::size_t k) {
    const double eps = eps_list[k / n_samples];
    Rng rng(seed, k);
    ProbeRow& row = rec.rows[k];
    row.param = eps;
    row.sample = k % n_samples;
    row.family = "polynomial";
    DualField xi = detail::random_polynomial_field(mesh, set.dim(), eps * rng.uniform(0.1, 1.0), 5, rng);
    row.perturbation_norm = linf_norm(xi);
    try {
      auto perturbed = with_linear_perturbation(problem, xi);
      SolveOptions so = popts.solver;
      std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ULL * (k + 1));
      so.seed = splitmix64(state);
      so.threads = 1;
      const auto ms = multistart_global(*perturbed, set, mesh, n_starts, so);
      const auto& best = ms.best_run();
      row.defect = extreme_defect(best.u, set, defect_tol);
      row.residual = best.residual;
      row.j_gap = best.J;
      const DualField sigma = perturbed->switching(best.u);
      const double scale = 1 + linf_norm(sigma);
      double smallest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < sigma.cells(); ++i) {
        double cell = 0.0;
        for (double v : sigma.cell(i)) cell = std::max(cell, std::abs(v));
        smallest = std::min(smallest, cell);
      }
      if (smallest <= 1e-12 * scale) row.flag = "degenerate";
    } catch (const Error& e) {
      row.flag = detail::error_flag(e);
    }
  });

  nlohmann::json per = nlohmann::json::array();
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    std::size_t good = 0, regular = 0, degenerate = 0, failures = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      const auto& row = rec.rows[e * n_samples + s];
      if (row.flag == "degenerate") {
        ++degenerate;
      } else if (!row.flag.empty()) {
        ++failures;
      } else {
        ++regular;
        good += row.defect <= defect_tol;
      }
    }
    per.push_back({{"epsilon", eps_list[e]},
                   {"bang_bang_fraction", regular ? nlohmann::json(double(good) / double(regular)) : nlohmann::json(nullptr)},
                   {"nondegenerate", regular},
                   {"degenerate", degenerate},
                   {"failures", failures}});
  }
  rec.summary = {{"defect_tol", defect_tol}, {"by_epsilon", std::move(per)}};
  return rec;
}

// --------------------------------------------------------- regularization

/// Solves J + (eta/p)|u|_p^p for each eta (decreasing, 0 allowed for the
/// plain problem) by warm-started Frank-Wolfe and records |u_eta - u*| and
/// |xi_eta|_inf with xi_eta = eta |u_eta|^{p-2} u_eta; rows whose xi_eta
/// exceeds eta (sup U)^{p-1} are flagged.
inline ProbeRecord regularization_path(const ProblemPtr& problem, const ControlField& ustar,
                                       const ControlSet& set, double p, const std::vector<double>& etas,
                                       const SolveOptions& opts = {}) {
  if (!(p >= 2)) fail(ErrorKind::validation, "regularization path requires p >= 2");
  for (std::size_t k = 0; k < etas.size(); ++k) {
    if (!(etas[k] >= 0)) fail(ErrorKind::validation, "regularization path: eta must be >= 0");
    if (k > 0 && !(etas[k] < etas[k - 1])) fail(ErrorKind::validation, "regularization path: eta list must decrease");
  }
  ProbeRecord rec;
  rec.probe = "regpath";
  rec.instance = problem->name();
  rec.seed = opts.seed;
  rec.inputs = {{"p", p}, {"eta", etas}};
  const double jstar = problem->evaluate(ustar);
  const double sup_u = set.sup_norm();
  ControlField warm = ustar;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t k = 0; k < etas.size(); ++k) {
    const double eta = etas[k];
    ProbeRow row;
    row.param = eta;
    row.sample = k;
    row.family = eta > 0 ? "regularized" : "plain";
    try {
      SolveReport rep;
      double xi_norm = 0.0;
      if (eta > 0) {
        auto reg = std::make_shared<PRegularized>(problem, p, eta);
        rep = frank_wolfe(*reg, set, warm, opts);
        xi_norm = linf_norm(reg->regularizer_gradient(rep.u));
      } else {
        rep = frank_wolfe(*problem, set, warm, opts);
      }
      row.distance = l1_distance(rep.u, ustar);
      row.perturbation_norm = xi_norm;
      row.residual = rep.residual;
      row.j_gap = problem->evaluate(rep.u) - jstar;
      const double bound = eta * std::pow(sup_u, p - 1);
      if (xi_norm > bound * (1 + 1e-12)) row.flag = "bound_violation";
      if (!rep.converged) row.flag += row.flag.empty() ? "not_converged" : ";not_converged";
      per.push_back({{"eta", eta}, {"distance", row.distance}, {"xi_norm", xi_norm}, {"bound", bound},
                     {"iters", rep.iters}, {"converged", rep.converged}});
      warm = std::move(rep.u);
    } catch (const Error& e) {
      row.flag = detail::error_flag(e);
      per.push_back({{"eta", eta}, {"error", e.what()}});
    }
    rec.rows.push_back(std::move(row));
  }
  rec.summary = {{"p", p}, {"sup_u", sup_u}, {"path", std::move(per)}};
  return rec;
}

}  // namespace bangbang
