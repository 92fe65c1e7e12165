#pragma once

// Batch front end: `bangbang <subcommand> --config FILE [flags]`.
//
// Exit codes: 0 success, 2 validation error, 3 solver nonconvergence or a
// failed gradient check, 4 probe precondition failure. Errors are reported
// as one JSON object on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bangbang/analysis.hpp"
#include "bangbang/config.hpp"
#include "bangbang/error.hpp"
#include "bangbang/gradcheck.hpp"
#include "bangbang/meshfield.hpp"
#include "bangbang/solver.hpp"

namespace bangbang::cli {

enum ExitCode : int { ok = 0, validation_error = 2, nonconvergence = 3, precondition_failure = 4 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::incompatible_field:
      return validation_error;
    case ErrorKind::precondition:
    case ErrorKind::radius_exceeded:
    case ErrorKind::not_found:
      return precondition_failure;
    case ErrorKind::nonconvergence:
    case ErrorKind::integration_failure:
    case ErrorKind::internal:
      return nonconvergence;
  }
  return nonconvergence;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"solve",          "localize",         "cluster",
                                              "weakball",       "growth",           "probe-stability",
                                              "probe-subreg",   "probe-genericity", "regpath",
                                              "gradcheck"};
  return names;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> threads;
  std::optional<double> delta;
  std::optional<int> levels;
};

namespace detail {

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::validation, "cannot create output directory '" + dir + "': " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::validation, "cannot write '" + path.string() + "'");
    f << content;
    files_.push_back(name);
  }

  void json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline ControlField reference_field(const config::RunConfig& cfg) {
  const auto& ref = cfg.reference;
  ControlField u;
  if (ref.kind == "constant") {
    u = ControlField::from_cells(cfg.mesh, cfg.problem->control_dim(), [&](std::size_t, std::span<double> o) {
      std::copy(ref.value.begin(), ref.value.end(), o.begin());
    });
  } else if (ref.kind == "csv") {
    std::ifstream in(ref.path);
    if (!in) fail(ErrorKind::validation, "cannot open reference field '" + ref.path + "'");
    u = read_csv<ControlTag>(in);
    if (u.dim() != cfg.problem->control_dim()) fail(ErrorKind::validation, "reference field has the wrong dimension");
  } else {
    u = frank_wolfe(*cfg.problem, cfg.set, cfg.mesh, cfg.solver).u;
  }
  if (!field_in_set(u, cfg.set, cfg.set.default_tol())) {
    fail(ErrorKind::precondition, "reference field is not pointwise in the control set");
  }
  return u;
}

inline DualField localize_perturbation(const config::RunConfig& cfg, const MeshPtr& mesh) {
  const std::size_t m = cfg.problem->control_dim();
  const auto& spec = cfg.localize;
  DualField xi(mesh, m, 0.0);
  if (!spec.xi_constant.empty()) {
    if (spec.xi_constant.size() != m) fail(ErrorKind::validation, "localize.xi needs one entry per component");
    for (std::size_t i = 0; i < mesh->cells(); ++i) {
      for (std::size_t j = 0; j < m; ++j) xi(i, j) += spec.xi_constant[j];
    }
  }
  if (!spec.xi_polynomial.empty()) {
    if (spec.xi_polynomial.size() != m) fail(ErrorKind::validation, "localize.xi_polynomial needs one row per component");
    for (std::size_t j = 0; j < m; ++j) {
      const auto& c = spec.xi_polynomial[j];
      auto g = DualField::cell_average(mesh, [&](double t) {
        double v = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) v = v * t + c[k];
        return v;
      });
      for (std::size_t i = 0; i < mesh->cells(); ++i) xi(i, j) += g(i, 0);
    }
  }
  return xi;
}

inline std::string fmt(double v) { return format_double(v); }

inline nlohmann::json num(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json header(const std::string& command, const config::RunConfig& cfg) {
  return {{"command", command},
          {"instance", cfg.instance},
          {"seed", cfg.seed},
          {"cells", cfg.mesh->cells()},
          {"set", cfg.set.describe()}};
}

struct Outcome {
  int code = ok;
  std::string summary;
};

inline Outcome run_command(const std::string& cmd, config::RunConfig& cfg) {
  Output out(cfg.out_dir);
  const std::string stem = cmd + "_" + cfg.instance + "_" + std::to_string(cfg.seed);
  ProbeOptions popts;
  popts.threads = cfg.threads;
  popts.solver = cfg.solver;
  cfg.solver.seed = cfg.seed;
  cfg.solver.threads = cfg.threads;

  if (cmd == "solve") {
    SolveReport rep = frank_wolfe(*cfg.problem, cfg.set, cfg.mesh, cfg.solver);
    auto j = header(cmd, cfg);
    j["report"] = to_json(rep);
    out.json(stem + ".json", j);
    out.write(stem + "_u.csv", to_csv(rep.u));
    return {rep.converged ? ok : nonconvergence,
            "solve " + cfg.instance + ": J=" + fmt(rep.J) + " gap=" + fmt(rep.gap) + " residual=" +
                fmt(rep.residual) + " iters=" + std::to_string(rep.iters) +
                (rep.converged ? "" : " (not converged)")};
  }
  if (cmd == "localize") {
    const ControlField center = reference_field(cfg);
    const DualField xi = localize_perturbation(cfg, center.mesh());
    SolveReport rep = solve_localized(cfg.problem, xi, center, cfg.localize.gamma, cfg.set, cfg.solver);
    const double dist = l1_distance(rep.u, center);
    auto j = header(cmd, cfg);
    j["gamma"] = cfg.localize.gamma;
    j["xi_norm"] = linf_norm(xi);
    j["distance"] = dist;
    j["boundary"] = dist >= cfg.localize.gamma * (1 - 1e-9);
    j["report"] = to_json(rep);
    out.json(stem + ".json", j);
    out.write(stem + "_u.csv", to_csv(rep.u));
    return {rep.converged ? ok : nonconvergence,
            "localize " + cfg.instance + ": J=" + fmt(rep.J) + " distance=" + fmt(dist) + " iters=" +
                std::to_string(rep.iters) + (rep.converged ? "" : " (not converged)")};
  }
  if (cmd == "cluster") {
    const ControlField ustar = reference_field(cfg);
    const auto [a, b] = cfg.problem->domain();
    const TestBank bank = TestBank::monomials(kDefaultBankDegree, a, b);
    nlohmann::json levels = nlohmann::json::array();
    double delta0 = 0.0;
    for (int n = 1; n <= cfg.cluster.levels; ++n) {
      ClusteringMember f = clustering_sequence(ustar, cfg.set, cfg.cluster.delta, n);
      delta0 = f.delta0;
      const ControlField ref = prolong_to(ustar, f.field.mesh());
      const std::string name = stem + "_n" + std::to_string(n) + ".csv";
      out.write(name, to_csv(f.field));
      levels.push_back({{"n", n},
                        {"file", name},
                        {"distance", l1_distance(f.field, ref)},
                        {"weak_gap", weak_gap(f.field, ref, bank)}});
    }
    auto j = header(cmd, cfg);
    j["delta"] = cfg.cluster.delta;
    j["delta0"] = delta0;
    j["levels"] = std::move(levels);
    std::string extra;
    if (cfg.cluster.epsilon) {
      auto w = vpcasas_check(*cfg.problem, ustar, cfg.set, cfg.cluster.delta, *cfg.cluster.epsilon, cfg.cluster.levels);
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& s : w.trace) trace.push_back({{"n", s.n}, {"j_gap", s.j_gap}});
      j["witness"] = {{"epsilon", *cfg.cluster.epsilon}, {"n", w.witness.levels}, {"j_gap", w.j_gap},
                      {"trace", std::move(trace)}};
      out.write(stem + "_witness.csv", to_csv(w.witness.field));
      extra = " witness n=" + std::to_string(w.witness.levels);
    }
    out.json(stem + ".json", j);
    return {ok, "cluster " + cfg.instance + ": " + std::to_string(cfg.cluster.levels) + " levels at delta=" +
                    fmt(cfg.cluster.delta) + " (delta0=" + fmt(delta0) + ")" + extra};
  }
  if (cmd == "weakball") {
    const ControlField ustar = reference_field(cfg);
    const auto [a, b] = cfg.problem->domain();
    const TestBank bank = TestBank::monomials(cfg.weakball.bank_degree, a, b);
    const WeakBallResult r = adversarial_weak_ball(ustar, cfg.set, cfg.weakball.epsilon, bank);
    auto j = header(cmd, cfg);
    j["epsilon"] = cfg.weakball.epsilon;
    j["bank_degree"] = cfg.weakball.bank_degree;
    j["distance"] = r.distance;
    j["exact"] = r.exact;
    j["patterns"] = r.patterns;
    j["weak_gap"] = weak_gap(r.field, ustar, bank);
    out.json(stem + ".json", j);
    out.write(stem + "_u.csv", to_csv(r.field));
    return {ok, "weakball " + cfg.instance + ": distance=" + fmt(r.distance) + (r.exact ? " (exact)" : " (lower bound)")};
  }
  auto write_record = [&](const ProbeRecord& rec) {
    out.write(rec.file_stem() + ".csv", to_csv(rec));
    auto j = to_json(rec);
    j["cells"] = cfg.mesh->cells();
    j["set"] = cfg.set.describe();
    out.json(rec.file_stem() + ".json", j);
  };
  if (cmd == "growth") {
    const ControlField ustar = reference_field(cfg);
    GrowthProfile prof = growth_profile(*cfg.problem, ustar, cfg.set, cfg.growth.delta, cfg.growth.eta,
                                        cfg.growth.samples, cfg.seed, popts);
    write_record(prof.record);
    std::string s = "growth " + cfg.instance + ":";
    for (const auto& bin : prof.bins) s += " " + fmt(bin.eta) + "->" + fmt(bin.omega);
    return {ok, s};
  }
  if (cmd == "probe-stability") {
    const ControlField ustar = reference_field(cfg);
    ProbeRecord rec = stability_probe(cfg.problem, ustar, cfg.set, cfg.stability.gamma, cfg.stability.delta,
                                      cfg.stability.samples, cfg.seed, popts);
    write_record(rec);
    std::string s = "stability " + cfg.instance + ":";
    for (const auto& e : rec.summary["modulus"]) {
      s += " " + fmt(e["delta"].get<double>()) + "->" + fmt(e["epsilon_hat"].get<double>());
    }
    return {ok, s};
  }
  if (cmd == "probe-subreg") {
    const ControlField ustar = reference_field(cfg);
    ProbeRecord rec = subregularity_probe(cfg.problem, ustar, cfg.set, cfg.subreg.kappa, cfg.subreg.samples,
                                          cfg.seed, cfg.subreg.residuals, popts);
    write_record(rec);
    std::string s = "subregularity " + cfg.instance + ":";
    for (const auto& e : rec.summary["by_residual"]) {
      s += " " + fmt(e["residual"].get<double>()) + "->" + fmt(e["max_distance"].get<double>());
    }
    return {ok, s};
  }
  if (cmd == "probe-genericity") {
    ProbeRecord rec = genericity_probe(cfg.problem, cfg.set, cfg.mesh, cfg.genericity.epsilon,
                                       cfg.genericity.samples, cfg.seed, cfg.genericity.starts, popts,
                                       cfg.genericity.defect_tol);
    write_record(rec);
    std::string s = "genericity " + cfg.instance + ":";
    for (const auto& e : rec.summary["by_epsilon"]) {
      const auto& f = e["bang_bang_fraction"];
      s += " " + fmt(e["epsilon"].get<double>()) + "->" + (f.is_null() ? std::string("n/a") : fmt(f.get<double>()));
    }
    return {ok, s};
  }
  if (cmd == "regpath") {
    const ControlField ustar = reference_field(cfg);
    cfg.solver.seed = cfg.seed;
    ProbeRecord rec = regularization_path(cfg.problem, ustar, cfg.set, cfg.regpath.p, cfg.regpath.eta, cfg.solver);
    write_record(rec);
    std::string s = "regpath " + cfg.instance + ":";
    for (const auto& row : rec.rows) s += " " + fmt(row.param) + "->" + fmt(row.distance);
    return {ok, s};
  }
  if (cmd == "gradcheck") {
    GradcheckOptions go;
    go.directions = cfg.gradcheck.directions;
    go.step = cfg.gradcheck.step;
    go.tol = cfg.gradcheck.tol;
    go.seed = cfg.seed;
    if (cfg.gradcheck.corrupt != 0) {
      const double c = cfg.gradcheck.corrupt;
      go.tamper = [c](DualField& s) {
        const double shift = c * (1 + linf_norm(s));
        for (double& v : s.values()) v = v * (1 + c) + shift;
      };
    }
    GradcheckReport rep = gradcheck(*cfg.problem, cfg.set, cfg.mesh, go);
    auto j = header(cmd, cfg);
    j["step"] = go.step;
    j["corrupt"] = cfg.gradcheck.corrupt;
    j["report"] = to_json(rep, go.tol);
    out.json(stem + ".json", j);
    if (!rep.passed) out.write(stem + "_worst_direction.csv", to_csv(rep.worst_direction));
    return {rep.passed ? ok : nonconvergence,
            "gradcheck " + cfg.instance + ": max_rel_error=" + fmt(rep.max_rel_error) +
                (rep.passed ? " pass" : " FAIL (worst direction " + std::to_string(rep.worst) + ")")};
  }
  fail(ErrorKind::validation, "unknown subcommand '" + cmd + "'");
}

inline void report_error(std::ostream& err, const std::string& kind, const std::string& msg, int code) {
  nlohmann::json j = {{"error", kind}, {"message", msg}, {"exit_code", code}};
  err << j.dump() << '\n';
}

}  // namespace detail

/// Runs one subcommand given an already-loaded configuration.
inline int execute(const std::string& cmd, config::RunConfig cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto result = detail::run_command(cmd, cfg);
    out << result.summary << '\n';
    return result.code;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    detail::report_error(err, std::string(to_string(e.kind())), e.what(), code);
    return code;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Bang-bang control experiments", "bangbang"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides ov;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  auto* dir_opt = app.add_option("--out-dir", out_dir, "output directory (overrides the config)");
  auto* thr_opt = app.add_option("--threads", threads, "worker threads for sample sweeps")->check(CLI::PositiveNumber);

  std::string config_path;
  double delta = 0;
  int levels = 0;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* levels_opt = nullptr;
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config,-c", config_path, "run configuration file")->required();
    if (name == "cluster") {
      delta_opt = sub->add_option("--delta", delta, "distance of the clustering members");
      levels_opt = sub->add_option("--levels", levels, "number of refinement levels")->check(CLI::Range(1, 40));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    detail::report_error(err, "validation", e.what(), validation_error);
    return validation_error;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  config::RunConfig cfg;
  try {
    cfg = config::load(config_path);
    if (*seed_opt) cfg.seed = seed;
    if (*dir_opt) cfg.out_dir = out_dir;
    if (*thr_opt) cfg.threads = threads;
    if (delta_opt && *delta_opt) cfg.cluster.delta = delta;
    if (levels_opt && *levels_opt) cfg.cluster.levels = levels;
    if (cfg.reference.kind == "csv") {
      // the reference field fixes the mesh of the run
      std::ifstream in(cfg.reference.path);
      if (!in) fail(ErrorKind::validation, "cannot open reference field '" + cfg.reference.path + "'");
      cfg.mesh = read_csv<ControlTag>(in).mesh();
    }
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    detail::report_error(err, std::string(to_string(e.kind())), e.what(), code);
    return code;
  }
  return execute(cmd, std::move(cfg), out, err);
}

}  // namespace bangbang::cli
