#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bangbang/error.hpp"
#include "bangbang/problem.hpp"

namespace bangbang {

/// Multivariate polynomial sum_k coef_k prod_j m_j^{e_kj}.
class Polynomial {
 public:
  struct Term {
    double coef;
    std::vector<int> exponents;
  };

  Polynomial() = default;
  Polynomial(std::size_t vars, std::vector<Term> terms) : vars_(vars), terms_(std::move(terms)) {
    for (const auto& t : terms_) {
      if (t.exponents.size() != vars_) {
        fail(ErrorKind::validation, "polynomial term has wrong number of exponents");
      }
      for (int e : t.exponents) {
        if (e < 0) fail(ErrorKind::validation, "polynomial exponents must be >= 0");
      }
    }
  }

  /// sum_j coef_j m_j
  static Polynomial linear(std::vector<double> coefs) {
    std::vector<Term> terms;
    for (std::size_t j = 0; j < coefs.size(); ++j) {
      std::vector<int> e(coefs.size(), 0);
      e[j] = 1;
      terms.push_back({coefs[j], e});
    }
    return Polynomial(coefs.size(), std::move(terms));
  }

  /// sum_j m_j^2
  static Polynomial sum_of_squares(std::size_t vars) {
    std::vector<Term> terms;
    for (std::size_t j = 0; j < vars; ++j) {
      std::vector<int> e(vars, 0);
      e[j] = 2;
      terms.push_back({1.0, e});
    }
    return Polynomial(vars, std::move(terms));
  }

  std::size_t vars() const { return vars_; }
  const std::vector<Term>& terms() const { return terms_; }

  double value(std::span<const double> m) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double p = t.coef;
      for (std::size_t j = 0; j < vars_; ++j) p *= ipow(m[j], t.exponents[j]);
      s += p;
    }
    return s;
  }

  void gradient(std::span<const double> m, std::span<double> g) const {
    for (std::size_t j = 0; j < vars_; ++j) g[j] = 0.0;
    for (const auto& t : terms_) {
      for (std::size_t j = 0; j < vars_; ++j) {
        if (t.exponents[j] == 0) continue;
        double p = t.coef * t.exponents[j] * ipow(m[j], t.exponents[j] - 1);
        for (std::size_t l = 0; l < vars_; ++l) {
          if (l != j) p *= ipow(m[l], t.exponents[l]);
        }
        g[j] += p;
      }
    }
  }

 private:
  static double ipow(double x, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= x;
    return r;
  }

  std::size_t vars_ = 0;
  std::vector<Term> terms_;
};

/// J(u) = Phi(<w_1, u>, ..., <w_K, u>) with weights given as functions of t
/// (cell-averaged on each mesh) and one weight per component block:
/// weight k pairs with control component `component[k]`.
class MomentProblem final : public Problem {
 public:
  struct Weight {
    std::string label;
    std::function<double(double)> fn;
    std::size_t component = 0;
  };

  MomentProblem(std::string name, std::size_t control_dim, std::vector<Weight> weights,
                Polynomial outer, std::pair<double, double> domain = {0.0, 1.0})
      : name_(std::move(name)), dim_(control_dim), weights_(std::move(weights)),
        outer_(std::move(outer)), domain_(domain) {
    if (outer_.vars() != weights_.size()) {
      fail(ErrorKind::validation, "outer polynomial arity must equal the number of weights");
    }
    for (const auto& w : weights_) {
      if (w.component >= dim_) fail(ErrorKind::validation, "weight component out of range");
    }
  }

  /// Polynomial weight sum_k coefs[k] t^k.
  static Weight polynomial_weight(std::vector<double> coefs, std::size_t component = 0) {
    std::string label;
    for (std::size_t k = 0; k < coefs.size(); ++k) {
      if (k) label += "+";
      label += format_double(coefs[k]) + "*t^" + std::to_string(k);
    }
    return {label,
            [coefs](double t) {
              double s = 0.0;
              for (std::size_t k = coefs.size(); k-- > 0;) s = s * t + coefs[k];
              return s;
            },
            component};
  }

  std::string name() const override { return name_; }
  std::size_t control_dim() const override { return dim_; }
  std::pair<double, double> domain() const override { return domain_; }
  std::size_t moments() const { return weights_.size(); }

  /// Weight fields on `mesh` (scalar; applied to their component).
  std::shared_ptr<const std::vector<DualField>> weight_fields(const MeshPtr& mesh) const {
    return cache_.get(mesh, [this](const MeshPtr& m) {
      std::vector<DualField> out;
      out.reserve(weights_.size());
      for (const auto& w : weights_) out.push_back(DualField::cell_average(m, w.fn));
      return out;
    });
  }

  std::vector<double> moment_values(const ControlField& u) const {
    check_dim(u);
    const auto w = weight_fields(u.mesh());
    std::vector<double> m(weights_.size());
    const Mesh1D& mesh = *u.mesh();
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      CompensatedSum s;
      const std::size_t j = weights_[k].component;
      for (std::size_t i = 0; i < mesh.cells(); ++i) s += mesh.measure(i) * (*w)[k](i, 0) * u(i, j);
      m[k] = s.value();
    }
    return m;
  }

  double evaluate(const ControlField& u) const override {
    return outer_.value(moment_values(u));
  }

  DualField switching(const ControlField& u) const override {
    const auto m = moment_values(u);
    std::vector<double> g(m.size());
    outer_.gradient(m, g);
    const auto w = weight_fields(u.mesh());
    DualField s(u.mesh(), dim_);
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const std::size_t j = weights_[k].component;
      for (std::size_t i = 0; i < u.cells(); ++i) s(i, j) += g[k] * (*w)[k](i, 0);
    }
    return s;
  }

  std::function<double(double)> section(const ControlField& u,
                                        const ControlField& d) const override {
    auto mu = moment_values(u);
    auto md = moment_values(d);
    return [this, mu = std::move(mu), md = std::move(md)](double t) {
      std::vector<double> m(mu.size());
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = mu[k] + t * md[k];
      return outer_.value(m);
    };
  }

 private:
  std::string name_;
  std::size_t dim_;
  std::vector<Weight> weights_;
  Polynomial outer_;
  std::pair<double, double> domain_;
  detail::MeshCache<std::vector<DualField>> cache_;
};

}  // namespace bangbang
