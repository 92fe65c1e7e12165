#include "bangbang/expression.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace bangbang {
namespace {

TEST(Expression, EvaluatesArithmetic) {
  auto e = Expression::parse("1 + 2*x - x^2/4", {"x"});
  const double x[1] = {3.0};
  EXPECT_DOUBLE_EQ(e.value(x), 1 + 6 - 9.0 / 4);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2", {}).value({}), -4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3^2", {}).value({}), 512.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1.5e-1*2", {}).value({}), 0.3);
  EXPECT_DOUBLE_EQ(Expression::parse("pow(2, 10)", {}).value({}), 1024.0);
}

TEST(Expression, GradientMatchesFiniteDifferences) {
  const std::vector<std::string> exprs = {
      "sin(t*y0) + y1^3 - exp(-y0)*y1", "sqrt(1 + y0^2) / (2 + cos(y1))",
      "tanh(y0 - y1) * log(3 + t)", "pow(1 + y0^2, 0.5 + 0.1*y1)", "abs(y0 - 0.25) * y1"};
  for (const auto& text : exprs) {
    auto e = Expression::parse(text, {"t", "y0", "y1"});
    const double v[3] = {0.3, 0.7, -0.4};
    double g[3] = {};
    e.eval(v, g);
    for (int k = 0; k < 3; ++k) {
      double vp[3] = {v[0], v[1], v[2]};
      double vm[3] = {v[0], v[1], v[2]};
      const double h = 1e-6;
      vp[k] += h;
      vm[k] -= h;
      const double fd = (e.value(vp) - e.value(vm)) / (2 * h);
      EXPECT_NEAR(g[k], fd, 1e-8) << text << " var " << k;
    }
  }
}

TEST(Expression, AliasesAndErrors) {
  auto e = Expression::parse("y^2", {"t", "y0"}, {{"y", 1}});
  const double v[2] = {0.0, 3.0};
  double g[2] = {};
  EXPECT_DOUBLE_EQ(e.eval(v, g), 9.0);
  EXPECT_DOUBLE_EQ(g[1], 6.0);
  EXPECT_THROW(Expression::parse("z + 1", {"t"}), Error);
  EXPECT_THROW(Expression::parse("foo(t)", {"t"}), Error);
  EXPECT_THROW(Expression::parse("(t + 1", {"t"}), Error);
  EXPECT_THROW(Expression::parse("t 1", {"t"}), Error);
}

}  // namespace
}  // namespace bangbang
