#pragma once

#include <functional>
#include <memory>
#include <string>

namespace nls {

// Compiled arithmetic expression in the variables (x, y, t).
// Grammar: + - * / ^ with parentheses, unary minus, numeric literals,
// the constant pi and the functions sin, cos, exp, abs.
class Expr {
 public:
  double operator()(double x, double y, double t) const { return fn_(x, y, t); }
  const std::string& source() const { return src_; }

  static Expr parse(const std::string& text);

 private:
  std::function<double(double, double, double)> fn_;
  std::string src_;
};

}  // namespace nls
