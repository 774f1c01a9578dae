#include "nls/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace nls {

namespace {

using Fn = std::function<double(double, double, double)>;

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  Fn parse() {
    Fn e = sum();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return e;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("expression error at position " + std::to_string(pos_) +
                                " in \"" + s_ + "\": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  Fn sum() {
    Fn lhs = product();
    for (;;) {
      if (eat('+')) {
        Fn rhs = product();
        lhs = [lhs, rhs](double x, double y, double t) { return lhs(x, y, t) + rhs(x, y, t); };
      } else if (eat('-')) {
        Fn rhs = product();
        lhs = [lhs, rhs](double x, double y, double t) { return lhs(x, y, t) - rhs(x, y, t); };
      } else {
        return lhs;
      }
    }
  }

  Fn product() {
    Fn lhs = power();
    for (;;) {
      if (eat('*')) {
        Fn rhs = power();
        lhs = [lhs, rhs](double x, double y, double t) { return lhs(x, y, t) * rhs(x, y, t); };
      } else if (eat('/')) {
        Fn rhs = power();
        lhs = [lhs, rhs](double x, double y, double t) { return lhs(x, y, t) / rhs(x, y, t); };
      } else {
        return lhs;
      }
    }
  }

  Fn power() {
    Fn base = unary();
    if (eat('^')) {
      Fn exp = power();  // right associative
      return [base, exp](double x, double y, double t) {
        return std::pow(base(x, y, t), exp(x, y, t));
      };
    }
    return base;
  }

  Fn unary() {
    if (eat('-')) {
      Fn e = unary();
      return [e](double x, double y, double t) { return -e(x, y, t); };
    }
    eat('+');
    return primary();
  }

  Fn primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Fn e = sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  Fn number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
            s_[pos_] == 'e' || s_[pos_] == 'E' ||
            ((s_[pos_] == '+' || s_[pos_] == '-') && pos_ > start &&
             (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    double v = std::strtod(s_.substr(start, pos_ - start).c_str(), nullptr);
    return [v](double, double, double) { return v; };
  }

  Fn ident() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string name = s_.substr(start, pos_ - start);
    if (name == "x") return [](double x, double, double) { return x; };
    if (name == "y") return [](double, double y, double) { return y; };
    if (name == "t") return [](double, double, double t) { return t; };
    if (name == "pi") return [](double, double, double) { return M_PI; };
    if (!eat('(')) fail("unknown identifier '" + name + "'");
    Fn arg = sum();
    if (!eat(')')) fail("expected ')' after argument of " + name);
    if (name == "sin") return [arg](double x, double y, double t) { return std::sin(arg(x, y, t)); };
    if (name == "cos") return [arg](double x, double y, double t) { return std::cos(arg(x, y, t)); };
    if (name == "exp") return [arg](double x, double y, double t) { return std::exp(arg(x, y, t)); };
    if (name == "abs") return [arg](double x, double y, double t) { return std::abs(arg(x, y, t)); };
    fail("unknown function '" + name + "'");
  }
};

}  // namespace

Expr Expr::parse(const std::string& text) {
  Expr e;
  e.fn_ = Parser(text).parse();
  e.src_ = text;
  return e;
}

}  // namespace nls
