// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_EXPRESSION_HPP
#define CAVITY_TD_EXPRESSION_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "cavity_td/error.hpp"

namespace cavity_td
{

//
// Closed real interval with the handful of operations needed to bound a material
// expression over a box. No directed rounding: enclosures are used for validation with a
// relative slack, not for verified computing.
//
struct Interval
{
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double v) { return {v, v}; }
  static Interval whole()
  {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {-inf, inf};
  }
  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
inline Interval operator-(Interval a) { return {-a.hi, -a.lo}; }
inline Interval operator*(Interval a, Interval b)
{
  const double p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
}
inline Interval operator/(Interval a, Interval b)
{
  if (b.contains(0.0))
  {
    return Interval::whole();
  }
  return a * Interval{1.0 / b.hi, 1.0 / b.lo};
}
inline Interval hull(Interval a, Interval b)
{
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

namespace interval
{

inline Interval sin(Interval a)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.width() >= two_pi)
  {
    return {-1.0, 1.0};
  }
  double lo = std::min(std::sin(a.lo), std::sin(a.hi));
  double hi = std::max(std::sin(a.lo), std::sin(a.hi));
  // Extrema at pi/2 + k pi inside the interval.
  const double k0 = std::ceil((a.lo - std::numbers::pi / 2) / std::numbers::pi);
  for (double k = k0; std::numbers::pi / 2 + k * std::numbers::pi <= a.hi; k += 1.0)
  {
    const long ki = static_cast<long>(k);
    if (ki % 2 == 0)
    {
      hi = 1.0;
    }
    else
    {
      lo = -1.0;
    }
  }
  return {lo, hi};
}

inline Interval cos(Interval a) { return sin(a + Interval::point(std::numbers::pi / 2)); }

template <class F>
Interval monotone(Interval a, F f)
{
  return {f(a.lo), f(a.hi)};
}

inline Interval abs(Interval a)
{
  if (a.contains(0.0))
  {
    return {0.0, std::max(-a.lo, a.hi)};
  }
  const double l = std::abs(a.lo), h = std::abs(a.hi);
  return {std::min(l, h), std::max(l, h)};
}

inline Interval ipow(Interval a, int n)
{
  if (n == 0)
  {
    return Interval::point(1.0);
  }
  if (n < 0)
  {
    return Interval::point(1.0) / ipow(a, -n);
  }
  if (n % 2 == 1)
  {
    return {std::pow(a.lo, n), std::pow(a.hi, n)};
  }
  const Interval m = abs(a);
  return {std::pow(m.lo, n), std::pow(m.hi, n)};
}

}  // namespace interval

//
// Scalar expression in (x, y): numbers, x, y, pi, + - * / ^, unary minus, and the
// functions sin cos exp log sqrt abs tanh.
//
class Expression
{
public:
  Expression() = default;
  explicit Expression(std::string source) : source_(std::move(source))
  {
    Parser p{source_, 0};
    root_ = p.parse_expr();
    p.skip_ws();
    verify(p.pos == source_.size(), ErrorKind::ConfigError,
           "trailing characters in expression '" + source_ + "'");
  }

  const std::string &source() const { return source_; }

  double operator()(double x, double y) const { return eval(*root_, x, y); }

  // Enclosure over the box [x0,x1]x[y0,y1], tightened by uniform subdivision.
  Interval bounds(double x0, double x1, double y0, double y1, int splits = 16) const
  {
    Interval out{std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
    for (int i = 0; i < splits; i++)
    {
      const Interval xi{x0 + (x1 - x0) * i / splits, x0 + (x1 - x0) * (i + 1) / splits};
      for (int j = 0; j < splits; j++)
      {
        const Interval yj{y0 + (y1 - y0) * j / splits, y0 + (y1 - y0) * (j + 1) / splits};
        out = hull(out, eval(*root_, xi, yj));
      }
    }
    return out;
  }

private:
  struct Node
  {
    char op;  // 'n' number, 'x', 'y', '+', '-', '*', '/', '^', 'u' (negate), 'f' (function)
    double value = 0.0;
    std::string fn;
    std::unique_ptr<Node> a, b;
  };

  struct Parser
  {
    const std::string &s;
    std::size_t pos;

    void skip_ws()
    {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      {
        pos++;
      }
    }
    bool accept(char c)
    {
      skip_ws();
      if (pos < s.size() && s[pos] == c)
      {
        pos++;
        return true;
      }
      return false;
    }
    [[noreturn]] void fail(const std::string &msg) const
    {
      throw Error(ErrorKind::ConfigError,
                  msg + " at position " + std::to_string(pos) + " in '" + s + "'");
    }
    static std::unique_ptr<Node> binary(char op, std::unique_ptr<Node> a, std::unique_ptr<Node> b)
    {
      auto n = std::make_unique<Node>();
      n->op = op;
      n->a = std::move(a);
      n->b = std::move(b);
      return n;
    }

    std::unique_ptr<Node> parse_expr()
    {
      auto lhs = parse_term();
      for (;;)
      {
        if (accept('+'))
        {
          lhs = binary('+', std::move(lhs), parse_term());
        }
        else if (accept('-'))
        {
          lhs = binary('-', std::move(lhs), parse_term());
        }
        else
        {
          return lhs;
        }
      }
    }
    std::unique_ptr<Node> parse_term()
    {
      auto lhs = parse_unary();
      for (;;)
      {
        if (accept('*'))
        {
          lhs = binary('*', std::move(lhs), parse_unary());
        }
        else if (accept('/'))
        {
          lhs = binary('/', std::move(lhs), parse_unary());
        }
        else
        {
          return lhs;
        }
      }
    }
    std::unique_ptr<Node> parse_unary()
    {
      if (accept('-'))
      {
        auto n = std::make_unique<Node>();
        n->op = 'u';
        n->a = parse_unary();
        return n;
      }
      if (accept('+'))
      {
        return parse_unary();
      }
      return parse_power();
    }
    std::unique_ptr<Node> parse_power()
    {
      auto base = parse_primary();
      if (accept('^'))
      {
        return binary('^', std::move(base), parse_unary());
      }
      return base;
    }
    std::unique_ptr<Node> parse_primary()
    {
      skip_ws();
      if (pos >= s.size())
      {
        fail("unexpected end of expression");
      }
      if (accept('('))
      {
        auto e = parse_expr();
        if (!accept(')'))
        {
          fail("expected ')'");
        }
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      {
        std::size_t used = 0;
        const double v = std::stod(s.substr(pos), &used);
        pos += used;
        auto n = std::make_unique<Node>();
        n->op = 'n';
        n->value = v;
        return n;
      }
      if (std::isalpha(static_cast<unsigned char>(c)))
      {
        const std::size_t start = pos;
        while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos])))
        {
          pos++;
        }
        const std::string name = s.substr(start, pos - start);
        auto n = std::make_unique<Node>();
        if (name == "x" || name == "y")
        {
          n->op = name[0];
          return n;
        }
        if (name == "pi")
        {
          n->op = 'n';
          n->value = std::numbers::pi;
          return n;
        }
        static const char *fns[] = {"sin", "cos", "exp", "log", "sqrt", "abs", "tanh"};
        if (std::find(std::begin(fns), std::end(fns), name) == std::end(fns))
        {
          fail("unknown identifier '" + name + "'");
        }
        if (!accept('('))
        {
          fail("expected '(' after " + name);
        }
        n->op = 'f';
        n->fn = name;
        n->a = parse_expr();
        if (!accept(')'))
        {
          fail("expected ')'");
        }
        return n;
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  static double apply_fn(const std::string &fn, double v)
  {
    if (fn == "sin") return std::sin(v);
    if (fn == "cos") return std::cos(v);
    if (fn == "exp") return std::exp(v);
    if (fn == "log") return std::log(v);
    if (fn == "sqrt") return std::sqrt(v);
    if (fn == "abs") return std::abs(v);
    return std::tanh(v);
  }

  static double eval(const Node &n, double x, double y)
  {
    switch (n.op)
    {
      case 'n': return n.value;
      case 'x': return x;
      case 'y': return y;
      case '+': return eval(*n.a, x, y) + eval(*n.b, x, y);
      case '-': return eval(*n.a, x, y) - eval(*n.b, x, y);
      case '*': return eval(*n.a, x, y) * eval(*n.b, x, y);
      case '/': return eval(*n.a, x, y) / eval(*n.b, x, y);
      case '^': return std::pow(eval(*n.a, x, y), eval(*n.b, x, y));
      case 'u': return -eval(*n.a, x, y);
      default: return apply_fn(n.fn, eval(*n.a, x, y));
    }
  }

  static Interval eval(const Node &n, Interval x, Interval y)
  {
    switch (n.op)
    {
      case 'n': return Interval::point(n.value);
      case 'x': return x;
      case 'y': return y;
      case '+': return eval(*n.a, x, y) + eval(*n.b, x, y);
      case '-': return eval(*n.a, x, y) - eval(*n.b, x, y);
      case '*': return eval(*n.a, x, y) * eval(*n.b, x, y);
      case '/': return eval(*n.a, x, y) / eval(*n.b, x, y);
      case 'u': return -eval(*n.a, x, y);
      case '^':
      {
        const Interval base = eval(*n.a, x, y);
        const Interval e = eval(*n.b, x, y);
        if (e.width() == 0.0 && e.lo == std::round(e.lo) && std::abs(e.lo) < 64)
        {
          return interval::ipow(base, static_cast<int>(e.lo));
        }
        if (base.lo <= 0.0)
        {
          return Interval::whole();
        }
        const Interval lb = interval::monotone(base, [](double v) { return std::log(v); });
        return interval::monotone(lb * e, [](double v) { return std::exp(v); });
      }
      default: break;
    }
    const Interval a = eval(*n.a, x, y);
    if (n.fn == "sin") return interval::sin(a);
    if (n.fn == "cos") return interval::cos(a);
    if (n.fn == "exp") return interval::monotone(a, [](double v) { return std::exp(v); });
    if (n.fn == "tanh") return interval::monotone(a, [](double v) { return std::tanh(v); });
    if (n.fn == "abs") return interval::abs(a);
    if (a.lo < 0.0)
    {
      return Interval::whole();
    }
    if (n.fn == "sqrt") return interval::monotone(a, [](double v) { return std::sqrt(v); });
    return interval::monotone(a, [](double v) { return std::log(v); });
  }

  std::string source_;
  std::shared_ptr<const Node> root_;
};

}  // namespace cavity_td

#endif  // CAVITY_TD_EXPRESSION_HPP
