#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "carnot/errors.hpp"

namespace carnot {

/// Multivariate polynomial in variables x1..xn with real coefficients.
///
/// Terms are kept in canonical order (lexicographic on the exponent vector)
/// with like terms merged and zero coefficients dropped, so two polynomials
/// compare equal iff their term lists match.
class Polynomial {
public:
  Polynomial() = default;
  explicit Polynomial(std::size_t num_vars) : num_vars_(num_vars) {}

  static Polynomial constant(std::size_t num_vars, double c) {
    Polynomial p(num_vars);
    p.add_term(c, std::vector<int>(num_vars, 0));
    return p;
  }

  /// The coordinate function x_{index+1}.
  static Polynomial variable(std::size_t num_vars, std::size_t index) {
    Polynomial p(num_vars);
    std::vector<int> e(num_vars, 0);
    e.at(index) = 1;
    p.add_term(1.0, e);
    return p;
  }

  std::size_t num_vars() const { return num_vars_; }
  std::size_t num_terms() const { return coefs_.size(); }
  bool is_zero() const { return coefs_.empty(); }

  bool is_constant() const {
    for (std::size_t t = 0; t < num_terms(); ++t)
      for (std::size_t v = 0; v < num_vars_; ++v)
        if (exps_[t * num_vars_ + v] != 0) return false;
    return true;
  }

  double constant_value() const {
    for (std::size_t t = 0; t < num_terms(); ++t) {
      bool c = true;
      for (std::size_t v = 0; v < num_vars_; ++v) c = c && exps_[t * num_vars_ + v] == 0;
      if (c) return coefs_[t];
    }
    return 0.0;
  }

  int degree() const {
    int d = 0;
    for (std::size_t t = 0; t < num_terms(); ++t) {
      int s = 0;
      for (std::size_t v = 0; v < num_vars_; ++v) s += exps_[t * num_vars_ + v];
      d = std::max(d, s);
    }
    return d;
  }

  double eval(std::span<const double> x) const {
    double sum = 0.0;
    for (std::size_t t = 0; t < coefs_.size(); ++t) {
      double m = coefs_[t];
      const int* e = &exps_[t * num_vars_];
      for (std::size_t v = 0; v < num_vars_; ++v) {
        for (int k = 0; k < e[v]; ++k) m *= x[v];
      }
      sum += m;
    }
    return sum;
  }

  /// Exact partial derivative with respect to x_{var+1}.
  Polynomial derivative(std::size_t var) const {
    Polynomial d(num_vars_);
    std::vector<int> e(num_vars_);
    for (std::size_t t = 0; t < num_terms(); ++t) {
      const int k = exps_[t * num_vars_ + var];
      if (k == 0) continue;
      std::copy_n(&exps_[t * num_vars_], num_vars_, e.begin());
      e[var] -= 1;
      d.add_term(coefs_[t] * k, e);
    }
    return d;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    Polynomial r = a;
    r.absorb(b, 1.0);
    return r;
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    Polynomial r = a;
    r.absorb(b, -1.0);
    return r;
  }
  friend Polynomial operator*(double s, const Polynomial& a) {
    Polynomial r(a.num_vars_);
    if (s == 0.0) return r;
    r.exps_ = a.exps_;
    r.coefs_ = a.coefs_;
    for (double& c : r.coefs_) c *= s;
    return r;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial r(a.num_vars_);
    std::vector<int> e(a.num_vars_);
    for (std::size_t i = 0; i < a.num_terms(); ++i)
      for (std::size_t j = 0; j < b.num_terms(); ++j) {
        for (std::size_t v = 0; v < a.num_vars_; ++v)
          e[v] = a.exps_[i * a.num_vars_ + v] + b.exps_[j * b.num_vars_ + v];
        r.add_term(a.coefs_[i] * b.coefs_[j], e);
      }
    return r;
  }
  Polynomial pow(int k) const {
    Polynomial r = constant(num_vars_, 1.0);
    for (int i = 0; i < k; ++i) r = r * *this;
    return r;
  }

  /// Substitutes polynomial `args[v]` for x_{v+1}; all args share one arity.
  Polynomial compose(std::span<const Polynomial> args) const {
    const std::size_t m = args.empty() ? 0 : args[0].num_vars();
    Polynomial r(m);
    for (std::size_t t = 0; t < num_terms(); ++t) {
      Polynomial mono = constant(m, coefs_[t]);
      for (std::size_t v = 0; v < num_vars_; ++v) {
        const int k = exps_[t * num_vars_ + v];
        if (k > 0) mono = mono * args[v].pow(k);
      }
      r.absorb(mono, 1.0);
    }
    return r;
  }

  bool operator==(const Polynomial& o) const {
    return num_vars_ == o.num_vars_ && exps_ == o.exps_ && coefs_ == o.coefs_;
  }

  std::string to_string() const {
    if (is_zero()) return "0";
    std::ostringstream os;
    os.precision(17);
    for (std::size_t t = 0; t < num_terms(); ++t) {
      double c = coefs_[t];
      if (t > 0) os << (c < 0 ? " - " : " + ");
      else if (c < 0) os << "-";
      c = std::abs(c);
      bool wrote = false;
      bool all_zero = true;
      for (std::size_t v = 0; v < num_vars_; ++v) all_zero = all_zero && exps_[t * num_vars_ + v] == 0;
      if (c != 1.0 || all_zero) {
        os << c;
        wrote = true;
      }
      for (std::size_t v = 0; v < num_vars_; ++v) {
        const int k = exps_[t * num_vars_ + v];
        if (k == 0) continue;
        if (wrote) os << "*";
        os << "x" << (v + 1);
        if (k > 1) os << "^" << k;
        wrote = true;
      }
    }
    return os.str();
  }

private:
  void add_term(double c, const std::vector<int>& e) {
    if (c == 0.0) return;
    // binary search on the flat exponent array
    std::size_t lo = 0, hi = num_terms();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (std::lexicographical_compare(&exps_[mid * num_vars_], &exps_[mid * num_vars_] + num_vars_,
                                       e.begin(), e.end()))
        lo = mid + 1;
      else
        hi = mid;
    }
    if (lo < num_terms() && std::equal(e.begin(), e.end(), &exps_[lo * num_vars_])) {
      coefs_[lo] += c;
      if (coefs_[lo] == 0.0) {
        coefs_.erase(coefs_.begin() + static_cast<std::ptrdiff_t>(lo));
        exps_.erase(exps_.begin() + static_cast<std::ptrdiff_t>(lo * num_vars_),
                    exps_.begin() + static_cast<std::ptrdiff_t>((lo + 1) * num_vars_));
      }
      return;
    }
    coefs_.insert(coefs_.begin() + static_cast<std::ptrdiff_t>(lo), c);
    exps_.insert(exps_.begin() + static_cast<std::ptrdiff_t>(lo * num_vars_), e.begin(), e.end());
  }

  void absorb(const Polynomial& b, double s) {
    std::vector<int> e(num_vars_);
    for (std::size_t t = 0; t < b.num_terms(); ++t) {
      std::copy_n(&b.exps_[t * num_vars_], num_vars_, e.begin());
      add_term(s * b.coefs_[t], e);
    }
  }

  std::size_t num_vars_ = 0;
  std::vector<int> exps_;
  std::vector<double> coefs_;
};

namespace detail {

class PolyParser {
public:
  PolyParser(std::string_view text, std::size_t num_vars) : s_(text), n_(num_vars) {}

  Polynomial parse() {
    skip_ws();
    if (pos_ >= s_.size()) fail("empty expression");
    Polynomial p = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character");
    return p;
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("polynomial '" + std::string(s_) + "': " + what + " at offset " +
                      std::to_string(pos_));
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial acc = term();
    for (;;) {
      if (accept('+')) acc = acc + term();
      else if (accept('-')) acc = acc - term();
      else return acc;
    }
  }

  Polynomial term() {
    Polynomial acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        Polynomial d = unary();
        if (!d.is_constant() || d.constant_value() == 0.0) fail("division by a non-constant or zero");
        acc = (1.0 / d.constant_value()) * acc;
      } else {
        return acc;
      }
    }
  }

  Polynomial unary() {
    if (accept('-')) return -1.0 * unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = atom();
    if (accept('^')) {
      skip_ws();
      int k = 0;
      const auto* first = s_.data() + pos_;
      auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), k);
      if (ec != std::errc{} || k < 0) fail("exponent must be a nonnegative integer");
      pos_ += static_cast<std::size_t>(ptr - first);
      return base.pow(k);
    }
    return base;
  }

  Polynomial atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      if (!accept(')')) fail("missing ')'");
      return p;
    }
    if (c == 'x') {
      ++pos_;
      std::size_t idx = 0;
      const auto* first = s_.data() + pos_;
      auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), idx);
      if (ec != std::errc{}) fail("variable index expected after 'x'");
      pos_ += static_cast<std::size_t>(ptr - first);
      if (idx < 1 || idx > n_) fail("variable x" + std::to_string(idx) + " out of range");
      return Polynomial::variable(n_, idx - 1);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
              s_[pos_] == 'e' || s_[pos_] == 'E' ||
              ((s_[pos_] == '-' || s_[pos_] == '+') && pos_ > start &&
               (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
        ++pos_;
      const std::string num(s_.substr(start, pos_ - start));
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(num, &used);
      } catch (const std::exception&) {
        fail("bad number '" + num + "'");
      }
      if (used != num.size()) fail("bad number '" + num + "'");
      return Polynomial::constant(n_, v);
    }
    fail(std::string("unexpected '") + c + "'");
  }

  std::string_view s_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses expressions such as "x1 - x2^2/2 + 3*(x1 + 1)" over x1..x{num_vars}.
/// Division is allowed only by nonzero constants, which is how rational
/// coefficients ("1/2*x1") are written.
inline Polynomial parse_polynomial(std::string_view text, std::size_t num_vars) {
  return detail::PolyParser(text, num_vars).parse();
}

}  // namespace carnot
