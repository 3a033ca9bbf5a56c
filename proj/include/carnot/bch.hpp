#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

namespace carnot::bch {

/// Exact rational used while tabulating series coefficients.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t n, std::int64_t d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    return {n / (g ? g : 1), d / (g ? g : 1)};
  }
  friend Rational operator+(Rational a, Rational b) {
    const std::int64_t l = std::lcm(a.den, b.den);
    return make(a.num * (l / a.den) + b.num * (l / b.den), l);
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_zero() const { return num == 0; }
};

/// Word over {X = 0, Y = 1}; evaluated as the right-nested commutator
/// [w_1, [w_2, [..., [w_{k-1}, w_k]]]].
using Word = std::vector<std::uint8_t>;

struct Term {
  Word word;
  Rational coefficient;
};

namespace detail {

inline std::int64_t factorial(int k) {
  std::int64_t f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Dynkin: log(e^X e^Y) = sum_n (-1)^{n-1}/n sum_{r_i+s_i>0}
//   [X^{r_1} Y^{s_1} ... X^{r_n} Y^{s_n}] / ((sum r_i + s_i) prod r_i! s_i!)
inline void enumerate(int remaining, int n_left, int n_total, int weight, Word& word, std::int64_t fact_prod,
                      std::map<Word, Rational>& acc) {
  if (n_left == 0) {
    if (remaining != 0) return;
    const std::int64_t sign = (n_total % 2 == 1) ? 1 : -1;
    Rational r = Rational::make(sign, static_cast<std::int64_t>(n_total) * weight * fact_prod);
    auto it = acc.find(word);
    if (it == acc.end()) acc.emplace(word, r);
    else it->second = it->second + r;
    return;
  }
  for (int r = 0; r <= remaining; ++r)
    for (int s = 0; r + s <= remaining; ++s) {
      if (r + s == 0) continue;
      if (remaining - r - s < n_left - 1) continue;
      const std::size_t mark = word.size();
      word.insert(word.end(), static_cast<std::size_t>(r), 0);
      word.insert(word.end(), static_cast<std::size_t>(s), 1);
      enumerate(remaining - r - s, n_left - 1, n_total, weight, word, fact_prod * factorial(r) * factorial(s), acc);
      word.resize(mark);
    }
}

}  // namespace detail

/// Terms of total weight `weight` with nonzero coefficient and nonvanishing
/// nested commutator (a word ending in two equal letters is zero).
inline std::vector<Term> terms_of_weight(int weight) {
  std::map<Word, Rational> acc;
  Word word;
  for (int n = 1; n <= weight; ++n) detail::enumerate(weight, n, n, weight, word, 1, acc);
  std::vector<Term> out;
  for (auto& [w, c] : acc) {
    if (c.is_zero()) continue;
    if (w.size() >= 2 && w[w.size() - 1] == w[w.size() - 2]) continue;
    out.push_back({w, c});
  }
  return out;
}

inline constexpr int kMaxWeight = 6;

/// Terms up to kMaxWeight, grouped by weight (index 0 holds weight 1).
inline const std::vector<std::vector<Term>>& table() {
  static const std::vector<std::vector<Term>> t = [] {
    std::vector<std::vector<Term>> v;
    for (int w = 1; w <= kMaxWeight; ++w) v.push_back(terms_of_weight(w));
    return v;
  }();
  return t;
}

}  // namespace carnot::bch
