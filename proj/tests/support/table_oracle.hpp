#pragma once

#include <cmath>
#include <vector>

#include "gsmrl/discrete_exact.hpp"

namespace gsmrl::test_support {

// Brute-force quantities over a flat discrete joint table, written independently of the library.
struct TableOracle {
  std::vector<std::size_t> levels;
  std::size_t K;
  std::vector<double> table;  // normalized copy

  std::size_t configurations() const {
    std::size_t s = 1;
    for (auto l : levels) s *= l;
    return s;
  }
  std::vector<std::size_t> decode(std::size_t code) const {
    std::vector<std::size_t> x(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
      x[i] = code % levels[i];
      code /= levels[i];
    }
    return x;
  }
  bool matches(const std::vector<std::size_t>& x, const AcquisitionState& s) const {
    for (const auto& e : s.entries())
      if (x[e.index] != static_cast<std::size_t>(e.value)) return false;
    return true;
  }
  std::vector<double> posterior(const AcquisitionState& s) const {
    std::vector<double> p(K, 0.0);
    double tot = 0.0;
    for (std::size_t code = 0; code < configurations(); ++code) {
      if (!matches(decode(code), s)) continue;
      for (std::size_t y = 0; y < K; ++y) {
        p[y] += table[y * configurations() + code];
        tot += table[y * configurations() + code];
      }
    }
    for (auto& v : p) v /= tot;
    return p;
  }
  // I(x_i; y | x_o) = sum P(y, x_i | x_o) log [P(y, x_i | x_o) / (P(y | x_o) P(x_i | x_o))]
  double cmi(const AcquisitionState& s, std::size_t i) const {
    std::vector<std::vector<double>> joint(K, std::vector<double>(levels[i], 0.0));
    double tot = 0.0;
    for (std::size_t code = 0; code < configurations(); ++code) {
      const auto x = decode(code);
      if (!matches(x, s)) continue;
      for (std::size_t y = 0; y < K; ++y) {
        joint[y][x[i]] += table[y * configurations() + code];
        tot += table[y * configurations() + code];
      }
    }
    std::vector<double> py(K, 0.0), px(levels[i], 0.0);
    for (std::size_t y = 0; y < K; ++y)
      for (std::size_t v = 0; v < levels[i]; ++v) {
        joint[y][v] /= tot;
        py[y] += joint[y][v];
        px[v] += joint[y][v];
      }
    double mi = 0.0;
    for (std::size_t y = 0; y < K; ++y)
      for (std::size_t v = 0; v < levels[i]; ++v)
        if (joint[y][v] > 0) mi += joint[y][v] * std::log(joint[y][v] / (py[y] * px[v]));
    return mi;
  }
};

inline TableOracle oracle_of(const DiscreteExactSurrogate& m) {
  TableOracle o;
  o.levels.assign(m.levels().begin(), m.levels().end());
  o.K = m.label_cardinality();
  o.table.assign(m.table().begin(), m.table().end());
  return o;
}

}  // namespace gsmrl::test_support
