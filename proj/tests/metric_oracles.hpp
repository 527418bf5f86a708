#pragma once

// Literal definitions used as oracles for the fast metric implementations.

#include <vector>

#include "snz/signal.hpp"

namespace oracle {

inline double accuracy(const std::vector<int>& y, const std::vector<int>& p) {
  double m = 0;
  for (std::size_t t = 0; t < y.size(); ++t) m += y[t] == p[t];
  return m / static_cast<double>(y.size());
}

// O(T^2) double sum exactly as written in the kappa definition.
inline double kappa(const std::vector<int>& y, const std::vector<int>& p) {
  const double n = static_cast<double>(y.size());
  double agree = 0, chance = 0;
  for (std::size_t t = 0; t < y.size(); ++t) agree += y[t] == p[t];
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) chance += y[i] == p[j];
  const double den = n * n - chance;
  return den == 0 ? 1.0 : (n * agree - chance) / den;
}

struct F1s {
  double macro = 0, weighted = 0;
};

inline F1s f1(const std::vector<int>& y, const std::vector<int>& p) {
  F1s out;
  for (int c = 0; c < snz::kNumStages; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      tp += y[t] == c && p[t] == c;
      fp += y[t] != c && p[t] == c;
      fn += y[t] == c && p[t] != c;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0;
    const double f = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
    out.macro += f / snz::kNumStages;
    out.weighted += f * (tp + fn) / static_cast<double>(y.size());
  }
  return out;
}

inline double confusion(const std::vector<int>& y, const std::vector<int>& p, int row, int col) {
  double num = 0, den = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] != row) continue;
    ++den;
    num += p[t] == col;
  }
  return den == 0 ? 0 : num / den;
}

inline snz::StageSequence to_stages(const std::vector<int>& v) {
  snz::StageSequence s;
  for (int c : v) s.stages.push_back(snz::stage_from_code(c));
  return s;
}

}  // namespace oracle
