#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "ipe/predict/ipe.hpp"

namespace ipe::harness {

/// Overall and per-true-class accuracy. A class with no members reports NaN.
struct AccuracyBreakdown {
  double overall = 0.0;
  double stable = std::numeric_limits<double>::quiet_NaN();
  double unstable = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  std::size_t n_stable = 0;
  std::size_t n_unstable = 0;
};

inline AccuracyBreakdown accuracy(std::span<const StabilityLabel> predictions, std::span<const StabilityLabel> truths)
{
  if (predictions.size() != truths.size())
    throw std::invalid_argument("accuracy: predictions and truths differ in length");
  if (predictions.empty())
    throw std::invalid_argument("accuracy: empty input");
  std::size_t hit = 0;
  std::size_t hit_stable = 0;
  std::size_t hit_unstable = 0;
  AccuracyBreakdown out;
  out.n = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool ok = predictions[i] == truths[i];
    hit += ok ? 1 : 0;
    if (truths[i] == StabilityLabel::stable) {
      ++out.n_stable;
      hit_stable += ok ? 1 : 0;
    } else {
      ++out.n_unstable;
      hit_unstable += ok ? 1 : 0;
    }
  }
  out.overall = static_cast<double>(hit) / static_cast<double>(out.n);
  if (out.n_stable > 0)
    out.stable = static_cast<double>(hit_stable) / static_cast<double>(out.n_stable);
  if (out.n_unstable > 0)
    out.unstable = static_cast<double>(hit_unstable) / static_cast<double>(out.n_unstable);
  return out;
}

class UndefinedCorrelation : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

inline double pearson(std::span<const double> xs, std::span<const double> ys)
{
  if (xs.size() != ys.size())
    throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2)
    throw std::invalid_argument("pearson: need at least two points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw UndefinedCorrelation("pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace ipe::harness
