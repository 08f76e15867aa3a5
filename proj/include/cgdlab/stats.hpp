#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <vector>

#include "cgdlab/errors.hpp"

namespace cgd::stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw ShapeError("mean of empty vector");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator).
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct PairedTestResult {
  double t = 0.0;
  double p = 1.0;     // two-sided
  std::size_t df = 0;
  double mean_diff = 0.0;
  bool degenerate = false;  // zero variance of differences
};

// Two-sided paired t-test on element-wise differences a[i] - b[i].
// t = mean(d) / (sd(d) / sqrt(n)); p from the Student t distribution with
// n-1 degrees of freedom. Zero-variance differences are reported as
// degenerate with p = 1 when the mean difference is zero and p = 0 otherwise.
inline PairedTestResult paired_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("paired_test: length mismatch");
  if (a.size() < 2) throw ShapeError("paired_test: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  PairedTestResult r;
  r.df = a.size() - 1;
  r.mean_diff = mean(d);
  const double sd = sample_std(d);
  if (sd == 0.0) {
    r.degenerate = true;
    r.t = 0.0;
    r.p = (r.mean_diff == 0.0) ? 1.0 : 0.0;
    return r;
  }
  r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(a.size())));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace cgd::stats
