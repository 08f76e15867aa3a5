#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cgdlab/errors.hpp"
#include "cgdlab/rng.hpp"

namespace cgd::engine {

// Dense row-major tensor of 64-bit reals. All parameter and activation math
// in the library runs in double precision; gradient checks at 1e-4 relative
// tolerance are not reliable in float.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;

  Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in,
         bool requires_grad_in = false)
      : shape(std::move(shape_in)), data(std::move(data_in)), requires_grad(requires_grad_in) {
    if (numel() != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape product " + std::to_string(numel()));
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape_in, bool requires_grad_in = false) {
    std::size_t n = 1;
    for (std::size_t d : shape_in) n *= d;
    return Tensor(std::move(shape_in), std::vector<double>(n, 0.0), requires_grad_in);
  }

  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
  }

  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill_gaussian(Rng& rng, double mean, double stddev) {
    for (double& v : data) v = rng.gaussian(mean, stddev);
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace cgd::engine
