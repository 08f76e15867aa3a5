#pragma once

// Finite-difference gradient oracle. Central differences
// (f(p+eps) - f(p-eps)) / (2 eps) per coordinate, either over every
// coordinate or over an explicit coordinate subset (the documented sampling
// strategy for models too large to sweep exhaustively).

#include <cstddef>
#include <functional>
#include <vector>

#include "cgdlab/errors.hpp"
#include "cgdlab/model.hpp"

namespace cgd::engine {

// One parameter coordinate: tensor index within ModelParams, flat element index.
struct ParamCoord {
  std::size_t tensor;
  std::size_t element;
};

using ParamScalarFn = std::function<double(const ModelParams&)>;

inline double central_difference(const ParamScalarFn& f, ModelParams& params,
                                 const ParamCoord& coord, double eps) {
  double& v = params.tensors[coord.tensor].data[coord.element];
  const double saved = v;
  v = saved + eps;
  const double fp = f(params);
  v = saved - eps;
  const double fm = f(params);
  v = saved;
  if (!std::isfinite(fp) || !std::isfinite(fm))
    throw ShapeError("finite_diff_grad: objective non-finite at perturbed point");
  return (fp - fm) / (2.0 * eps);
}

// Full finite-difference gradient over every coordinate.
inline GradTable finite_diff_grad(const ParamScalarFn& f, ModelParams params, double eps) {
  if (!(eps > 0.0)) throw ShapeError("finite_diff_grad: eps must be positive");
  GradTable out = make_grads(params);
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (std::size_t e = 0; e < params.tensors[t].data.size(); ++e) {
      out.slots[t].data[e] = central_difference(f, params, {t, e}, eps);
    }
  }
  return out;
}

// Finite differences restricted to a coordinate subset; returns one value per
// requested coordinate, in order.
inline std::vector<double> finite_diff_grad(const ParamScalarFn& f, ModelParams params, double eps,
                                            const std::vector<ParamCoord>& coords) {
  if (!(eps > 0.0)) throw ShapeError("finite_diff_grad: eps must be positive");
  std::vector<double> out;
  out.reserve(coords.size());
  for (const ParamCoord& c : coords) out.push_back(central_difference(f, params, c, eps));
  return out;
}

// Deterministic sample of `count` distinct coordinates spread over all tensors.
inline std::vector<ParamCoord> sample_coords(const ModelParams& params, std::size_t count,
                                             std::uint64_t seed) {
  std::size_t total = params.total_parameters();
  if (count >= total) {
    std::vector<ParamCoord> all;
    for (std::size_t t = 0; t < params.tensors.size(); ++t)
      for (std::size_t e = 0; e < params.tensors[t].data.size(); ++e) all.push_back({t, e});
    return all;
  }
  Rng rng(derive_seed(seed, "coord-sample"));
  std::vector<std::size_t> flat(total);
  for (std::size_t i = 0; i < total; ++i) flat[i] = i;
  rng.shuffle(flat);
  flat.resize(count);
  std::vector<ParamCoord> out;
  out.reserve(count);
  for (std::size_t idx : flat) {
    std::size_t t = 0;
    while (idx >= params.tensors[t].data.size()) {
      idx -= params.tensors[t].data.size();
      ++t;
    }
    out.push_back({t, idx});
  }
  return out;
}

}  // namespace cgd::engine
