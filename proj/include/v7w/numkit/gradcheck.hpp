#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "v7w/error.hpp"
#include "v7w/numkit/tensor.hpp"

namespace v7w {

/// A parameter set exposes its tensors, in a fixed order, to a visitor.
template <class P>
concept ParamTree = requires(P& p, const P& cp) {
  p.for_each([](std::string_view, Tensor&) {});
  cp.for_each([](std::string_view, const Tensor&) {});
};

/// Ad-hoc named tensor collection, mostly for tests and baselines.
struct ParamList {
  std::vector<std::pair<std::string, Tensor>> entries;

  Tensor& add(std::string name, Tensor t) {
    entries.emplace_back(std::move(name), std::move(t));
    return entries.back().second;
  }

  template <class F>
  void for_each(F&& f) {
    for (auto& [name, t] : entries) f(std::string_view(name), t);
  }
  template <class F>
  void for_each(F&& f) const {
    for (const auto& [name, t] : entries) f(std::string_view(name), t);
  }
};

template <ParamTree P>
std::vector<Tensor*> flatten_params(P& params) {
  std::vector<Tensor*> out;
  params.for_each([&](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

template <ParamTree P>
std::vector<std::string> param_names(const P& params) {
  std::vector<std::string> out;
  params.for_each([&](std::string_view name, const Tensor&) { out.emplace_back(name); });
  return out;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_entry;  // "<tensor>[<flat index>]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Central-difference check of `analytic` against `loss` evaluated at
/// `params`. Every scalar of every tensor is perturbed; `params` is restored
/// before returning.
template <ParamTree P, class LossFn>
  requires std::invocable<LossFn&, const P&>
GradCheckResult finite_diff_grad_check(LossFn&& loss, P& params, const P& analytic, double h = 1e-5) {
  std::vector<std::pair<std::string, Tensor*>> targets;
  params.for_each([&](std::string_view name, Tensor& t) { targets.emplace_back(std::string(name), &t); });
  std::vector<const Tensor*> grads;
  analytic.for_each([&](std::string_view, const Tensor& t) { grads.push_back(&t); });
  if (grads.size() != targets.size()) throw DimensionError("gradient tree does not match parameter tree");

  GradCheckResult result;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto& [name, tensor] = targets[k];
    const Tensor& grad = *grads[k];
    if (grad.shape() != tensor->shape()) {
      throw DimensionError("gradient for " + name + " has shape " + shape_string(grad.shape()) +
                           ", parameter has " + shape_string(tensor->shape()));
    }
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      const double saved = (*tensor)[i];
      (*tensor)[i] = saved + h;
      const double up = loss(std::as_const(params));
      (*tensor)[i] = saved - h;
      const double down = loss(std::as_const(params));
      (*tensor)[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericsError("non-finite loss while perturbing " + name + "[" + std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_entry = name + "[" + std::to_string(i) + "]";
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace v7w
