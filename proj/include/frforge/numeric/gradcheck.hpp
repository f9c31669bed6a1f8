#pragma once

#include <functional>
#include <map>
#include <string>

#include "frforge/numeric/tape.hpp"

namespace frforge::numeric {

template <typename T>
using Computation = std::function<Var(Tape<T>&)>;

template <typename T>
struct Evaluation {
  T loss = T(0);
  std::map<std::string, Mat<T>> gradients;
};

// Runs `computation` on a fresh inference-mode tape over `params` and
// back-propagates from the returned scalar loss.
template <typename T>
Evaluation<T> evaluate_with_gradients(const Computation<T>& computation, const ParamStore& params) {
  Tape<T> tape(&params);
  const Var loss = computation(tape);
  tape.backward(loss);
  return {tape.value(loss)(0, 0), tape.param_grads()};
}

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
  std::map<std::string, double> per_tensor;
};

struct GradCheckOptions {
  double step = 1e-5;
  // |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
  // amplifying finite-difference round-off.
  double floor = 1e-4;
  std::size_t max_elements_per_tensor = 0;  // 0 = every element
  std::uint64_t seed = 0;
};

// Compares reverse-mode gradients with central differences, both in double
// precision, for every tensor in `params`.
GradCheckReport gradient_check(const Computation<double>& computation, const ParamStore& params,
                               const GradCheckOptions& options = {});

}  // namespace frforge::numeric
