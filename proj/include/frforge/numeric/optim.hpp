#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "frforge/numeric/tensor.hpp"

namespace frforge::numeric {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

using Gradients = std::map<std::string, Mat<float>>;

// One bias-corrected Adam update over every tensor named in `grads`.
// Throws ContractError on shape mismatch.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, double lr);

// Adam kernel over one flat parameter block. `m` and `v` hold the moment
// estimates and `step` is the already-incremented step counter.
template <typename P, typename G>
void adam_update(P* params, const G* grads, double* m, double* v, std::size_t n, std::int64_t step,
                 const AdamState& hyper, double lr) {
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(grads[i]);
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    params[i] = static_cast<P>(static_cast<double>(params[i]) - lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
  }
}

struct ScheduleConfig {
  double base_lr = 2e-5;
  double warmup_fraction = 0.1;
  std::int64_t total_steps = 0;
  bool linear_decay = false;  // decay to 0 at total_steps after warmup
};

void validate(const ScheduleConfig& schedule);

// Linear warmup from 0 to base_lr over round(warmup_fraction * total_steps)
// steps, then constant (or linearly decaying when enabled).
double lr_at_step(std::int64_t step, const ScheduleConfig& schedule);

}  // namespace frforge::numeric
