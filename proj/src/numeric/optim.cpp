#include "frforge/numeric/optim.hpp"

#include <cmath>

#include "frforge/common/error.hpp"

namespace frforge::numeric {

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state, double lr) {
  if (lr < 0) throw ContractError("learning rate must be non-negative");
  for (const auto& [name, g] : grads) {
    const auto& p = params.at(name);
    if (static_cast<std::size_t>(g.rows()) != p.rows() || static_cast<std::size_t>(g.cols()) != p.cols()) {
      throw ContractError("gradient shape mismatch for '" + name + "'");
    }
  }
  state.step += 1;
  for (const auto& [name, g] : grads) {
    auto& p = params.at(name);
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    adam_update(p.values.data(), g.data(), m.data(), v.data(), p.size(), state.step, state, lr);
  }
}

void validate(const ScheduleConfig& s) {
  if (!(s.base_lr > 0)) throw ConfigError("base_lr must be positive");
  if (!(s.warmup_fraction > 0 && s.warmup_fraction < 1)) throw ConfigError("warmup_fraction must be in (0,1)");
  if (s.total_steps < 0) throw ConfigError("total_steps must be non-negative");
}

double lr_at_step(std::int64_t step, const ScheduleConfig& s) {
  validate(s);
  if (step < 0 || step > s.total_steps) {
    throw ContractError("step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) + "]");
  }
  const auto warmup = static_cast<std::int64_t>(std::llround(s.warmup_fraction * static_cast<double>(s.total_steps)));
  if (step < warmup) return s.base_lr * (static_cast<double>(step) / static_cast<double>(warmup));
  if (!s.linear_decay || s.total_steps == warmup) return s.base_lr;
  return s.base_lr * static_cast<double>(s.total_steps - step) / static_cast<double>(s.total_steps - warmup);
}

}  // namespace frforge::numeric
