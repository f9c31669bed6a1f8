#include "frforge/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frforge/common/rng.hpp"

namespace frforge::numeric {

GradCheckReport gradient_check(const Computation<double>& computation, const ParamStore& params,
                               const GradCheckOptions& options) {
  std::map<std::string, Mat<double>> shadow;
  for (const auto& [name, t] : params) shadow.emplace(name, t.as<double>());

  auto loss_at = [&]() {
    Tape<double> tape(&shadow);
    return tape.value(computation(tape))(0, 0);
  };
  std::map<std::string, Mat<double>> analytic;
  {
    Tape<double> tape(&shadow);
    const Var loss = computation(tape);
    tape.backward(loss);
    analytic = tape.param_grads();
  }

  GradCheckReport report;
  Rng rng(options.seed);
  for (auto& [name, value] : shadow) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(value.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_elements_per_tensor > 0 && idx.size() > options.max_elements_per_tensor) {
      rng.shuffle(idx.begin(), idx.end());
      idx.resize(options.max_elements_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    double worst = 0.0;
    for (auto i : idx) {
      double& x = value.data()[i];
      const double saved = x;
      x = saved + options.step;
      const double up = loss_at();
      x = saved - options.step;
      const double down = loss_at();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.at(name).data()[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.floor});
      worst = std::max(worst, err);
      if (err >= report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.elements_checked;
    }
    report.per_tensor[name] = worst;
  }
  return report;
}

}  // namespace frforge::numeric
