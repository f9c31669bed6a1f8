#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

namespace frforge::numeric {

inline constexpr double kBceClamp = 1e-7;

// (Pr(class 0), Pr(class 1)) for a logit beta . x. p1 is the logistic
// function evaluated on the overflow-free branch; p0 is its complement.
template <typename T = double>
std::pair<T, T> binary_class_probs(T logit) {
  T p1;
  if (logit >= T(0)) {
    p1 = T(1) / (T(1) + std::exp(-logit));
  } else {
    const T e = std::exp(logit);
    p1 = e / (T(1) + e);
  }
  return {T(1) - p1, p1};
}

// Binary cross-entropy with p1 clamped to [kBceClamp, 1 - kBceClamp].
template <typename T = double>
T bce_loss(T p1, T y) {
  const T p = std::clamp(p1, T(kBceClamp), T(1) - T(kBceClamp));
  return -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
}

}  // namespace frforge::numeric
