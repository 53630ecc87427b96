#pragma once

#include <functional>
#include <vector>

#include "dahcr/tensor.hpp"

namespace dahcr::num {

// Scalar-valued function built on a fresh tape from bound copies of the
// given points. Must be pure.
using ScalarFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Central-difference verification of reverse-mode gradients. Returns
// max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const ScalarFn& f, const std::vector<Tensor>& point, double eps = 1e-5);

}  // namespace dahcr::num
