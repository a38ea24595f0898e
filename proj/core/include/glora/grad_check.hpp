#pragma once

#include <functional>
#include <string>
#include <vector>

#include "glora/tensor.hpp"

namespace glora {

struct GradCheckFailure {
    std::size_t input;
    std::size_t element;
    double analytic;
    double numeric;
    double rel_err;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::vector<GradCheckFailure> failures;

    bool ok() const { return failures.empty(); }
    std::string str() const;
};

/// Central-difference check of reverse-mode gradients. `f` must be a
/// deterministic map from the inputs to a scalar; it is re-evaluated with each
/// input element displaced by ±h. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-4) so near-zero gradients compare absolutely.
GradCheckReport grad_check(const std::function<Tensor(std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace glora
