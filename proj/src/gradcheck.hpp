#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"

namespace glim {

constexpr double kGradEps = 1e-5;     // central-difference step
constexpr double kGradTol = 1e-4;     // max allowed relative error
constexpr double kGradAbsTol = 1e-9;  // FD noise floor: ulp(loss)/step with margin

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0;
    long long coords = 0;
    bool pass = false;
    std::string worst;  // tensor[flat index] where max_rel_err occurred
};

// scope: "kernels", "blocks", or "model". All float64. Tensors with more than
// 64 elements are spot-checked on 64 sampled coordinates. Scope "selftest"
// runs one case with a deliberately wrong analytic gradient and must fail;
// it exists to prove the checker can reject.
std::vector<GradCheckCase> gradcheck_run(const std::string& scope, uint64_t seed);

}  // namespace glim
