#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "scsa/param.hpp"
#include "scsa/tape.hpp"
#include "scsa/tensor.hpp"

namespace scsa {

// Central-difference gradient check. 64-bit only; the benchmark float path
// is never gradchecked.
//
// The function under test builds a graph on the supplied tape from the
// given input nodes and returns the output node. It must watch any
// parameters it uses (module forwards do this internally). The check
// contracts the output to a scalar by dotting with a fixed seeded random
// cotangent, compares analytic against (f(t+h)-f(t-h))/2h per coordinate of
// every input and parameter, and reports the max relative error
// |a-n| / max(|a|,|n|,1e-8).
struct GradCheckOptions {
    double h = 1e-5;
    double tol = 1e-4;
    std::uint64_t cotangent_seed = 0x5eed;
};

struct GradCheckResult {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst;                   // coordinate with the largest relative error
    std::vector<std::string> nonfinite;  // coordinates where a probe went non-finite
    std::string error;                   // non-empty when the check could not run

    bool failed_numerically() const { return !pass && error.empty(); }
};

using GradCheckFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

GradCheckResult finite_diff_gradcheck(const GradCheckFn& fn, std::vector<Tensor> inputs,
                                      const std::vector<Parameter*>& params,
                                      const GradCheckOptions& opts = {});

}  // namespace scsa
