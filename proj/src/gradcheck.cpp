#include "scsa/gradcheck.hpp"

#include <cmath>

#include "scsa/rng.hpp"

namespace scsa {

namespace {

double dot_with_cotangent(const Tensor& out, const Tensor& cot) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * cot.data[i];
    return s;
}

}  // namespace

GradCheckResult finite_diff_gradcheck(const GradCheckFn& fn, std::vector<Tensor> inputs,
                                      const std::vector<Parameter*>& params,
                                      const GradCheckOptions& opts) {
    GradCheckResult res;

    auto run = [&](Tape& tape) -> NodeId {
        std::vector<NodeId> ids;
        ids.reserve(inputs.size());
        for (const Tensor& in : inputs) ids.push_back(tape.input(in));
        return fn(tape, ids);
    };

    // Analytic pass.
    Tensor cot;
    std::vector<Tensor> analytic_inputs;
    std::vector<Tensor> analytic_params;
    try {
        Tape tape;
        std::vector<NodeId> ids;
        for (const Tensor& in : inputs) ids.push_back(tape.input(in));
        NodeId out = fn(tape, ids);
        Rng rng(opts.cotangent_seed);
        cot = Tensor::rand_uniform(tape.value(out).shape, rng, -1.0, 1.0);
        for (Parameter* p : params) p->zero_grad();
        tape.backward(out, cot);
        for (NodeId id : ids) {
            analytic_inputs.push_back(tape.has_grad(id) ? tape.grad(id)
                                                        : Tensor(tape.value(id).shape));
        }
        for (Parameter* p : params) analytic_params.push_back(p->grad);
    } catch (const std::exception& e) {
        res.error = std::string("analytic pass failed: ") + e.what();
        return res;
    }

    auto scalar_eval = [&]() -> double {
        Tape tape;
        NodeId out = run(tape);
        if (tape.value(out).shape != cot.shape) {
            throw ShapeError("gradcheck: output shape changed between evaluations");
        }
        return dot_with_cotangent(tape.value(out), cot);
    };

    auto probe = [&](double* slot, const Tensor& analytic, std::size_t i,
                     const std::string& label) {
        const double orig = *slot;
        *slot = orig + opts.h;
        const double fp = scalar_eval();
        *slot = orig - opts.h;
        const double fm = scalar_eval();
        *slot = orig;
        const double numeric = (fp - fm) / (2.0 * opts.h);
        const double a = analytic.data[i];
        if (!std::isfinite(numeric) || !std::isfinite(a)) {
            res.nonfinite.push_back(label);
            return;
        }
        const double rel = std::abs(a - numeric) /
                           std::max({std::abs(a), std::abs(numeric), 1e-8});
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst = label;
        }
    };

    try {
        for (std::size_t t = 0; t < inputs.size(); ++t) {
            for (std::size_t i = 0; i < inputs[t].numel(); ++i) {
                probe(&inputs[t].data[i], analytic_inputs[t], i,
                      "input[" + std::to_string(t) + "] @" + std::to_string(i));
            }
        }
        for (std::size_t t = 0; t < params.size(); ++t) {
            for (std::size_t i = 0; i < params[t]->value.numel(); ++i) {
                probe(&params[t]->value.data[i], analytic_params[t], i,
                      params[t]->name + " @" + std::to_string(i));
            }
        }
    } catch (const std::exception& e) {
        res.error = std::string("numeric probe failed: ") + e.what();
        return res;
    }

    res.pass = res.nonfinite.empty() && res.max_rel_err <= opts.tol;
    return res;
}

}  // namespace scsa
