#include "scsa/gradsuite.hpp"

#include <functional>
#include <memory>
#include <ostream>

#include "scsa/ops.hpp"
#include "scsa/rng.hpp"
#include "scsa/scsa.hpp"

namespace scsa {

namespace {

struct CheckSpec {
    std::string name;
    std::function<GradCheckResult()> run;
};

Tensor rand_t(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    return Tensor::rand_uniform(s, rng, lo, hi);
}

// inputs bounded away from the relu kink so central differences stay valid
Tensor rand_away_from_zero(Shape s, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(s);
    for (auto& v : t.data) {
        const double mag = rng.uniform(0.15, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

CheckSpec make_check(std::string name, GradCheckFn fn, std::vector<Tensor> inputs,
                     GradCheckOptions opts) {
    return {std::move(name), [fn = std::move(fn), inputs = std::move(inputs), opts]() {
                return finite_diff_gradcheck(fn, inputs, {}, opts);
            }};
}

// Three-shape check set per op kind. Returning an empty vector marks the op
// as uncovered, which the suite reports as a failure.
std::vector<CheckSpec> op_checks(OpKind kind, std::uint64_t seed, const GradCheckOptions& base) {
    std::vector<CheckSpec> out;
    const std::string prefix = std::string("op.") + op_kind_name(kind) + ".";
    auto add = [&](std::size_t i, GradCheckFn fn, std::vector<Tensor> inputs) {
        out.push_back(make_check(prefix + "shape" + std::to_string(i), std::move(fn),
                                 std::move(inputs), base));
    };
    using Ids = std::vector<NodeId>;
    switch (kind) {
        case OpKind::AvgPoolOverHeight: {
            auto fn = [](Tape& t, const Ids& in) { return ops::avg_pool_over_height(t, in[0]); };
            add(0, fn, {rand_t(Shape{1, 2, 3, 4}, seed + 1)});
            add(1, fn, {rand_t(Shape{2, 3, 5, 4}, seed + 2)});
            add(2, fn, {rand_t(Shape{1, 1, 4, 7}, seed + 3)});
            break;
        }
        case OpKind::AvgPoolOverWidth: {
            auto fn = [](Tape& t, const Ids& in) { return ops::avg_pool_over_width(t, in[0]); };
            add(0, fn, {rand_t(Shape{1, 2, 3, 4}, seed + 4)});
            add(1, fn, {rand_t(Shape{2, 3, 4, 5}, seed + 5)});
            add(2, fn, {rand_t(Shape{1, 1, 7, 4}, seed + 6)});
            break;
        }
        case OpKind::ChannelSlice: {
            auto fn = [](Tape& t, const Ids& in) { return ops::channel_slice(t, in[0], 1, 3); };
            add(0, fn, {rand_t(Shape{1, 4, 5}, seed + 7)});
            add(1, fn, {rand_t(Shape{2, 6, 3}, seed + 8)});
            add(2, fn, {rand_t(Shape{1, 3, 2, 2}, seed + 9)});
            break;
        }
        case OpKind::ConcatChannels: {
            auto fn = [](Tape& t, const Ids& in) { return ops::concat_channels(t, in); };
            add(0, fn, {rand_t(Shape{1, 2, 4}, seed + 10), rand_t(Shape{1, 3, 4}, seed + 11)});
            add(1, fn, {rand_t(Shape{2, 1, 3}, seed + 12), rand_t(Shape{2, 2, 3}, seed + 13),
                        rand_t(Shape{2, 1, 3}, seed + 14)});
            add(2, fn, {rand_t(Shape{1, 2, 2, 3}, seed + 15), rand_t(Shape{1, 2, 2, 3}, seed + 16)});
            break;
        }
        case OpKind::DwConv1d: {
            auto fn = [](Tape& t, const Ids& in) { return ops::dwconv1d(t, in[0], in[1], std::nullopt); };
            auto fn_bias = [](Tape& t, const Ids& in) { return ops::dwconv1d(t, in[0], in[1], in[2]); };
            add(0, fn, {rand_t(Shape{1, 2, 5}, seed + 17), rand_t(Shape{2, 3}, seed + 18)});
            add(1, fn_bias, {rand_t(Shape{2, 4, 9}, seed + 19), rand_t(Shape{4, 5}, seed + 20),
                             rand_t(Shape{4}, seed + 21)});
            add(2, fn, {rand_t(Shape{1, 3, 6}, seed + 22), rand_t(Shape{3, 7}, seed + 23)});
            break;
        }
        case OpKind::GroupNorm: {
            auto fn = [](std::size_t groups) {
                return [groups](Tape& t, const Ids& in) {
                    return ops::group_norm(t, in[0], groups, in[1], in[2], 1e-5);
                };
            };
            add(0, fn(2), {rand_t(Shape{1, 4, 5}, seed + 24), rand_t(Shape{4}, seed + 25, 0.5, 1.5),
                           rand_t(Shape{4}, seed + 26)});
            add(1, fn(4), {rand_t(Shape{2, 8, 6}, seed + 27), rand_t(Shape{8}, seed + 28, 0.5, 1.5),
                           rand_t(Shape{8}, seed + 29)});
            add(2, fn(3), {rand_t(Shape{1, 6, 4}, seed + 30), rand_t(Shape{6}, seed + 31, 0.5, 1.5),
                           rand_t(Shape{6}, seed + 32)});
            break;
        }
        case OpKind::BatchNorm1d: {
            auto train_fn = [](std::size_t C) {
                auto rm = std::make_shared<Tensor>(Shape{C});
                auto rv = std::make_shared<Tensor>(Tensor::full(Shape{C}, 1.0));
                return [rm, rv](Tape& t, const Ids& in) {
                    return ops::batch_norm1d(t, in[0], in[1], in[2], 1e-5,
                                             ops::BatchNormMode::Train, *rm, *rv, 0.1);
                };
            };
            auto eval_fn = [](std::size_t C, std::uint64_t s) {
                auto rm = std::make_shared<Tensor>(rand_t(Shape{C}, s));
                auto rv = std::make_shared<Tensor>(rand_t(Shape{C}, s + 1, 0.5, 2.0));
                return [rm, rv](Tape& t, const Ids& in) {
                    return ops::batch_norm1d(t, in[0], in[1], in[2], 1e-5,
                                             ops::BatchNormMode::Eval, *rm, *rv, 0.1);
                };
            };
            add(0, train_fn(3), {rand_t(Shape{2, 3, 4}, seed + 33),
                                 rand_t(Shape{3}, seed + 34, 0.5, 1.5), rand_t(Shape{3}, seed + 35)});
            add(1, train_fn(5), {rand_t(Shape{3, 5, 2}, seed + 36),
                                 rand_t(Shape{5}, seed + 37, 0.5, 1.5), rand_t(Shape{5}, seed + 38)});
            add(2, eval_fn(4, seed + 39), {rand_t(Shape{2, 4, 3}, seed + 41),
                                           rand_t(Shape{4}, seed + 42, 0.5, 1.5),
                                           rand_t(Shape{4}, seed + 43)});
            break;
        }
        case OpKind::Sigmoid: {
            auto fn = [](Tape& t, const Ids& in) { return ops::sigmoid(t, in[0]); };
            add(0, fn, {rand_t(Shape{6}, seed + 44, -3.0, 3.0)});
            add(1, fn, {rand_t(Shape{2, 3, 4}, seed + 45, -3.0, 3.0)});
            add(2, fn, {rand_t(Shape{1, 2, 2, 3}, seed + 46, -3.0, 3.0)});
            break;
        }
        case OpKind::SoftmaxLastDim: {
            auto fn = [](Tape& t, const Ids& in) { return ops::softmax_lastdim(t, in[0]); };
            add(0, fn, {rand_t(Shape{2, 5}, seed + 47, -2.0, 2.0)});
            add(1, fn, {rand_t(Shape{1, 3, 4}, seed + 48, -2.0, 2.0)});
            add(2, fn, {rand_t(Shape{2, 2, 3, 4}, seed + 49, -2.0, 2.0)});
            break;
        }
        case OpKind::AdaptiveAvgPool2d: {
            auto fn = [](std::size_t oh, std::size_t ow) {
                return [oh, ow](Tape& t, const Ids& in) {
                    return ops::adaptive_avg_pool2d(t, in[0], oh, ow);
                };
            };
            add(0, fn(3, 3), {rand_t(Shape{1, 2, 6, 6}, seed + 50)});
            add(1, fn(7, 5), {rand_t(Shape{1, 1, 7, 5}, seed + 51)});
            add(2, fn(2, 2), {rand_t(Shape{2, 2, 5, 4}, seed + 52)});  // overlapping windows
            break;
        }
        case OpKind::PerChannelAffine: {
            auto fn = [](Tape& t, const Ids& in) { return ops::per_channel_affine(t, in[0], in[1], in[2]); };
            add(0, fn, {rand_t(Shape{1, 3, 4}, seed + 53), rand_t(Shape{3}, seed + 54),
                        rand_t(Shape{3}, seed + 55)});
            add(1, fn, {rand_t(Shape{2, 5, 2}, seed + 56), rand_t(Shape{5}, seed + 57),
                        rand_t(Shape{5}, seed + 58)});
            add(2, fn, {rand_t(Shape{3, 2, 6}, seed + 59), rand_t(Shape{2}, seed + 60),
                        rand_t(Shape{2}, seed + 61)});
            break;
        }
        case OpKind::BatchedMatmul: {
            auto fn = [](Tape& t, const Ids& in) { return ops::batched_matmul(t, in[0], in[1]); };
            add(0, fn, {rand_t(Shape{1, 2, 3}, seed + 62), rand_t(Shape{1, 3, 2}, seed + 63)});
            add(1, fn, {rand_t(Shape{2, 3, 4}, seed + 64), rand_t(Shape{2, 4, 5}, seed + 65)});
            add(2, fn, {rand_t(Shape{1, 1, 6}, seed + 66), rand_t(Shape{1, 6, 1}, seed + 67)});
            break;
        }
        case OpKind::TransposeLast2: {
            auto fn = [](Tape& t, const Ids& in) { return ops::transpose_last2(t, in[0]); };
            add(0, fn, {rand_t(Shape{1, 2, 3}, seed + 68)});
            add(1, fn, {rand_t(Shape{2, 4, 3}, seed + 69)});
            add(2, fn, {rand_t(Shape{3, 1, 5}, seed + 70)});
            break;
        }
        case OpKind::BroadcastMul3: {
            auto fn = [](Tape& t, const Ids& in) { return ops::broadcast_mul3(t, in[0], in[1], in[2]); };
            auto triple = [&](std::size_t B, std::size_t C, std::size_t H, std::size_t W,
                              std::uint64_t s) {
                return std::vector<Tensor>{rand_t(Shape{B, C, H, W}, s),
                                           rand_t(Shape{B, C, W}, s + 1),
                                           rand_t(Shape{B, C, H}, s + 2)};
            };
            add(0, fn, triple(1, 2, 3, 4, seed + 71));
            add(1, fn, triple(2, 3, 4, 5, seed + 75));
            add(2, fn, triple(1, 1, 5, 2, seed + 79));
            break;
        }
        case OpKind::ChannelShuffle: {
            auto fn = [](std::size_t g) {
                return [g](Tape& t, const Ids& in) { return ops::channel_shuffle(t, in[0], g); };
            };
            add(0, fn(2), {rand_t(Shape{1, 6, 3}, seed + 83)});
            add(1, fn(4), {rand_t(Shape{2, 8, 2}, seed + 84)});
            add(2, fn(2), {rand_t(Shape{1, 4, 5}, seed + 85)});
            break;
        }
        case OpKind::MeanLastDim: {
            auto fn = [](Tape& t, const Ids& in) { return ops::mean_lastdim(t, in[0]); };
            add(0, fn, {rand_t(Shape{1, 2, 5}, seed + 86)});
            add(1, fn, {rand_t(Shape{2, 3, 4}, seed + 87)});
            add(2, fn, {rand_t(Shape{3, 1, 7}, seed + 88)});
            break;
        }
        case OpKind::Scale: {
            auto fn = [](double f) {
                return [f](Tape& t, const Ids& in) { return ops::scale(t, in[0], f); };
            };
            add(0, fn(2.5), {rand_t(Shape{5}, seed + 89)});
            add(1, fn(-0.3), {rand_t(Shape{2, 3}, seed + 90)});
            add(2, fn(0.3535), {rand_t(Shape{1, 2, 3}, seed + 91)});
            break;
        }
        case OpKind::MulChannelGate: {
            auto fn = [](Tape& t, const Ids& in) { return ops::mul_channel_gate(t, in[0], in[1]); };
            add(0, fn, {rand_t(Shape{1, 2, 3, 4}, seed + 92), rand_t(Shape{1, 2}, seed + 93)});
            add(1, fn, {rand_t(Shape{2, 3, 2, 2}, seed + 94), rand_t(Shape{2, 3}, seed + 95)});
            add(2, fn, {rand_t(Shape{1, 4, 5, 1}, seed + 96), rand_t(Shape{1, 4}, seed + 97)});
            break;
        }
        case OpKind::Reshape: {
            auto fn = [](Shape s) {
                return [s](Tape& t, const Ids& in) { return ops::reshape(t, in[0], s); };
            };
            add(0, fn(Shape{6}), {rand_t(Shape{2, 3}, seed + 98)});
            add(1, fn(Shape{2, 6}), {rand_t(Shape{2, 2, 3}, seed + 99)});
            add(2, fn(Shape{1, 2, 3, 2}), {rand_t(Shape{2, 6}, seed + 100)});
            break;
        }
        case OpKind::Conv2d: {
            auto fn = [](std::size_t stride, std::size_t pad, bool bias) {
                return [stride, pad, bias](Tape& t, const Ids& in) {
                    return ops::conv2d(t, in[0], in[1],
                                       bias ? std::optional<NodeId>(in[2]) : std::nullopt, stride,
                                       pad);
                };
            };
            add(0, fn(1, 1, true), {rand_t(Shape{1, 2, 5, 5}, seed + 101),
                                    rand_t(Shape{3, 2, 3, 3}, seed + 102),
                                    rand_t(Shape{3}, seed + 103)});
            add(1, fn(2, 1, false), {rand_t(Shape{1, 3, 6, 6}, seed + 104),
                                     rand_t(Shape{2, 3, 3, 3}, seed + 105)});
            add(2, fn(1, 0, true), {rand_t(Shape{2, 2, 4, 4}, seed + 106),
                                    rand_t(Shape{4, 2, 1, 1}, seed + 107),
                                    rand_t(Shape{4}, seed + 108)});
            break;
        }
        case OpKind::Relu: {
            auto fn = [](Tape& t, const Ids& in) { return ops::relu(t, in[0]); };
            add(0, fn, {rand_away_from_zero(Shape{7}, seed + 109)});
            add(1, fn, {rand_away_from_zero(Shape{2, 3, 4}, seed + 110)});
            add(2, fn, {rand_away_from_zero(Shape{1, 2, 2, 3}, seed + 111)});
            break;
        }
        case OpKind::Add: {
            auto fn = [](Tape& t, const Ids& in) { return ops::add(t, in[0], in[1]); };
            add(0, fn, {rand_t(Shape{5}, seed + 112), rand_t(Shape{5}, seed + 113)});
            add(1, fn, {rand_t(Shape{2, 3}, seed + 114), rand_t(Shape{2, 3}, seed + 115)});
            add(2, fn, {rand_t(Shape{1, 2, 3, 4}, seed + 116), rand_t(Shape{1, 2, 3, 4}, seed + 117)});
            break;
        }
        case OpKind::Linear: {
            auto fn = [](Tape& t, const Ids& in) { return ops::linear(t, in[0], in[1], in[2]); };
            add(0, fn, {rand_t(Shape{2, 3}, seed + 118), rand_t(Shape{4, 3}, seed + 119),
                        rand_t(Shape{4}, seed + 120)});
            add(1, fn, {rand_t(Shape{1, 5}, seed + 121), rand_t(Shape{2, 5}, seed + 122),
                        rand_t(Shape{2}, seed + 123)});
            add(2, fn, {rand_t(Shape{3, 2}, seed + 124), rand_t(Shape{3, 2}, seed + 125),
                        rand_t(Shape{3}, seed + 126)});
            break;
        }
        case OpKind::SoftmaxCrossEntropy: {
            auto fn = [](std::vector<int> labels) {
                return [labels](Tape& t, const Ids& in) {
                    return ops::softmax_cross_entropy(t, in[0], labels);
                };
            };
            add(0, fn({1, 3}), {rand_t(Shape{2, 4}, seed + 127, -2.0, 2.0)});
            add(1, fn({0, 2, 4}), {rand_t(Shape{3, 5}, seed + 128, -2.0, 2.0)});
            add(2, fn({1}), {rand_t(Shape{1, 2}, seed + 129, -2.0, 2.0)});
            break;
        }
        case OpKind::Count_:
            break;
    }
    return out;
}

// End-to-end module checks built over a live ParamStore.
struct ModuleCheck {
    std::string name;
    std::shared_ptr<ParamStore> store;
    std::vector<Tensor> inputs;
    GradCheckFn fn;
    double tol;
};

void add_smsa_check(std::vector<ModuleCheck>& out, const std::string& name, SmsaConfig cfg,
                    std::uint64_t seed, double tol) {
    auto store = std::make_shared<ParamStore>();
    Rng rng(seed);
    auto params = std::make_shared<SmsaParams>(
        SmsaParams::create(*store, "smsa.", 8, cfg, rng));
    Tensor x = Tensor::rand_uniform(Shape{2, 8, 6, 5}, rng, -1.0, 1.0);
    out.push_back({name, store, {x},
                   [params, cfg](Tape& t, const std::vector<NodeId>& in) {
                       return smsa_forward(t, in[0], *params, cfg);
                   },
                   tol});
}

void add_pcsa_check(std::vector<ModuleCheck>& out, const std::string& name, PcsaConfig cfg,
                    std::uint64_t seed, double tol) {
    auto store = std::make_shared<ParamStore>();
    Rng rng(seed);
    auto params = std::make_shared<PcsaParams>(PcsaParams::create(*store, "pcsa.", 6));
    Tensor x = Tensor::rand_uniform(Shape{2, 6, 7, 7}, rng, -1.0, 1.0);
    out.push_back({name, store, {x},
                   [params, cfg](Tape& t, const std::vector<NodeId>& in) {
                       return pcsa_forward(t, in[0], *params, cfg);
                   },
                   tol});
}

void add_scsa_check(std::vector<ModuleCheck>& out, const std::string& name, ScsaConfig cfg,
                    std::uint64_t seed, double tol) {
    auto store = std::make_shared<ParamStore>();
    Rng rng(seed);
    auto params = std::make_shared<ScsaParams>(ScsaParams::create(*store, "", 8, cfg, rng));
    Tensor x = Tensor::rand_uniform(Shape{2, 8, 12, 12}, rng, -1.0, 1.0);
    out.push_back({name, store, {x},
                   [params, cfg](Tape& t, const std::vector<NodeId>& in) {
                       return scsa_forward(t, in[0], *params, cfg);
                   },
                   tol});
}

}  // namespace

GradSuiteReport run_gradcheck_suite(const GradSuiteOptions& opts) {
    GradSuiteReport report;
    auto matches = [&](const std::string& name) {
        return opts.filter.empty() || name.find(opts.filter) != std::string::npos;
    };
    auto record = [&](const std::string& name, const GradCheckResult& r) {
        GradSuiteCheck c;
        c.name = name;
        c.pass = r.pass;
        c.max_rel_err = r.max_rel_err;
        if (!r.error.empty()) {
            c.detail = r.error;
        } else if (!r.nonfinite.empty()) {
            c.detail = "non-finite at " + r.nonfinite.front();
        } else if (!r.pass) {
            c.detail = "worst " + r.worst;
        }
        report.checks.push_back(std::move(c));
    };

    GradCheckOptions op_opts;
    op_opts.h = opts.h;
    op_opts.tol = opts.tol_ops;
    op_opts.cotangent_seed = opts.seed + 0x0c07;

    // ops, enumerated exhaustively
    for (int k = 0; k < kOpKindCount; ++k) {
        const OpKind kind = static_cast<OpKind>(k);
        auto specs = op_checks(kind, opts.seed + 1000 * static_cast<std::uint64_t>(k), op_opts);
        if (specs.empty()) {
            GradSuiteCheck c;
            c.name = std::string("op.") + op_kind_name(kind) + ".missing";
            c.pass = false;
            c.detail = "no gradcheck coverage for this op";
            if (matches(c.name)) report.checks.push_back(std::move(c));
            continue;
        }
        for (auto& spec : specs) {
            if (!matches(spec.name)) continue;
            record(spec.name, spec.run());
        }
    }

    // modules
    std::vector<ModuleCheck> modules;
    {
        SmsaConfig def;
        add_smsa_check(modules, "module.smsa.default", def, opts.seed + 21, opts.tol_modules);
        SmsaConfig bn = def;
        bn.norm = NormKind::BatchNorm;
        add_smsa_check(modules, "module.smsa.bn-train", bn, opts.seed + 22, opts.tol_modules);
        SmsaConfig unshared = def;
        unshared.conv_sharing = ConvSharing::Unshared;
        add_smsa_check(modules, "module.smsa.unshared", unshared, opts.seed + 23, opts.tol_modules);
        SmsaConfig pre = def;
        pre.gn_position = GnPosition::PreConv;
        add_smsa_check(modules, "module.smsa.gn-prior", pre, opts.seed + 24, opts.tol_modules);
        SmsaConfig g13;
        g13.k_groups = 1;
        g13.kernel_sizes = {3};
        add_smsa_check(modules, "module.smsa.g1-3", g13, opts.seed + 25, opts.tol_modules);
        SmsaConfig g237;
        g237.k_groups = 2;
        g237.kernel_sizes = {3, 7};
        add_smsa_check(modules, "module.smsa.g2-3-7", g237, opts.seed + 26, opts.tol_modules);

        PcsaConfig pdef;
        add_pcsa_check(modules, "module.pcsa.default", pdef, opts.seed + 27, opts.tol_modules);
        PcsaConfig phw = pdef;
        phw.scale_mode = ScaleMode::SqrtHW;
        add_pcsa_check(modules, "module.pcsa.sqrt-hw", phw, opts.seed + 28, opts.tol_modules);
        PcsaConfig pheads = pdef;
        pheads.heads = 2;
        pheads.shuffle = true;
        add_pcsa_check(modules, "module.pcsa.heads2-shuffle", pheads, opts.seed + 29,
                       opts.tol_modules);
        PcsaConfig pnopc = pdef;
        pnopc.progressive_compression = false;
        add_pcsa_check(modules, "module.pcsa.wo-pc", pnopc, opts.seed + 30, opts.tol_modules);

        for (const auto& preset : ablation_registry()) {
            add_scsa_check(modules, "preset." + preset.name, preset.config, opts.seed + 31,
                           opts.tol_scsa);
        }
    }
    for (auto& m : modules) {
        if (!matches(m.name)) continue;
        GradCheckOptions mo;
        mo.h = opts.h;
        mo.tol = m.tol;
        mo.cotangent_seed = opts.seed + 0x40d;
        record(m.name, finite_diff_gradcheck(m.fn, m.inputs, m.store->ordered(), mo));
    }

    // deliberately broken backward; this check must FAIL
    if (opts.negative_control) {
        const std::string name = "negative-control.dwconv1d-corrupted";
        if (matches(name)) {
            auto fn = [](Tape& t, const std::vector<NodeId>& in) {
                NodeId out = ops::dwconv1d(t, in[0], in[1], std::nullopt);
                t.debug_scale_backward(t.num_entries() - 1, 1.1);  // +10% on emitted grads
                return out;
            };
            record(name, finite_diff_gradcheck(
                             fn, {rand_t(Shape{1, 2, 5}, opts.seed + 900),
                                  rand_t(Shape{2, 3}, opts.seed + 901)},
                             {}, op_opts));
        }
    }

    return report;
}

void print_gradsuite_report(std::ostream& os, const GradSuiteReport& report) {
    for (const auto& c : report.checks) {
        os << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  max_rel_err=" << c.max_rel_err;
        if (!c.detail.empty()) os << "  (" << c.detail << ")";
        os << "\n";
    }
    os << report.checks.size() - report.failures() << "/" << report.checks.size()
       << " gradient checks passed\n";
}

}  // namespace scsa
