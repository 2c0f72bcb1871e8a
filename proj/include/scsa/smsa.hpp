#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scsa/ops.hpp"
#include "scsa/param.hpp"
#include "scsa/rng.hpp"
#include "scsa/tape.hpp"

// Multi-semantic spatial attention: pool the feature map to two 1D
// sequences, split into K sub-features, run a depth-wise 1D convolution of a
// different kernel size over each, normalize with K groups, gate through a
// sigmoid, and modulate the input from both axes.

namespace scsa {

enum class NormKind { GroupNorm, BatchNorm };
enum class ConvSharing { Shared, Unshared };
enum class GnPosition { PostConv, PreConv };
enum class KernelInit { FanInUniform, Identity };

struct SmsaConfig {
    std::size_t k_groups = 4;
    std::vector<std::size_t> kernel_sizes = {3, 5, 7, 9};
    NormKind norm = NormKind::GroupNorm;
    ConvSharing conv_sharing = ConvSharing::Shared;
    GnPosition gn_position = GnPosition::PostConv;
    double eps = 1e-5;
    double bn_momentum = 0.1;

    void validate(std::size_t channels) const {
        if (k_groups == 0) throw ConfigError("smsa: k_groups must be >= 1");
        if (kernel_sizes.size() != k_groups) {
            throw ConfigError("smsa: kernel_sizes length " + std::to_string(kernel_sizes.size()) +
                              " != k_groups " + std::to_string(k_groups));
        }
        for (std::size_t k : kernel_sizes) {
            if (k % 2 == 0 || k == 0) {
                throw ConfigError("smsa: kernel sizes must be odd, got " + std::to_string(k));
            }
        }
        if (channels % k_groups != 0) {
            throw ConfigError("smsa: channels " + std::to_string(channels) +
                              " not divisible by k_groups " + std::to_string(k_groups));
        }
        if (eps <= 0) throw ConfigError("smsa: eps must be > 0");
    }
};

// Kernels are [C/K, k_i]. When sharing is on, the H and W branches reference
// the same Parameter objects and their gradients accumulate together.
template <class T>
struct SmsaParamsT {
    std::vector<ParameterT<T>*> conv;    // H branch (and W branch when shared)
    std::vector<ParameterT<T>*> conv_w;  // W branch when unshared, otherwise == conv
    ParameterT<T>* norm_h_gamma = nullptr;
    ParameterT<T>* norm_h_beta = nullptr;
    ParameterT<T>* norm_w_gamma = nullptr;
    ParameterT<T>* norm_w_beta = nullptr;
    TensorT<T>* bn_h_running_mean = nullptr;
    TensorT<T>* bn_h_running_var = nullptr;
    TensorT<T>* bn_w_running_mean = nullptr;
    TensorT<T>* bn_w_running_var = nullptr;

    static SmsaParamsT create(ParamStoreT<T>& store, const std::string& prefix,
                              std::size_t channels, const SmsaConfig& cfg, Rng& rng,
                              KernelInit init = KernelInit::FanInUniform) {
        cfg.validate(channels);
        SmsaParamsT p;
        const std::size_t per_group = channels / cfg.k_groups;
        auto make_kernel = [&](std::size_t k) {
            TensorT<T> w(Shape{per_group, k});
            if (init == KernelInit::Identity) {
                for (std::size_t c = 0; c < per_group; ++c) w.at2(c, (k - 1) / 2) = T(1);
            } else {
                const T bound = T(1) / std::sqrt(static_cast<T>(k));
                for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
            }
            return w;
        };
        for (std::size_t i = 0; i < cfg.k_groups; ++i) {
            p.conv.push_back(store.add(prefix + "conv." + std::to_string(i) + ".weight",
                                       make_kernel(cfg.kernel_sizes[i])));
        }
        if (cfg.conv_sharing == ConvSharing::Unshared) {
            for (std::size_t i = 0; i < cfg.k_groups; ++i) {
                p.conv_w.push_back(store.add(prefix + "conv_w." + std::to_string(i) + ".weight",
                                             make_kernel(cfg.kernel_sizes[i])));
            }
        } else {
            p.conv_w = p.conv;
        }
        const std::string tag = cfg.norm == NormKind::GroupNorm ? "gn" : "bn";
        p.norm_h_gamma = store.add(prefix + tag + "_h.gamma", TensorT<T>::full(Shape{channels}, T(1)));
        p.norm_h_beta = store.add(prefix + tag + "_h.beta", TensorT<T>(Shape{channels}));
        p.norm_w_gamma = store.add(prefix + tag + "_w.gamma", TensorT<T>::full(Shape{channels}, T(1)));
        p.norm_w_beta = store.add(prefix + tag + "_w.beta", TensorT<T>(Shape{channels}));
        if (cfg.norm == NormKind::BatchNorm) {
            p.bn_h_running_mean = store.add_buffer(prefix + "bn_h.running_mean",
                                                   TensorT<T>(Shape{channels}));
            p.bn_h_running_var = store.add_buffer(prefix + "bn_h.running_var",
                                                  TensorT<T>::full(Shape{channels}, T(1)));
            p.bn_w_running_mean = store.add_buffer(prefix + "bn_w.running_mean",
                                                   TensorT<T>(Shape{channels}));
            p.bn_w_running_var = store.add_buffer(prefix + "bn_w.running_var",
                                                  TensorT<T>::full(Shape{channels}, T(1)));
        }
        return p;
    }
};

using SmsaParams = SmsaParamsT<double>;

template <class T>
struct SmsaGraph {
    NodeId output;            // [B,C,H,W]
    NodeId attn_from_h_pool;  // sigmoid map over the W axis, [B,C,W]
    NodeId attn_from_w_pool;  // sigmoid map over the H axis, [B,C,H]
};

namespace detail {

template <class T>
NodeId smsa_branch(TapeT<T>& tape, NodeId seq, const std::vector<ParameterT<T>*>& kernels,
                   ParameterT<T>& gamma, ParameterT<T>& beta, TensorT<T>* run_mean,
                   TensorT<T>* run_var, const SmsaConfig& cfg, ops::BatchNormMode bn_mode) {
    auto normalize = [&](NodeId id) {
        NodeId g = tape.watch(gamma);
        NodeId b = tape.watch(beta);
        if (cfg.norm == NormKind::GroupNorm) {
            return ops::group_norm(tape, id, cfg.k_groups, g, b, static_cast<T>(cfg.eps));
        }
        return ops::batch_norm1d(tape, id, g, b, static_cast<T>(cfg.eps), bn_mode, *run_mean,
                                 *run_var, static_cast<T>(cfg.bn_momentum));
    };
    NodeId id = seq;
    if (cfg.gn_position == GnPosition::PreConv) id = normalize(id);
    auto parts = ops::channel_split(tape, id, cfg.k_groups);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        parts[i] = ops::dwconv1d(tape, parts[i], tape.watch(*kernels[i]), std::nullopt);
    }
    id = ops::concat_channels(tape, parts);
    if (cfg.gn_position == GnPosition::PostConv) id = normalize(id);
    return ops::sigmoid(tape, id);
}

}  // namespace detail

// Full pipeline; output shape equals input shape.
template <class T>
SmsaGraph<T> smsa_build(TapeT<T>& tape, NodeId x, SmsaParamsT<T>& params, const SmsaConfig& cfg,
                        ops::BatchNormMode bn_mode = ops::BatchNormMode::Train) {
    const auto& xv = tape.value(x);
    if (xv.rank() != 4) throw ShapeError("smsa: expected rank-4 input, got " + xv.shape.str());
    cfg.validate(xv.shape[1]);
    NodeId xh = ops::avg_pool_over_height(tape, x);  // [B,C,W]
    NodeId xw = ops::avg_pool_over_width(tape, x);   // [B,C,H]
    NodeId attn_w = detail::smsa_branch(tape, xh, params.conv, *params.norm_h_gamma,
                                        *params.norm_h_beta, params.bn_h_running_mean,
                                        params.bn_h_running_var, cfg, bn_mode);
    NodeId attn_h = detail::smsa_branch(tape, xw, params.conv_w, *params.norm_w_gamma,
                                        *params.norm_w_beta, params.bn_w_running_mean,
                                        params.bn_w_running_var, cfg, bn_mode);
    NodeId out = ops::broadcast_mul3(tape, x, attn_w, attn_h);
    return {out, attn_w, attn_h};
}

template <class T>
NodeId smsa_forward(TapeT<T>& tape, NodeId x, SmsaParamsT<T>& params, const SmsaConfig& cfg,
                    ops::BatchNormMode bn_mode = ops::BatchNormMode::Train) {
    return smsa_build(tape, x, params, cfg, bn_mode).output;
}

// Diagnostic accessor: the two sigmoid maps before the final modulation.
// first = map derived from the height pool ([B,C,W]), second = from the
// width pool ([B,C,H]).
template <class T>
std::pair<TensorT<T>, TensorT<T>> smsa_attention_maps(
    const TensorT<T>& x, SmsaParamsT<T>& params, const SmsaConfig& cfg,
    ops::BatchNormMode bn_mode = ops::BatchNormMode::Train) {
    TapeT<T> tape;
    NodeId xid = tape.input(x);
    auto graph = smsa_build(tape, xid, params, cfg, bn_mode);
    return {tape.value(graph.attn_from_h_pool), tape.value(graph.attn_from_w_pool)};
}

}  // namespace scsa
