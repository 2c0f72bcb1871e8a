#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "scsa/ops.hpp"
#include "scsa/param.hpp"
#include "scsa/tape.hpp"

// Progressive channel-wise self-attention: compress the spatial plane to a
// small token grid, project per-channel Q/K/V, attend across channels with
// the spatial positions as token features, and gate each channel of the
// input by the pooled attention output.

namespace scsa {

enum class ScaleMode { SqrtC, SqrtHW };

struct PcsaConfig {
    std::size_t pooled_h = 7;
    std::size_t pooled_w = 7;
    ScaleMode scale_mode = ScaleMode::SqrtC;
    std::size_t heads = 1;
    bool shuffle = false;
    bool progressive_compression = true;

    void validate(std::size_t channels) const {
        if (pooled_h == 0 || pooled_w == 0) throw ConfigError("pcsa: pooled extents must be >= 1");
        if (heads == 0) throw ConfigError("pcsa: heads must be >= 1");
        if (channels % heads != 0) {
            throw ConfigError("pcsa: channels " + std::to_string(channels) +
                              " not divisible by heads " + std::to_string(heads));
        }
        if (shuffle && heads < 2) throw ConfigError("pcsa: shuffle requires heads > 1");
    }
};

template <class T>
struct PcsaParamsT {
    ParameterT<T>* q_w = nullptr;
    ParameterT<T>* q_b = nullptr;
    ParameterT<T>* k_w = nullptr;
    ParameterT<T>* k_b = nullptr;
    ParameterT<T>* v_w = nullptr;
    ParameterT<T>* v_b = nullptr;

    // Weights start at 1 (identity projection), biases at 0, so the
    // untrained module measures plain channel similarity.
    static PcsaParamsT create(ParamStoreT<T>& store, const std::string& prefix,
                              std::size_t channels) {
        PcsaParamsT p;
        auto ones = [&] { return TensorT<T>::full(Shape{channels}, T(1)); };
        auto zeros = [&] { return TensorT<T>(Shape{channels}); };
        p.q_w = store.add(prefix + "q.weight", ones());
        p.q_b = store.add(prefix + "q.bias", zeros());
        p.k_w = store.add(prefix + "k.weight", ones());
        p.k_b = store.add(prefix + "k.bias", zeros());
        p.v_w = store.add(prefix + "v.weight", ones());
        p.v_b = store.add(prefix + "v.bias", zeros());
        return p;
    }
};

using PcsaParams = PcsaParamsT<double>;

template <class T>
struct PcsaGraph {
    NodeId output;             // [B,C,H,W]
    std::vector<NodeId> attn;  // post-softmax matrices, one per head, [B,Ch,Ch]
};

// Attending over the full H*W tokens (progressive compression off) is
// quadratic in the plane; warn once past this budget.
inline constexpr double kFullPlaneAttentionBudget = 1e9;

template <class T>
PcsaGraph<T> pcsa_build(TapeT<T>& tape, NodeId x, PcsaParamsT<T>& params, const PcsaConfig& cfg) {
    const auto& xv = tape.value(x);
    if (xv.rank() != 4) throw ShapeError("pcsa: expected rank-4 input, got " + xv.shape.str());
    const std::size_t B = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
    cfg.validate(C);

    NodeId compressed = x;
    std::size_t ph = H, pw = W;
    if (cfg.progressive_compression) {
        // Tiny feature maps clamp instead of erroring.
        ph = std::min(cfg.pooled_h, H);
        pw = std::min(cfg.pooled_w, W);
        compressed = ops::adaptive_avg_pool2d(tape, x, ph, pw);
    } else {
        const double cost = static_cast<double>(C) * static_cast<double>(H * W) *
                            static_cast<double>(H * W);
        if (cost > kFullPlaneAttentionBudget) {
            std::fprintf(stderr,
                         "pcsa: warning: full-plane attention over %zux%zu tokens at C=%zu "
                         "exceeds the compute budget\n",
                         H, W, C);
        }
    }
    const std::size_t N = ph * pw;
    NodeId flat = ops::reshape(tape, compressed, Shape{B, C, N});
    NodeId q = ops::per_channel_affine(tape, flat, tape.watch(*params.q_w), tape.watch(*params.q_b));
    NodeId k = ops::per_channel_affine(tape, flat, tape.watch(*params.k_w), tape.watch(*params.k_b));
    NodeId v = ops::per_channel_affine(tape, flat, tape.watch(*params.v_w), tape.watch(*params.v_b));

    const T denom = cfg.scale_mode == ScaleMode::SqrtC
                        ? std::sqrt(static_cast<T>(C))
                        : std::sqrt(static_cast<T>(N));
    const T inv_scale = T(1) / denom;

    PcsaGraph<T> graph;
    NodeId x_attn;
    if (cfg.heads == 1) {
        NodeId scores = ops::batched_matmul(tape, q, ops::transpose_last2(tape, k));
        NodeId attn = ops::softmax_lastdim(tape, ops::scale(tape, scores, inv_scale));
        graph.attn.push_back(attn);
        x_attn = ops::batched_matmul(tape, attn, v);
    } else {
        const std::size_t ch = C / cfg.heads;
        std::vector<NodeId> head_outs;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            NodeId qh = ops::channel_slice(tape, q, h * ch, (h + 1) * ch);
            NodeId kh = ops::channel_slice(tape, k, h * ch, (h + 1) * ch);
            NodeId vh = ops::channel_slice(tape, v, h * ch, (h + 1) * ch);
            NodeId scores = ops::batched_matmul(tape, qh, ops::transpose_last2(tape, kh));
            NodeId attn = ops::softmax_lastdim(tape, ops::scale(tape, scores, inv_scale));
            graph.attn.push_back(attn);
            head_outs.push_back(ops::batched_matmul(tape, attn, vh));
        }
        x_attn = ops::concat_channels(tape, head_outs);
        if (cfg.shuffle) x_attn = ops::channel_shuffle(tape, x_attn, cfg.heads);
    }
    NodeId gate = ops::sigmoid(tape, ops::mean_lastdim(tape, x_attn));  // [B,C]
    graph.output = ops::mul_channel_gate(tape, x, gate);
    return graph;
}

template <class T>
NodeId pcsa_forward(TapeT<T>& tape, NodeId x, PcsaParamsT<T>& params, const PcsaConfig& cfg) {
    return pcsa_build(tape, x, params, cfg).output;
}

// Diagnostic accessor: the post-softmax attention matrix, [B,C,C] for a
// single head, [B,heads,C/heads,C/heads] otherwise. Rows sum to 1.
template <class T>
TensorT<T> channel_attention_matrix(const TensorT<T>& x, PcsaParamsT<T>& params,
                                    const PcsaConfig& cfg) {
    TapeT<T> tape;
    NodeId xid = tape.input(x);
    auto graph = pcsa_build(tape, xid, params, cfg);
    const std::size_t B = x.shape[0], C = x.shape[1];
    if (cfg.heads == 1) {
        return tape.value(graph.attn[0]);
    }
    const std::size_t ch = C / cfg.heads;
    TensorT<T> out(Shape{B, cfg.heads, ch, ch});
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const auto& m = tape.value(graph.attn[h]);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < ch; ++i)
                for (std::size_t j = 0; j < ch; ++j) out.at4(b, h, i, j) = m.at3(b, i, j);
    }
    return out;
}

}  // namespace scsa
