#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "scsa/tape.hpp"
#include "scsa/tensor.hpp"

// The operation set of the attention pipeline and the toy backbone, each
// with an analytic backward pass recorded on the tape. Kernels are plain
// row-major loops; shape conventions are [B,C,H,W] for rank 4 and [B,C,L]
// for rank 3, with the channel axis fixed at position 1.

namespace scsa::ops {

enum class BatchNormMode { Train, Eval };

namespace detail {

template <class T>
inline void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst.data[i] += src.data[i];
}

// B, C and the flattened extent after the channel axis.
template <class T>
inline void channel_layout(const TensorT<T>& x, const char* op, std::size_t& B, std::size_t& C,
                           std::size_t& inner) {
    if (x.rank() < 2) throw ShapeError(std::string(op) + ": expected rank >= 2, got " + x.shape.str());
    B = x.shape[0];
    C = x.shape[1];
    inner = 1;
    for (std::size_t i = 2; i < x.rank(); ++i) inner *= x.shape[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// axis pooling (spatial decomposition)

// [B,C,H,W] -> [B,C,W]
template <class T>
NodeId avg_pool_over_height(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 4) throw ShapeError("avg_pool_over_height: expected rank-4, got " + x.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    TensorT<T> out(Shape{B, C, W});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t w = 0; w < W; ++w) {
                T acc = 0;
                for (std::size_t h = 0; h < H; ++h) acc += x.at4(b, c, h, w);
                out.at3(b, c, w) = acc / static_cast<T>(H);
            }
    check_finite(out, "avg_pool_over_height");
    return tape.emit(std::move(out), OpKind::AvgPoolOverHeight,
                     [x_id, B, C, H, W](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         auto& gx = t.grad(x_id);
                         const T inv = T(1) / static_cast<T>(H);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t c = 0; c < C; ++c)
                                 for (std::size_t w = 0; w < W; ++w) {
                                     const T g = gy.at3(b, c, w) * inv;
                                     for (std::size_t h = 0; h < H; ++h) gx.at4(b, c, h, w) += g;
                                 }
                     });
}

// [B,C,H,W] -> [B,C,H]
template <class T>
NodeId avg_pool_over_width(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 4) throw ShapeError("avg_pool_over_width: expected rank-4, got " + x.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    TensorT<T> out(Shape{B, C, H});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t h = 0; h < H; ++h) {
                T acc = 0;
                for (std::size_t w = 0; w < W; ++w) acc += x.at4(b, c, h, w);
                out.at3(b, c, h) = acc / static_cast<T>(W);
            }
    check_finite(out, "avg_pool_over_width");
    return tape.emit(std::move(out), OpKind::AvgPoolOverWidth,
                     [x_id, B, C, H, W](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         auto& gx = t.grad(x_id);
                         const T inv = T(1) / static_cast<T>(W);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t c = 0; c < C; ++c)
                                 for (std::size_t h = 0; h < H; ++h) {
                                     const T g = gy.at3(b, c, h) * inv;
                                     for (std::size_t w = 0; w < W; ++w) gx.at4(b, c, h, w) += g;
                                 }
                     });
}

// ---------------------------------------------------------------------------
// channel rearrangement

// Channels [c0, c1) of a rank-3/4 tensor.
template <class T>
NodeId channel_slice(TapeT<T>& tape, NodeId x_id, std::size_t c0, std::size_t c1) {
    const auto& x = tape.value(x_id);
    std::size_t B, C, inner;
    detail::channel_layout(x, "channel_slice", B, C, inner);
    if (c0 >= c1 || c1 > C) throw ShapeError("channel_slice: bad range");
    const std::size_t Cs = c1 - c0;
    Shape out_shape = x.rank() == 3 ? Shape{B, Cs, x.shape[2]} : Shape{B, Cs, x.shape[2], x.shape[3]};
    TensorT<T> out(out_shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < Cs; ++c)
            for (std::size_t i = 0; i < inner; ++i)
                out.data[(b * Cs + c) * inner + i] = x.data[(b * C + c0 + c) * inner + i];
    return tape.emit(std::move(out), OpKind::ChannelSlice,
                     [x_id, c0, B, C, Cs, inner](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         auto& gx = t.grad(x_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t c = 0; c < Cs; ++c)
                                 for (std::size_t i = 0; i < inner; ++i)
                                     gx.data[(b * C + c0 + c) * inner + i] +=
                                         gy.data[(b * Cs + c) * inner + i];
                     });
}

// Equal split into k channel blocks; concat of the results reproduces the
// input bit-exactly.
template <class T>
std::vector<NodeId> channel_split(TapeT<T>& tape, NodeId x_id, std::size_t k) {
    const auto& x = tape.value(x_id);
    std::size_t B, C, inner;
    detail::channel_layout(x, "channel_split", B, C, inner);
    if (k == 0 || C % k != 0) {
        throw ConfigError("channel_split: C=" + std::to_string(C) + " not divisible by k=" +
                          std::to_string(k));
    }
    const std::size_t step = C / k;
    std::vector<NodeId> parts;
    parts.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        parts.push_back(channel_slice(tape, x_id, i * step, (i + 1) * step));
    }
    return parts;
}

template <class T>
NodeId concat_channels(TapeT<T>& tape, const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no parts");
    const auto& first = tape.value(parts[0]);
    const std::size_t rank = first.rank();
    std::size_t B = first.shape[0], inner = 1;
    for (std::size_t i = 2; i < rank; ++i) inner *= first.shape[i];
    std::size_t C = 0;
    std::vector<std::size_t> offsets, widths;
    for (NodeId id : parts) {
        const auto& p = tape.value(id);
        if (p.rank() != rank || p.shape[0] != B) {
            throw ShapeError("concat_channels: batch/rank mismatch");
        }
        for (std::size_t i = 2; i < rank; ++i) {
            if (p.shape[i] != first.shape[i]) throw ShapeError("concat_channels: extent mismatch");
        }
        offsets.push_back(C);
        widths.push_back(p.shape[1]);
        C += p.shape[1];
    }
    Shape out_shape = rank == 3 ? Shape{B, C, first.shape[2]}
                                : Shape{B, C, first.shape[2], first.shape[3]};
    TensorT<T> out(out_shape);
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const auto& p = tape.value(parts[pi]);
        const std::size_t off = offsets[pi], w = widths[pi];
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < w; ++c)
                for (std::size_t i = 0; i < inner; ++i)
                    out.data[(b * C + off + c) * inner + i] = p.data[(b * w + c) * inner + i];
    }
    auto parts_copy = parts;
    return tape.emit(std::move(out), OpKind::ConcatChannels,
                     [parts_copy, offsets, widths, B, C, inner](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         for (std::size_t pi = 0; pi < parts_copy.size(); ++pi) {
                             auto& gp = t.grad(parts_copy[pi]);
                             const std::size_t off = offsets[pi], w = widths[pi];
                             for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t c = 0; c < w; ++c)
                                     for (std::size_t i = 0; i < inner; ++i)
                                         gp.data[(b * w + c) * inner + i] +=
                                             gy.data[(b * C + off + c) * inner + i];
                         }
                     });
}

// Channel permutation: view as (groups, C/groups), transpose, flatten.
// The inverse permutation is the same op with groups' = C/groups.
template <class T>
NodeId channel_shuffle(TapeT<T>& tape, NodeId x_id, std::size_t groups) {
    const auto& x = tape.value(x_id);
    std::size_t B, C, inner;
    detail::channel_layout(x, "channel_shuffle", B, C, inner);
    if (groups == 0 || C % groups != 0) {
        throw ConfigError("channel_shuffle: C=" + std::to_string(C) + " not divisible by groups=" +
                          std::to_string(groups));
    }
    const std::size_t n = C / groups;
    // out channel p takes input channel (p % groups)*n + p / groups
    TensorT<T> out(x.shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t p = 0; p < C; ++p) {
            const std::size_t src = (p % groups) * n + p / groups;
            for (std::size_t i = 0; i < inner; ++i)
                out.data[(b * C + p) * inner + i] = x.data[(b * C + src) * inner + i];
        }
    return tape.emit(std::move(out), OpKind::ChannelShuffle,
                     [x_id, B, C, groups, n, inner](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         auto& gx = t.grad(x_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t p = 0; p < C; ++p) {
                                 const std::size_t src = (p % groups) * n + p / groups;
                                 for (std::size_t i = 0; i < inner; ++i)
                                     gx.data[(b * C + src) * inner + i] +=
                                         gy.data[(b * C + p) * inner + i];
                             }
                     });
}

template <class T>
NodeId channel_unshuffle(TapeT<T>& tape, NodeId x_id, std::size_t groups) {
    const auto& x = tape.value(x_id);
    std::size_t B, C, inner;
    detail::channel_layout(x, "channel_unshuffle", B, C, inner);
    if (groups == 0 || C % groups != 0) throw ConfigError("channel_unshuffle: divisibility");
    return channel_shuffle(tape, x_id, C / groups);
}

// ---------------------------------------------------------------------------
// depth-wise 1D convolution, odd kernel, zero padding (k-1)/2

template <class T>
NodeId dwconv1d(TapeT<T>& tape, NodeId x_id, NodeId w_id, std::optional<NodeId> bias_id) {
    const auto& x = tape.value(x_id);
    const auto& w = tape.value(w_id);
    if (x.rank() != 3) throw ShapeError("dwconv1d: expected rank-3 input, got " + x.shape.str());
    if (w.rank() != 2) throw ShapeError("dwconv1d: expected rank-2 kernel, got " + w.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], L = x.shape[2], K = w.shape[1];
    if (w.shape[0] != C) throw ShapeError("dwconv1d: kernel channels != input channels");
    if (K % 2 == 0) throw ConfigError("dwconv1d: kernel size must be odd, got " + std::to_string(K));
    if (bias_id && tape.value(*bias_id).shape != Shape{C}) {
        throw ShapeError("dwconv1d: bias extent != channels");
    }
    const std::size_t pad = (K - 1) / 2;
    TensorT<T> out(x.shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const T bias = bias_id ? tape.value(*bias_id)[c] : T(0);
            for (std::size_t l = 0; l < L; ++l) {
                T acc = bias;
                for (std::size_t j = 0; j < K; ++j) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + j) -
                                               static_cast<std::ptrdiff_t>(pad);
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                    acc += w.at2(c, j) * x.at3(b, c, static_cast<std::size_t>(src));
                }
                out.at3(b, c, l) = acc;
            }
        }
    check_finite(out, "dwconv1d");
    return tape.emit(
        std::move(out), OpKind::DwConv1d,
        [x_id, w_id, bias_id, B, C, L, K, pad](TapeT<T>& t, NodeId out_id) {
            const auto& gy = t.grad(out_id);
            const auto& x = t.value(x_id);
            const auto& w = t.value(w_id);
            auto& gx = t.grad(x_id);
            auto& gw = t.grad(w_id);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t l = 0; l < L; ++l) {
                        const T g = gy.at3(b, c, l);
                        for (std::size_t j = 0; j < K; ++j) {
                            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + j) -
                                                       static_cast<std::ptrdiff_t>(pad);
                            if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                            gx.at3(b, c, static_cast<std::size_t>(src)) += g * w.at2(c, j);
                            gw.at2(c, j) += g * x.at3(b, c, static_cast<std::size_t>(src));
                        }
                    }
            if (bias_id) {
                auto& gb = t.grad(*bias_id);
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t l = 0; l < L; ++l) gb[c] += gy.at3(b, c, l);
            }
        });
}

// ---------------------------------------------------------------------------
// normalization

// Per sample and group: zero mean / unit population variance over the
// (C/groups)*L elements of the group, then per-channel affine.
template <class T>
NodeId group_norm(TapeT<T>& tape, NodeId x_id, std::size_t groups, NodeId gamma_id, NodeId beta_id,
                  T eps) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 3) throw ShapeError("group_norm: expected rank-3 input, got " + x.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], L = x.shape[2];
    if (groups == 0 || C % groups != 0) {
        throw ConfigError("group_norm: C=" + std::to_string(C) + " not divisible by groups=" +
                          std::to_string(groups));
    }
    if (eps <= T(0)) throw ConfigError("group_norm: eps must be > 0");
    if (tape.value(gamma_id).shape != Shape{C} || tape.value(beta_id).shape != Shape{C}) {
        throw ShapeError("group_norm: affine extent != channels");
    }
    const std::size_t D = C / groups;
    const std::size_t m = D * L;
    std::vector<T> mean(B * groups), rstd(B * groups);
    TensorT<T> out(x.shape);
    const auto& gamma = tape.value(gamma_id);
    const auto& beta = tape.value(beta_id);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t g = 0; g < groups; ++g) {
            T mu = 0;
            for (std::size_t d = 0; d < D; ++d)
                for (std::size_t l = 0; l < L; ++l) mu += x.at3(b, g * D + d, l);
            mu /= static_cast<T>(m);
            T var = 0;
            for (std::size_t d = 0; d < D; ++d)
                for (std::size_t l = 0; l < L; ++l) {
                    const T diff = x.at3(b, g * D + d, l) - mu;
                    var += diff * diff;
                }
            var /= static_cast<T>(m);
            const T rs = T(1) / std::sqrt(var + eps);
            mean[b * groups + g] = mu;
            rstd[b * groups + g] = rs;
            for (std::size_t d = 0; d < D; ++d) {
                const std::size_t c = g * D + d;
                for (std::size_t l = 0; l < L; ++l) {
                    const T xhat = (x.at3(b, c, l) - mu) * rs;
                    out.at3(b, c, l) = gamma[c] * xhat + beta[c];
                }
            }
        }
    check_finite(out, "group_norm");
    return tape.emit(
        std::move(out), OpKind::GroupNorm,
        [x_id, gamma_id, beta_id, B, C, L, groups, D, m, mean, rstd](TapeT<T>& t, NodeId out_id) {
            const auto& gy = t.grad(out_id);
            const auto& x = t.value(x_id);
            const auto& gamma = t.value(gamma_id);
            auto& gx = t.grad(x_id);
            auto& ggamma = t.grad(gamma_id);
            auto& gbeta = t.grad(beta_id);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t g = 0; g < groups; ++g) {
                    const T mu = mean[b * groups + g];
                    const T rs = rstd[b * groups + g];
                    T sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (std::size_t d = 0; d < D; ++d) {
                        const std::size_t c = g * D + d;
                        for (std::size_t l = 0; l < L; ++l) {
                            const T xhat = (x.at3(b, c, l) - mu) * rs;
                            const T go = gy.at3(b, c, l);
                            ggamma[c] += go * xhat;
                            gbeta[c] += go;
                            const T dxhat = go * gamma[c];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                        }
                    }
                    const T inv_m = T(1) / static_cast<T>(m);
                    for (std::size_t d = 0; d < D; ++d) {
                        const std::size_t c = g * D + d;
                        for (std::size_t l = 0; l < L; ++l) {
                            const T xhat = (x.at3(b, c, l) - mu) * rs;
                            const T dxhat = gy.at3(b, c, l) * gamma[c];
                            gx.at3(b, c, l) +=
                                rs * (dxhat - inv_m * sum_dxhat - xhat * inv_m * sum_dxhat_xhat);
                        }
                    }
                }
        });
}

// Train mode normalizes with per-batch statistics over B*L per channel and
// updates running stats in place; eval mode applies the running stats as a
// fixed affine.
template <class T>
NodeId batch_norm1d(TapeT<T>& tape, NodeId x_id, NodeId gamma_id, NodeId beta_id, T eps,
                    BatchNormMode mode, TensorT<T>& running_mean, TensorT<T>& running_var,
                    T momentum) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 3) throw ShapeError("batch_norm1d: expected rank-3 input, got " + x.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], L = x.shape[2];
    if (running_mean.shape != Shape{C} || running_var.shape != Shape{C}) {
        throw ShapeError("batch_norm1d: running stats extent != channels");
    }
    const std::size_t m = B * L;
    TensorT<T> out(x.shape);
    const auto& gamma = tape.value(gamma_id);
    const auto& beta = tape.value(beta_id);
    if (mode == BatchNormMode::Train) {
        if (m < 2) throw NumericError("batch_norm1d: degenerate statistics, B*L < 2 in train mode");
        std::vector<T> mean(C), rstd(C);
        for (std::size_t c = 0; c < C; ++c) {
            T mu = 0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t l = 0; l < L; ++l) mu += x.at3(b, c, l);
            mu /= static_cast<T>(m);
            T var = 0;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t l = 0; l < L; ++l) {
                    const T diff = x.at3(b, c, l) - mu;
                    var += diff * diff;
                }
            var /= static_cast<T>(m);
            mean[c] = mu;
            rstd[c] = T(1) / std::sqrt(var + eps);
            running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mu;
            running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var;
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t l = 0; l < L; ++l)
                    out.at3(b, c, l) = gamma[c] * (x.at3(b, c, l) - mu) * rstd[c] + beta[c];
        }
        check_finite(out, "batch_norm1d");
        return tape.emit(
            std::move(out), OpKind::BatchNorm1d,
            [x_id, gamma_id, beta_id, B, C, L, m, mean, rstd](TapeT<T>& t, NodeId out_id) {
                const auto& gy = t.grad(out_id);
                const auto& x = t.value(x_id);
                const auto& gamma = t.value(gamma_id);
                auto& gx = t.grad(x_id);
                auto& ggamma = t.grad(gamma_id);
                auto& gbeta = t.grad(beta_id);
                const T inv_m = T(1) / static_cast<T>(m);
                for (std::size_t c = 0; c < C; ++c) {
                    T sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t l = 0; l < L; ++l) {
                            const T xhat = (x.at3(b, c, l) - mean[c]) * rstd[c];
                            const T go = gy.at3(b, c, l);
                            ggamma[c] += go * xhat;
                            gbeta[c] += go;
                            const T dxhat = go * gamma[c];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                        }
                    for (std::size_t b = 0; b < B; ++b)
                        for (std::size_t l = 0; l < L; ++l) {
                            const T xhat = (x.at3(b, c, l) - mean[c]) * rstd[c];
                            const T dxhat = gy.at3(b, c, l) * gamma[c];
                            gx.at3(b, c, l) += rstd[c] * (dxhat - inv_m * sum_dxhat -
                                                          xhat * inv_m * sum_dxhat_xhat);
                        }
                }
            });
    }
    // Eval: running stats are constants, so the op is a per-channel affine.
    std::vector<T> shift(C), scale(C);
    for (std::size_t c = 0; c < C; ++c) {
        scale[c] = T(1) / std::sqrt(running_var[c] + eps);
        shift[c] = running_mean[c];
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t l = 0; l < L; ++l)
                out.at3(b, c, l) = gamma[c] * (x.at3(b, c, l) - shift[c]) * scale[c] + beta[c];
    }
    check_finite(out, "batch_norm1d");
    return tape.emit(std::move(out), OpKind::BatchNorm1d,
                     [x_id, gamma_id, beta_id, B, C, L, shift, scale](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         const auto& x = t.value(x_id);
                         const auto& gamma = t.value(gamma_id);
                         auto& gx = t.grad(x_id);
                         auto& ggamma = t.grad(gamma_id);
                         auto& gbeta = t.grad(beta_id);
                         for (std::size_t c = 0; c < C; ++c)
                             for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t l = 0; l < L; ++l) {
                                     const T go = gy.at3(b, c, l);
                                     const T xhat = (x.at3(b, c, l) - shift[c]) * scale[c];
                                     ggamma[c] += go * xhat;
                                     gbeta[c] += go;
                                     gx.at3(b, c, l) += go * gamma[c] * scale[c];
                                 }
                     });
}

// ---------------------------------------------------------------------------
// pointwise nonlinearities

template <class T>
NodeId sigmoid(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    TensorT<T> out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = T(1) / (T(1) + std::exp(-x.data[i]));
    return tape.emit(std::move(out), OpKind::Sigmoid, [x_id](TapeT<T>& t, NodeId out_id) {
        const auto& gy = t.grad(out_id);
        const auto& y = t.value(out_id);
        auto& gx = t.grad(x_id);
        for (std::size_t i = 0; i < gx.numel(); ++i)
            gx.data[i] += gy.data[i] * y.data[i] * (T(1) - y.data[i]);
    });
}

template <class T>
NodeId relu(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    TensorT<T> out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return tape.emit(std::move(out), OpKind::Relu, [x_id](TapeT<T>& t, NodeId out_id) {
        const auto& gy = t.grad(out_id);
        const auto& x = t.value(x_id);
        auto& gx = t.grad(x_id);
        for (std::size_t i = 0; i < gx.numel(); ++i)
            if (x.data[i] > T(0)) gx.data[i] += gy.data[i];
    });
}

// Max-subtracted softmax along the last axis; rows sum to 1.
template <class T>
NodeId softmax_lastdim(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    if (x.rank() < 1) throw ShapeError("softmax_lastdim: rank >= 1 required");
    const std::size_t N = x.shape[x.rank() - 1];
    const std::size_t rows = x.numel() / N;
    TensorT<T> out(x.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = &x.data[r * N];
        T* yr = &out.data[r * N];
        T mx = xr[0];
        for (std::size_t i = 1; i < N; ++i) mx = std::max(mx, xr[i]);
        T sum = 0;
        for (std::size_t i = 0; i < N; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            sum += yr[i];
        }
        for (std::size_t i = 0; i < N; ++i) yr[i] /= sum;
    }
    return tape.emit(std::move(out), OpKind::SoftmaxLastDim,
                     [x_id, N, rows](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         const auto& y = t.value(out_id);
                         auto& gx = t.grad(x_id);
                         for (std::size_t r = 0; r < rows; ++r) {
                             const T* yr = &y.data[r * N];
                             const T* gr = &gy.data[r * N];
                             T dot = 0;
                             for (std::size_t i = 0; i < N; ++i) dot += gr[i] * yr[i];
                             for (std::size_t i = 0; i < N; ++i)
                                 gx.data[r * N + i] += yr[i] * (gr[i] - dot);
                         }
                     });
}

// ---------------------------------------------------------------------------
// 2D pooling

// Output cell (i,j) averages window [floor(iH/oh), ceil((i+1)H/oh)) x
// [floor(jW/ow), ceil((j+1)W/ow)). out=(H,W) is the identity, out=(1,1) the
// global mean.
template <class T>
NodeId adaptive_avg_pool2d(TapeT<T>& tape, NodeId x_id, std::size_t oh, std::size_t ow) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 4) throw ShapeError("adaptive_avg_pool2d: expected rank-4, got " + x.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    if (oh < 1 || ow < 1 || oh > H || ow > W) {
        throw ConfigError("adaptive_avg_pool2d: output " + std::to_string(oh) + "x" +
                          std::to_string(ow) + " exceeds input " + std::to_string(H) + "x" +
                          std::to_string(W));
    }
    auto win = [](std::size_t i, std::size_t in, std::size_t out) {
        const std::size_t lo = (i * in) / out;
        const std::size_t hi = ((i + 1) * in + out - 1) / out;
        return std::pair<std::size_t, std::size_t>{lo, hi};
    };
    TensorT<T> out(Shape{B, C, oh, ow});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < oh; ++i) {
                const auto [h0, h1] = win(i, H, oh);
                for (std::size_t j = 0; j < ow; ++j) {
                    const auto [w0, w1] = win(j, W, ow);
                    T acc = 0;
                    for (std::size_t h = h0; h < h1; ++h)
                        for (std::size_t w = w0; w < w1; ++w) acc += x.at4(b, c, h, w);
                    out.at4(b, c, i, j) = acc / static_cast<T>((h1 - h0) * (w1 - w0));
                }
            }
    check_finite(out, "adaptive_avg_pool2d");
    return tape.emit(std::move(out), OpKind::AdaptiveAvgPool2d,
                     [x_id, B, C, H, W, oh, ow, win](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         auto& gx = t.grad(x_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t c = 0; c < C; ++c)
                                 for (std::size_t i = 0; i < oh; ++i) {
                                     const auto [h0, h1] = win(i, H, oh);
                                     for (std::size_t j = 0; j < ow; ++j) {
                                         const auto [w0, w1] = win(j, W, ow);
                                         const T g = gy.at4(b, c, i, j) /
                                                     static_cast<T>((h1 - h0) * (w1 - w0));
                                         for (std::size_t h = h0; h < h1; ++h)
                                             for (std::size_t w = w0; w < w1; ++w)
                                                 gx.at4(b, c, h, w) += g;
                                     }
                                 }
                     });
}

// ---------------------------------------------------------------------------
// per-channel projections and products

// out[b,c,n] = w[c]*x[b,c,n] + bias[c]  (kernel-1 depth-wise projection)
template <class T>
NodeId per_channel_affine(TapeT<T>& tape, NodeId x_id, NodeId w_id, NodeId b_id) {
    const auto& x = tape.value(x_id);
    std::size_t B, C, inner;
    detail::channel_layout(x, "per_channel_affine", B, C, inner);
    if (tape.value(w_id).shape != Shape{C} || tape.value(b_id).shape != Shape{C}) {
        throw ShapeError("per_channel_affine: weight/bias extent != channels");
    }
    const auto& w = tape.value(w_id);
    const auto& bias = tape.value(b_id);
    TensorT<T> out(x.shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < inner; ++i)
                out.data[(b * C + c) * inner + i] = w[c] * x.data[(b * C + c) * inner + i] + bias[c];
    check_finite(out, "per_channel_affine");
    return tape.emit(std::move(out), OpKind::PerChannelAffine,
                     [x_id, w_id, b_id, B, C, inner](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         const auto& x = t.value(x_id);
                         const auto& w = t.value(w_id);
                         auto& gx = t.grad(x_id);
                         auto& gw = t.grad(w_id);
                         auto& gb = t.grad(b_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t c = 0; c < C; ++c)
                                 for (std::size_t i = 0; i < inner; ++i) {
                                     const std::size_t idx = (b * C + c) * inner + i;
                                     gx.data[idx] += gy.data[idx] * w[c];
                                     gw[c] += gy.data[idx] * x.data[idx];
                                     gb[c] += gy.data[idx];
                                 }
                     });
}

// x[B,C,H,W] * gate[B,C], gate broadcast over the spatial plane
template <class T>
NodeId mul_channel_gate(TapeT<T>& tape, NodeId x_id, NodeId gate_id) {
    const auto& x = tape.value(x_id);
    const auto& gate = tape.value(gate_id);
    if (x.rank() != 4) throw ShapeError("mul_channel_gate: expected rank-4 input");
    const std::size_t B = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3];
    if (gate.shape != Shape{B, C}) {
        throw ShapeError("mul_channel_gate: gate shape " + gate.shape.str() + " != [B,C]");
    }
    TensorT<T> out(x.shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const T g = gate.at2(b, c);
            for (std::size_t i = 0; i < HW; ++i)
                out.data[(b * C + c) * HW + i] = g * x.data[(b * C + c) * HW + i];
        }
    check_finite(out, "mul_channel_gate");
    return tape.emit(std::move(out), OpKind::MulChannelGate,
                     [x_id, gate_id, B, C, HW](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         const auto& x = t.value(x_id);
                         const auto& gate = t.value(gate_id);
                         auto& gx = t.grad(x_id);
                         auto& gg = t.grad(gate_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t c = 0; c < C; ++c) {
                                 const T g = gate.at2(b, c);
                                 T acc = 0;
                                 for (std::size_t i = 0; i < HW; ++i) {
                                     const std::size_t idx = (b * C + c) * HW + i;
                                     gx.data[idx] += gy.data[idx] * g;
                                     acc += gy.data[idx] * x.data[idx];
                                 }
                                 gg.at2(b, c) += acc;
                             }
                     });
}

// X * attn_over_w * attn_over_h; attn_over_w is [B,C,W] (broadcast along H),
// attn_over_h is [B,C,H] (broadcast along W).
template <class T>
NodeId broadcast_mul3(TapeT<T>& tape, NodeId x_id, NodeId attn_w_id, NodeId attn_h_id) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 4) throw ShapeError("broadcast_mul3: expected rank-4 input");
    const std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    const auto& aw = tape.value(attn_w_id);
    const auto& ah = tape.value(attn_h_id);
    if (aw.shape != Shape{B, C, W}) {
        throw ShapeError("broadcast_mul3: W-varying factor shape " + aw.shape.str() +
                         " incompatible with input " + x.shape.str());
    }
    if (ah.shape != Shape{B, C, H}) {
        throw ShapeError("broadcast_mul3: H-varying factor shape " + ah.shape.str() +
                         " incompatible with input " + x.shape.str());
    }
    TensorT<T> out(x.shape);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t h = 0; h < H; ++h) {
                const T fh = ah.at3(b, c, h);
                for (std::size_t w = 0; w < W; ++w)
                    out.at4(b, c, h, w) = x.at4(b, c, h, w) * aw.at3(b, c, w) * fh;
            }
    check_finite(out, "broadcast_mul3");
    return tape.emit(
        std::move(out), OpKind::BroadcastMul3,
        [x_id, attn_w_id, attn_h_id, B, C, H, W](TapeT<T>& t, NodeId out_id) {
            const auto& gy = t.grad(out_id);
            const auto& x = t.value(x_id);
            const auto& aw = t.value(attn_w_id);
            const auto& ah = t.value(attn_h_id);
            auto& gx = t.grad(x_id);
            auto& gaw = t.grad(attn_w_id);
            auto& gah = t.grad(attn_h_id);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t h = 0; h < H; ++h) {
                        const T fh = ah.at3(b, c, h);
                        T acc_h = 0;
                        for (std::size_t w = 0; w < W; ++w) {
                            const T g = gy.at4(b, c, h, w);
                            const T xv = x.at4(b, c, h, w);
                            gx.at4(b, c, h, w) += g * aw.at3(b, c, w) * fh;
                            gaw.at3(b, c, w) += g * xv * fh;
                            acc_h += g * xv * aw.at3(b, c, w);
                        }
                        gah.at3(b, c, h) += acc_h;
                    }
        });
}

// ---------------------------------------------------------------------------
// linear algebra

template <class T>
NodeId transpose_last2(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 3) throw ShapeError("transpose_last2: expected rank-3, got " + x.shape.str());
    const std::size_t B = x.shape[0], M = x.shape[1], N = x.shape[2];
    TensorT<T> out(Shape{B, N, M});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < N; ++j) out.at3(b, j, i) = x.at3(b, i, j);
    return tape.emit(std::move(out), OpKind::TransposeLast2,
                     [x_id, B, M, N](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         auto& gx = t.grad(x_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t i = 0; i < M; ++i)
                                 for (std::size_t j = 0; j < N; ++j)
                                     gx.at3(b, i, j) += gy.at3(b, j, i);
                     });
}

// [B,M,P] x [B,P,N] -> [B,M,N]
template <class T>
NodeId batched_matmul(TapeT<T>& tape, NodeId a_id, NodeId b_id) {
    const auto& a = tape.value(a_id);
    const auto& b = tape.value(b_id);
    if (a.rank() != 3 || b.rank() != 3) throw ShapeError("batched_matmul: expected rank-3 operands");
    const std::size_t B = a.shape[0], M = a.shape[1], P = a.shape[2], N = b.shape[2];
    if (b.shape[0] != B || b.shape[1] != P) {
        throw ShapeError("batched_matmul: inner extents mismatch, " + a.shape.str() + " x " +
                         b.shape.str());
    }
    TensorT<T> out(Shape{B, M, N});
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                T acc = 0;
                for (std::size_t p = 0; p < P; ++p) acc += a.at3(bb, i, p) * b.at3(bb, p, j);
                out.at3(bb, i, j) = acc;
            }
    check_finite(out, "batched_matmul");
    return tape.emit(std::move(out), OpKind::BatchedMatmul,
                     [a_id, b_id, B, M, P, N](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         const auto& a = t.value(a_id);
                         const auto& b = t.value(b_id);
                         auto& ga = t.grad(a_id);
                         auto& gb = t.grad(b_id);
                         for (std::size_t bb = 0; bb < B; ++bb)
                             for (std::size_t i = 0; i < M; ++i)
                                 for (std::size_t j = 0; j < N; ++j) {
                                     const T g = gy.at3(bb, i, j);
                                     for (std::size_t p = 0; p < P; ++p) {
                                         ga.at3(bb, i, p) += g * b.at3(bb, p, j);
                                         gb.at3(bb, p, j) += g * a.at3(bb, i, p);
                                     }
                                 }
                     });
}

// ---------------------------------------------------------------------------
// reductions / reshaping

// [B,C,N] -> [B,C]
template <class T>
NodeId mean_lastdim(TapeT<T>& tape, NodeId x_id) {
    const auto& x = tape.value(x_id);
    if (x.rank() != 3) throw ShapeError("mean_lastdim: expected rank-3, got " + x.shape.str());
    const std::size_t B = x.shape[0], C = x.shape[1], N = x.shape[2];
    TensorT<T> out(Shape{B, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            T acc = 0;
            for (std::size_t n = 0; n < N; ++n) acc += x.at3(b, c, n);
            out.at2(b, c) = acc / static_cast<T>(N);
        }
    return tape.emit(std::move(out), OpKind::MeanLastDim, [x_id, B, C, N](TapeT<T>& t, NodeId out_id) {
        const auto& gy = t.grad(out_id);
        auto& gx = t.grad(x_id);
        const T inv = T(1) / static_cast<T>(N);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                const T g = gy.at2(b, c) * inv;
                for (std::size_t n = 0; n < N; ++n) gx.at3(b, c, n) += g;
            }
    });
}

template <class T>
NodeId scale(TapeT<T>& tape, NodeId x_id, T factor) {
    const auto& x = tape.value(x_id);
    TensorT<T> out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] * factor;
    return tape.emit(std::move(out), OpKind::Scale, [x_id, factor](TapeT<T>& t, NodeId out_id) {
        const auto& gy = t.grad(out_id);
        auto& gx = t.grad(x_id);
        for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gy.data[i] * factor;
    });
}

template <class T>
NodeId reshape(TapeT<T>& tape, NodeId x_id, Shape new_shape) {
    const auto& x = tape.value(x_id);
    if (new_shape.numel() != x.numel()) {
        throw ShapeError("reshape: numel mismatch " + x.shape.str() + " -> " + new_shape.str());
    }
    TensorT<T> out(new_shape, x.data);
    return tape.emit(std::move(out), OpKind::Reshape, [x_id](TapeT<T>& t, NodeId out_id) {
        const auto& gy = t.grad(out_id);
        auto& gx = t.grad(x_id);
        for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gy.data[i];
    });
}

template <class T>
NodeId add(TapeT<T>& tape, NodeId a_id, NodeId b_id) {
    const auto& a = tape.value(a_id);
    const auto& b = tape.value(b_id);
    if (a.shape != b.shape) {
        throw ShapeError("add: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
    }
    TensorT<T> out(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] + b.data[i];
    return tape.emit(std::move(out), OpKind::Add, [a_id, b_id](TapeT<T>& t, NodeId out_id) {
        const auto& gy = t.grad(out_id);
        auto& ga = t.grad(a_id);
        auto& gb = t.grad(b_id);
        for (std::size_t i = 0; i < gy.numel(); ++i) {
            ga.data[i] += gy.data[i];
            gb.data[i] += gy.data[i];
        }
    });
}

// ---------------------------------------------------------------------------
// backbone layers

namespace detail {

// Valid kernel-tap range [lo, hi) for one output position, clipping the
// zero-padded border.
inline void conv_tap_range(std::size_t out_pos, std::size_t stride, std::size_t pad,
                           std::size_t in_extent, std::size_t k, std::size_t& lo,
                           std::size_t& hi) {
    const std::size_t base = out_pos * stride;  // input index = base + tap - pad
    lo = pad > base ? pad - base : 0;
    const std::size_t limit = in_extent + pad - base;  // tap < limit keeps index < in_extent
    hi = std::min(k, limit);
}

}  // namespace detail

// x[B,Ci,H,W] * w[Co,Ci,kh,kw], square stride, symmetric zero padding
template <class T>
NodeId conv2d(TapeT<T>& tape, NodeId x_id, NodeId w_id, std::optional<NodeId> bias_id,
              std::size_t stride, std::size_t pad) {
    const auto& x = tape.value(x_id);
    const auto& w = tape.value(w_id);
    if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d: expected rank-4 input and kernel");
    const std::size_t B = x.shape[0], Ci = x.shape[1], H = x.shape[2], W = x.shape[3];
    const std::size_t Co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != Ci) throw ShapeError("conv2d: kernel input channels mismatch");
    if (H + 2 * pad < kh || W + 2 * pad < kw) throw ShapeError("conv2d: kernel exceeds padded input");
    const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
    if (bias_id && tape.value(*bias_id).shape != Shape{Co}) {
        throw ShapeError("conv2d: bias extent != output channels");
    }
    TensorT<T> out(Shape{B, Co, Ho, Wo});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < Co; ++o) {
            const T bias = bias_id ? tape.value(*bias_id)[o] : T(0);
            T* out_plane = &out.data[(b * Co + o) * Ho * Wo];
            for (std::size_t i = 0; i < Ho; ++i) {
                std::size_t u0, u1;
                detail::conv_tap_range(i, stride, pad, H, kh, u0, u1);
                for (std::size_t j = 0; j < Wo; ++j) {
                    std::size_t v0, v1;
                    detail::conv_tap_range(j, stride, pad, W, kw, v0, v1);
                    // first valid input column; j*stride + v0 >= pad by construction
                    const std::size_t c0 = j * stride + v0 - pad;
                    T acc = bias;
                    for (std::size_t ci = 0; ci < Ci; ++ci) {
                        const T* x_plane = &x.data[(b * Ci + ci) * H * W];
                        const T* w_plane = &w.data[(o * Ci + ci) * kh * kw];
                        for (std::size_t u = u0; u < u1; ++u) {
                            const T* xr = x_plane + (i * stride + u - pad) * W + c0;
                            const T* wr = w_plane + u * kw + v0;
                            for (std::size_t v = 0; v < v1 - v0; ++v) acc += wr[v] * xr[v];
                        }
                    }
                    out_plane[i * Wo + j] = acc;
                }
            }
        }
    check_finite(out, "conv2d");
    return tape.emit(
        std::move(out), OpKind::Conv2d,
        [x_id, w_id, bias_id, B, Ci, H, W, Co, kh, kw, Ho, Wo, stride, pad](TapeT<T>& t,
                                                                            NodeId out_id) {
            const auto& gy = t.grad(out_id);
            const auto& x = t.value(x_id);
            const auto& w = t.value(w_id);
            auto& gx = t.grad(x_id);
            auto& gw = t.grad(w_id);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t o = 0; o < Co; ++o) {
                    const T* gy_plane = &gy.data[(b * Co + o) * Ho * Wo];
                    for (std::size_t i = 0; i < Ho; ++i) {
                        std::size_t u0, u1;
                        detail::conv_tap_range(i, stride, pad, H, kh, u0, u1);
                        for (std::size_t j = 0; j < Wo; ++j) {
                            const T g = gy_plane[i * Wo + j];
                            if (g == T(0)) continue;
                            std::size_t v0, v1;
                            detail::conv_tap_range(j, stride, pad, W, kw, v0, v1);
                            const std::size_t c0 = j * stride + v0 - pad;
                            for (std::size_t ci = 0; ci < Ci; ++ci) {
                                const T* x_plane = &x.data[(b * Ci + ci) * H * W];
                                T* gx_plane = &gx.data[(b * Ci + ci) * H * W];
                                const T* w_plane = &w.data[(o * Ci + ci) * kh * kw];
                                T* gw_plane = &gw.data[(o * Ci + ci) * kh * kw];
                                for (std::size_t u = u0; u < u1; ++u) {
                                    const std::size_t row = (i * stride + u - pad) * W + c0;
                                    const T* xr = x_plane + row;
                                    T* gxr = gx_plane + row;
                                    const T* wr = w_plane + u * kw + v0;
                                    T* gwr = gw_plane + u * kw + v0;
                                    for (std::size_t v = 0; v < v1 - v0; ++v) {
                                        gxr[v] += g * wr[v];
                                        gwr[v] += g * xr[v];
                                    }
                                }
                            }
                        }
                    }
                }
            if (bias_id) {
                auto& gb = t.grad(*bias_id);
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t o = 0; o < Co; ++o) {
                        const T* gy_plane = &gy.data[(b * Co + o) * Ho * Wo];
                        T acc = 0;
                        for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gy_plane[i];
                        gb[o] += acc;
                    }
            }
        });
}

// y[b,k] = sum_f x[b,f]*w[k,f] + bias[k]
template <class T>
NodeId linear(TapeT<T>& tape, NodeId x_id, NodeId w_id, NodeId bias_id) {
    const auto& x = tape.value(x_id);
    const auto& w = tape.value(w_id);
    if (x.rank() != 2 || w.rank() != 2) throw ShapeError("linear: expected rank-2 input and weight");
    const std::size_t B = x.shape[0], F = x.shape[1], K = w.shape[0];
    if (w.shape[1] != F) throw ShapeError("linear: weight inner extent mismatch");
    if (tape.value(bias_id).shape != Shape{K}) throw ShapeError("linear: bias extent mismatch");
    const auto& bias = tape.value(bias_id);
    TensorT<T> out(Shape{B, K});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < K; ++k) {
            T acc = bias[k];
            for (std::size_t f = 0; f < F; ++f) acc += x.at2(b, f) * w.at2(k, f);
            out.at2(b, k) = acc;
        }
    check_finite(out, "linear");
    return tape.emit(std::move(out), OpKind::Linear,
                     [x_id, w_id, bias_id, B, F, K](TapeT<T>& t, NodeId out_id) {
                         const auto& gy = t.grad(out_id);
                         const auto& x = t.value(x_id);
                         const auto& w = t.value(w_id);
                         auto& gx = t.grad(x_id);
                         auto& gw = t.grad(w_id);
                         auto& gb = t.grad(bias_id);
                         for (std::size_t b = 0; b < B; ++b)
                             for (std::size_t k = 0; k < K; ++k) {
                                 const T g = gy.at2(b, k);
                                 gb[k] += g;
                                 for (std::size_t f = 0; f < F; ++f) {
                                     gx.at2(b, f) += g * w.at2(k, f);
                                     gw.at2(k, f) += g * x.at2(b, f);
                                 }
                             }
                     });
}

// Mean softmax cross-entropy over the batch; returns a [1] tensor.
template <class T>
NodeId softmax_cross_entropy(TapeT<T>& tape, NodeId logits_id, const std::vector<int>& labels) {
    const auto& logits = tape.value(logits_id);
    if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: expected rank-2 logits");
    const std::size_t B = logits.shape[0], K = logits.shape[1];
    if (labels.size() != B) throw ShapeError("softmax_cross_entropy: label count != batch");
    for (int lab : labels) {
        if (lab < 0 || static_cast<std::size_t>(lab) >= K) {
            throw ConfigError("softmax_cross_entropy: label out of range");
        }
    }
    T loss = 0;
    for (std::size_t b = 0; b < B; ++b) {
        T mx = logits.at2(b, 0);
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits.at2(b, k));
        T sum = 0;
        for (std::size_t k = 0; k < K; ++k) sum += std::exp(logits.at2(b, k) - mx);
        const T lse = std::log(sum) + mx;
        loss += lse - logits.at2(b, static_cast<std::size_t>(labels[b]));
    }
    loss /= static_cast<T>(B);
    TensorT<T> out(Shape{1});
    out[0] = loss;
    check_finite(out, "softmax_cross_entropy");
    return tape.emit(std::move(out), OpKind::SoftmaxCrossEntropy,
                     [logits_id, labels, B, K](TapeT<T>& t, NodeId out_id) {
                         const T g = t.grad(out_id)[0] / static_cast<T>(B);
                         const auto& logits = t.value(logits_id);
                         auto& gl = t.grad(logits_id);
                         for (std::size_t b = 0; b < B; ++b) {
                             T mx = logits.at2(b, 0);
                             for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, logits.at2(b, k));
                             T sum = 0;
                             for (std::size_t k = 0; k < K; ++k)
                                 sum += std::exp(logits.at2(b, k) - mx);
                             for (std::size_t k = 0; k < K; ++k) {
                                 const T p = std::exp(logits.at2(b, k) - mx) / sum;
                                 const T onehot =
                                     (static_cast<std::size_t>(labels[b]) == k) ? T(1) : T(0);
                                 gl.at2(b, k) += g * (p - onehot);
                             }
                         }
                     });
}

}  // namespace scsa::ops
