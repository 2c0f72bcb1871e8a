#include "scsa/tape.hpp"

namespace scsa {

const char* op_kind_name(OpKind kind) {
    switch (kind) {
        case OpKind::AvgPoolOverHeight: return "avg_pool_over_height";
        case OpKind::AvgPoolOverWidth: return "avg_pool_over_width";
        case OpKind::ChannelSlice: return "channel_slice";
        case OpKind::ConcatChannels: return "concat_channels";
        case OpKind::DwConv1d: return "dwconv1d";
        case OpKind::GroupNorm: return "group_norm";
        case OpKind::BatchNorm1d: return "batch_norm1d";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::SoftmaxLastDim: return "softmax_lastdim";
        case OpKind::AdaptiveAvgPool2d: return "adaptive_avg_pool2d";
        case OpKind::PerChannelAffine: return "per_channel_affine";
        case OpKind::BatchedMatmul: return "batched_matmul";
        case OpKind::TransposeLast2: return "transpose_last2";
        case OpKind::BroadcastMul3: return "broadcast_mul3";
        case OpKind::ChannelShuffle: return "channel_shuffle";
        case OpKind::MeanLastDim: return "mean_lastdim";
        case OpKind::Scale: return "scale";
        case OpKind::MulChannelGate: return "mul_channel_gate";
        case OpKind::Reshape: return "reshape";
        case OpKind::Conv2d: return "conv2d";
        case OpKind::Relu: return "relu";
        case OpKind::Add: return "add";
        case OpKind::Linear: return "linear";
        case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
        case OpKind::Count_: break;
    }
    return "unknown";
}

}  // namespace scsa
