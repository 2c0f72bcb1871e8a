#include "scsa/backbone.hpp"

#include <cmath>

#include "scsa/ops.hpp"

namespace scsa {

TinyBackbone::Conv TinyBackbone::make_conv(const std::string& name, std::size_t cin,
                                           std::size_t cout, std::size_t k, std::size_t stride,
                                           std::size_t pad, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
    Tensor w(Shape{cout, cin, k, k});
    for (auto& v : w.data) v = rng.uniform(-bound, bound);
    Conv conv;
    conv.w = store_.add(name + ".weight", std::move(w));
    conv.b = store_.add(name + ".bias", Tensor(Shape{cout}));
    conv.stride = stride;
    conv.pad = pad;
    return conv;
}

TinyBackbone::Norm TinyBackbone::make_norm(const std::string& name, std::size_t channels,
                                           double gamma_init) {
    Norm n;
    n.gamma = store_.add(name + ".gamma", Tensor::full(Shape{channels}, gamma_init));
    n.beta = store_.add(name + ".beta", Tensor(Shape{channels}));
    n.groups = channels % 4 == 0 ? 4 : 1;
    return n;
}

NodeId TinyBackbone::apply_conv(Tape& tape, const Conv& conv, NodeId x) {
    return ops::conv2d(tape, x, tape.watch(*conv.w), tape.watch(*conv.b), conv.stride, conv.pad);
}

NodeId TinyBackbone::apply_norm(Tape& tape, const Norm& norm, NodeId x) {
    // group norm runs on [B,C,L]; flatten the plane and restore it
    const Shape plane = tape.value(x).shape;
    const std::size_t B = plane[0], C = plane[1], H = plane[2], W = plane[3];
    NodeId flat = ops::reshape(tape, x, Shape{B, C, H * W});
    NodeId normed = ops::group_norm(tape, flat, norm.groups, tape.watch(*norm.gamma),
                                    tape.watch(*norm.beta), 1e-5);
    return ops::reshape(tape, normed, plane);
}

TinyBackbone::TinyBackbone(const BackboneSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(seed);
    stem_ = make_conv("stem.conv", spec_.in_channels, spec_.stem_channels, 3, 2, 1, rng);
    stem_norm_ = make_norm("stem.gn", spec_.stem_channels);

    std::size_t cin = spec_.stem_channels;
    for (std::size_t si = 0; si < spec_.stage_channels.size(); ++si) {
        const std::size_t cout = spec_.stage_channels[si];
        std::vector<Block> blocks;
        for (std::size_t bi = 0; bi < spec_.blocks_per_stage; ++bi) {
            const std::string prefix =
                "stage" + std::to_string(si) + ".block" + std::to_string(bi) + ".";
            const std::size_t stride = (si > 0 && bi == 0) ? 2 : 1;
            Block blk;
            blk.conv1 = make_conv(prefix + "conv1", cin, cout, 3, stride, 1, rng);
            blk.norm1 = make_norm(prefix + "gn1", cout);
            blk.conv2 = make_conv(prefix + "conv2", cout, cout, 3, 1, 1, rng);
            // zero-init gamma: blocks start as identity and open up as they
            // learn, which keeps the residual stack stable at the hot lr
            blk.norm2 = make_norm(prefix + "gn2", cout, 0.0);
            if (stride != 1 || cin != cout) {
                blk.down = make_conv(prefix + "down", cin, cout, 1, stride, 0, rng);
            }
            if (spec_.attention == AttentionKind::Scsa) {
                blk.attn = ScsaParams::create(store_, prefix + "scsa.", cout, spec_.scsa, rng);
            }
            blocks.push_back(std::move(blk));
            cin = cout;
        }
        stages_.push_back(std::move(blocks));
    }

    const std::size_t feat = spec_.stage_channels.back();
    const double bound = 1.0 / std::sqrt(static_cast<double>(feat));
    Tensor hw(Shape{spec_.num_classes, feat});
    for (auto& v : hw.data) v = rng.uniform(-bound, bound);
    head_w_ = store_.add("head.fc.weight", std::move(hw));
    head_b_ = store_.add("head.fc.bias", Tensor(Shape{spec_.num_classes}));
}

NodeId TinyBackbone::forward(Tape& tape, NodeId x) {
    NodeId id = apply_conv(tape, stem_, x);
    id = apply_norm(tape, stem_norm_, id);
    id = ops::relu(tape, id);
    for (auto& stage : stages_) {
        for (auto& blk : stage) {
            NodeId shortcut = blk.down ? apply_conv(tape, *blk.down, id) : id;
            NodeId y = apply_conv(tape, blk.conv1, id);
            y = apply_norm(tape, blk.norm1, y);
            y = ops::relu(tape, y);
            y = apply_conv(tape, blk.conv2, y);
            y = apply_norm(tape, blk.norm2, y);
            if (blk.attn) {
                y = scsa_forward(tape, y, *blk.attn, spec_.scsa);
            }
            id = ops::relu(tape, ops::add(tape, y, shortcut));
        }
    }
    const Shape s = tape.value(id).shape;
    NodeId pooled = ops::adaptive_avg_pool2d(tape, id, 1, 1);
    NodeId flat = ops::reshape(tape, pooled, Shape{s[0], s[1]});
    return ops::linear(tape, flat, tape.watch(*head_w_), tape.watch(*head_b_));
}

}  // namespace scsa
