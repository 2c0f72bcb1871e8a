#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "scsa/scsa.hpp"

namespace scsa {

enum class AttentionKind { None, Scsa };

struct BackboneSpec {
    std::size_t in_channels = 3;
    std::size_t stem_channels = 16;
    std::vector<std::size_t> stage_channels = {16, 32};
    std::size_t blocks_per_stage = 2;
    std::size_t num_classes = 4;
    AttentionKind attention = AttentionKind::None;
    ScsaConfig scsa;

    void validate() const {
        if (stem_channels == 0 || stage_channels.empty() || blocks_per_stage == 0) {
            throw ConfigError("backbone: empty stage layout");
        }
        if (num_classes < 2) throw ConfigError("backbone: need at least two classes");
        if (attention == AttentionKind::Scsa) {
            for (std::size_t c : stage_channels) scsa.validate(c);
        }
    }
};

// Small residual classifier: strided stem, two residual stages, global
// pooling and a linear head. The attention module sits after each block's
// second convolution, just before the residual addition.
class TinyBackbone {
  public:
    TinyBackbone(const BackboneSpec& spec, std::uint64_t seed);

    // x: [B, in_channels, H, W] already on the tape; returns logits [B, classes]
    NodeId forward(Tape& tape, NodeId x);

    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    const BackboneSpec& spec() const { return spec_; }

  private:
    struct Conv {
        Parameter* w = nullptr;
        Parameter* b = nullptr;
        std::size_t stride = 1;
        std::size_t pad = 1;
    };
    struct Norm {
        Parameter* gamma = nullptr;
        Parameter* beta = nullptr;
        std::size_t groups = 4;
    };
    struct Block {
        Conv conv1, conv2;
        Norm norm1, norm2;
        std::optional<Conv> down;  // 1x1 projection when shape changes
        std::optional<ScsaParams> attn;
    };

    Conv make_conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
                   std::size_t stride, std::size_t pad, Rng& rng);
    Norm make_norm(const std::string& name, std::size_t channels, double gamma_init = 1.0);
    NodeId apply_conv(Tape& tape, const Conv& conv, NodeId x);
    NodeId apply_norm(Tape& tape, const Norm& norm, NodeId x);

    BackboneSpec spec_;
    ParamStore store_;
    Conv stem_;
    Norm stem_norm_;
    std::vector<std::vector<Block>> stages_;
    Parameter* head_w_ = nullptr;
    Parameter* head_b_ = nullptr;
};

}  // namespace scsa
