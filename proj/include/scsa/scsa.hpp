#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scsa/pcsa.hpp"
#include "scsa/smsa.hpp"

// Serial composition of the two attention sub-modules, the ablation preset
// registry, and the analytic complexity model.

namespace scsa {

enum class Ordering { SmsaFirst, PcsaFirst };

struct ScsaConfig {
    SmsaConfig smsa;
    PcsaConfig pcsa;
    Ordering ordering = Ordering::SmsaFirst;
    bool enable_smsa = true;
    bool enable_pcsa = true;

    void validate(std::size_t channels) const {
        if (!enable_smsa && !enable_pcsa) {
            throw ConfigError("scsa: at least one of the sub-modules must be enabled");
        }
        if (enable_smsa) smsa.validate(channels);
        if (enable_pcsa) pcsa.validate(channels);
    }
};

template <class T>
struct ScsaParamsT {
    SmsaParamsT<T> smsa;
    PcsaParamsT<T> pcsa;

    static ScsaParamsT create(ParamStoreT<T>& store, const std::string& prefix,
                              std::size_t channels, const ScsaConfig& cfg, Rng& rng,
                              KernelInit init = KernelInit::FanInUniform) {
        cfg.validate(channels);
        ScsaParamsT p;
        if (cfg.enable_smsa) {
            p.smsa = SmsaParamsT<T>::create(store, prefix + "smsa.", channels, cfg.smsa, rng, init);
        }
        if (cfg.enable_pcsa) {
            p.pcsa = PcsaParamsT<T>::create(store, prefix + "pcsa.", channels);
        }
        return p;
    }
};

using ScsaParams = ScsaParamsT<double>;

template <class T>
NodeId scsa_forward(TapeT<T>& tape, NodeId x, ScsaParamsT<T>& params, const ScsaConfig& cfg,
                    ops::BatchNormMode bn_mode = ops::BatchNormMode::Train) {
    cfg.validate(tape.value(x).shape[1]);
    NodeId id = x;
    auto apply_smsa = [&] { id = smsa_forward(tape, id, params.smsa, cfg.smsa, bn_mode); };
    auto apply_pcsa = [&] { id = pcsa_forward(tape, id, params.pcsa, cfg.pcsa); };
    if (cfg.ordering == Ordering::SmsaFirst) {
        if (cfg.enable_smsa) apply_smsa();
        if (cfg.enable_pcsa) apply_pcsa();
    } else {
        if (cfg.enable_pcsa) apply_pcsa();
        if (cfg.enable_smsa) apply_smsa();
    }
    return id;
}

// ---------------------------------------------------------------------------
// complexity model

// Multiply-accumulate counts per pipeline stage for one sample. Counting
// conventions (documented here because the source formula drops constants):
//  - decouple_terms charges the axis poolings at their output sizes, HC+WC.
//  - conv_terms is loop-exact: sum_i k_i*(H+W)*(C/K).
//  - gating_term charges one HWC per elementwise gating multiply actually
//    performed: the spatial gate applies two factor maps (2*HWC), the
//    channel gate one (HWC).
//  - compression_term is the pooling window sum (every input element read
//    once, = P^2*H'*W'*C for partition windows) plus the H'W'C projection
//    unit.
//  - attention_terms is H'W'C + the C^2*N bilinear unit (per-head blocks
//    shrink it by the head count).
// Activation and normalization flops are below the model's epsilon.
struct FlopBreakdown {
    std::uint64_t decouple_terms = 0;
    std::uint64_t conv_terms = 0;
    std::uint64_t gating_term = 0;
    std::uint64_t compression_term = 0;
    std::uint64_t attention_terms = 0;
    std::uint64_t total = 0;
};

// The compression pooling can be read two ways; both are exposed. Adaptive
// (default) fixes the output grid at pooled_h x pooled_w; Strided applies a
// pooled_h x pooled_w kernel with matching stride, so the grid grows with
// the input.
enum class PoolInterp { Adaptive, Strided };

FlopBreakdown flop_estimate(std::size_t C, std::size_t H, std::size_t W, const ScsaConfig& cfg,
                            PoolInterp interp = PoolInterp::Adaptive);

// ---------------------------------------------------------------------------
// ablation presets

struct AblationPreset {
    std::string name;
    ScsaConfig config;
};

// The thirteen design-strategy variants, addressable by stable names.
const std::vector<AblationPreset>& ablation_registry();

const ScsaConfig* find_preset(const std::string& name);

}  // namespace scsa
