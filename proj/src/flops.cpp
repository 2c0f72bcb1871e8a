#include "scsa/scsa.hpp"

namespace scsa {

FlopBreakdown flop_estimate(std::size_t C, std::size_t H, std::size_t W, const ScsaConfig& cfg,
                            PoolInterp interp) {
    if (C == 0 || H == 0 || W == 0) throw ConfigError("flop_estimate: extents must be positive");
    const std::uint64_t c = C, h = H, w = W;
    FlopBreakdown fb;
    if (cfg.enable_smsa) {
        fb.decouple_terms = h * c + w * c;
        const std::uint64_t per_group = c / cfg.smsa.k_groups;
        for (std::size_t k : cfg.smsa.kernel_sizes) {
            fb.conv_terms += static_cast<std::uint64_t>(k) * (h + w) * per_group;
        }
        fb.gating_term += 2 * h * w * c;  // two broadcast factor maps
    }
    if (cfg.enable_pcsa) {
        std::uint64_t ph = h, pw = w;
        if (cfg.pcsa.progressive_compression) {
            if (interp == PoolInterp::Adaptive) {
                ph = std::min<std::uint64_t>(cfg.pcsa.pooled_h, h);
                pw = std::min<std::uint64_t>(cfg.pcsa.pooled_w, w);
            } else {
                ph = std::max<std::uint64_t>(1, h / cfg.pcsa.pooled_h);
                pw = std::max<std::uint64_t>(1, w / cfg.pcsa.pooled_w);
            }
            // every input element enters exactly one pooling window
            fb.compression_term = h * w * c;
        }
        const std::uint64_t n = ph * pw;
        fb.compression_term += n * c;  // Q/K/V projection unit
        fb.attention_terms = n * c + n * c * c / cfg.pcsa.heads;
        fb.gating_term += h * w * c;  // channel gate multiply
    }
    fb.total = fb.decouple_terms + fb.conv_terms + fb.gating_term + fb.compression_term +
               fb.attention_terms;
    return fb;
}

const std::vector<AblationPreset>& ablation_registry() {
    static const std::vector<AblationPreset> presets = [] {
        std::vector<AblationPreset> out;
        auto push = [&out](const std::string& name, auto mutate) {
            ScsaConfig cfg;
            mutate(cfg);
            out.push_back({name, cfg});
        };
        push("baseline", [](ScsaConfig&) {});
        push("wo-smsa", [](ScsaConfig& c) { c.enable_smsa = false; });
        push("wo-pcsa", [](ScsaConfig& c) { c.enable_pcsa = false; });
        push("wo-pc", [](ScsaConfig& c) { c.pcsa.progressive_compression = false; });
        push("multi-head-shuffle", [](ScsaConfig& c) {
            c.pcsa.heads = 2;
            c.pcsa.shuffle = true;
        });
        push("pcsa-prior", [](ScsaConfig& c) { c.ordering = Ordering::PcsaFirst; });
        push("gn-prior", [](ScsaConfig& c) { c.smsa.gn_position = GnPosition::PreConv; });
        push("gn-to-bn", [](ScsaConfig& c) { c.smsa.norm = NormKind::BatchNorm; });
        push("unshared", [](ScsaConfig& c) { c.smsa.conv_sharing = ConvSharing::Unshared; });
        push("scale-sqrt-hw", [](ScsaConfig& c) { c.pcsa.scale_mode = ScaleMode::SqrtHW; });
        push("g1-3", [](ScsaConfig& c) {
            c.smsa.k_groups = 1;
            c.smsa.kernel_sizes = {3};
        });
        push("g1-7", [](ScsaConfig& c) {
            c.smsa.k_groups = 1;
            c.smsa.kernel_sizes = {7};
        });
        push("g2-3-7", [](ScsaConfig& c) {
            c.smsa.k_groups = 2;
            c.smsa.kernel_sizes = {3, 7};
        });
        return out;
    }();
    return presets;
}

const ScsaConfig* find_preset(const std::string& name) {
    for (const auto& p : ablation_registry()) {
        if (p.name == name) return &p.config;
    }
    return nullptr;
}

}  // namespace scsa
