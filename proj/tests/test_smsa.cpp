#include <doctest.h>

#include "oracles.hpp"
#include "scsa/scsa.hpp"
#include "scsa/smsa.hpp"

using namespace scsa;

namespace {

oracle::SmsaOracleParams to_oracle(const SmsaParams& p) {
    oracle::SmsaOracleParams o;
    for (const Parameter* k : p.conv) o.kernels_h.push_back(k->value);
    for (const Parameter* k : p.conv_w) o.kernels_w.push_back(k->value);
    o.gamma_h = p.norm_h_gamma->value;
    o.beta_h = p.norm_h_beta->value;
    o.gamma_w = p.norm_w_gamma->value;
    o.beta_w = p.norm_w_beta->value;
    return o;
}

Tensor run_smsa(const Tensor& x, SmsaParams& params, const SmsaConfig& cfg) {
    Tape tape;
    NodeId out = smsa_forward(tape, tape.input(x), params, cfg);
    return tape.value(out);
}

}  // namespace

TEST_SUITE("smsa") {
    TEST_CASE("constant input with identity kernels gives 0.5 maps and 0.25x output") {
        SmsaConfig cfg;
        ParamStore store;
        Rng rng(1);
        auto params = SmsaParams::create(store, "smsa.", 8, cfg, rng, KernelInit::Identity);
        const Tensor x = Tensor::full(Shape{2, 8, 6, 5}, 0.7);
        auto [map_h, map_w] = smsa_attention_maps(x, params, cfg);
        for (double v : map_h.data) CHECK(std::abs(v - 0.5) < 1e-10);
        for (double v : map_w.data) CHECK(std::abs(v - 0.5) < 1e-10);
        const Tensor out = run_smsa(x, params, cfg);
        for (std::size_t i = 0; i < out.numel(); ++i)
            CHECK(std::abs(out.data[i] - 0.25 * x.data[i]) < 1e-10);
    }

    TEST_CASE("forward matches the composition oracle on several shapes") {
        SmsaConfig cfg;
        const Shape shapes[] = {Shape{1, 8, 6, 5}, Shape{2, 8, 4, 9}, Shape{2, 16, 7, 7}};
        std::uint64_t seed = 100;
        for (const Shape& s : shapes) {
            ParamStore store;
            Rng rng(seed++);
            auto params = SmsaParams::create(store, "smsa.", s[1], cfg, rng);
            const Tensor x = Tensor::rand_uniform(s, rng, -2.0, 2.0);
            const Tensor got = run_smsa(x, params, cfg);
            const Tensor want = oracle::smsa_forward(x, to_oracle(params), cfg);
            CHECK(max_abs_diff(got, want) < 1e-10);
        }
    }

    TEST_CASE("oracle agreement holds for the BN, unshared and pre-conv variants") {
        std::uint64_t seed = 200;
        for (auto mutate : {+[](SmsaConfig& c) { c.norm = NormKind::BatchNorm; },
                            +[](SmsaConfig& c) { c.conv_sharing = ConvSharing::Unshared; },
                            +[](SmsaConfig& c) { c.gn_position = GnPosition::PreConv; }}) {
            SmsaConfig cfg;
            mutate(cfg);
            ParamStore store;
            Rng rng(seed++);
            auto params = SmsaParams::create(store, "smsa.", 8, cfg, rng);
            const Tensor x = Tensor::rand_uniform(Shape{2, 8, 5, 6}, rng, -1.5, 1.5);
            const Tensor got = run_smsa(x, params, cfg);
            const Tensor want = oracle::smsa_forward(x, to_oracle(params), cfg);
            CHECK(max_abs_diff(got, want) < 1e-10);
        }
    }

    TEST_CASE("K=1 with kernel 3 equals the g1-3 ablation path") {
        SmsaConfig manual;
        manual.k_groups = 1;
        manual.kernel_sizes = {3};
        const ScsaConfig* preset = find_preset("g1-3");
        REQUIRE(preset != nullptr);

        ParamStore store_a, store_b;
        Rng rng_a(7), rng_b(7);
        auto pa = SmsaParams::create(store_a, "smsa.", 8, manual, rng_a);
        auto pb = SmsaParams::create(store_b, "smsa.", 8, preset->smsa, rng_b);
        Rng rng_x(8);
        const Tensor x = Tensor::rand_uniform(Shape{1, 8, 5, 5}, rng_x);
        CHECK(max_abs_diff(run_smsa(x, pa, manual), run_smsa(x, pb, preset->smsa)) == 0.0);
    }

    TEST_CASE("shape is preserved for every configuration") {
        std::uint64_t seed = 300;
        for (auto mutate :
             {+[](SmsaConfig&) {}, +[](SmsaConfig& c) { c.norm = NormKind::BatchNorm; },
              +[](SmsaConfig& c) { c.conv_sharing = ConvSharing::Unshared; },
              +[](SmsaConfig& c) { c.gn_position = GnPosition::PreConv; },
              +[](SmsaConfig& c) {
                  c.k_groups = 2;
                  c.kernel_sizes = {3, 7};
              }}) {
            SmsaConfig cfg;
            mutate(cfg);
            ParamStore store;
            Rng rng(seed++);
            auto params = SmsaParams::create(store, "smsa.", 8, cfg, rng);
            const Shape s{2, 8, 5, 9};
            const Tensor x = Tensor::rand_uniform(s, rng);
            CHECK(run_smsa(x, params, cfg).shape == s);
        }
    }

    TEST_CASE("shared kernels accumulate both branch gradients") {
        // Shared-config kernel gradients must equal the sum of the two
        // branch gradients of an unshared config initialized identically.
        SmsaConfig shared_cfg;
        SmsaConfig unshared_cfg;
        unshared_cfg.conv_sharing = ConvSharing::Unshared;

        ParamStore store_s, store_u;
        Rng rng_s(11), rng_u(11);
        auto ps = SmsaParams::create(store_s, "smsa.", 8, shared_cfg, rng_s);
        auto pu = SmsaParams::create(store_u, "smsa.", 8, unshared_cfg, rng_u);
        for (std::size_t i = 0; i < ps.conv.size(); ++i) {
            pu.conv[i]->value = ps.conv[i]->value;  // H branch copies
            pu.conv_w[i]->value = ps.conv[i]->value;  // W branch copies
        }
        Rng rng_x(12);
        const Tensor x = Tensor::rand_uniform(Shape{2, 8, 6, 5}, rng_x);

        auto run_backward = [&x](SmsaParams& p, const SmsaConfig& cfg, ParamStore& store) {
            store.zero_grads();
            Tape tape;
            NodeId out = smsa_forward(tape, tape.input(x), p, cfg);
            tape.backward(out, Tensor::full(tape.value(out).shape, 1.0));
        };
        run_backward(ps, shared_cfg, store_s);
        run_backward(pu, unshared_cfg, store_u);

        for (std::size_t i = 0; i < ps.conv.size(); ++i) {
            const Tensor& gs = ps.conv[i]->grad;
            const Tensor& gh = pu.conv[i]->grad;
            const Tensor& gw = pu.conv_w[i]->grad;
            for (std::size_t j = 0; j < gs.numel(); ++j)
                CHECK(std::abs(gs.data[j] - (gh.data[j] + gw.data[j])) < 1e-10);
        }
    }

    TEST_CASE("sub-feature normalization is local to its group") {
        SmsaConfig cfg;  // gamma=1, beta=0 at init, so maps reflect pre-affine values
        ParamStore store;
        Rng rng(13);
        auto params = SmsaParams::create(store, "smsa.", 8, cfg, rng);
        Rng rng_x(14);
        Tensor x = Tensor::rand_uniform(Shape{1, 8, 6, 5}, rng_x);
        auto [h1, w1] = smsa_attention_maps(x, params, cfg);

        // perturb only channels of sub-feature 2 (channels 4,5)
        Tensor x2 = x;
        for (std::size_t h = 0; h < 6; ++h)
            for (std::size_t w = 0; w < 5; ++w) {
                x2.at4(0, 4, h, w) += 3.0;
                x2.at4(0, 5, h, w) -= 1.7;
            }
        auto [h2, w2] = smsa_attention_maps(x2, params, cfg);
        for (std::size_t c = 0; c < 8; ++c) {
            if (c == 4 || c == 5) continue;
            for (std::size_t i = 0; i < 5; ++i)
                CHECK(std::abs(h1.at3(0, c, i) - h2.at3(0, c, i)) < 1e-12);
            for (std::size_t i = 0; i < 6; ++i)
                CHECK(std::abs(w1.at3(0, c, i) - w2.at3(0, c, i)) < 1e-12);
        }
    }

    TEST_CASE("attention maps stay in (0,1) and the gate shrinks the input") {
        SmsaConfig cfg;
        ParamStore store;
        Rng rng(15);
        auto params = SmsaParams::create(store, "smsa.", 8, cfg, rng);
        const Tensor x = Tensor::rand_uniform(Shape{2, 8, 7, 4}, rng, -3.0, 3.0);
        auto [mh, mw] = smsa_attention_maps(x, params, cfg);
        for (double v : mh.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        for (double v : mw.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        const Tensor out = run_smsa(x, params, cfg);
        for (std::size_t i = 0; i < out.numel(); ++i)
            CHECK(std::abs(out.data[i]) <= std::abs(x.data[i]));
    }

    TEST_CASE("G2(3,7) maps differ from G1(3) maps on random input") {
        SmsaConfig g13, g237;
        g13.k_groups = 1;
        g13.kernel_sizes = {3};
        g237.k_groups = 2;
        g237.kernel_sizes = {3, 7};
        ParamStore sa, sb;
        Rng ra(16), rb(16);
        auto pa = SmsaParams::create(sa, "smsa.", 8, g13, ra);
        auto pb = SmsaParams::create(sb, "smsa.", 8, g237, rb);
        Rng rx(17);
        const Tensor x = Tensor::rand_uniform(Shape{1, 8, 6, 6}, rx);
        auto [ha, wa] = smsa_attention_maps(x, pa, g13);
        auto [hb, wb] = smsa_attention_maps(x, pb, g237);
        CHECK(max_abs_diff(ha, hb) > 1e-6);
    }

    TEST_CASE("configuration errors") {
        SmsaConfig cfg;
        CHECK_THROWS_AS(cfg.validate(6), ConfigError);  // 6 % 4 != 0
        SmsaConfig bad_len;
        bad_len.kernel_sizes = {3, 5};
        CHECK_THROWS_AS(bad_len.validate(8), ConfigError);
        SmsaConfig even;
        even.kernel_sizes = {3, 5, 7, 8};
        CHECK_THROWS_AS(even.validate(8), ConfigError);
    }
}
