#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "scsa/backbone.hpp"
#include "scsa/bench.hpp"
#include "scsa/dataset.hpp"
#include "scsa/io.hpp"
#include "scsa/train.hpp"

using namespace scsa;

namespace {

// Scale-matched linear filter bank: least-squares amplitude of a full-image
// Gaussian template at its best center, weighted by cubed shape agreement.
// Test-only oracle, independent of the network.
int matched_filter_classify(const Dataset& ds, std::size_t idx, const std::vector<double>& scales,
                            std::size_t H, std::size_t W) {
    const std::size_t C = ds.images.shape[1];
    const double* img = &ds.images.data[idx * C * H * W];  // channel 0
    double p2 = 0;
    for (std::size_t i = 0; i < H * W; ++i) p2 += img[i] * img[i];
    double best_score = -1e300;
    int best_k = -1;
    for (std::size_t k = 0; k < scales.size(); ++k) {
        const double sigma = scales[k];
        double resp = -1e300;
        for (std::size_t cy = 0; cy < H; ++cy)
            for (std::size_t cx = 0; cx < W; ++cx) {
                double dot = 0, k2 = 0;
                for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t x = 0; x < W; ++x) {
                        const double dy = double(y) - double(cy);
                        const double dx = double(x) - double(cx);
                        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                        dot += g * img[y * W + x];
                        k2 += g * g;
                    }
                if (dot <= 0) continue;
                const double amp = dot / k2;
                const double cs = dot / std::sqrt(k2 * p2);
                resp = std::max(resp, amp * cs * cs * cs);
            }
        if (resp > best_score) {
            best_score = resp;
            best_k = static_cast<int>(k);
        }
    }
    return best_k;
}

SyntheticDatasetSpec small_spec(std::uint64_t seed) {
    SyntheticDatasetSpec spec;
    spec.seed = seed;
    spec.samples_per_class = 10;
    return spec;
}

}  // namespace

TEST_SUITE("harness.dataset") {
    TEST_CASE("identical seeds produce identical datasets") {
        auto [tr1, va1] = generate_dataset(small_spec(5));
        auto [tr2, va2] = generate_dataset(small_spec(5));
        CHECK(dataset_checksum(tr1) == dataset_checksum(tr2));
        CHECK(dataset_checksum(va1) == dataset_checksum(va2));
        auto [tr3, va3] = generate_dataset(small_spec(6));
        CHECK(dataset_checksum(tr1) != dataset_checksum(tr3));
    }

    TEST_CASE("classes are exactly balanced in both splits") {
        auto [tr, va] = generate_dataset(small_spec(9));
        std::vector<int> tc(4, 0), vc(4, 0);
        for (int lab : tr.labels) ++tc[lab];
        for (int lab : va.labels) ++vc[lab];
        for (int k = 0; k < 4; ++k) {
            CHECK(tc[k] == 8);
            CHECK(vc[k] == 2);
        }
    }

    TEST_CASE("oversized blob radius is rejected") {
        SyntheticDatasetSpec spec;
        spec.blob_scales = {1.0, 2.0, 4.0, 40.0};
        CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
    }

    TEST_CASE("noise-free data with a large amplitude gap is linearly separable by scale") {
        SyntheticDatasetSpec spec;
        spec.seed = 123;
        spec.samples_per_class = 15;
        spec.noise_sigma = 0.0;
        spec.distractor_amplitude = 0.1;
        auto [tr, va] = generate_dataset(spec);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < va.size(); ++i) {
            if (matched_filter_classify(va, i, spec.blob_scales, spec.height, spec.width) ==
                va.labels[i]) {
                ++correct;
            }
        }
        CHECK(correct == va.size());  // 100%
    }
}

TEST_SUITE("harness.train") {
    TEST_CASE("zero learning rate keeps the loss constant across epochs") {
        auto [tr, va] = generate_dataset(small_spec(11));
        BackboneSpec bspec;
        TinyBackbone net(bspec, 3);
        TrainSpec tspec;
        tspec.lr = 0.0;
        tspec.epochs = 3;
        tspec.batch_size = 8;
        auto log = train(net, tr, va, tspec);
        REQUIRE(log.epochs.size() == 3);
        // batch order changes, parameters do not; epoch means agree to rounding
        CHECK(std::abs(log.epochs[1].train_loss - log.epochs[0].train_loss) < 1e-12);
        CHECK(std::abs(log.epochs[2].train_loss - log.epochs[0].train_loss) < 1e-12);
    }

    TEST_CASE("training is bit-reproducible for a fixed seed") {
        auto run = [] {
            auto [tr, va] = generate_dataset(small_spec(13));
            BackboneSpec bspec;
            TinyBackbone net(bspec, 17);
            TrainSpec tspec;
            tspec.epochs = 2;
            tspec.batch_size = 8;
            tspec.seed = 17;
            auto log = train(net, tr, va, tspec);
            std::ostringstream os;
            write_train_log(os, log);
            std::vector<double> final_params;
            for (const Parameter* p : net.store().ordered()) {
                final_params.insert(final_params.end(), p->value.data.begin(),
                                    p->value.data.end());
            }
            return std::pair{os.str(), final_params};
        };
        auto a = run();
        auto b = run();
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);  // bit-identical parameters
    }

    TEST_CASE("short run reduces the loss") {
        auto [tr, va] = generate_dataset(small_spec(19));
        BackboneSpec bspec;
        TinyBackbone net(bspec, 5);
        TrainSpec tspec;
        tspec.epochs = 5;
        tspec.batch_size = 8;
        auto log = train(net, tr, va, tspec);
        REQUIRE(log.epochs.size() == 5);
        CHECK_FALSE(log.diverged);
        CHECK(log.epochs.back().train_loss < log.epochs.front().train_loss);
    }

    TEST_CASE("attention-enabled backbone builds and trains a step") {
        auto [tr, va] = generate_dataset(small_spec(23));
        BackboneSpec bspec;
        bspec.attention = AttentionKind::Scsa;
        TinyBackbone net(bspec, 7);
        // every block carries its own attention parameters
        CHECK(net.store().find("stage0.block0.scsa.smsa.conv.0.weight") != nullptr);
        CHECK(net.store().find("stage1.block1.scsa.pcsa.v.bias") != nullptr);
        TrainSpec tspec;
        tspec.epochs = 1;
        tspec.batch_size = 8;
        auto log = train(net, tr, va, tspec);
        CHECK_FALSE(log.diverged);
        CHECK(log.epochs.size() == 1);
    }
}

TEST_SUITE("harness.bench") {
    TEST_CASE("sweep emits one CSV row per point") {
        BenchOptions opts;
        opts.reps = 5;
        opts.warmups = 1;
        auto points = bench_sweep({8}, {7, 9, 14}, {"baseline"}, opts);
        REQUIRE(points.size() == 3);
        std::ostringstream os;
        write_bench_csv(os, points);
        std::size_t lines = 0;
        for (char ch : os.str()) lines += ch == '\n' ? 1 : 0;
        CHECK(lines == 4);  // header + 3 rows
        CHECK(os.str().rfind("preset,C,H,W,median_ms,flops", 0) == 0);
        for (const auto& p : points) {
            CHECK(p.median_ms > 0.0);
            CHECK(p.flops > 0);
        }
    }

    TEST_CASE("single-precision path runs") {
        BenchOptions opts;
        opts.reps = 5;
        opts.warmups = 1;
        opts.use_f32 = true;
        auto points = bench_sweep({8}, {10}, {"g2-3-7"}, opts);
        REQUIRE(points.size() == 1);
        CHECK(points[0].median_ms > 0.0);
    }

    TEST_CASE("dropping the channel module is strictly cheaper at every point") {
        const ScsaConfig base = *find_preset("baseline");
        const ScsaConfig wo = *find_preset("wo-pcsa");
        for (std::size_t hw : {14u, 28u, 56u}) {
            CHECK(flop_estimate(16, hw, hw, wo).total < flop_estimate(16, hw, hw, base).total);
        }
    }

    TEST_CASE("unknown preset is rejected") {
        CHECK_THROWS_AS(bench_sweep({8}, {7}, {"warp-drive"}, {}), ConfigError);
    }
}

TEST_SUITE("harness.checkpoint") {
    TEST_CASE("checkpoint restores every parameter bit-for-bit") {
        BackboneSpec bspec;
        bspec.attention = AttentionKind::Scsa;
        TinyBackbone net(bspec, 29);
        const std::string path = "test_ckpt.bin";
        save_checkpoint(path, net.store());

        std::vector<double> orig;
        for (const Parameter* p : net.store().ordered()) {
            orig.insert(orig.end(), p->value.data.begin(), p->value.data.end());
        }
        for (Parameter* p : net.store().ordered()) {
            for (auto& v : p->value.data) v += 1.0;
        }
        restore_checkpoint(path, net.store());
        std::vector<double> back;
        for (const Parameter* p : net.store().ordered()) {
            back.insert(back.end(), p->value.data.begin(), p->value.data.end());
        }
        CHECK(orig == back);
        std::remove(path.c_str());
    }

    TEST_CASE("checkpoint entries carry the documented parameter names") {
        BackboneSpec bspec;
        TinyBackbone net(bspec, 31);
        const std::string path = "test_ckpt_names.bin";
        save_checkpoint(path, net.store());
        auto entries = load_checkpoint(path);
        REQUIRE(entries.size() == net.store().size());
        CHECK(entries.front().name == "stem.conv.weight");
        bool found_head = false;
        for (const auto& e : entries) {
            if (e.name == "head.fc.weight") found_head = true;
        }
        CHECK(found_head);
        std::remove(path.c_str());
    }
}
