#include <doctest.h>

#include "scsa/config.hpp"

using namespace scsa;

TEST_SUITE("config") {
    TEST_CASE("defaults survive an empty object") {
        auto cfg = parse_config_json("{}");
        CHECK(cfg.scsa.smsa.k_groups == 4);
        CHECK(cfg.scsa.pcsa.pooled_h == 7);
        CHECK(cfg.train.lr == 0.05);
        CHECK(cfg.train.momentum == 0.9);
        CHECK(cfg.train.weight_decay == 1e-4);
        CHECK(cfg.dataset.num_classes == 4);
        CHECK(cfg.backbone.stem_channels == 16);
    }

    TEST_CASE("round trip is stable") {
        const std::string text = R"({
            "scsa": {"smsa": {"k_groups": 2, "kernel_sizes": [3, 7]}, "ordering": "pcsa_first"},
            "train": {"lr": 0.01, "epochs": 5},
            "dataset": {"noise_sigma": 0.2},
            "backbone": {"attention": "scsa"}
        })";
        auto cfg1 = parse_config_json(text);
        const std::string ser1 = serialize_config_json(cfg1);
        auto cfg2 = parse_config_json(ser1);
        const std::string ser2 = serialize_config_json(cfg2);
        CHECK(ser1 == ser2);
        CHECK(cfg2.scsa.smsa.k_groups == 2);
        CHECK(cfg2.scsa.ordering == Ordering::PcsaFirst);
        CHECK(cfg2.train.lr == 0.01);
        CHECK(cfg2.backbone.attention == AttentionKind::Scsa);
    }

    TEST_CASE("unknown keys are rejected with their path") {
        try {
            parse_config_json(R"({"scsa": {"smsa": {"kernels": [3]}}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("scsa.smsa.kernels") != std::string::npos);
        }
        CHECK_THROWS_AS(parse_config_json(R"({"trainer": {}})"), ConfigError);
    }

    TEST_CASE("bad values name the offending key") {
        try {
            parse_config_json(R"({"train": {"lr": "fast"}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("train.lr") != std::string::npos);
        }
        try {
            parse_config_json(R"({"scsa": {"ordering": "sideways"}})");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("scsa.ordering") != std::string::npos);
        }
    }

    TEST_CASE("malformed JSON is a config error") {
        CHECK_THROWS_AS(parse_config_json("{nope"), ConfigError);
    }

    TEST_CASE("the attention config propagates into the backbone spec") {
        auto cfg = parse_config_json(
            R"({"scsa": {"smsa": {"k_groups": 2, "kernel_sizes": [3, 5]}},
                "backbone": {"attention": "scsa"}})");
        CHECK(cfg.backbone.scsa.smsa.k_groups == 2);
    }
}
