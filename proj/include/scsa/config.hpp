#pragma once

#include <string>

#include "scsa/backbone.hpp"
#include "scsa/dataset.hpp"
#include "scsa/train.hpp"

namespace scsa {

// Aggregate configuration of the CLI. Every field is optional in the JSON
// form and falls back to the documented default; unknown keys are rejected
// with the offending key path.
struct CliConfig {
    ScsaConfig scsa;
    TrainSpec train;
    SyntheticDatasetSpec dataset;
    BackboneSpec backbone;
};

CliConfig parse_config_json(const std::string& text);
CliConfig load_config_file(const std::string& path);

// Stable key order; parse(serialize(parse(x))) == parse(x).
std::string serialize_config_json(const CliConfig& cfg);

}  // namespace scsa
