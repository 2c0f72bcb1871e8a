#include "scsa/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace scsa {

using json = nlohmann::ordered_json;

namespace {

void expect_keys(const json& obj, const std::string& path, const std::set<std::string>& known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError("config: unknown key '" + (path.empty() ? it.key() : path + "." + it.key()) + "'");
        }
    }
}

template <class T>
void read_field(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value at '" + path + "." + key + "'");
    }
}

std::string enum_str(const json& obj, const std::string& path, const char* key,
                     const std::string& fallback) {
    std::string v = fallback;
    read_field(obj, path, key, v);
    return v;
}

[[noreturn]] void bad_enum(const std::string& path, const char* key, const std::string& got) {
    throw ConfigError("config: invalid value '" + got + "' at '" + path + "." + key + "'");
}

SmsaConfig parse_smsa(const json& obj, const std::string& path, SmsaConfig cfg) {
    expect_keys(obj, path, {"k_groups", "kernel_sizes", "norm", "conv_sharing", "gn_position",
                            "eps", "bn_momentum"});
    read_field(obj, path, "k_groups", cfg.k_groups);
    read_field(obj, path, "kernel_sizes", cfg.kernel_sizes);
    read_field(obj, path, "eps", cfg.eps);
    read_field(obj, path, "bn_momentum", cfg.bn_momentum);
    const std::string norm = enum_str(obj, path, "norm",
                                      cfg.norm == NormKind::GroupNorm ? "gn" : "bn");
    if (norm == "gn") cfg.norm = NormKind::GroupNorm;
    else if (norm == "bn") cfg.norm = NormKind::BatchNorm;
    else bad_enum(path, "norm", norm);
    const std::string sharing = enum_str(obj, path, "conv_sharing",
                                         cfg.conv_sharing == ConvSharing::Shared ? "shared"
                                                                                 : "unshared");
    if (sharing == "shared") cfg.conv_sharing = ConvSharing::Shared;
    else if (sharing == "unshared") cfg.conv_sharing = ConvSharing::Unshared;
    else bad_enum(path, "conv_sharing", sharing);
    const std::string gnp = enum_str(obj, path, "gn_position",
                                     cfg.gn_position == GnPosition::PostConv ? "post_conv"
                                                                             : "pre_conv");
    if (gnp == "post_conv") cfg.gn_position = GnPosition::PostConv;
    else if (gnp == "pre_conv") cfg.gn_position = GnPosition::PreConv;
    else bad_enum(path, "gn_position", gnp);
    return cfg;
}

PcsaConfig parse_pcsa(const json& obj, const std::string& path, PcsaConfig cfg) {
    expect_keys(obj, path, {"pooled_h", "pooled_w", "scale_mode", "heads", "shuffle",
                            "progressive_compression"});
    read_field(obj, path, "pooled_h", cfg.pooled_h);
    read_field(obj, path, "pooled_w", cfg.pooled_w);
    read_field(obj, path, "heads", cfg.heads);
    read_field(obj, path, "shuffle", cfg.shuffle);
    read_field(obj, path, "progressive_compression", cfg.progressive_compression);
    const std::string mode = enum_str(obj, path, "scale_mode",
                                      cfg.scale_mode == ScaleMode::SqrtC ? "sqrt_c" : "sqrt_hw");
    if (mode == "sqrt_c") cfg.scale_mode = ScaleMode::SqrtC;
    else if (mode == "sqrt_hw") cfg.scale_mode = ScaleMode::SqrtHW;
    else bad_enum(path, "scale_mode", mode);
    return cfg;
}

ScsaConfig parse_scsa(const json& obj, const std::string& path, ScsaConfig cfg) {
    expect_keys(obj, path, {"smsa", "pcsa", "ordering", "enable_smsa", "enable_pcsa"});
    if (obj.contains("smsa")) cfg.smsa = parse_smsa(obj.at("smsa"), path + ".smsa", cfg.smsa);
    if (obj.contains("pcsa")) cfg.pcsa = parse_pcsa(obj.at("pcsa"), path + ".pcsa", cfg.pcsa);
    read_field(obj, path, "enable_smsa", cfg.enable_smsa);
    read_field(obj, path, "enable_pcsa", cfg.enable_pcsa);
    const std::string ord = enum_str(obj, path, "ordering",
                                     cfg.ordering == Ordering::SmsaFirst ? "smsa_first"
                                                                         : "pcsa_first");
    if (ord == "smsa_first") cfg.ordering = Ordering::SmsaFirst;
    else if (ord == "pcsa_first") cfg.ordering = Ordering::PcsaFirst;
    else bad_enum(path, "ordering", ord);
    return cfg;
}

TrainSpec parse_train(const json& obj, const std::string& path, TrainSpec cfg) {
    expect_keys(obj, path, {"lr", "momentum", "weight_decay", "lr_drop_epochs", "lr_drop_factor",
                            "batch_size", "epochs", "seed"});
    read_field(obj, path, "lr", cfg.lr);
    read_field(obj, path, "momentum", cfg.momentum);
    read_field(obj, path, "weight_decay", cfg.weight_decay);
    read_field(obj, path, "lr_drop_epochs", cfg.lr_drop_epochs);
    read_field(obj, path, "lr_drop_factor", cfg.lr_drop_factor);
    read_field(obj, path, "batch_size", cfg.batch_size);
    read_field(obj, path, "epochs", cfg.epochs);
    read_field(obj, path, "seed", cfg.seed);
    return cfg;
}

SyntheticDatasetSpec parse_dataset(const json& obj, const std::string& path,
                                   SyntheticDatasetSpec cfg) {
    expect_keys(obj, path, {"seed", "num_classes", "samples_per_class", "image_size",
                            "blob_scales", "noise_sigma", "distractor_amplitude"});
    read_field(obj, path, "seed", cfg.seed);
    read_field(obj, path, "num_classes", cfg.num_classes);
    read_field(obj, path, "samples_per_class", cfg.samples_per_class);
    read_field(obj, path, "blob_scales", cfg.blob_scales);
    read_field(obj, path, "noise_sigma", cfg.noise_sigma);
    read_field(obj, path, "distractor_amplitude", cfg.distractor_amplitude);
    if (obj.contains("image_size")) {
        std::vector<std::size_t> dims;
        read_field(obj, path, "image_size", dims);
        if (dims.size() != 3) {
            throw ConfigError("config: '" + path + ".image_size' must be [channels,height,width]");
        }
        cfg.channels = dims[0];
        cfg.height = dims[1];
        cfg.width = dims[2];
    }
    return cfg;
}

BackboneSpec parse_backbone(const json& obj, const std::string& path, BackboneSpec cfg) {
    expect_keys(obj, path, {"in_channels", "stem_channels", "stage_channels", "blocks_per_stage",
                            "num_classes", "attention"});
    read_field(obj, path, "in_channels", cfg.in_channels);
    read_field(obj, path, "stem_channels", cfg.stem_channels);
    read_field(obj, path, "stage_channels", cfg.stage_channels);
    read_field(obj, path, "blocks_per_stage", cfg.blocks_per_stage);
    read_field(obj, path, "num_classes", cfg.num_classes);
    const std::string attn = enum_str(obj, path, "attention",
                                      cfg.attention == AttentionKind::None ? "none" : "scsa");
    if (attn == "none") cfg.attention = AttentionKind::None;
    else if (attn == "scsa") cfg.attention = AttentionKind::Scsa;
    else bad_enum(path, "attention", attn);
    return cfg;
}

json smsa_to_json(const SmsaConfig& c) {
    json o;
    o["k_groups"] = c.k_groups;
    o["kernel_sizes"] = c.kernel_sizes;
    o["norm"] = c.norm == NormKind::GroupNorm ? "gn" : "bn";
    o["conv_sharing"] = c.conv_sharing == ConvSharing::Shared ? "shared" : "unshared";
    o["gn_position"] = c.gn_position == GnPosition::PostConv ? "post_conv" : "pre_conv";
    o["eps"] = c.eps;
    o["bn_momentum"] = c.bn_momentum;
    return o;
}

json pcsa_to_json(const PcsaConfig& c) {
    json o;
    o["pooled_h"] = c.pooled_h;
    o["pooled_w"] = c.pooled_w;
    o["scale_mode"] = c.scale_mode == ScaleMode::SqrtC ? "sqrt_c" : "sqrt_hw";
    o["heads"] = c.heads;
    o["shuffle"] = c.shuffle;
    o["progressive_compression"] = c.progressive_compression;
    return o;
}

}  // namespace

CliConfig parse_config_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    expect_keys(root, "", {"scsa", "train", "dataset", "backbone"});
    CliConfig cfg;
    if (root.contains("scsa")) cfg.scsa = parse_scsa(root.at("scsa"), "scsa", cfg.scsa);
    if (root.contains("train")) cfg.train = parse_train(root.at("train"), "train", cfg.train);
    if (root.contains("dataset")) {
        cfg.dataset = parse_dataset(root.at("dataset"), "dataset", cfg.dataset);
    }
    if (root.contains("backbone")) {
        cfg.backbone = parse_backbone(root.at("backbone"), "backbone", cfg.backbone);
    }
    cfg.backbone.scsa = cfg.scsa;  // one attention config drives both surfaces
    return cfg;
}

CliConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_json(ss.str());
}

std::string serialize_config_json(const CliConfig& cfg) {
    json root;
    json scsa_obj;
    scsa_obj["smsa"] = smsa_to_json(cfg.scsa.smsa);
    scsa_obj["pcsa"] = pcsa_to_json(cfg.scsa.pcsa);
    scsa_obj["ordering"] = cfg.scsa.ordering == Ordering::SmsaFirst ? "smsa_first" : "pcsa_first";
    scsa_obj["enable_smsa"] = cfg.scsa.enable_smsa;
    scsa_obj["enable_pcsa"] = cfg.scsa.enable_pcsa;
    root["scsa"] = scsa_obj;

    json train_obj;
    train_obj["lr"] = cfg.train.lr;
    train_obj["momentum"] = cfg.train.momentum;
    train_obj["weight_decay"] = cfg.train.weight_decay;
    train_obj["lr_drop_epochs"] = cfg.train.lr_drop_epochs;
    train_obj["lr_drop_factor"] = cfg.train.lr_drop_factor;
    train_obj["batch_size"] = cfg.train.batch_size;
    train_obj["epochs"] = cfg.train.epochs;
    train_obj["seed"] = cfg.train.seed;
    root["train"] = train_obj;

    json data_obj;
    data_obj["seed"] = cfg.dataset.seed;
    data_obj["num_classes"] = cfg.dataset.num_classes;
    data_obj["samples_per_class"] = cfg.dataset.samples_per_class;
    data_obj["image_size"] = std::vector<std::size_t>{cfg.dataset.channels, cfg.dataset.height,
                                                      cfg.dataset.width};
    data_obj["blob_scales"] = cfg.dataset.blob_scales;
    data_obj["noise_sigma"] = cfg.dataset.noise_sigma;
    data_obj["distractor_amplitude"] = cfg.dataset.distractor_amplitude;
    root["dataset"] = data_obj;

    json bb_obj;
    bb_obj["in_channels"] = cfg.backbone.in_channels;
    bb_obj["stem_channels"] = cfg.backbone.stem_channels;
    bb_obj["stage_channels"] = cfg.backbone.stage_channels;
    bb_obj["blocks_per_stage"] = cfg.backbone.blocks_per_stage;
    bb_obj["num_classes"] = cfg.backbone.num_classes;
    bb_obj["attention"] = cfg.backbone.attention == AttentionKind::None ? "none" : "scsa";
    root["backbone"] = bb_obj;

    return root.dump(2) + "\n";
}

}  // namespace scsa
