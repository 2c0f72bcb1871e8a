// Command-line front end: gradient checking, toy training, benchmarking,
// ablation sweeps, and checkpoint inspection.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "scsa/bench.hpp"
#include "scsa/config.hpp"
#include "scsa/dataset.hpp"
#include "scsa/gradsuite.hpp"
#include "scsa/io.hpp"
#include "scsa/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("SCSA_SEED");
    if (!v || !*v) return std::nullopt;
    return std::strtoull(v, nullptr, 10);
}

// "C=16,32;HW=28,56,112"
void parse_sweep(const std::string& spec, std::vector<std::size_t>& channels,
                 std::vector<std::size_t>& sizes) {
    auto parse_list = [](const std::string& body, std::vector<std::size_t>& out) {
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t next = body.find(',', pos);
            if (next == std::string::npos) next = body.size();
            const std::string tok = body.substr(pos, next - pos);
            if (tok.empty()) throw scsa::ConfigError("bench: empty entry in sweep list");
            out.push_back(std::strtoull(tok.c_str(), nullptr, 10));
            if (out.back() == 0) throw scsa::ConfigError("bench: bad sweep value '" + tok + "'");
            pos = next + 1;
        }
    };
    std::size_t pos = 0;
    while (pos < spec.size()) {
        std::size_t next = spec.find(';', pos);
        if (next == std::string::npos) next = spec.size();
        const std::string part = spec.substr(pos, next - pos);
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos) throw scsa::ConfigError("bench: sweep part '" + part + "' lacks '='");
        const std::string key = part.substr(0, eq);
        if (key == "C") {
            parse_list(part.substr(eq + 1), channels);
        } else if (key == "HW") {
            parse_list(part.substr(eq + 1), sizes);
        } else {
            throw scsa::ConfigError("bench: unknown sweep key '" + key + "'");
        }
        pos = next + 1;
    }
    if (channels.empty() || sizes.empty()) {
        throw scsa::ConfigError("bench: sweep must set both C and HW");
    }
}

scsa::CliConfig load_or_default(const std::string& path) {
    if (path.empty()) return scsa::CliConfig{};
    return scsa::load_config_file(path);
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw scsa::IoError("cannot open output file " + path);
    return file;
}

int cmd_gradcheck(double tol, std::uint64_t seed, const std::string& filter) {
    scsa::GradSuiteOptions opts;
    opts.tol_ops = tol;
    opts.tol_modules = tol;
    opts.tol_scsa = std::max(tol, 1e-3);
    opts.seed = seed;
    opts.filter = filter;
    auto report = scsa::run_gradcheck_suite(opts);
    scsa::print_gradsuite_report(std::cout, report);
    return report.all_pass() ? kExitOk : kExitNumerical;
}

int cmd_ablate(const std::string& preset, bool all, const scsa::CliConfig& cfg, bool with_train,
               const std::string& out_path) {
    std::vector<scsa::AblationPreset> presets;
    if (all) {
        presets = scsa::ablation_registry();
    } else {
        const scsa::ScsaConfig* found = scsa::find_preset(preset);
        if (!found) {
            std::string names;
            for (const auto& p : scsa::ablation_registry()) names += " " + p.name;
            throw scsa::ConfigError("unknown preset '" + preset + "'; valid presets:" + names);
        }
        presets.push_back({preset, *found});
    }

    std::ofstream file;
    std::ostream& os = open_out(file, out_path);
    os << "preset,shape_ok,gradcheck_max_rel_err,gradcheck_pass,flops";
    if (with_train) os << ",val_acc";
    os << "\n";

    bool numerical_failure = false;
    for (const auto& p : presets) {
        p.config.validate(8);
        scsa::ParamStore store;
        scsa::Rng rng(1);
        auto params = scsa::ScsaParams::create(store, "", 8, p.config, rng);
        scsa::Tape tape;
        scsa::NodeId x = tape.input(scsa::Tensor::rand_uniform(scsa::Shape{1, 8, 10, 9}, rng));
        scsa::NodeId out = scsa::scsa_forward(tape, x, params, p.config);
        const bool shape_ok = tape.value(out).shape == tape.value(x).shape;

        scsa::GradSuiteOptions gopts;
        gopts.filter = "preset." + p.name;
        auto report = scsa::run_gradcheck_suite(gopts);
        double max_err = 0.0;
        bool pass = true;
        for (const auto& c : report.checks) {
            max_err = std::max(max_err, c.max_rel_err);
            pass = pass && c.pass;
        }
        if (!pass || !shape_ok) numerical_failure = true;

        os << p.name << "," << (shape_ok ? 1 : 0) << "," << max_err << "," << (pass ? 1 : 0)
           << "," << scsa::flop_estimate(64, 56, 56, p.config).total;
        if (with_train) {
            scsa::CliConfig run_cfg = cfg;
            run_cfg.backbone.attention = scsa::AttentionKind::Scsa;
            run_cfg.backbone.scsa = p.config;
            auto [tr, va] = scsa::generate_dataset(run_cfg.dataset);
            scsa::TinyBackbone net(run_cfg.backbone, run_cfg.train.seed + 1);
            auto log = scsa::train(net, tr, va, run_cfg.train);
            os << "," << (log.epochs.empty() ? 0.0 : log.epochs.back().val_acc);
        }
        os << "\n";
    }
    return numerical_failure ? kExitNumerical : kExitOk;
}

int cmd_train(const scsa::CliConfig& cfg_in, const std::string& attention,
              std::optional<std::uint64_t> seed, const std::string& log_path,
              const std::string& ckpt_path) {
    scsa::CliConfig cfg = cfg_in;
    if (!attention.empty()) {
        if (attention == "on") cfg.backbone.attention = scsa::AttentionKind::Scsa;
        else if (attention == "off") cfg.backbone.attention = scsa::AttentionKind::None;
        else throw scsa::ConfigError("--attention must be 'on' or 'off'");
    }
    if (seed) {
        cfg.train.seed = *seed;
        cfg.dataset.seed = *seed;
    }
    auto [tr, va] = scsa::generate_dataset(cfg.dataset);
    scsa::TinyBackbone net(cfg.backbone, cfg.train.seed + 1);
    auto log = scsa::train(net, tr, va, cfg.train);

    std::ofstream file;
    std::ostream& os = open_out(file, log_path);
    scsa::write_train_log(os, log);
    if (!ckpt_path.empty()) scsa::save_checkpoint(ckpt_path, net.store());
    if (log.diverged) {
        std::cerr << "training diverged at epoch " << log.diverged_epoch << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_bench(const std::string& sweep, const std::string& preset, bool f32, std::size_t reps,
              std::uint64_t seed, const std::string& out_path) {
    std::vector<std::size_t> channels, sizes;
    parse_sweep(sweep, channels, sizes);
    scsa::BenchOptions opts;
    opts.use_f32 = f32;
    opts.reps = std::max<std::size_t>(reps, 5);
    opts.seed = seed;
    auto points = scsa::bench_sweep(channels, sizes, {preset}, opts);
    std::ofstream file;
    std::ostream& os = open_out(file, out_path);
    scsa::write_bench_csv(os, points);
    return kExitOk;
}

int cmd_dump(const std::string& path) {
    auto entries = scsa::load_checkpoint(path);
    std::cout << entries.size() << " tensors\n";
    for (const auto& e : entries) {
        double mn = 0, mx = 0, mean = 0;
        if (!e.tensor.values.data.empty()) {
            mn = mx = e.tensor.values.data[0];
            for (double v : e.tensor.values.data) {
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                mean += v;
            }
            mean /= static_cast<double>(e.tensor.values.numel());
        }
        std::cout << e.name << " shape=" << e.tensor.shape.str()
                  << " dtype=" << (e.tensor.stored_dtype == scsa::DType::F64 ? "f64" : "f32")
                  << " min=" << mn << " max=" << mx << " mean=" << mean << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatial/channel synergistic attention workbench"};
    app.require_subcommand(0, 1);

    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the default JSON config and exit");

    auto* gc = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
    double gc_tol = 1e-4;
    std::uint64_t gc_seed = env_seed().value_or(0);
    std::string gc_filter;
    gc->add_option("--tol", gc_tol, "relative tolerance for op/module checks");
    gc->add_option("--seed", gc_seed, "suite seed");
    gc->add_option("--filter", gc_filter, "substring filter on check names");

    auto* ab = app.add_subcommand("ablate", "validate ablation presets");
    std::string ab_preset;
    bool ab_all = false;
    std::string ab_config, ab_out;
    bool ab_train = false;
    ab->add_option("--preset", ab_preset, "preset name");
    ab->add_flag("--all", ab_all, "run every preset");
    ab->add_option("--config", ab_config, "JSON config file");
    ab->add_flag("--train", ab_train, "also train the toy backbone per preset");
    ab->add_option("--out", ab_out, "CSV output path (default stdout)");

    auto* tr = app.add_subcommand("train", "train the toy backbone");
    std::string tr_config, tr_attention, tr_log, tr_ckpt;
    std::uint64_t tr_seed = 0;
    bool tr_seed_set = false;
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--attention", tr_attention, "'on' or 'off' (overrides config)");
    tr->add_option("--seed", tr_seed, "seed override")->each([&](const std::string&) {
        tr_seed_set = true;
    });
    tr->add_option("--log", tr_log, "training log path (default stdout)");
    tr->add_option("--checkpoint", tr_ckpt, "checkpoint output path");

    auto* be = app.add_subcommand("bench", "wall-clock + analytic-cost sweep");
    std::string be_sweep = "C=16;HW=28,56,112";
    std::string be_preset = "baseline";
    std::string be_out;
    bool be_f32 = false;
    std::size_t be_reps = 5;
    std::uint64_t be_seed = env_seed().value_or(0);
    be->add_option("--sweep", be_sweep, "sweep spec, e.g. C=16;HW=28,56,112");
    be->add_option("--preset", be_preset, "preset to benchmark");
    be->add_flag("--f32", be_f32, "run single precision");
    be->add_option("--reps", be_reps, "timed repetitions per point (>= 5)");
    be->add_option("--seed", be_seed, "input seed");
    be->add_option("--out", be_out, "CSV output path (default stdout)");

    auto* du = app.add_subcommand("dump", "inspect a checkpoint");
    std::string du_ckpt;
    du->add_option("--checkpoint", du_ckpt, "checkpoint path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_defaults) {
            std::cout << scsa::serialize_config_json(scsa::CliConfig{});
            return kExitOk;
        }
        if (gc->parsed()) return cmd_gradcheck(gc_tol, gc_seed, gc_filter);
        if (ab->parsed()) {
            if (!ab_all && ab_preset.empty()) {
                throw scsa::ConfigError("ablate: give --preset <name> or --all");
            }
            return cmd_ablate(ab_preset, ab_all, load_or_default(ab_config), ab_train, ab_out);
        }
        if (tr->parsed()) {
            std::optional<std::uint64_t> seed;
            if (tr_seed_set) {
                seed = tr_seed;
            } else if (auto es = env_seed()) {
                seed = es;
            }
            return cmd_train(load_or_default(tr_config), tr_attention, seed, tr_log, tr_ckpt);
        }
        if (be->parsed()) return cmd_bench(be_sweep, be_preset, be_f32, be_reps, be_seed, be_out);
        if (du->parsed()) return cmd_dump(du_ckpt);
        std::cout << app.help();
        return kExitOk;
    } catch (const scsa::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const scsa::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {  // shape/config/validation
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
