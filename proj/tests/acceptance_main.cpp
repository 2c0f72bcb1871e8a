// Acceptance suite: one criterion per section, one PASS/FAIL line each,
// nonzero exit if anything fails. Runs standalone (no test framework) so the
// output reads as a checklist.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "scsa/bench.hpp"
#include "scsa/backbone.hpp"
#include "scsa/dataset.hpp"
#include "scsa/gradsuite.hpp"
#include "scsa/train.hpp"

using namespace scsa;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << "\n";
    std::cout.flush();
    if (!pass) ++g_failures;
}

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---------------------------------------------------------------------------

void criterion_1_gradients() {
    const double t0 = now_s();
    GradSuiteOptions opts;  // ops/modules 1e-4, full composition 1e-3, h=1e-5
    auto rep = run_gradcheck_suite(opts);
    const double secs = now_s() - t0;
    std::ostringstream detail;
    detail << rep.checks.size() - rep.failures() << "/" << rep.checks.size() << " checks, "
           << secs << " s";
    if (!rep.all_pass()) {
        for (const auto& c : rep.checks) {
            if (!c.pass) detail << "; FAIL " << c.name << " err=" << c.max_rel_err;
        }
    }
    report(1, "gradient correctness (ops 1e-4, modules 1e-4, composition 1e-3)",
           rep.all_pass() && secs < 60.0, detail.str());
}

void criterion_2_fixed_points() {
    bool pass = true;
    std::ostringstream detail;

    // spatial module: constant input, identity-initialized kernels, default affine
    {
        SmsaConfig cfg;
        ParamStore store;
        Rng rng(2);
        auto params = SmsaParams::create(store, "smsa.", 8, cfg, rng, KernelInit::Identity);
        const Tensor x = Tensor::full(Shape{2, 8, 7, 9}, 0.9);
        auto [mh, mw] = smsa_attention_maps(x, params, cfg);
        double worst = 0;
        for (double v : mh.data) worst = std::max(worst, std::abs(v - 0.5));
        for (double v : mw.data) worst = std::max(worst, std::abs(v - 0.5));
        Tape tape;
        NodeId out = smsa_forward(tape, tape.input(x), params, cfg);
        for (std::size_t i = 0; i < x.numel(); ++i) {
            worst = std::max(worst, std::abs(tape.value(out).data[i] - 0.25 * x.data[i]));
        }
        pass = pass && worst < 1e-10;
        detail << "smsa dev=" << worst;
    }

    // channel module: zero value projection gates at sigmoid(0) = 1/2
    {
        PcsaConfig cfg;
        ParamStore store;
        auto params = PcsaParams::create(store, "pcsa.", 8);
        std::fill(params.v_w->value.data.begin(), params.v_w->value.data.end(), 0.0);
        Rng rng(3);
        const Tensor x = Tensor::rand_uniform(Shape{2, 8, 9, 9}, rng);
        Tape tape;
        NodeId out = pcsa_forward(tape, tape.input(x), params, cfg);
        double worst = 0;
        for (std::size_t i = 0; i < x.numel(); ++i) {
            worst = std::max(worst, std::abs(tape.value(out).data[i] - 0.5 * x.data[i]));
        }
        pass = pass && worst < 1e-10;
        detail << ", pcsa dev=" << worst;
    }

    // serial composition of the two fixed points: 0.5 * 0.25 = 0.125
    {
        ScsaConfig cfg;
        ParamStore store;
        Rng rng(4);
        auto params = ScsaParams::create(store, "", 8, cfg, rng, KernelInit::Identity);
        std::fill(params.pcsa.v_w->value.data.begin(), params.pcsa.v_w->value.data.end(), 0.0);
        const Tensor x = Tensor::full(Shape{1, 8, 8, 8}, -1.1);
        Tape tape;
        NodeId out = scsa_forward(tape, tape.input(x), params, cfg);
        double worst = 0;
        for (std::size_t i = 0; i < x.numel(); ++i) {
            worst = std::max(worst, std::abs(tape.value(out).data[i] - 0.125 * x.data[i]));
        }
        // confirmed against the independent composition oracle
        Tensor want = oracle::scsa_forward(
            x,
            [&] {
                oracle::ScsaOracleParams o;
                for (const Parameter* k : params.smsa.conv) o.smsa.kernels_h.push_back(k->value);
                for (const Parameter* k : params.smsa.conv_w) o.smsa.kernels_w.push_back(k->value);
                o.smsa.gamma_h = params.smsa.norm_h_gamma->value;
                o.smsa.beta_h = params.smsa.norm_h_beta->value;
                o.smsa.gamma_w = params.smsa.norm_w_gamma->value;
                o.smsa.beta_w = params.smsa.norm_w_beta->value;
                o.pcsa = {params.pcsa.q_w->value, params.pcsa.q_b->value, params.pcsa.k_w->value,
                          params.pcsa.k_b->value, params.pcsa.v_w->value, params.pcsa.v_b->value};
                return o;
            }(),
            cfg);
        worst = std::max(worst, max_abs_diff(tape.value(out), want));
        pass = pass && worst < 1e-10;
        detail << ", composite dev=" << worst;
    }
    report(2, "analytic fixed points (0.25x spatial, 0.5 gate, 0.125x composite)", pass,
           detail.str());
}

void criterion_3_oracles() {
    double worst = 0;
    // spatial module, three shapes
    {
        SmsaConfig cfg;
        std::uint64_t seed = 30;
        for (Shape s : {Shape{1, 8, 6, 5}, Shape{2, 8, 4, 9}, Shape{2, 16, 7, 7}}) {
            ParamStore store;
            Rng rng(seed++);
            auto params = SmsaParams::create(store, "smsa.", s[1], cfg, rng);
            const Tensor x = Tensor::rand_uniform(s, rng, -2.0, 2.0);
            oracle::SmsaOracleParams op;
            for (const Parameter* k : params.conv) op.kernels_h.push_back(k->value);
            for (const Parameter* k : params.conv_w) op.kernels_w.push_back(k->value);
            op.gamma_h = params.norm_h_gamma->value;
            op.beta_h = params.norm_h_beta->value;
            op.gamma_w = params.norm_w_gamma->value;
            op.beta_w = params.norm_w_beta->value;
            Tape tape;
            NodeId out = smsa_forward(tape, tape.input(x), params, cfg);
            worst = std::max(worst, max_abs_diff(tape.value(out), oracle::smsa_forward(x, op, cfg)));
        }
    }
    // channel module, three shapes
    {
        PcsaConfig cfg;
        std::uint64_t seed = 40;
        for (Shape s : {Shape{2, 8, 14, 14}, Shape{1, 6, 9, 11}, Shape{2, 4, 7, 7}}) {
            ParamStore store;
            auto params = PcsaParams::create(store, "pcsa.", s[1]);
            Rng rng(seed++);
            for (Parameter* p : store.ordered()) {
                for (auto& v : p->value.data) v += rng.uniform(-0.3, 0.3);
            }
            const Tensor x = Tensor::rand_uniform(s, rng, -1.5, 1.5);
            Tape tape;
            NodeId out = pcsa_forward(tape, tape.input(x), params, cfg);
            worst = std::max(worst,
                             max_abs_diff(tape.value(out),
                                          oracle::pcsa_forward(
                                              x,
                                              {params.q_w->value, params.q_b->value,
                                               params.k_w->value, params.k_b->value,
                                               params.v_w->value, params.v_b->value},
                                              cfg)));
        }
    }
    // full composition, three shapes
    {
        ScsaConfig cfg;
        std::uint64_t seed = 50;
        for (Shape s : {Shape{1, 8, 9, 8}, Shape{2, 8, 12, 12}, Shape{1, 16, 7, 10}}) {
            ParamStore store;
            Rng rng(seed++);
            auto params = ScsaParams::create(store, "", s[1], cfg, rng);
            for (Parameter* p : store.ordered()) {
                for (auto& v : p->value.data) v += rng.uniform(-0.2, 0.2);
            }
            const Tensor x = Tensor::rand_uniform(s, rng, -1.5, 1.5);
            oracle::ScsaOracleParams op;
            for (const Parameter* k : params.smsa.conv) op.smsa.kernels_h.push_back(k->value);
            for (const Parameter* k : params.smsa.conv_w) op.smsa.kernels_w.push_back(k->value);
            op.smsa.gamma_h = params.smsa.norm_h_gamma->value;
            op.smsa.beta_h = params.smsa.norm_h_beta->value;
            op.smsa.gamma_w = params.smsa.norm_w_gamma->value;
            op.smsa.beta_w = params.smsa.norm_w_beta->value;
            op.pcsa = {params.pcsa.q_w->value, params.pcsa.q_b->value, params.pcsa.k_w->value,
                       params.pcsa.k_b->value, params.pcsa.v_w->value, params.pcsa.v_b->value};
            Tape tape;
            NodeId out = scsa_forward(tape, tape.input(x), params, cfg);
            worst = std::max(worst, max_abs_diff(tape.value(out), oracle::scsa_forward(x, op, cfg)));
        }
    }
    std::ostringstream detail;
    detail << "max deviation " << worst;
    report(3, "oracle equivalence on 3 shapes per module (1e-10)", worst < 1e-10, detail.str());
}

void criterion_4_invariants() {
    bool pass = true;
    std::ostringstream detail;
    Rng rng(60);

    // softmax row-stochasticity and sigmoid range
    {
        Tensor x = Tensor::rand_uniform(Shape{3, 5, 9}, rng, -6.0, 6.0);
        Tape tape;
        const auto& sm = tape.value(ops::softmax_lastdim(tape, tape.input(x)));
        double worst = 0;
        for (std::size_t r = 0; r < 15; ++r) {
            double sum = 0;
            for (std::size_t i = 0; i < 9; ++i) sum += sm.data[r * 9 + i];
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        pass = pass && worst < 1e-12;
        detail << "softmax rows dev=" << worst;
        const auto& sg = tape.value(ops::sigmoid(tape, tape.input(x)));
        bool in_range = true;
        for (double v : sg.data) in_range = in_range && v > 0.0 && v < 1.0;
        pass = pass && in_range;
    }

    // group-norm locality
    {
        Tensor x = Tensor::rand_uniform(Shape{1, 8, 5}, rng);
        Tensor x2 = x;
        for (std::size_t l = 0; l < 5; ++l) x2.at3(0, 5, l) += 2.0;  // group 2
        Tensor gamma = Tensor::full(Shape{8}, 1.0), beta(Shape{8});
        Tape t1, t2;
        const auto& y1 = t1.value(
            ops::group_norm(t1, t1.input(x), 4, t1.input(gamma), t1.input(beta), 1e-5));
        const auto& y2 = t2.value(
            ops::group_norm(t2, t2.input(x2), 4, t2.input(gamma), t2.input(beta), 1e-5));
        double worst = 0;
        for (std::size_t c = 0; c < 8; ++c) {
            if (c == 4 || c == 5) continue;
            for (std::size_t l = 0; l < 5; ++l)
                worst = std::max(worst, std::abs(y1.at3(0, c, l) - y2.at3(0, c, l)));
        }
        pass = pass && worst < 1e-12;
        detail << ", gn locality dev=" << worst;
    }

    // split/concat and shuffle round trips, bit-exact
    {
        Tensor x = Tensor::rand_uniform(Shape{2, 8, 6}, rng);
        Tape tape;
        NodeId xid = tape.input(x);
        NodeId back = ops::concat_channels(tape, ops::channel_split(tape, xid, 4));
        bool exact = tape.value(back).data == x.data;
        NodeId sh = ops::channel_shuffle(tape, xid, 4);
        NodeId unsh = ops::channel_unshuffle(tape, sh, 4);
        exact = exact && tape.value(unsh).data == x.data;
        pass = pass && exact;
        detail << ", round trips " << (exact ? "bit-exact" : "BROKEN");
    }

    // shared-kernel gradient tying
    {
        SmsaConfig shared_cfg, unshared_cfg;
        unshared_cfg.conv_sharing = ConvSharing::Unshared;
        ParamStore ss, su;
        Rng ra(61), rb(61);
        auto ps = SmsaParams::create(ss, "smsa.", 8, shared_cfg, ra);
        auto pu = SmsaParams::create(su, "smsa.", 8, unshared_cfg, rb);
        for (std::size_t i = 0; i < ps.conv.size(); ++i) {
            pu.conv[i]->value = ps.conv[i]->value;
            pu.conv_w[i]->value = ps.conv[i]->value;
        }
        const Tensor x = Tensor::rand_uniform(Shape{2, 8, 6, 5}, rng);
        auto backward = [&x](SmsaParams& p, const SmsaConfig& c, ParamStore& store) {
            store.zero_grads();
            Tape tape;
            NodeId out = smsa_forward(tape, tape.input(x), p, c);
            tape.backward(out, Tensor::full(tape.value(out).shape, 1.0));
        };
        backward(ps, shared_cfg, ss);
        backward(pu, unshared_cfg, su);
        double worst = 0;
        for (std::size_t i = 0; i < ps.conv.size(); ++i) {
            for (std::size_t j = 0; j < ps.conv[i]->grad.numel(); ++j) {
                worst = std::max(worst, std::abs(ps.conv[i]->grad.data[j] -
                                                 (pu.conv[i]->grad.data[j] +
                                                  pu.conv_w[i]->grad.data[j])));
            }
        }
        pass = pass && worst < 1e-10;
        detail << ", kernel tying dev=" << worst;
    }
    report(4, "structural invariants (stochastic rows, locality, round trips, tying)", pass,
           detail.str());
}

void criterion_5_ablation_surface() {
    bool pass = true;
    std::ostringstream detail;
    const auto& reg = ablation_registry();
    pass = pass && reg.size() == 13;
    detail << reg.size() << " presets";

    // instantiate + validate + shape preservation
    std::uint64_t seed = 70;
    for (const auto& p : reg) {
        try {
            p.config.validate(64);
            ParamStore store;
            Rng rng(seed++);
            auto params = ScsaParams::create(store, "", 8, p.config, rng);
            const Shape s{2, 8, 12, 12};
            Tape tape;
            NodeId out = scsa_forward(tape, tape.input(Tensor::rand_uniform(s, rng)), params,
                                      p.config);
            if (tape.value(out).shape != s) {
                pass = false;
                detail << "; " << p.name << " broke shape";
            }
        } catch (const std::exception& e) {
            pass = false;
            detail << "; " << p.name << " failed: " << e.what();
        }
    }

    // per-preset gradcheck at 1e-3
    GradSuiteOptions gopts;
    gopts.filter = "preset.";
    auto rep = run_gradcheck_suite(gopts);
    pass = pass && rep.checks.size() == 13 && rep.all_pass();
    detail << ", gradchecks " << rep.checks.size() - rep.failures() << "/" << rep.checks.size();

    // ordering variants disagree on random input
    {
        ScsaConfig first, prior;
        prior.ordering = Ordering::PcsaFirst;
        ParamStore store;
        Rng rng(80);
        auto params = ScsaParams::create(store, "", 8, first, rng);
        const Tensor x = Tensor::rand_uniform(Shape{1, 8, 9, 9}, rng);
        Tape ta, tb;
        NodeId oa = scsa_forward(ta, ta.input(x), params, first);
        NodeId ob = scsa_forward(tb, tb.input(x), params, prior);
        const double diff = max_abs_diff(ta.value(oa), tb.value(ob));
        pass = pass && diff > 1e-8;
        detail << ", ordering diff=" << diff;
    }
    report(5, "ablation surface (13 presets valid, shape-safe, gradchecked; ordering distinct)",
           pass, detail.str());
}

void criterion_6_complexity() {
    bool pass = true;
    std::ostringstream detail;
    ScsaConfig baseline;

    const auto f56 = flop_estimate(16, 56, 56, baseline);
    const auto f112 = flop_estimate(16, 112, 112, baseline);
    const double flop_ratio = double(f112.total) / double(f56.total);
    pass = pass && flop_ratio >= 3.5 && flop_ratio <= 4.0;
    const auto f28 = flop_estimate(16, 28, 28, baseline);
    detail << "flop ratio 56->112 = " << flop_ratio
           << " (28->56 = " << double(f56.total) / double(f28.total)
           << ", depressed by the fixed-grid C^2N term)";

    // wall-clock over the sweep; generous bounds absorb machine noise
    BenchOptions bopts;
    bopts.reps = 9;
    bopts.warmups = 2;
    auto points = bench_sweep({16}, {28, 56, 112}, {"baseline"}, bopts);
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double r = points[i].median_ms / points[i - 1].median_ms;
        pass = pass && r >= 2.5 && r <= 6.0;
        detail << ", wall " << points[i - 1].H << "->" << points[i].H << " = " << r;
    }

    // dropping the channel module must be strictly cheaper everywhere
    ScsaConfig wo_pcsa = *find_preset("wo-pcsa");
    for (std::size_t hw : {28u, 56u, 112u}) {
        pass = pass && flop_estimate(16, hw, hw, wo_pcsa).total <
                           flop_estimate(16, hw, hw, baseline).total;
    }
    report(6, "complexity model (flop ratio in [3.5,4.0], wall ratio in [2.5,6.0])", pass,
           detail.str());
}

void criterion_7_learning_signal() {
    bool pass = true;
    std::ostringstream detail;

    SyntheticDatasetSpec dspec;
    dspec.samples_per_class = 30;
    TrainSpec tspec;  // lr 0.05, x0.1 at epochs 12 and 18, 20 epochs

    double mean_base = 0.0, mean_scsa = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (bool attention : {false, true}) {
            dspec.seed = seed;
            tspec.seed = seed;
            auto [tr, va] = generate_dataset(dspec);
            BackboneSpec bspec;
            bspec.attention = attention ? AttentionKind::Scsa : AttentionKind::None;
            TinyBackbone net(bspec, seed + 1);
            auto log = train(net, tr, va, tspec);
            if (log.diverged || log.epochs.size() != tspec.epochs) {
                pass = false;
                detail << "; seed " << seed << (attention ? " scsa" : " base") << " diverged";
                continue;
            }
            std::size_t decreases = 0;
            for (std::size_t e = 1; e < log.epochs.size(); ++e) {
                if (log.epochs[e].train_loss < log.epochs[e - 1].train_loss) ++decreases;
            }
            const double frac = double(decreases) / double(log.epochs.size() - 1);
            if (frac < 0.75) {
                pass = false;
                detail << "; seed " << seed << (attention ? " scsa" : " base")
                       << " loss decreased only " << decreases << "/" << log.epochs.size() - 1;
            }
            const double acc = log.epochs.back().val_acc;
            (attention ? mean_scsa : mean_base) += acc / 5.0;
        }
    }
    pass = pass && mean_scsa >= mean_base;
    std::ostringstream full;
    full << "attention mean " << mean_scsa << " vs baseline " << mean_base << detail.str();
    report(7, "learning signal (5 seeds, 20 epochs; attention >= baseline, losses decreasing)",
           pass, full.str());
}

void criterion_8_determinism() {
    bool pass = true;
    std::ostringstream detail;

    SyntheticDatasetSpec dspec;
    dspec.samples_per_class = 10;
    dspec.seed = 9;
    auto [tr1, va1] = generate_dataset(dspec);
    auto [tr2, va2] = generate_dataset(dspec);
    const bool ds_ok = dataset_checksum(tr1) == dataset_checksum(tr2) &&
                       dataset_checksum(va1) == dataset_checksum(va2);
    pass = pass && ds_ok;
    detail << "dataset " << (ds_ok ? "bit-identical" : "DIVERGED");

    auto run_training = [&] {
        auto [tr, va] = generate_dataset(dspec);
        BackboneSpec bspec;
        TinyBackbone net(bspec, 33);
        TrainSpec tspec;
        tspec.epochs = 3;
        tspec.batch_size = 8;
        tspec.seed = 33;
        auto log = train(net, tr, va, tspec);
        std::ostringstream os;
        write_train_log(os, log);
        std::string blob = os.str();
        for (const Parameter* p : net.store().ordered()) {
            blob.append(reinterpret_cast<const char*>(p->value.data.data()),
                        p->value.data.size() * sizeof(double));
        }
        return blob;
    };
    const bool train_ok = run_training() == run_training();
    pass = pass && train_ok;
    detail << ", train " << (train_ok ? "bit-identical" : "DIVERGED");

    auto suite_fingerprint = [] {
        GradSuiteOptions opts;
        opts.filter = "op.dwconv1d";
        opts.seed = 5;
        auto rep = run_gradcheck_suite(opts);
        std::ostringstream os;
        print_gradsuite_report(os, rep);
        return os.str();
    };
    const bool suite_ok = suite_fingerprint() == suite_fingerprint();
    pass = pass && suite_ok;
    detail << ", gradcheck report " << (suite_ok ? "identical" : "DIVERGED");
    report(8, "determinism (dataset, training, gradcheck suite)", pass, detail.str());
}

}  // namespace

int main() {
    const double t0 = now_s();
    criterion_1_gradients();
    criterion_2_fixed_points();
    criterion_3_oracles();
    criterion_4_invariants();
    criterion_5_ablation_surface();
    criterion_6_complexity();
    criterion_7_learning_signal();
    criterion_8_determinism();
    std::cout << (g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << " ("
              << 8 - g_failures << "/8 criteria, " << now_s() - t0 << " s)\n";
    return g_failures == 0 ? 0 : 1;
}
