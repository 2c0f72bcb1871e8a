#include "scsa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

namespace scsa {

namespace {

template <class T>
double time_point_ms(const ScsaConfig& cfg, std::size_t C, std::size_t H, std::size_t W,
                     const BenchOptions& opts) {
    ParamStoreT<T> store;
    Rng rng(opts.seed + C * 1315423911u + H);
    auto params = ScsaParamsT<T>::create(store, "", C, cfg, rng);
    TensorT<T> x = TensorT<T>::rand_uniform(Shape{1, C, H, W}, rng, T(-1), T(1));

    auto run_once = [&]() {
        TapeT<T> tape;
        NodeId out = scsa_forward(tape, tape.input(x), params, cfg);
        // keep the result alive so the forward cannot be elided
        volatile T sink = tape.value(out).data[0];
        (void)sink;
    };
    for (std::size_t i = 0; i < opts.warmups; ++i) run_once();
    std::vector<double> samples;
    samples.reserve(opts.reps);
    for (std::size_t i = 0; i < opts.reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run_once();
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

}  // namespace

std::vector<BenchPoint> bench_sweep(const std::vector<std::size_t>& channels,
                                    const std::vector<std::size_t>& sizes,
                                    const std::vector<std::string>& presets,
                                    const BenchOptions& opts) {
    if (opts.reps < 1) throw ConfigError("bench: reps must be >= 1");
    std::vector<BenchPoint> out;
    for (const std::string& name : presets) {
        const ScsaConfig* cfg = find_preset(name);
        if (!cfg) throw ConfigError("bench: unknown preset '" + name + "'");
        for (std::size_t C : channels) {
            cfg->validate(C);
            for (std::size_t hw : sizes) {
                BenchPoint p;
                p.preset = name;
                p.C = C;
                p.H = hw;
                p.W = hw;
                p.median_ms = opts.use_f32 ? time_point_ms<float>(*cfg, C, hw, hw, opts)
                                           : time_point_ms<double>(*cfg, C, hw, hw, opts);
                p.flops = flop_estimate(C, hw, hw, *cfg, opts.pool_interp).total;
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchPoint>& points) {
    os << "preset,C,H,W,median_ms,flops\n";
    for (const auto& p : points) {
        os << p.preset << "," << p.C << "," << p.H << "," << p.W << "," << p.median_ms << ","
           << p.flops << "\n";
    }
}

}  // namespace scsa
