#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scsa/scsa.hpp"

namespace scsa {

struct BenchPoint {
    std::string preset;
    std::size_t C = 0, H = 0, W = 0;
    double median_ms = 0.0;
    std::uint64_t flops = 0;
};

struct BenchOptions {
    std::size_t reps = 5;     // timed repetitions per point (median reported)
    std::size_t warmups = 2;
    bool use_f32 = false;     // benchmark path may run single precision
    std::uint64_t seed = 0;
    PoolInterp pool_interp = PoolInterp::Adaptive;
};

// Wall-clock forward timings of the attention module over a (C, H=W) sweep,
// with the analytic MAC count per point.
std::vector<BenchPoint> bench_sweep(const std::vector<std::size_t>& channels,
                                    const std::vector<std::size_t>& sizes,
                                    const std::vector<std::string>& presets,
                                    const BenchOptions& opts = {});

// header: preset,C,H,W,median_ms,flops
void write_bench_csv(std::ostream& os, const std::vector<BenchPoint>& points);

}  // namespace scsa
