#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "scsa/gradcheck.hpp"

namespace scsa {

// Runs central-difference checks for every op that declares a backward pass
// (enumerated from OpKind, so a new op cannot be silently skipped), each on
// at least three distinct shapes, plus end-to-end checks for the attention
// modules and every ablation preset.

struct GradSuiteCheck {
    std::string name;
    bool pass = false;
    double max_rel_err = 0.0;
    std::string detail;
};

struct GradSuiteReport {
    std::vector<GradSuiteCheck> checks;

    std::size_t failures() const {
        std::size_t n = 0;
        for (const auto& c : checks) n += c.pass ? 0 : 1;
        return n;
    }
    bool all_pass() const { return failures() == 0; }
};

struct GradSuiteOptions {
    double tol_ops = 1e-4;
    double tol_modules = 1e-4;
    double tol_scsa = 1e-3;  // full serial composition
    double h = 1e-5;
    std::uint64_t seed = 0;
    std::string filter;             // substring match on check names
    bool negative_control = false;  // adds one deliberately corrupted check
};

GradSuiteReport run_gradcheck_suite(const GradSuiteOptions& opts = {});

void print_gradsuite_report(std::ostream& os, const GradSuiteReport& report);

}  // namespace scsa
