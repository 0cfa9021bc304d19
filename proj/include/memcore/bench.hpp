#pragma once

// Large-array IR-drop study: a random crossbar with devices log-uniform in a
// resistance band, solved with wire resistance and compared with Rw = 0.

#include <cstddef>
#include <cstdint>

#include "memcore/xbar.hpp"

namespace memcore::harness {

struct BenchOptions {
    std::size_t rows = 400;
    std::size_t cols = 200;
    double wire_resistance = 1.5;
    double r_lo = 1e6;  // device small-signal resistance band [ohm]
    double r_hi = 10e6;
    double input_amplitude = 0.5;  // inputs uniform in [-a, a]
    std::uint64_t seed = 1;
    xbar::SolverConfig solver;
};

struct BenchResult {
    std::size_t iterations = 0;
    double residual = 0.0;
    double seconds = 0.0;
    /// max_j |I_j - I_j(Rw = 0)| / max_j |I_j(Rw = 0)|
    double deviation = 0.0;
    /// max_j |I_j - I_j(Rw = 0)| / |I_j(Rw = 0)|, columns with a non-zero ideal current
    double worst_column_deviation = 0.0;
};

[[nodiscard]] xbar::Crossbar random_crossbar(std::size_t rows, std::size_t cols, double rw,
                                             double r_lo, double r_hi, std::uint64_t seed,
                                             const device::DeviceParams& params = {});

/// Throws ConvergenceError from the solver.
[[nodiscard]] BenchResult run_bench(const BenchOptions& opts);

}  // namespace memcore::harness
