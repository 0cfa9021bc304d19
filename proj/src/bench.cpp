#include "memcore/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "memcore/error.hpp"

namespace memcore::harness {

xbar::Crossbar random_crossbar(std::size_t rows, std::size_t cols, double rw, double r_lo,
                               double r_hi, std::uint64_t seed,
                               const device::DeviceParams& params) {
    if (!(r_lo > 0.0) || !(r_hi >= r_lo)) {
        throw InvalidInput("harness", "resistance band must satisfy 0 < r_lo <= r_hi");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(std::log(r_lo), std::log(r_hi));
    std::vector<double> states(rows * cols);
    for (auto& x : states) {
        const double r = std::exp(u(rng));
        x = std::clamp(1.0 / (params.unit_conductance() * r), params.x_floor, 1.0);
    }
    return xbar::Crossbar({rows, cols, rw}, params, std::move(states));
}

BenchResult run_bench(const BenchOptions& opts) {
    auto xb = random_crossbar(opts.rows, opts.cols, opts.wire_resistance, opts.r_lo, opts.r_hi,
                              opts.seed);
    std::mt19937_64 rng(opts.seed ^ 0x1234567ULL);
    std::uniform_real_distribution<double> u(-opts.input_amplitude, opts.input_amplitude);
    std::vector<double> inputs(opts.rows);
    for (auto& v : inputs) {
        v = u(rng);
    }
    auto solver = opts.solver;
    solver.record_nodes = false;

    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = xbar::solve_jacobi(xb, inputs, solver);
    const auto t1 = std::chrono::steady_clock::now();

    // Rw = 0: every device sees its row drive across it.
    std::vector<double> ideal(opts.cols, 0.0);
    for (std::size_t i = 0; i < opts.rows; ++i) {
        for (std::size_t j = 0; j < opts.cols; ++j) {
            ideal[j] += solver.conduction == xbar::ConductionMode::sinh
                            ? device::device_current(xb.params(), xb.x(i, j), inputs[i])
                            : xb.conductance(i, j) * inputs[i];
        }
    }
    BenchResult r;
    r.iterations = sol.iterations;
    r.residual = sol.residual;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    double max_ideal = 0.0;
    double max_diff = 0.0;
    for (std::size_t j = 0; j < opts.cols; ++j) {
        const double d = std::abs(sol.column_currents[j] - ideal[j]);
        max_ideal = std::max(max_ideal, std::abs(ideal[j]));
        max_diff = std::max(max_diff, d);
        if (ideal[j] != 0.0) {
            r.worst_column_deviation = std::max(r.worst_column_deviation, d / std::abs(ideal[j]));
        }
    }
    r.deviation = max_ideal > 0.0 ? max_diff / max_ideal : 0.0;
    return r;
}

}  // namespace memcore::harness
