#pragma once

// Timing, energy and area model of the multicore system.  Per-core step
// times and powers come from circuit-level characterization; the system
// figures are simple compositions of them.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace memcore::map {
struct CorePlan;
}

namespace memcore::cost {

struct CostTables {
    double t_fwd = 0.27e-6;  // s
    double t_bwd = 0.80e-6;
    double t_upd = 1.00e-6;
    double p_fwd = 0.794e-3;  // W
    double p_bwd = 0.706e-3;
    double p_upd = 6.513e-3;
    double p_ctrl = 0.0004e-3;
    double io_bit = 0.05e-12;  // J per bit
    double route_clock = 200e6;  // Hz
    double xbar_latency = 20e-9;  // s
    double core_area = 0.0163;  // mm^2
    double risc_area = 0.52;
    double residual_area = 0.031;
    double recog_core_energy = 2.48e-10;  // J per core per input
    double recog_pipeline_overhead = 0.5e-6;  // s

    /// Throws InvalidInput on any negative or non-finite entry.
    void validate() const;
};

enum class Phase { training, recognition };

[[nodiscard]] const char* to_string(Phase p) noexcept;

struct CostReport {
    Phase phase = Phase::training;
    std::size_t n_cores = 0;
    std::size_t n_layers = 0;
    double time_per_input = 0.0;  // s
    double compute_energy = 0.0;  // J
    double io_energy = 0.0;       // J, calibrated value used in the total
    double io_energy_bits = 0.0;  // J, raw bit model, reported alongside
    double total_energy = 0.0;    // compute + io
    double area = 0.0;            // mm^2
    double route_overhead = 0.0;  // s, training only
    std::string application;
    std::vector<std::string> flags;  // e.g. negative implied route overhead
};

[[nodiscard]] double training_compute_energy(std::size_t n_cores, const CostTables& t = {});
[[nodiscard]] double recognition_compute_energy(std::size_t n_cores, const CostTables& t = {});

/// n_layers * (t_fwd + t_bwd + t_upd) + route_overhead.  Throws InvalidInput
/// when n_layers is 0 or the overhead is negative.
[[nodiscard]] double training_latency(std::size_t n_layers, const CostTables& t = {},
                                      double route_overhead = 0.0);
/// Pipelined throughput interval: t_fwd + recog_pipeline_overhead.
[[nodiscard]] double recognition_latency(const CostTables& t = {});

[[nodiscard]] double io_energy(std::size_t bits, const CostTables& t = {});
[[nodiscard]] double area_estimate(std::size_t n_cores, const CostTables& t = {});

/// Reference figures of one application from the system evaluation tables.
struct AppProfile {
    std::string name;
    std::vector<std::size_t> topology;
    std::size_t cores = 0;          // core count used in the tables
    std::size_t input_bits = 0;     // raw features * 8 bits
    double io_calibration = 0.0;    // J per input, from the tables
    double train_time = 0.0;        // s per input
    double train_compute = 0.0;     // J
    double train_total = 0.0;       // J
    double recog_time = 0.0;        // s
    double recog_compute = 0.0;     // J
    double recog_total = 0.0;       // J

    /// Route overhead implied by the table's training time; negative values
    /// mean the table is not consistent with layers * (t_fwd + t_bwd + t_upd).
    [[nodiscard]] double implied_route_overhead(const CostTables& t = {}) const;
};

/// mnist, isolet, kdd, caltech.
[[nodiscard]] const std::vector<AppProfile>& app_profiles();
/// Throws InvalidInput for an unknown name.
[[nodiscard]] const AppProfile& app_profile(const std::string& name);

struct ReportInputs {
    Phase phase = Phase::training;
    std::size_t n_cores = 0;
    std::size_t n_layers = 1;
    std::size_t io_bits = 0;                   // raw bit model input
    std::optional<double> io_calibration;      // J; replaces the bit model in the total
    double route_overhead = 0.0;               // s, training only
    std::string application;
};

[[nodiscard]] CostReport report(const ReportInputs& in, const CostTables& t = {});

/// Core and layer counts from a plan: n_layers is the transformed depth.
[[nodiscard]] CostReport report(Phase phase, const map::CorePlan& plan, std::size_t io_bits,
                                std::optional<double> io_calibration, const CostTables& t = {},
                                double route_overhead = 0.0);

/// Table reproduction for a named application: the table's core count and
/// I/O constant, and (training) the route overhead implied by its time,
/// clamped at 0 and flagged when negative.
[[nodiscard]] CostReport report_for_app(Phase phase, const AppProfile& app,
                                        const CostTables& t = {});

[[nodiscard]] std::string to_json(const CostReport& r);
/// Header matching the table column layout.
[[nodiscard]] std::string csv_header();
/// application, phase, cores, time_us, compute_J, io_J, total_J, area_mm2, io_bits_J
[[nodiscard]] std::string to_csv_row(const CostReport& r);

}  // namespace memcore::cost
