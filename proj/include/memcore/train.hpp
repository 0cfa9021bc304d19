#pragma once

// On-crossbar stochastic backpropagation.
//
// One training step is the three-phase circuit sequence:
//   1. forward: evaluate every layer, keep y, the quantized DP and f'(DP);
//   2. backward: form output errors digitally, then push errors down through
//      each crossbar by driving its columns with (+delta, -delta);
//   3. update: pulse every synapse pair, amplitude set by the input and
//      duration by eta*delta.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "memcore/layer.hpp"
#include "memcore/map.hpp"
#include "memcore/matrix.hpp"

namespace memcore::train {

/// f' of the shifted sigmoid sampled at the DP quantizer levels.
class FPrimeTable {
public:
    /// Disabled quantizer: lookups evaluate f' directly.
    explicit FPrimeTable(const layer::Quantizer& grid);

    [[nodiscard]] double operator()(double dp) const;
    [[nodiscard]] std::span<const double> entries() const noexcept { return entries_; }
    [[nodiscard]] const layer::Quantizer& grid() const noexcept { return grid_; }

private:
    layer::Quantizer grid_;
    std::vector<double> entries_;
};

[[nodiscard]] FPrimeTable fprime_table(unsigned bits, double lo, double hi);

/// Maps an input magnitude |x_i| in [0, 0.5] to a write amplitude.  The
/// amplitude inverts the threshold drive, g(V) = gain * |x_i|, so the state
/// change of a pulse is proportional to |x_i| times its duration.
class WriteVoltageMap {
public:
    WriteVoltageMap(const device::DeviceParams& p, double gain);

    /// Amplitude for a state-raising (positive) pulse.
    [[nodiscard]] double raising(double magnitude) const;
    /// Amplitude (as a positive number) for a state-lowering pulse.
    [[nodiscard]] double lowering(double magnitude) const;
    [[nodiscard]] double gain() const noexcept { return gain_; }

    /// Throws InvalidInput unless every non-zero amplitude is above threshold
    /// and the half-select level of the largest amplitude stays below it.
    void validate() const;

    /// Fit the gain by pulsing a mid-range device pair with the reference
    /// update (|x_i| = 0.5, eta*delta = 1e-3) so that it lands on 2*eta*delta*x_i.
    [[nodiscard]] static WriteVoltageMap calibrate(const device::DeviceParams& p, double rf,
                                                   double tau0, double dt);

private:
    device::DeviceParams params_;
    double gain_;
};

struct TrainConfig {
    double eta = 0.01;  // 2*eta is the learning rate
    std::size_t epochs = 10;
    layer::Quantizer err_quant = layer::QuantizerSpec::signed_fixed(8, 8);
    double pulse_dt = 10e-9;  // Euler step for write pulses [s]
    double tau0 = 1e-6;       // pulse duration per unit |eta*delta| [s]
    double write_gain = 0.0;  // 0: calibrate from the device model
    double target_mse = 0.0;  // stop once an epoch's mean MSE falls to this (0: never)
    std::uint64_t seed = 1;
    bool rebalance = false;   // re-centre a synapse pair after it hits a rail
    double bias_v = 0.5;      // bias row drive

    void validate() const;
};

struct CircuitOptions {
    device::DeviceParams device{};
    double wire_resistance = 1.5;
    double rf = 500e3;
    double vdd = 0.5;
    layer::Quantizer out_quant = layer::QuantizerSpec{3, -0.5, 0.5};
    layer::Quantizer dp_quant = layer::QuantizerSpec{8, -4.0, 4.0};
    double x_init_lo = 0.001;  // initial states are uniform in [lo, hi]: high resistance
    double x_init_hi = 0.002;
    /// When set, layers are split to fit cores of this size and each
    /// sub-layer gets its own crossbar; otherwise one crossbar per layer.
    std::optional<map::CoreLimits> limits;
};

/// One crossbar of a stage.  Its rows read stage inputs `in_idx` (plus the
/// bias row) and its neuron pairs drive stage outputs `out_idx`.
struct Tile {
    layer::LayerCircuit lc;
    std::vector<std::size_t> in_idx;
    std::vector<std::size_t> out_idx;
    /// Data-row connectivity, n_in x n_out row-major; empty means dense.
    /// Unconnected pairs sit at the state floor and are never written.
    std::vector<std::uint8_t> mask;

    [[nodiscard]] bool connected(std::size_t i, std::size_t j) const noexcept {
        return mask.empty() || i >= lc.n_in() || mask[i * lc.n_out() + j] != 0;
    }
    bool operator==(const Tile& o) const {
        return lc.xb == o.lc.xb && lc.rf == o.lc.rf && in_idx == o.in_idx &&
               out_idx == o.out_idx && mask == o.mask;
    }
};

/// A transformed layer: every tile reads the previous stage's outputs.
struct Stage {
    std::size_t layer = 0;  // logical layer this stage belongs to
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    std::vector<Tile> tiles;

    bool operator==(const Stage&) const = default;
};

struct NetworkCircuit {
    std::vector<Stage> stages;

    /// Stage widths: input width, then each stage's output width.
    [[nodiscard]] std::vector<std::size_t> topology() const;
    /// Input width, then the output width of each logical layer.
    [[nodiscard]] std::vector<std::size_t> logical_topology() const;
    [[nodiscard]] std::size_t tile_count() const;
    /// Stages of logical layers [first, last), renumbered from 0.
    [[nodiscard]] NetworkCircuit slice(std::size_t first, std::size_t last) const;
    void validate() const;
    bool operator==(const NetworkCircuit&) const = default;
};

/// Single-tile stage around a dense layer circuit.
[[nodiscard]] Stage dense_stage(layer::LayerCircuit lc, std::size_t layer = 0);

[[nodiscard]] NetworkCircuit init_network(std::span<const std::size_t> topology, std::uint64_t seed,
                                          const CircuitOptions& opts = {});

/// Tiles follow the plan's sub-layers; combining tiles are masked so each
/// neuron only sees its own partials.
[[nodiscard]] NetworkCircuit init_network(const map::SplitPlan& plan, std::uint64_t seed,
                                          const CircuitOptions& opts = {});

/// Layer circuit with uniformly random high-resistance states.
[[nodiscard]] layer::LayerCircuit init_layer(std::size_t n_in, std::size_t n_out,
                                             std::uint64_t seed, const CircuitOptions& opts);

struct ForwardTrace {
    std::vector<std::vector<double>> inputs;  // per stage, bias entry appended
    std::vector<layer::LayerOutput> outputs;  // per stage, assembled over tiles
};

[[nodiscard]] ForwardTrace forward(const NetworkCircuit& net, std::span<const double> input,
                                   double bias_v, const xbar::SolverConfig& solver);

/// quantize((t - y) * f'(dp)).
[[nodiscard]] double output_error(double t, double y, double dp, const FPrimeTable& tab,
                                  const layer::Quantizer& q);

/// Weighted error sums 4*Rf*I_i of every data row, read by driving columns
/// (2j, 2j+1) with (+delta_j, -delta_j) through the transposed crossbar.
[[nodiscard]] std::vector<double> backprop_weighted_sums(const layer::LayerCircuit& lc,
                                                         std::span<const double> delta_next,
                                                         const xbar::SolverConfig& solver);

/// Errors of the layer below: weighted sums scaled by f'(dp_prev), quantized.
[[nodiscard]] std::vector<double> backprop_errors_crossbar(const layer::LayerCircuit& lc,
                                                           std::span<const double> delta_next,
                                                           std::span<const double> dp_prev,
                                                           const FPrimeTable& tab,
                                                           const xbar::SolverConfig& solver,
                                                           const layer::Quantizer& q);

struct UpdateStats {
    std::size_t pulses = 0;
    std::size_t saturations = 0;  // pulses that ran a device into a clamp

    UpdateStats& operator+=(const UpdateStats& o) {
        pulses += o.pulses;
        saturations += o.saturations;
        return *this;
    }
};

/// Realize dw_ij = 2*eta*delta_j*x_i on every synapse pair with a two-phase
/// pulse (sigma+ one way, sigma- the other).  `inputs` includes the bias entry.
/// Pairs with a zero entry in `mask` (n_in x n_out, data rows) are skipped.
UpdateStats weight_update(layer::LayerCircuit& lc, std::span<const double> inputs,
                          std::span<const double> deltas, const TrainConfig& cfg,
                          const WriteVoltageMap& map, std::span<const std::uint8_t> mask = {});

/// Errors and forward inputs of every stage for one sample, without updating.
struct ErrorSignals {
    ForwardTrace trace;
    std::vector<std::vector<double>> deltas;  // per stage, n_out entries
    double mse = 0.0;                          // mean (t - y_analog)^2 at the output
};

/// A training session: owns the calibration and f' tables for one network.
class Trainer {
public:
    Trainer(NetworkCircuit& net, TrainConfig cfg, xbar::SolverConfig solver);

    [[nodiscard]] ErrorSignals errors(std::span<const double> input,
                                      std::span<const double> target) const;

    /// One stochastic step; returns the output MSE before the update.
    double step(std::span<const double> input, std::span<const double> target);

    /// cfg.epochs passes over the samples in seed-shuffled order; returns each
    /// epoch's mean pre-update MSE.
    std::vector<double> fit(const Matrix& inputs, const Matrix& targets);

    [[nodiscard]] const UpdateStats& stats() const noexcept { return stats_; }
    [[nodiscard]] const TrainConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const WriteVoltageMap& write_map() const noexcept { return map_; }

private:
    NetworkCircuit& net_;
    TrainConfig cfg_;
    xbar::SolverConfig solver_;
    WriteVoltageMap map_;
    std::vector<FPrimeTable> tables_;
    UpdateStats stats_;
    std::size_t epochs_done_ = 0;
};

double train_step(NetworkCircuit& net, std::span<const double> input,
                  std::span<const double> target, const TrainConfig& cfg,
                  const xbar::SolverConfig& solver);

struct AutoencoderResult {
    NetworkCircuit net;  // logical layer 0 encodes, layer 1 decodes
    std::vector<double> mse_curve;

    [[nodiscard]] NetworkCircuit encoder() const { return net.slice(0, 1); }
    [[nodiscard]] NetworkCircuit decoder() const { return net.slice(1, 2); }
};

/// Train width -> hidden -> width with the inputs as targets.
[[nodiscard]] AutoencoderResult train_autoencoder(const Matrix& data, std::size_t hidden,
                                                  const TrainConfig& cfg,
                                                  const xbar::SolverConfig& solver,
                                                  const CircuitOptions& opts = {});

/// Greedy layer-wise pretraining: one autoencoder per hidden layer on the
/// representation of the stack below, then a fresh output layer.
[[nodiscard]] NetworkCircuit pretrain_stack(std::span<const std::size_t> topology,
                                            const Matrix& data, const TrainConfig& cfg,
                                            const xbar::SolverConfig& solver,
                                            const CircuitOptions& opts = {},
                                            std::vector<std::vector<double>>* curves = nullptr);

/// Quantized outputs of `net` for every sample (one row each).
[[nodiscard]] Matrix represent(const NetworkCircuit& net, const Matrix& data, double bias_v,
                               const xbar::SolverConfig& solver);

/// Analog (pre-ADC) outputs of the last layer for every sample.
[[nodiscard]] Matrix predict(const NetworkCircuit& net, const Matrix& data, double bias_v,
                             const xbar::SolverConfig& solver);

/// Mean over samples of the per-sample output MSE, no updates.
[[nodiscard]] double evaluate_mse(const NetworkCircuit& net, const Matrix& inputs,
                                  const Matrix& targets, double bias_v,
                                  const xbar::SolverConfig& solver);

}  // namespace memcore::train
