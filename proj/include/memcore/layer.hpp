#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "memcore/xbar.hpp"

namespace memcore::layer {

/// Uniform quantizer with 2^bits levels spanning [lo, hi] inclusive.
struct QuantizerSpec {
    unsigned bits = 8;
    double lo = -1.0;
    double hi = 1.0;

    void validate() const;
    [[nodiscard]] std::size_t levels() const noexcept { return std::size_t{1} << bits; }
    [[nodiscard]] double step() const noexcept {
        return (hi - lo) / static_cast<double>(levels() - 1);
    }
    [[nodiscard]] double level(std::size_t k) const noexcept {
        return k + 1 == levels() ? hi : lo + static_cast<double>(k) * step();
    }
    /// Index of the level `quantize` would return.
    [[nodiscard]] std::size_t index_of(double v) const noexcept;

    /// Two's-complement fixed point: levels k*2^-frac_bits, k in [-2^(bits-1), 2^(bits-1)-1].
    /// Zero is a level, unlike the symmetric ranges.
    [[nodiscard]] static QuantizerSpec signed_fixed(unsigned bits, int frac_bits);
};

/// An absent spec means "quantizer disabled": values pass through untouched.
using Quantizer = std::optional<QuantizerSpec>;

/// Clamp to [lo, hi] and round to the nearest level, ties toward +inf.
[[nodiscard]] double quantize(double v, const QuantizerSpec& q);
[[nodiscard]] double quantize(double v, const Quantizer& q);

/// Clipped-linear activation realized by the rail-limited output op-amp.
[[nodiscard]] double activation_h(double x) noexcept;

/// Shifted sigmoid 1/(1+e^-x) - 0.5.
[[nodiscard]] double sigmoid_ref(double x) noexcept;

/// Derivative of sigmoid_ref.
[[nodiscard]] double sigmoid_ref_derivative(double x) noexcept;

/// Signed weight 4*Rf*(sigma+ - sigma-) of a dual-column synapse.
[[nodiscard]] double synapse_weight(double x_plus, double x_minus, double rf,
                                    const device::DeviceParams& p);

struct LayerCircuit {
    xbar::Crossbar xb;  // (n_in + 1) rows x (2 * n_out) columns; last row is bias
    double rf = 500e3;
    double vdd = 0.5;
    double vss = -0.5;
    Quantizer out_quant = QuantizerSpec{3, -0.5, 0.5};
    Quantizer dp_quant = QuantizerSpec{8, -4.0, 4.0};

    [[nodiscard]] std::size_t n_in() const noexcept { return xb.rows() - 1; }
    [[nodiscard]] std::size_t n_out() const noexcept { return xb.cols() / 2; }

    /// Weight of input i (i == n_in is the bias row) into neuron j.
    [[nodiscard]] double weight(std::size_t i, std::size_t j) const;

    /// Full (n_in + 1) x n_out weight matrix.
    [[nodiscard]] Matrix weights() const;

    void validate() const;
};

/// Build a layer circuit with every device at x_init.
[[nodiscard]] LayerCircuit make_layer(std::size_t n_in, std::size_t n_out,
                                      const device::DeviceParams& params, double wire_resistance,
                                      double x_init);

struct LayerOutput {
    std::vector<double> y;         // quantized outputs
    std::vector<double> dp;        // quantized dot products
    std::vector<double> y_analog;  // rail-clamped outputs before the ADC
};

/// Drive rows with (inputs..., bias_v), solve the crossbar, and form each
/// neuron's output from its differential column current.
[[nodiscard]] LayerOutput evaluate_layer(const LayerCircuit& lc, std::span<const double> inputs,
                                         double bias_v, const xbar::SolverConfig& solver);

/// Per-neuron differential currents I(col 2j) - I(col 2j+1) for a full row drive.
[[nodiscard]] std::vector<double> differential_currents(const LayerCircuit& lc,
                                                        std::span<const double> row_drive,
                                                        const xbar::SolverConfig& solver);

}  // namespace memcore::layer
