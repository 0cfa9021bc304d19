#pragma once

// Floating-point reference network with the same neuron model as the circuit
// (clipped-linear output, shifted-sigmoid derivative, bias input at a fixed
// level) but exact weights, no ADCs and no fan-in limit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "memcore/matrix.hpp"

namespace memcore::train {

class SoftwareNet {
public:
    /// Weights uniform-difference initialized like the circuit's device pairs:
    /// w = scale * (u1 - u2), u ~ U[0, 1].
    SoftwareNet(std::span<const std::size_t> topology, std::uint64_t seed, double init_scale,
                double bias_v = 0.5);

    [[nodiscard]] std::vector<std::size_t> topology() const;
    [[nodiscard]] const std::vector<Matrix>& weights() const noexcept { return weights_; }
    std::vector<Matrix>& weights() noexcept { return weights_; }

    [[nodiscard]] std::vector<double> predict(std::span<const double> input) const;

    /// One stochastic update dw = 2*eta*delta*x; returns the pre-update MSE.
    double step(std::span<const double> input, std::span<const double> target, double eta);

    std::vector<double> fit(const Matrix& inputs, const Matrix& targets, std::size_t epochs,
                            double eta, std::uint64_t seed);

    /// Layer-wise autoencoder pretraining of every hidden layer.
    void pretrain(const Matrix& data, std::size_t epochs, double eta, std::uint64_t seed);

    [[nodiscard]] double evaluate_mse(const Matrix& inputs, const Matrix& targets) const;

private:
    struct Trace {
        std::vector<std::vector<double>> inputs;  // bias appended
        std::vector<std::vector<double>> dps;
        std::vector<double> out;
    };
    [[nodiscard]] Trace run(std::span<const double> input) const;

    std::vector<Matrix> weights_;  // (n_in + 1) x n_out per layer
    double bias_v_;
    double init_scale_;
};

}  // namespace memcore::train
