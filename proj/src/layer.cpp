#include "memcore/layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "memcore/error.hpp"

namespace memcore::layer {

void QuantizerSpec::validate() const {
    if (bits < 1 || bits > 30) {
        throw InvalidInput("layer", "quantizer bits must lie in [1, 30]");
    }
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw InvalidInput("layer", "quantizer range needs lo < hi");
    }
}

std::size_t QuantizerSpec::index_of(double v) const noexcept {
    const double c = std::clamp(v, lo, hi);
    const double k = std::floor((c - lo) / step() + 0.5);
    const double top = static_cast<double>(levels() - 1);
    return static_cast<std::size_t>(std::clamp(k, 0.0, top));
}

QuantizerSpec QuantizerSpec::signed_fixed(unsigned bits, int frac_bits) {
    const double lsb = std::ldexp(1.0, -frac_bits);
    const double half = std::ldexp(1.0, static_cast<int>(bits) - 1);
    return {bits, -half * lsb, (half - 1.0) * lsb};
}

double quantize(double v, const QuantizerSpec& q) {
    return q.level(q.index_of(v));
}

double quantize(double v, const Quantizer& q) {
    return q ? quantize(v, *q) : v;
}

double activation_h(double x) noexcept {
    if (x > 2.0) {
        return 0.5;
    }
    if (x < -2.0) {
        return -0.5;
    }
    return x / 4.0;
}

double sigmoid_ref(double x) noexcept {
    return 1.0 / (1.0 + std::exp(-x)) - 0.5;
}

double sigmoid_ref_derivative(double x) noexcept {
    const double e = std::exp(-std::abs(x));
    return e / ((1.0 + e) * (1.0 + e));
}

double synapse_weight(double x_plus, double x_minus, double rf, const device::DeviceParams& p) {
    return 4.0 * rf * p.unit_conductance() * (x_plus - x_minus);
}

double LayerCircuit::weight(std::size_t i, std::size_t j) const {
    return synapse_weight(xb.x(i, 2 * j), xb.x(i, 2 * j + 1), rf, xb.params());
}

Matrix LayerCircuit::weights() const {
    Matrix w(xb.rows(), n_out());
    for (std::size_t i = 0; i < xb.rows(); ++i) {
        for (std::size_t j = 0; j < n_out(); ++j) {
            w(i, j) = weight(i, j);
        }
    }
    return w;
}

void LayerCircuit::validate() const {
    if (xb.rows() < 2 || xb.cols() < 2 || xb.cols() % 2 != 0) {
        throw InvalidInput("layer", "layer crossbar needs n_in+1 >= 2 rows and an even column count");
    }
    if (!(rf > 0.0)) {
        throw InvalidInput("layer", "feedback resistance must be > 0");
    }
    if (!(vdd > 0.0) || vdd != -vss) {
        throw InvalidInput("layer", "rails must satisfy Vdd = -Vss > 0");
    }
    if (vdd >= xb.params().read_limit()) {
        throw InvalidInput("layer", "rails must stay below the device switching threshold");
    }
    if (out_quant) {
        out_quant->validate();
    }
    if (dp_quant) {
        dp_quant->validate();
    }
}

LayerCircuit make_layer(std::size_t n_in, std::size_t n_out, const device::DeviceParams& params,
                        double wire_resistance, double x_init) {
    if (n_in < 1 || n_out < 1) {
        throw InvalidInput("layer", "a layer needs at least one input and one neuron");
    }
    return LayerCircuit{xbar::Crossbar({n_in + 1, 2 * n_out, wire_resistance}, params, x_init)};
}

std::vector<double> differential_currents(const LayerCircuit& lc,
                                          std::span<const double> row_drive,
                                          const xbar::SolverConfig& solver) {
    xbar::SolverConfig cfg = solver;
    cfg.record_nodes = false;
    const auto sol = xbar::solve_jacobi(lc.xb, row_drive, cfg);
    std::vector<double> di(lc.n_out());
    for (std::size_t j = 0; j < di.size(); ++j) {
        di[j] = sol.column_currents[2 * j] - sol.column_currents[2 * j + 1];
    }
    return di;
}

LayerOutput evaluate_layer(const LayerCircuit& lc, std::span<const double> inputs, double bias_v,
                           const xbar::SolverConfig& solver) {
    if (inputs.size() != lc.n_in()) {
        throw InvalidInput("layer", "expected " + std::to_string(lc.n_in()) + " inputs, got " +
                                        std::to_string(inputs.size()));
    }
    const auto in_rails = [&lc](double v) { return v >= lc.vss && v <= lc.vdd; };
    if (!std::all_of(inputs.begin(), inputs.end(), in_rails) || !in_rails(bias_v)) {
        throw InvalidInput("layer", "layer inputs must lie within the rails");
    }
    std::vector<double> drive(inputs.begin(), inputs.end());
    drive.push_back(bias_v);
    const auto di = differential_currents(lc, drive, solver);

    LayerOutput out;
    out.y.resize(di.size());
    out.dp.resize(di.size());
    out.y_analog.resize(di.size());
    for (std::size_t j = 0; j < di.size(); ++j) {
        out.y_analog[j] = std::clamp(lc.rf * di[j], lc.vss, lc.vdd);
        out.dp[j] = quantize(4.0 * lc.rf * di[j], lc.dp_quant);
        out.y[j] = quantize(out.y_analog[j], lc.out_quant);
    }
    return out;
}

}  // namespace memcore::layer
