#include "memcore/software_net.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "memcore/error.hpp"
#include "memcore/layer.hpp"

namespace memcore::train {

namespace {

Matrix random_weights(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix w(rows, cols);
    for (auto& v : w.data()) {
        const double a = u(rng);
        const double b = u(rng);
        v = scale * (a - b);
    }
    return w;
}

}  // namespace

SoftwareNet::SoftwareNet(std::span<const std::size_t> topology, std::uint64_t seed,
                         double init_scale, double bias_v)
    : bias_v_(bias_v), init_scale_(init_scale) {
    if (topology.size() < 2) {
        throw InvalidInput("train", "software net needs at least two widths");
    }
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k + 1 < topology.size(); ++k) {
        weights_.push_back(random_weights(topology[k] + 1, topology[k + 1], rng, init_scale));
    }
}

std::vector<std::size_t> SoftwareNet::topology() const {
    std::vector<std::size_t> t{weights_.front().rows() - 1};
    for (const auto& w : weights_) {
        t.push_back(w.cols());
    }
    return t;
}

SoftwareNet::Trace SoftwareNet::run(std::span<const double> input) const {
    Trace tr;
    std::vector<double> x(input.begin(), input.end());
    for (const auto& w : weights_) {
        x.push_back(bias_v_);
        std::vector<double> dp(w.cols(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) {
                dp[j] += w(i, j) * x[i];
            }
        }
        std::vector<double> y(dp.size());
        std::transform(dp.begin(), dp.end(), y.begin(), layer::activation_h);
        tr.inputs.push_back(std::move(x));
        tr.dps.push_back(std::move(dp));
        x = std::move(y);
    }
    tr.out = std::move(x);
    return tr;
}

std::vector<double> SoftwareNet::predict(std::span<const double> input) const {
    return run(input).out;
}

double SoftwareNet::step(std::span<const double> input, std::span<const double> target,
                         double eta) {
    const auto tr = run(input);
    const std::size_t n = weights_.size();
    std::vector<std::vector<double>> deltas(n);
    double sq = 0.0;
    deltas[n - 1].resize(target.size());
    for (std::size_t j = 0; j < target.size(); ++j) {
        const double e = target[j] - tr.out[j];
        sq += e * e;
        deltas[n - 1][j] = e * layer::sigmoid_ref_derivative(tr.dps[n - 1][j]);
    }
    for (std::size_t k = n - 1; k > 0; --k) {
        const auto& w = weights_[k];
        auto& d = deltas[k - 1];
        d.assign(w.rows() - 1, 0.0);
        for (std::size_t i = 0; i + 1 < w.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < w.cols(); ++j) {
                s += w(i, j) * deltas[k][j];
            }
            d[i] = s * layer::sigmoid_ref_derivative(tr.dps[k - 1][i]);
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        auto& w = weights_[k];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double xi = tr.inputs[k][i];
            for (std::size_t j = 0; j < w.cols(); ++j) {
                w(i, j) += 2.0 * eta * deltas[k][j] * xi;
            }
        }
    }
    return sq / static_cast<double>(target.size());
}

std::vector<double> SoftwareNet::fit(const Matrix& inputs, const Matrix& targets,
                                     std::size_t epochs, double eta, std::uint64_t seed) {
    std::vector<std::size_t> order(inputs.rows());
    std::vector<double> curve;
    std::mt19937_64 rng(seed);
    for (std::size_t e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t idx : order) {
            total += step(inputs.row(idx), targets.row(idx), eta);
        }
        curve.push_back(total / static_cast<double>(order.size()));
    }
    return curve;
}

void SoftwareNet::pretrain(const Matrix& data, std::size_t epochs, double eta,
                           std::uint64_t seed) {
    Matrix rep = data;
    for (std::size_t k = 0; k + 1 < weights_.size(); ++k) {
        const std::size_t width = weights_[k].rows() - 1;
        const std::size_t hidden = weights_[k].cols();
        const std::vector<std::size_t> topo{width, hidden, width};
        SoftwareNet ae(topo, seed + k, init_scale_, bias_v_);
        ae.fit(rep, rep, epochs, eta, seed + 100 + k);
        weights_[k] = ae.weights_[0];

        Matrix next(rep.rows(), hidden);
        for (std::size_t s = 0; s < rep.rows(); ++s) {
            std::vector<double> x(rep.row(s).begin(), rep.row(s).end());
            x.push_back(bias_v_);
            for (std::size_t j = 0; j < hidden; ++j) {
                double dp = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    dp += weights_[k](i, j) * x[i];
                }
                next(s, j) = layer::activation_h(dp);
            }
        }
        rep = std::move(next);
    }
}

double SoftwareNet::evaluate_mse(const Matrix& inputs, const Matrix& targets) const {
    double total = 0.0;
    for (std::size_t s = 0; s < inputs.rows(); ++s) {
        const auto y = predict(inputs.row(s));
        double sq = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double e = targets(s, j) - y[j];
            sq += e * e;
        }
        total += sq / static_cast<double>(y.size());
    }
    return total / static_cast<double>(inputs.rows());
}

}  // namespace memcore::train
