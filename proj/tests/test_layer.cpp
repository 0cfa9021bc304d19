#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "memcore/error.hpp"
#include "memcore/layer.hpp"
#include "oracle.hpp"

using namespace memcore;
using namespace memcore::layer;

namespace {

LayerCircuit random_layer(std::size_t n_in, std::size_t n_out, double rw, std::mt19937_64& rng) {
    auto lc = make_layer(n_in, n_out, {}, rw, 0.001);
    std::uniform_real_distribution<double> u(0.001, 0.01);
    for (std::size_t i = 0; i < lc.xb.rows(); ++i)
        for (std::size_t j = 0; j < lc.xb.cols(); ++j) lc.xb.set_x(i, j, u(rng));
    return lc;
}

LayerCircuit ideal(LayerCircuit lc) {
    lc.out_quant.reset();
    lc.dp_quant.reset();
    return lc;
}

// w_ij from the device states, written out independently.
double weight_from_states(const LayerCircuit& lc, std::size_t i, std::size_t j) {
    const auto& p = lc.xb.params();
    return 4.0 * lc.rf * p.a1 * p.b * (lc.xb.x(i, 2 * j) - lc.xb.x(i, 2 * j + 1));
}

}  // namespace

TEST(Layer, ActivationExamples) {
    EXPECT_EQ(activation_h(0.0), 0.0);
    EXPECT_EQ(activation_h(1.0), 0.25);
    EXPECT_EQ(activation_h(3.0), 0.5);
    EXPECT_EQ(activation_h(-3.0), -0.5);
}

TEST(Layer, SigmoidReference) {
    EXPECT_EQ(sigmoid_ref(0.0), 0.0);
    EXPECT_NEAR(sigmoid_ref(2.0), 1.0 / (1.0 + std::exp(-2.0)) - 0.5, 1e-15);
    EXPECT_NEAR(sigmoid_ref(2.0), 0.38080, 1e-5);
    for (double x : {0.3, 1.7, 5.0}) EXPECT_NEAR(sigmoid_ref(x), -sigmoid_ref(-x), 1e-15);
}

TEST(Layer, ClippedActivationDeviationFromSigmoid) {
    double worst = 0.0;
    for (int k = 0; k <= 160000; ++k) {
        const double x = -8.0 + 16.0 * k / 160000.0;
        worst = std::max(worst, std::abs(activation_h(x) - oracle::sigmoid_shifted(x)));
    }
    // Worst at the clip points |x| = 2, where h is already on the rail.
    EXPECT_NEAR(worst, 0.5 - oracle::sigmoid_shifted(2.0), 1e-9);
    EXPECT_NEAR(worst, 0.1192, 1e-4);
}

TEST(Layer, SynapseWeight) {
    const device::DeviceParams p;
    EXPECT_EQ(synapse_weight(0.3, 0.3, 500e3, p), 0.0);
    EXPECT_NEAR(synapse_weight(1.0, 0.001, 500e3, p), 4 * 5e5 * (1e-4 * (1 - 0.001)), 1e-9);
    EXPECT_NEAR(synapse_weight(1.0, 0.001, 500e3, p), 199.8, 1e-9);
    EXPECT_EQ(synapse_weight(0.2, 0.05, 500e3, p), -synapse_weight(0.05, 0.2, 500e3, p));
}

TEST(Layer, BalancedPairsGiveZero) {
    const std::vector<double> in{0.1, -0.2, 0.3, 0.4, -0.5};
    const auto lc = make_layer(5, 3, {}, 0.0, 0.004);
    const auto out = evaluate_layer(lc, in, 0.5, {});
    for (double y : out.y) EXPECT_EQ(y, quantize(0.0, lc.out_quant));
    for (double y : out.y_analog) EXPECT_NEAR(y, 0.0, 1e-15);
    // With wires the two columns of a pair sit at different distances from
    // ground, so only the quantized output is expected to stay put.
    const auto wired = evaluate_layer(make_layer(5, 3, {}, 1.5, 0.004), in, 0.5, {});
    for (double y : wired.y) EXPECT_EQ(y, quantize(0.0, lc.out_quant));
}

TEST(Layer, IdealCircuitMatchesMath) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto lc = ideal(random_layer(5, 3, 0.0, rng));
        std::vector<double> in(5);
        for (auto& v : in) v = u(rng);
        const auto out = evaluate_layer(lc, in, 0.5, {});
        for (std::size_t j = 0; j < 3; ++j) {
            double dp = 0.0;
            for (std::size_t i = 0; i < 5; ++i) dp += weight_from_states(lc, i, j) * in[i];
            dp += weight_from_states(lc, 5, j) * 0.5;
            EXPECT_NEAR(out.dp[j], dp, 1e-9 * std::abs(dp) + 1e-15);
            EXPECT_NEAR(out.y[j], oracle::clipped(dp), 1e-9 * std::abs(dp) + 1e-15);
        }
        // ideal_forward on the same weights gives the same dot products.
        Matrix w(6, 3);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 3; ++j) w(i, j) = weight_from_states(lc, i, j);
        auto drive = in;
        drive.push_back(0.5);
        const auto dps = xbar::ideal_forward(w, drive);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out.dp[j], dps[j], 1e-9 * std::abs(dps[j]));
    }
}

TEST(Layer, SingleNeuronWorkedExample) {
    // Weight +1 needs x+ - x- = 1 / (4 Rf a1 b) = 0.005.
    auto lc = ideal(make_layer(1, 1, {}, 0.0, 0.001));
    lc.xb.set_x(0, 0, 0.006);
    const auto out = evaluate_layer(lc, std::vector<double>{0.5}, 0.5, {});
    EXPECT_NEAR(out.dp[0], 0.5, 1e-12);
    EXPECT_NEAR(out.y_analog[0], 0.125, 1e-12);
}

TEST(Layer, QuantizerExamples) {
    const QuantizerSpec q3{3, -0.5, 0.5};
    EXPECT_EQ(quantize(-0.5, q3), -0.5);
    EXPECT_EQ(quantize(0.5, q3), 0.5);
    EXPECT_EQ(quantize(0.49, q3), 0.5);
    EXPECT_EQ(quantize(9.0, q3), 0.5);
    // 8 bits over [-1, 1]: enumerate the levels, tie toward +inf.
    const QuantizerSpec q8{8, -1.0, 1.0};
    double best = 0.0, best_d = 1e9;
    for (int k = 0; k < 256; ++k) {
        const double level = -1.0 + 2.0 * k / 255.0;
        const double d = std::abs(level);
        if (d < best_d - 1e-15 || (std::abs(d - best_d) <= 1e-15 && level > best)) {
            best = level;
            best_d = d;
        }
    }
    EXPECT_NEAR(quantize(0.0, q8), best, 1e-15);
    EXPECT_GT(quantize(0.0, q8), 0.0);
}

TEST(Layer, QuantizerErrorBoundAndMonotone) {
    for (const QuantizerSpec q : {QuantizerSpec{3, -0.5, 0.5}, QuantizerSpec{8, -4.0, 4.0},
                                  QuantizerSpec::signed_fixed(8, 8)}) {
        const double bound = (q.hi - q.lo) / (2.0 * (std::pow(2.0, q.bits) - 1.0));
        double prev = -1e9;
        for (int k = 0; k <= 20000; ++k) {
            const double v = q.lo - 1.0 + (q.hi - q.lo + 2.0) * k / 20000.0;
            const double got = quantize(v, q);
            EXPECT_LE(std::abs(got - std::clamp(v, q.lo, q.hi)), bound + 1e-15);
            EXPECT_GE(got, prev);
            prev = got;
        }
    }
}

TEST(Layer, SignedFixedRange) {
    const auto q = QuantizerSpec::signed_fixed(8, 8);
    EXPECT_EQ(q.lo, -0.5);
    EXPECT_EQ(q.hi, 127.0 / 256.0);
    EXPECT_EQ(q.step(), 1.0 / 256.0);
}

TEST(Layer, EvaluationLeavesStatesAlone) {
    std::mt19937_64 rng(37);
    const auto lc = random_layer(4, 2, 1.5, rng);
    const auto before = lc.xb;
    (void)evaluate_layer(lc, std::vector<double>{0.5, -0.5, 0.2, 0.1}, 0.5, {});
    EXPECT_TRUE(lc.xb == before);
}

TEST(Layer, InvalidCircuitsRejected) {
    auto lc = make_layer(2, 2, {}, 1.5, 0.01);
    lc.vdd = 1.5;
    lc.vss = -1.5;
    EXPECT_THROW(lc.validate(), InvalidInput);
    lc = make_layer(2, 2, {}, 1.5, 0.01);
    EXPECT_THROW((void)evaluate_layer(lc, std::vector<double>{0.7, 0.0}, 0.5, {}), InvalidInput);
    EXPECT_THROW((void)evaluate_layer(lc, std::vector<double>{0.1}, 0.5, {}), InvalidInput);
    EXPECT_THROW((QuantizerSpec{0, -1.0, 1.0}.validate()), InvalidInput);
}
