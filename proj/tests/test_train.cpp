#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "memcore/error.hpp"
#include "memcore/software_net.hpp"
#include "memcore/synthetic.hpp"
#include "memcore/train.hpp"
#include "oracle.hpp"

using namespace memcore;
using namespace memcore::train;

namespace {

double weight_from_states(const layer::LayerCircuit& lc, std::size_t i, std::size_t j) {
    const auto& p = lc.xb.params();
    return 4.0 * lc.rf * p.a1 * p.b * (lc.xb.x(i, 2 * j) - lc.xb.x(i, 2 * j + 1));
}

CircuitOptions ideal_options() {
    CircuitOptions o;
    o.wire_resistance = 0.0;
    o.out_quant.reset();
    o.dp_quant.reset();
    o.x_init_hi = 0.02;
    return o;
}

TrainConfig ideal_config() {
    TrainConfig c;
    c.err_quant.reset();
    return c;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double half = 0.4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half, half);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = u(rng);
    return m;
}

double fixed_round(double v) { return std::clamp(std::round(v * 256.0) / 256.0, -0.5, 127.0 / 256.0); }

double pca_mse(const Matrix& m, int k) {
    Eigen::MatrixXd a(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) a(i, j) = m(i, j);
    const Eigen::RowVectorXd mu = a.colwise().mean();
    a.rowwise() -= mu;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    const Eigen::MatrixXd v = svd.matrixV().leftCols(k);
    return (a - a * v * v.transpose()).squaredNorm() / static_cast<double>(a.size());
}


// Weight change of a single (x = 0.1) pair after one update.
double pulse_dw(double xi, double eta_delta) {
    auto lc = layer::make_layer(1, 1, {}, 0.0, 0.1);
    TrainConfig cfg;
    cfg.eta = 1.0;
    const auto map = WriteVoltageMap::calibrate(lc.xb.params(), lc.rf, cfg.tau0, cfg.pulse_dt);
    const double before = weight_from_states(lc, 0, 0);
    (void)weight_update(lc, std::vector<double>{xi, 0.0}, std::vector<double>{eta_delta}, cfg, map);
    return weight_from_states(lc, 0, 0) - before;
}

}  // namespace

TEST(Train, InitShapesAndRange) {
    const std::vector<std::size_t> topo{41, 15, 41};
    const auto net = init_network(topo, 5);
    ASSERT_EQ(net.stages.size(), 2u);
    EXPECT_EQ(net.stages[0].tiles[0].lc.xb.rows(), 42u);
    EXPECT_EQ(net.stages[0].tiles[0].lc.xb.cols(), 30u);
    EXPECT_EQ(net.stages[1].tiles[0].lc.xb.rows(), 16u);
    EXPECT_EQ(net.stages[1].tiles[0].lc.xb.cols(), 82u);
    for (const auto& st : net.stages) {
        const auto& lc = st.tiles[0].lc;
        for (std::size_t i = 0; i < lc.xb.rows(); ++i)
            for (std::size_t j = 0; j < lc.n_out(); ++j)
                EXPECT_LE(std::abs(weight_from_states(lc, i, j)), 0.2 + 1e-12);
    }
    EXPECT_TRUE(init_network(topo, 5) == net);
    EXPECT_FALSE(init_network(topo, 6) == net);
}

TEST(Train, OutputErrorExamples) {
    const FPrimeTable exact(std::nullopt);
    const auto q = layer::QuantizerSpec::signed_fixed(8, 8);
    EXPECT_EQ(output_error(0.3, 0.3, 1.0, exact, q), 0.0);
    const double raw = 0.25 * oracle::sigmoid_shifted_prime(1.0);
    EXPECT_EQ(output_error(0.5, 0.25, 1.0, exact, q), fixed_round(raw));
    EXPECT_NEAR(output_error(0.5, 0.25, 1.0, exact, std::nullopt), raw, 1e-15);
    EXPECT_EQ(output_error(-0.5, 0.5, 0.0, exact, q), -0.25);
}

TEST(Train, FPrimeTable) {
    const auto tab = fprime_table(8, -4.0, 4.0);
    const auto e = tab.entries();
    ASSERT_EQ(e.size(), 256u);
    for (std::size_t k = 0; k < e.size(); ++k) EXPECT_NEAR(e[k], e[e.size() - 1 - k], 1e-15);
    EXPECT_NEAR(tab(0.0), 0.25, 1e-4);
    EXPECT_NEAR(tab(2.0), 0.10499, 2e-3);
    const auto& g = *tab.grid();
    EXPECT_NEAR(tab(2.0), oracle::sigmoid_shifted_prime(g.level(g.index_of(2.0))), 1e-15);
}

TEST(Train, BackpropZeroErrorGivesZero) {
    const auto lc = init_layer(5, 3, 1, {});
    const auto s = backprop_weighted_sums(lc, std::vector<double>(3, 0.0), {});
    for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(Train, BackpropMatchesTransposeProduct) {
    auto opts = ideal_options();
    const auto lc = init_layer(6, 4, 9, opts);
    const std::vector<double> delta{0.05, -0.1, 0.02, 0.07};
    const std::vector<double> dp{0.3, -1.0, 2.5, 0.0, -0.2, 1.1};
    const FPrimeTable exact(std::nullopt);
    const auto got = backprop_errors_crossbar(lc, delta, dp, exact, {}, std::nullopt);
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) s += weight_from_states(lc, i, j) * delta[j];
        const double ref = s * oracle::sigmoid_shifted_prime(dp[i]);
        EXPECT_NEAR(got[i], ref, 1e-9 * std::abs(ref) + 1e-18);
    }
}

TEST(Train, BackpropCancellation) {
    auto lc = layer::make_layer(1, 2, {}, 0.0, 0.001);
    lc.xb.set_x(0, 0, 0.006);
    lc.xb.set_x(0, 2, 0.006);
    const auto s = backprop_weighted_sums(lc, std::vector<double>{0.1, -0.1}, {});
    EXPECT_NEAR(s[0], 0.0, 1e-15);
    const auto t = backprop_weighted_sums(lc, std::vector<double>{0.1, 0.1}, {});
    EXPECT_NEAR(t[0], 0.2, 1e-12);
}

TEST(Train, UpdateSkipsZeroErrorAndZeroInput) {
    auto lc = layer::make_layer(2, 2, {}, 1.5, 0.1);
    const auto before = lc.xb;
    const TrainConfig cfg;
    const auto map = WriteVoltageMap::calibrate(lc.xb.params(), lc.rf, cfg.tau0, cfg.pulse_dt);
    const auto s = weight_update(lc, std::vector<double>{0.3, -0.2, 0.5},
                                 std::vector<double>{0.0, 0.0}, cfg, map);
    EXPECT_TRUE(lc.xb == before);
    EXPECT_EQ(s.pulses, 0u);
    (void)weight_update(lc, std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{0.1, -0.1},
                        cfg, map);
    EXPECT_TRUE(lc.xb == before);
}

TEST(Train, UpdateAtCalibrationPoint) {
    const double target = 2.0 * 1e-3 * 0.5;
    EXPECT_NEAR(pulse_dw(0.5, 1e-3), target, 0.2 * target);
    EXPECT_NEAR(pulse_dw(0.5, -1e-3), -target, 0.2 * target);
    EXPECT_NEAR(pulse_dw(-0.5, 1e-3), -target, 0.2 * target);
}

TEST(Train, UpdateScalesWithError) {
    for (double xi : {0.1, 0.25, 0.5}) {
        const double a = pulse_dw(xi, 5e-4), b = pulse_dw(xi, 1e-3);
        EXPECT_NEAR(b / a, 2.0, 0.1) << "x_i=" << xi;
    }
    // Linear fit of achieved vs requested over a 10-point sweep.
    std::vector<double> req, got;
    for (int k = 1; k <= 10; ++k) {
        req.push_back(2.0 * 1e-4 * k * 0.5);
        got.push_back(pulse_dw(0.5, 1e-4 * k));
    }
    const double n = 10.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < 10; ++k) {
        sx += req[k];
        sy += got[k];
        sxx += req[k] * req[k];
        sxy += req[k] * got[k];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (int k = 0; k < 10; ++k) {
        ss_res += std::pow(got[k] - (slope * req[k] + icpt), 2);
        ss_tot += std::pow(got[k] - sy / n, 2);
    }
    EXPECT_GE(1.0 - ss_res / ss_tot, 0.99);
}

TEST(Train, StepWithMatchedTargetIsNoOp) {
    const std::vector<std::size_t> topo{3, 4, 2};
    auto net = init_network(topo, 11);
    const std::vector<double> in{0.2, -0.3, 0.4};
    const auto trace = forward(net, in, 0.5, {});
    const auto target = trace.outputs.back().y_analog;
    const auto before = net;
    Trainer tr(net, {}, {});
    (void)tr.step(in, target);
    EXPECT_TRUE(net == before);
    EXPECT_EQ(tr.stats().pulses, 0u);
}

// Output and hidden errors from the trainer against plain backpropagation
// on the weights read off the devices.
TEST(Train, GradientFidelityIdealMode) {
    const std::vector<std::size_t> topo{4, 3, 2};
    auto net = init_network(topo, 21, ideal_options());
    const Trainer tr(net, ideal_config(), {});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x{u(rng), u(rng), u(rng), u(rng)}, t{u(rng), u(rng)};
        const auto& l0 = net.stages[0].tiles[0].lc;
        const auto& l1 = net.stages[1].tiles[0].lc;
        std::vector<double> x0 = x;
        x0.push_back(0.5);
        std::vector<double> dp1(3), h(3), dp2(2), y(2), d2(2), d1(3);
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t i = 0; i < 5; ++i) dp1[j] += weight_from_states(l0, i, j) * x0[i];
            h[j] = oracle::clipped(dp1[j]);
        }
        std::vector<double> x1 = h;
        x1.push_back(0.5);
        for (std::size_t j = 0; j < 2; ++j) {
            for (std::size_t i = 0; i < 4; ++i) dp2[j] += weight_from_states(l1, i, j) * x1[i];
            y[j] = oracle::clipped(dp2[j]);
            d2[j] = (t[j] - y[j]) * oracle::sigmoid_shifted_prime(dp2[j]);
        }
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 2; ++j) s += weight_from_states(l1, i, j) * d2[j];
            d1[i] = s * oracle::sigmoid_shifted_prime(dp1[i]);
        }
        const auto sig = tr.errors(x, t);
        const auto check = [](double got, double ref) {
            EXPECT_LE(std::abs(got - ref), 1e-6 * std::abs(ref) + 1e-15) << got << " vs " << ref;
        };
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                check(sig.deltas[0][j] * sig.trace.inputs[0][i], d1[j] * x0[i]);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                check(sig.deltas[1][j] * sig.trace.inputs[1][i], d2[j] * x1[i]);
    }
}

// Default init (|w| <= 0.2) leaves XOR at the symmetric saddle for the
// float reference too, so both run from wide init.
TEST(Train, XorWithWideInit) {
    Matrix x(4, 2), t(4, 1);
    const double in[4][2] = {{-.5, -.5}, {-.5, .5}, {.5, -.5}, {.5, .5}};
    const double tt[4] = {-.4, .4, .4, -.4};
    for (int i = 0; i < 4; ++i) {
        x(i, 0) = in[i][0];
        x(i, 1) = in[i][1];
        t(i, 0) = tt[i];
    }
    const std::vector<std::size_t> topo{2, 8, 1};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SoftwareNet sw(topo, seed, 4.0);
        (void)sw.fit(x, t, 500, 1.0, seed);
        EXPECT_LT(sw.evaluate_mse(x, t), 0.02);

        CircuitOptions o;
        o.x_init_hi = 0.021;
        auto net = init_network(topo, seed, o);
        TrainConfig cfg;
        cfg.eta = 1.0;
        cfg.epochs = 500;
        cfg.seed = seed;
        Trainer tr(net, cfg, {});
        (void)tr.fit(x, t);
        EXPECT_LT(evaluate_mse(net, x, t, 0.5, {}), 0.02) << "seed " << seed;
    }
}

TEST(Train, AutoencoderOnConstantData) {
    Matrix d(40, 6);
    const std::vector<double> c{0.3, -0.2, 0.1, 0.35, -0.4, 0.05};
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 6; ++j) d(i, j) = c[j];
    TrainConfig cfg;
    cfg.eta = 0.2;
    cfg.epochs = 50;
    cfg.seed = 3;
    const std::vector<std::size_t> topo{6, 3, 6};
    const double initial = evaluate_mse(init_network(topo, 3), d, d, 0.5, {});
    const auto r = train_autoencoder(d, 3, cfg, {});
    EXPECT_LT(evaluate_mse(r.net, d, d, 0.5, {}), 0.1 * initial);
    // Decreasing on average: each half of the curve ends below where it started.
    const auto& m = r.mse_curve;
    EXPECT_LT(m[m.size() / 2], m.front());
    EXPECT_LE(m.back(), m[m.size() / 2]);
}

TEST(Train, AutoencoderBeatsTwicePca) {
    harness::MinMaxScaler sc;
    const auto d = harness::synthetic_traffic(200, 5, sc);
    TrainConfig cfg;
    cfg.eta = 0.2;
    cfg.epochs = 50;
    cfg.seed = 3;
    const auto r = train_autoencoder(d, 15, cfg, {});
    EXPECT_LT(evaluate_mse(r.net, d, d, 0.5, {}), 2.0 * pca_mse(d, 5));
}

TEST(Train, AutoencoderIdentityCapable) {
    const auto d = random_matrix(40, 4, 9);
    TrainConfig cfg;
    cfg.eta = 1.0;
    cfg.epochs = 100;
    cfg.seed = 3;
    const auto r = train_autoencoder(d, 4, cfg, {});
    EXPECT_LT(evaluate_mse(r.net, d, d, 0.5, {}), 0.01);
}

TEST(Train, PretrainSingleHiddenMatchesAutoencoder) {
    const auto d = random_matrix(20, 5, 4);
    TrainConfig cfg;
    cfg.eta = 0.2;
    cfg.epochs = 3;
    cfg.seed = 8;
    const std::vector<std::size_t> topo{5, 3, 2};
    const auto stack = pretrain_stack(topo, d, cfg, {});
    const auto enc = train_autoencoder(d, 3, cfg, {}).encoder();
    ASSERT_EQ(enc.stages.size(), 1u);
    EXPECT_TRUE(stack.stages[0].tiles == enc.stages[0].tiles);
    EXPECT_EQ(stack.logical_topology(), topo);
}

TEST(Train, PretrainRepresentationWidths) {
    const auto d = random_matrix(12, 8, 6);
    TrainConfig cfg;
    cfg.epochs = 2;
    const std::vector<std::size_t> topo{8, 6, 4, 3};
    std::vector<std::vector<double>> curves;
    const auto stack = pretrain_stack(topo, d, cfg, {}, {}, &curves);
    EXPECT_EQ(curves.size(), 2u);
    EXPECT_EQ(stack.logical_topology(), topo);
    const auto below = stack.slice(0, 1);
    const auto rep = represent(below, d, 0.5, {});
    EXPECT_EQ(rep.cols(), 6u);
    EXPECT_EQ(stack.stages[1].n_in, rep.cols());
}

TEST(Train, FitIsDeterministic) {
    const auto d = random_matrix(10, 4, 1);
    TrainConfig cfg;
    cfg.eta = 0.2;
    cfg.epochs = 3;
    const auto a = train_autoencoder(d, 2, cfg, {});
    const auto b = train_autoencoder(d, 2, cfg, {});
    EXPECT_TRUE(a.net == b.net);
    EXPECT_EQ(a.mse_curve, b.mse_curve);
}

TEST(Train, SplitNetworkTrains) {
    // Rank-one data plus an offset: learnable through a 4-wide bottleneck.
    const auto z = random_matrix(30, 1, 12);
    const auto a = random_matrix(1, 8, 13, 0.8);
    Matrix d(30, 8);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            d(i, j) = std::clamp(a(0, j) * z(i, 0) + 0.1 * a(0, (j + 3) % 8), -0.5, 0.5);
    CircuitOptions o;
    o.limits = map::CoreLimits{5, 3};
    const std::vector<std::size_t> topo{8, 4, 8};
    auto net = init_network(topo, 2, o);
    EXPECT_GT(net.tile_count(), 2u);
    const double initial = evaluate_mse(net, d, d, 0.5, {});
    TrainConfig cfg;
    cfg.eta = 0.2;
    cfg.epochs = 30;
    Trainer tr(net, cfg, {});
    (void)tr.fit(d, d);
    EXPECT_LT(evaluate_mse(net, d, d, 0.5, {}), 0.9 * initial);
}

TEST(Train, InvalidInputsRejected) {
    const std::vector<std::size_t> topo{3, 2, 1};
    auto net = init_network(topo, 1);
    Trainer tr(net, {}, {});
    EXPECT_THROW((void)tr.step(std::vector<double>{0.1}, std::vector<double>{0.1}), InvalidInput);
    TrainConfig bad;
    bad.eta = -1.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    EXPECT_THROW((void)pretrain_stack(std::vector<std::size_t>{3, 1}, Matrix(2, 3), {}, {}),
                 InvalidInput);
}
