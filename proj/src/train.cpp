#include "memcore/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "memcore/error.hpp"

namespace memcore::train {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

}  // namespace

FPrimeTable::FPrimeTable(const layer::Quantizer& grid) : grid_(grid) {
    if (!grid_) {
        return;
    }
    grid_->validate();
    entries_.resize(grid_->levels());
    for (std::size_t k = 0; k < entries_.size(); ++k) {
        entries_[k] = layer::sigmoid_ref_derivative(grid_->level(k));
    }
}

double FPrimeTable::operator()(double dp) const {
    if (!grid_) {
        return layer::sigmoid_ref_derivative(dp);
    }
    return entries_[grid_->index_of(dp)];
}

FPrimeTable fprime_table(unsigned bits, double lo, double hi) {
    return FPrimeTable(layer::QuantizerSpec{bits, lo, hi});
}

WriteVoltageMap::WriteVoltageMap(const device::DeviceParams& p, double gain)
    : params_(p), gain_(gain) {
    if (!(gain > 0.0) || !std::isfinite(gain)) {
        throw InvalidInput("train", "write-voltage gain must be > 0");
    }
}

double WriteVoltageMap::raising(double magnitude) const {
    return std::log(gain_ * std::abs(magnitude) / params_.ap + std::exp(params_.vp));
}

double WriteVoltageMap::lowering(double magnitude) const {
    return std::log(gain_ * std::abs(magnitude) / params_.an + std::exp(params_.vn));
}

void WriteVoltageMap::validate() const {
    const double limit = params_.read_limit();
    if (!(raising(1e-6) > params_.vp) || !(lowering(1e-6) > params_.vn)) {
        throw InvalidInput("train", "write amplitudes must exceed the switching threshold");
    }
    if (raising(0.5) / 2.0 >= limit || lowering(0.5) / 2.0 >= limit) {
        throw InvalidInput("train", "half-select write level would disturb unselected devices");
    }
}

WriteVoltageMap WriteVoltageMap::calibrate(const device::DeviceParams& p, double rf, double tau0,
                                           double dt) {
    constexpr double kRefInput = 0.5;
    constexpr double kRefEtaDelta = 1e-3;
    constexpr double kRefState = 0.1;
    const double target = 2.0 * kRefEtaDelta * kRefInput;
    const double duration = tau0 * kRefEtaDelta;

    // Two device moves of g*duration each give dw = 4*Rf*a1*b*2*g*duration.
    double gain = 1.0 / (4.0 * rf * p.unit_conductance() * tau0);
    for (int pass = 0; pass < 3; ++pass) {
        const WriteVoltageMap trial(p, gain);
        const auto plus = device::apply_pulse(p, {kRefState}, trial.raising(kRefInput), duration, dt);
        const auto minus =
            device::apply_pulse(p, {kRefState}, -trial.lowering(kRefInput), duration, dt);
        const double achieved = layer::synapse_weight(plus.x, minus.x, rf, p);
        if (!(achieved > 0.0)) {
            throw NumericalError("train", "write calibration produced no weight change");
        }
        gain *= target / achieved;
    }
    return WriteVoltageMap(p, gain);
}

void TrainConfig::validate() const {
    if (!(eta > 0.0)) {
        throw InvalidInput("train", "eta must be > 0");
    }
    if (epochs < 1) {
        throw InvalidInput("train", "epochs must be >= 1");
    }
    if (!(pulse_dt > 0.0) || !(tau0 > 0.0)) {
        throw InvalidInput("train", "pulse_dt and tau0 must be > 0");
    }
    if (!(write_gain >= 0.0)) {
        throw InvalidInput("train", "write_gain must be >= 0");
    }
    if (err_quant) {
        err_quant->validate();
    }
}

std::vector<std::size_t> NetworkCircuit::topology() const {
    std::vector<std::size_t> t;
    if (stages.empty()) {
        return t;
    }
    t.push_back(stages.front().n_in);
    for (const auto& st : stages) {
        t.push_back(st.n_out);
    }
    return t;
}

std::vector<std::size_t> NetworkCircuit::logical_topology() const {
    std::vector<std::size_t> t;
    if (stages.empty()) {
        return t;
    }
    t.push_back(stages.front().n_in);
    for (std::size_t k = 0; k < stages.size(); ++k) {
        if (k + 1 == stages.size() || stages[k + 1].layer != stages[k].layer) {
            t.push_back(stages[k].n_out);
        }
    }
    return t;
}

std::size_t NetworkCircuit::tile_count() const {
    std::size_t n = 0;
    for (const auto& st : stages) {
        n += st.tiles.size();
    }
    return n;
}

NetworkCircuit NetworkCircuit::slice(std::size_t first, std::size_t last) const {
    NetworkCircuit out;
    for (const auto& st : stages) {
        if (st.layer >= first && st.layer < last) {
            out.stages.push_back(st);
            out.stages.back().layer -= first;
        }
    }
    if (out.stages.empty()) {
        throw InvalidInput("train", "slice selects no layers");
    }
    return out;
}

void NetworkCircuit::validate() const {
    if (stages.empty()) {
        throw InvalidInput("train", "network has no layers");
    }
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const auto& st = stages[k];
        const std::string where = "stage " + std::to_string(k);
        if (k > 0 && st.n_in != stages[k - 1].n_out) {
            throw InvalidInput("train", where + " input width does not match the stage below");
        }
        if (k > 0 && st.layer < stages[k - 1].layer) {
            throw InvalidInput("train", where + " logical layer index decreases");
        }
        if (st.tiles.empty()) {
            throw InvalidInput("train", where + " has no tiles");
        }
        std::vector<int> cover(st.n_out, 0);
        for (const auto& t : st.tiles) {
            t.lc.validate();
            if (t.in_idx.size() != t.lc.n_in() || t.out_idx.size() != t.lc.n_out()) {
                throw InvalidInput("train", where + " tile index maps do not match its crossbar");
            }
            if (!t.mask.empty() && t.mask.size() != t.lc.n_in() * t.lc.n_out()) {
                throw InvalidInput("train", where + " tile mask has the wrong size");
            }
            for (std::size_t i : t.in_idx) {
                if (i >= st.n_in) {
                    throw InvalidInput("train", where + " tile reads a missing input");
                }
            }
            for (std::size_t j : t.out_idx) {
                if (j >= st.n_out) {
                    throw InvalidInput("train", where + " tile drives a missing output");
                }
                ++cover[j];
            }
        }
        if (std::any_of(cover.begin(), cover.end(), [](int c) { return c != 1; })) {
            throw InvalidInput("train", where + " outputs are not driven exactly once");
        }
    }
}

Stage dense_stage(layer::LayerCircuit lc, std::size_t layer) {
    Stage st;
    st.layer = layer;
    st.n_in = lc.n_in();
    st.n_out = lc.n_out();
    Tile t{std::move(lc), {}, {}, {}};
    t.in_idx.resize(st.n_in);
    std::iota(t.in_idx.begin(), t.in_idx.end(), std::size_t{0});
    t.out_idx.resize(st.n_out);
    std::iota(t.out_idx.begin(), t.out_idx.end(), std::size_t{0});
    st.tiles.push_back(std::move(t));
    return st;
}

layer::LayerCircuit init_layer(std::size_t n_in, std::size_t n_out, std::uint64_t seed,
                               const CircuitOptions& opts) {
    if (!(opts.x_init_lo >= opts.device.x_floor && opts.x_init_hi <= 1.0 &&
          opts.x_init_lo <= opts.x_init_hi)) {
        throw InvalidInput("train", "initial state band must lie inside [x_floor, 1]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(opts.x_init_lo, opts.x_init_hi);
    std::vector<double> states((n_in + 1) * 2 * n_out);
    for (auto& s : states) {
        s = std::clamp(dist(rng), opts.x_init_lo, opts.x_init_hi);
    }
    layer::LayerCircuit lc{
        xbar::Crossbar({n_in + 1, 2 * n_out, opts.wire_resistance}, opts.device, std::move(states))};
    lc.rf = opts.rf;
    lc.vdd = opts.vdd;
    lc.vss = -opts.vdd;
    lc.out_quant = opts.out_quant;
    lc.dp_quant = opts.dp_quant;
    lc.validate();
    return lc;
}

NetworkCircuit init_network(std::span<const std::size_t> topology, std::uint64_t seed,
                            const CircuitOptions& opts) {
    if (topology.size() < 2) {
        throw InvalidInput("train", "topology needs at least an input and an output width");
    }
    if (opts.limits) {
        return init_network(map::split_network(topology, *opts.limits), seed, opts);
    }
    NetworkCircuit net;
    for (std::size_t k = 0; k + 1 < topology.size(); ++k) {
        net.stages.push_back(
            dense_stage(init_layer(topology[k], topology[k + 1], derive_seed(seed, k), opts), k));
    }
    return net;
}

NetworkCircuit init_network(const map::SplitPlan& plan, std::uint64_t seed,
                            const CircuitOptions& opts) {
    const auto& topo = plan.topology;
    NetworkCircuit net;
    std::size_t tile_no = 0;
    std::size_t u = 0;
    while (u < plan.units.size()) {
        const std::size_t layer = plan.units[u].layer;
        const std::size_t stage = plan.units[u].stage;
        const std::size_t width = topo[layer + 1];
        Stage st;
        st.layer = layer;
        // Stage inputs: the layer input for stage 0, else the partials below,
        // indexed block * width + neuron.  Outputs likewise unless final.
        st.n_in = stage == 0 ? topo[layer] : plan.units[u - 1].blocks * width;
        st.n_out = plan.units[u].final ? width : plan.units[u].blocks * width;
        for (; u < plan.units.size() && plan.units[u].layer == layer &&
               plan.units[u].stage == stage;
             ++u) {
            const auto& su = plan.units[u];
            std::vector<std::size_t> in_idx;
            std::vector<std::size_t> out_idx;
            if (stage == 0) {
                for (std::size_t i = su.input_begin; i < su.input_end; ++i) {
                    in_idx.push_back(i);
                }
            } else {
                for (std::size_t n = su.neuron_begin; n < su.neuron_end; ++n) {
                    for (std::size_t b = su.input_begin; b < su.input_end; ++b) {
                        in_idx.push_back(b * width + n);
                    }
                }
            }
            for (std::size_t n = su.neuron_begin; n < su.neuron_end; ++n) {
                out_idx.push_back(su.final ? n : su.block * width + n);
            }
            Tile t{init_layer(in_idx.size(), out_idx.size(),
                              derive_seed(seed, 0xC0000ULL + tile_no++), opts),
                   std::move(in_idx), std::move(out_idx), {}};
            if (stage > 0) {
                const std::size_t group = su.input_end - su.input_begin;
                const std::size_t n_out = t.out_idx.size();
                t.mask.assign(t.in_idx.size() * n_out, 0);
                const double floor = t.lc.xb.params().x_floor;
                for (std::size_t i = 0; i < t.in_idx.size(); ++i) {
                    for (std::size_t j = 0; j < n_out; ++j) {
                        if (i / group == j) {
                            t.mask[i * n_out + j] = 1;
                        } else {
                            t.lc.xb.set_x(i, 2 * j, floor);
                            t.lc.xb.set_x(i, 2 * j + 1, floor);
                        }
                    }
                }
            }
            st.tiles.push_back(std::move(t));
        }
        net.stages.push_back(std::move(st));
    }
    net.validate();
    return net;
}

namespace {

std::vector<double> gather(std::span<const double> v, std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out[k] = v[idx[k]];
    }
    return out;
}

}  // namespace

ForwardTrace forward(const NetworkCircuit& net, std::span<const double> input, double bias_v,
                     const xbar::SolverConfig& solver) {
    ForwardTrace trace;
    trace.inputs.reserve(net.stages.size());
    trace.outputs.reserve(net.stages.size());
    std::vector<double> x(input.begin(), input.end());
    for (const auto& st : net.stages) {
        if (x.size() != st.n_in) {
            throw InvalidInput("train", "input width does not match the network");
        }
        layer::LayerOutput out;
        out.y.assign(st.n_out, 0.0);
        out.dp.assign(st.n_out, 0.0);
        out.y_analog.assign(st.n_out, 0.0);
        for (const auto& t : st.tiles) {
            const auto part = layer::evaluate_layer(t.lc, gather(x, t.in_idx), bias_v, solver);
            for (std::size_t j = 0; j < t.out_idx.size(); ++j) {
                out.y[t.out_idx[j]] = part.y[j];
                out.dp[t.out_idx[j]] = part.dp[j];
                out.y_analog[t.out_idx[j]] = part.y_analog[j];
            }
        }
        x.push_back(bias_v);
        trace.inputs.push_back(std::move(x));
        x = out.y;
        trace.outputs.push_back(std::move(out));
    }
    return trace;
}

double output_error(double t, double y, double dp, const FPrimeTable& tab,
                    const layer::Quantizer& q) {
    return layer::quantize((t - y) * tab(dp), q);
}

std::vector<double> backprop_weighted_sums(const layer::LayerCircuit& lc,
                                           std::span<const double> delta_next,
                                           const xbar::SolverConfig& solver) {
    if (delta_next.size() != lc.n_out()) {
        throw InvalidInput("train", "backprop: error vector size does not match the layer");
    }
    const std::size_t m = lc.xb.rows();
    const std::size_t n = lc.xb.cols();
    std::vector<double> out(lc.n_in(), 0.0);
    if (std::all_of(delta_next.begin(), delta_next.end(), [](double d) { return d == 0.0; })) {
        return out;
    }
    // Transposed row r is original column n-1-r; transposed column k is original row m-1-k.
    const auto transposed = lc.xb.transposed_for_backward();
    std::vector<double> drive(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t col = n - 1 - r;
        const double d = delta_next[col / 2];
        drive[r] = col % 2 == 0 ? d : -d;
    }
    xbar::SolverConfig cfg = solver;
    cfg.record_nodes = false;
    const auto sol = xbar::solve_jacobi(transposed, drive, cfg);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 4.0 * lc.rf * sol.column_currents[m - 1 - i];
    }
    return out;
}

std::vector<double> backprop_errors_crossbar(const layer::LayerCircuit& lc,
                                             std::span<const double> delta_next,
                                             std::span<const double> dp_prev,
                                             const FPrimeTable& tab,
                                             const xbar::SolverConfig& solver,
                                             const layer::Quantizer& q) {
    if (delta_next.size() != lc.n_out() || dp_prev.size() != lc.n_in()) {
        throw InvalidInput("train", "backprop: error/DP vector sizes do not match the layer");
    }
    auto out = backprop_weighted_sums(lc, delta_next, solver);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = out[i] == 0.0 ? 0.0 : layer::quantize(out[i] * tab(dp_prev[i]), q);
    }
    return out;
}

UpdateStats weight_update(layer::LayerCircuit& lc, std::span<const double> inputs,
                          std::span<const double> deltas, const TrainConfig& cfg,
                          const WriteVoltageMap& map, std::span<const std::uint8_t> mask) {
    if (inputs.size() != lc.xb.rows() || deltas.size() != lc.n_out()) {
        throw InvalidInput("train", "weight_update: input/error sizes do not match the layer");
    }
    if (!mask.empty() && mask.size() != lc.n_in() * lc.n_out()) {
        throw InvalidInput("train", "weight_update: mask size does not match the layer");
    }
    const auto& p = lc.xb.params();
    const std::size_t n_out = deltas.size();
    UpdateStats stats;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double xi = inputs[i];
        if (xi == 0.0) {
            continue;
        }
        const double v_up = map.raising(xi);
        const double v_down = -map.lowering(xi);
        const double g_up = device::threshold_drive(p, v_up);
        const double g_down = device::threshold_drive(p, v_down);
        const bool masked_row = !mask.empty() && i < lc.n_in();
        for (std::size_t j = 0; j < n_out; ++j) {
            const double d = deltas[j];
            if (d == 0.0 || (masked_row && mask[i * n_out + j] == 0)) {
                continue;
            }
            const double duration = cfg.tau0 * std::abs(cfg.eta * d);
            const bool raise_plus = (xi > 0.0) == (d > 0.0);
            // Phase 1 drives sigma+, phase 2 drives sigma- the opposite way.
            const auto plus = device::apply_drive(p, lc.xb.state(i, 2 * j),
                                                  raise_plus ? v_up : v_down,
                                                  raise_plus ? g_up : g_down, duration, cfg.pulse_dt);
            const auto minus = device::apply_drive(p, lc.xb.state(i, 2 * j + 1),
                                                   raise_plus ? v_down : v_up,
                                                   raise_plus ? g_down : g_up, duration, cfg.pulse_dt);
            stats.pulses += 2;
            stats.saturations += static_cast<std::size_t>(plus.clamped) +
                                 static_cast<std::size_t>(minus.clamped);
            double xp = plus.state.x;
            double xm = minus.state.x;
            if (cfg.rebalance && (plus.clamped || minus.clamped)) {
                const double diff = xp - xm;
                const double base = p.x_floor;
                if (std::abs(diff) + base <= 1.0) {
                    xp = diff > 0.0 ? base + diff : base;
                    xm = diff > 0.0 ? base : base - diff;
                }
            }
            lc.xb.set_x(i, 2 * j, xp);
            lc.xb.set_x(i, 2 * j + 1, xm);
        }
    }
    return stats;
}

namespace {

WriteVoltageMap make_write_map(const NetworkCircuit& net, const TrainConfig& cfg) {
    const auto& lc = net.stages.at(0).tiles.at(0).lc;
    return cfg.write_gain > 0.0
               ? WriteVoltageMap(lc.xb.params(), cfg.write_gain)
               : WriteVoltageMap::calibrate(lc.xb.params(), lc.rf, cfg.tau0, cfg.pulse_dt);
}

}  // namespace

Trainer::Trainer(NetworkCircuit& net, TrainConfig cfg, xbar::SolverConfig solver)
    : net_(net), cfg_(std::move(cfg)), solver_(solver), map_(make_write_map(net, cfg_)) {
    cfg_.validate();
    solver_.validate();
    net_.validate();
    map_.validate();
    for (const auto& st : net_.stages) {
        tables_.emplace_back(st.tiles.front().lc.dp_quant);
    }
}

ErrorSignals Trainer::errors(std::span<const double> input, std::span<const double> target) const {
    const auto& stages = net_.stages;
    if (input.size() != stages.front().n_in || target.size() != stages.back().n_out) {
        throw InvalidInput("train", "sample dimensions do not match the network topology");
    }
    ErrorSignals sig;
    sig.trace = forward(net_, input, cfg_.bias_v, solver_);
    const auto& top = sig.trace.outputs.back();
    const std::size_t n_stages = stages.size();
    sig.deltas.resize(n_stages);
    auto& d_out = sig.deltas.back();
    d_out.resize(target.size());
    double sq = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
        const double e = target[j] - top.y_analog[j];
        sq += e * e;
        d_out[j] = output_error(target[j], top.y_analog[j], top.dp[j], tables_.back(),
                                cfg_.err_quant);
    }
    sig.mse = sq / static_cast<double>(target.size());
    for (std::size_t k = n_stages - 1; k > 0; --k) {
        const auto& st = stages[k];
        const auto& dp_prev = sig.trace.outputs[k - 1].dp;
        auto& below = sig.deltas[k - 1];
        if (st.tiles.size() == 1 && st.tiles.front().mask.empty()) {
            below = backprop_errors_crossbar(st.tiles.front().lc, sig.deltas[k], dp_prev,
                                             tables_[k - 1], solver_, cfg_.err_quant);
            continue;
        }
        // Every tile returns sums for the inputs it reads; inputs shared by
        // several tiles add up before f' and the error ADC.
        std::vector<double> sums(st.n_in, 0.0);
        for (const auto& t : st.tiles) {
            const auto part =
                backprop_weighted_sums(t.lc, gather(sig.deltas[k], t.out_idx), solver_);
            for (std::size_t i = 0; i < part.size(); ++i) {
                sums[t.in_idx[i]] += part[i];
            }
        }
        below.resize(st.n_in);
        for (std::size_t i = 0; i < st.n_in; ++i) {
            below[i] = sums[i] == 0.0
                           ? 0.0
                           : layer::quantize(sums[i] * tables_[k - 1](dp_prev[i]), cfg_.err_quant);
        }
    }
    return sig;
}

double Trainer::step(std::span<const double> input, std::span<const double> target) {
    const auto sig = errors(input, target);
    for (std::size_t k = 0; k < net_.stages.size(); ++k) {
        auto& st = net_.stages[k];
        const auto& x = sig.trace.inputs[k];
        for (auto& t : st.tiles) {
            auto xin = gather(x, t.in_idx);
            xin.push_back(x.back());
            stats_ += weight_update(t.lc, xin, gather(sig.deltas[k], t.out_idx), cfg_, map_, t.mask);
        }
    }
    return sig.mse;
}

std::vector<double> Trainer::fit(const Matrix& inputs, const Matrix& targets) {
    if (inputs.rows() != targets.rows() || inputs.rows() == 0) {
        throw InvalidInput("train", "fit needs equal, non-zero sample counts");
    }
    std::vector<std::size_t> order(inputs.rows());
    std::vector<double> curve;
    for (std::size_t e = 0; e < cfg_.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(cfg_.seed, 0x5EED0000ULL + epochs_done_));
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t idx : order) {
            total += step(inputs.row(idx), targets.row(idx));
        }
        ++epochs_done_;
        curve.push_back(total / static_cast<double>(order.size()));
        if (cfg_.target_mse > 0.0 && curve.back() <= cfg_.target_mse) {
            break;
        }
    }
    return curve;
}

double train_step(NetworkCircuit& net, std::span<const double> input,
                  std::span<const double> target, const TrainConfig& cfg,
                  const xbar::SolverConfig& solver) {
    Trainer trainer(net, cfg, solver);
    return trainer.step(input, target);
}

AutoencoderResult train_autoencoder(const Matrix& data, std::size_t hidden, const TrainConfig& cfg,
                                    const xbar::SolverConfig& solver, const CircuitOptions& opts) {
    const std::size_t width = data.cols();
    const std::vector<std::size_t> topo{width, hidden, width};
    AutoencoderResult r{init_network(topo, cfg.seed, opts), {}};
    Trainer trainer(r.net, cfg, solver);
    r.mse_curve = trainer.fit(data, data);
    return r;
}

NetworkCircuit pretrain_stack(std::span<const std::size_t> topology, const Matrix& data,
                              const TrainConfig& cfg, const xbar::SolverConfig& solver,
                              const CircuitOptions& opts, std::vector<std::vector<double>>* curves) {
    if (topology.size() < 3) {
        throw InvalidInput("train", "pretraining needs at least one hidden layer");
    }
    if (data.cols() != topology.front()) {
        throw InvalidInput("train", "data width does not match the topology input width");
    }
    NetworkCircuit stack;
    Matrix rep = data;
    for (std::size_t k = 1; k + 1 < topology.size(); ++k) {
        TrainConfig stage = cfg;
        stage.seed = k == 1 ? cfg.seed : derive_seed(cfg.seed, 0xA0000ULL + k);
        const auto ae = train_autoencoder(rep, topology[k], stage, solver, opts);
        const auto encoder = ae.encoder();
        if (curves != nullptr) {
            curves->push_back(ae.mse_curve);
        }
        if (k + 2 < topology.size()) {
            rep = represent(encoder, rep, cfg.bias_v, solver);
        }
        for (auto st : encoder.stages) {
            st.layer = k - 1;
            stack.stages.push_back(std::move(st));
        }
    }
    const std::size_t last = topology.size() - 2;
    const std::vector<std::size_t> out_topo{topology[last], topology[last + 1]};
    auto head = init_network(out_topo, derive_seed(cfg.seed, 0xB0000ULL), opts);
    for (auto st : head.stages) {
        st.layer = last;
        stack.stages.push_back(std::move(st));
    }
    stack.validate();
    return stack;
}

Matrix represent(const NetworkCircuit& net, const Matrix& data, double bias_v,
                 const xbar::SolverConfig& solver) {
    Matrix out(data.rows(), net.stages.back().n_out);
    for (std::size_t s = 0; s < data.rows(); ++s) {
        const auto trace = forward(net, data.row(s), bias_v, solver);
        std::copy(trace.outputs.back().y.begin(), trace.outputs.back().y.end(), out.row(s).begin());
    }
    return out;
}

Matrix predict(const NetworkCircuit& net, const Matrix& data, double bias_v,
               const xbar::SolverConfig& solver) {
    Matrix out(data.rows(), net.stages.back().n_out);
    for (std::size_t s = 0; s < data.rows(); ++s) {
        const auto trace = forward(net, data.row(s), bias_v, solver);
        const auto& y = trace.outputs.back().y_analog;
        std::copy(y.begin(), y.end(), out.row(s).begin());
    }
    return out;
}

double evaluate_mse(const NetworkCircuit& net, const Matrix& inputs, const Matrix& targets,
                    double bias_v, const xbar::SolverConfig& solver) {
    const Matrix y = predict(net, inputs, bias_v, solver);
    if (targets.rows() != y.rows() || targets.cols() != y.cols()) {
        throw InvalidInput("train", "target matrix shape does not match the network output");
    }
    double total = 0.0;
    for (std::size_t s = 0; s < y.rows(); ++s) {
        double sq = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) {
            const double e = targets(s, j) - y(s, j);
            sq += e * e;
        }
        total += sq / static_cast<double>(y.cols());
    }
    return total / static_cast<double>(y.rows());
}

}  // namespace memcore::train
