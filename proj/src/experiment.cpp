#include "memcore/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include "memcore/checkpoint.hpp"
#include "memcore/error.hpp"
#include "memcore/json_io.hpp"
#include "memcore/software_net.hpp"
#include "memcore/synthetic.hpp"

namespace memcore::harness {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Mode mode_from_string(const std::string& s) {
    if (s == "classify") return Mode::classify;
    if (s == "autoencoder") return Mode::autoencoder;
    if (s == "anomaly") return Mode::anomaly;
    if (s == "plan") return Mode::plan;
    throw ConfigError("harness", "unknown mode '" + s + "'");
}

const char* to_string(CategoricalEncoding e) {
    switch (e) {
        case CategoricalEncoding::none: return "none";
        case CategoricalEncoding::index: return "index";
        case CategoricalEncoding::one_hot: return "one_hot";
    }
    return "?";
}

CategoricalEncoding encoding_from_string(const std::string& s) {
    if (s == "none") return CategoricalEncoding::none;
    if (s == "index") return CategoricalEncoding::index;
    if (s == "one_hot") return CategoricalEncoding::one_hot;
    throw ConfigError("harness", "unknown categorical encoding '" + s + "'");
}

template <class T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) {
        dst = j.at(key).get<T>();
    }
}

json costs_to_json(const cost::CostTables& t) {
    return {{"t_fwd", t.t_fwd},
            {"t_bwd", t.t_bwd},
            {"t_upd", t.t_upd},
            {"p_fwd", t.p_fwd},
            {"p_bwd", t.p_bwd},
            {"p_upd", t.p_upd},
            {"p_ctrl", t.p_ctrl},
            {"io_bit", t.io_bit},
            {"route_clock", t.route_clock},
            {"xbar_latency", t.xbar_latency},
            {"core_area", t.core_area},
            {"risc_area", t.risc_area},
            {"residual_area", t.residual_area},
            {"recog_core_energy", t.recog_core_energy},
            {"recog_pipeline_overhead", t.recog_pipeline_overhead}};
}

cost::CostTables costs_from_json(const json& j, cost::CostTables t) {
    jsonio::require_keys(j,
                         {"t_fwd", "t_bwd", "t_upd", "p_fwd", "p_bwd", "p_upd", "p_ctrl",
                          "io_bit", "route_clock", "xbar_latency", "core_area", "risc_area",
                          "residual_area", "recog_core_energy", "recog_pipeline_overhead"},
                         "costs");
    read(j, "t_fwd", t.t_fwd);
    read(j, "t_bwd", t.t_bwd);
    read(j, "t_upd", t.t_upd);
    read(j, "p_fwd", t.p_fwd);
    read(j, "p_bwd", t.p_bwd);
    read(j, "p_upd", t.p_upd);
    read(j, "p_ctrl", t.p_ctrl);
    read(j, "io_bit", t.io_bit);
    read(j, "route_clock", t.route_clock);
    read(j, "xbar_latency", t.xbar_latency);
    read(j, "core_area", t.core_area);
    read(j, "risc_area", t.risc_area);
    read(j, "residual_area", t.residual_area);
    read(j, "recog_core_energy", t.recog_core_energy);
    read(j, "recog_pipeline_overhead", t.recog_pipeline_overhead);
    return t;
}

json data_to_json(const DataConfig& d) {
    json j = {{"source", d.source},
              {"train_samples", d.train_samples},
              {"test_samples", d.test_samples},
              {"side", d.side},
              {"images", d.images},
              {"labels", d.labels},
              {"test_images", d.test_images},
              {"test_labels", d.test_labels},
              {"csv", d.csv},
              {"categorical", to_string(d.categorical)},
              {"header", d.header},
              {"test_fraction", d.test_fraction},
              {"anomaly_features", d.anomaly_features},
              {"anomaly_sigma", d.anomaly_sigma}};
    j["label_column"] = d.label_column ? json(*d.label_column) : json(nullptr);
    return j;
}

DataConfig data_from_json(const json& j, DataConfig d) {
    jsonio::require_keys(j,
                         {"source", "train_samples", "test_samples", "side", "images", "labels",
                          "test_images", "test_labels", "csv", "label_column", "categorical",
                          "header", "test_fraction", "anomaly_features", "anomaly_sigma"},
                         "data");
    read(j, "source", d.source);
    read(j, "train_samples", d.train_samples);
    read(j, "test_samples", d.test_samples);
    read(j, "side", d.side);
    read(j, "images", d.images);
    read(j, "labels", d.labels);
    read(j, "test_images", d.test_images);
    read(j, "test_labels", d.test_labels);
    read(j, "csv", d.csv);
    if (j.contains("label_column")) {
        const auto& v = j.at("label_column");
        d.label_column = v.is_null() ? std::nullopt
                                     : std::optional<std::size_t>(v.get<std::size_t>());
    }
    if (j.contains("categorical")) {
        d.categorical = encoding_from_string(j.at("categorical").get<std::string>());
    }
    read(j, "header", d.header);
    read(j, "test_fraction", d.test_fraction);
    read(j, "anomaly_features", d.anomaly_features);
    read(j, "anomaly_sigma", d.anomaly_sigma);
    return d;
}

json train_to_json(const train::TrainConfig& t) {
    return {{"eta", t.eta},
            {"epochs", t.epochs},
            {"err_quant", jsonio::quantizer_to_json(t.err_quant)},
            {"pulse_dt", t.pulse_dt},
            {"tau0", t.tau0},
            {"write_gain", t.write_gain},
            {"target_mse", t.target_mse},
            {"rebalance", t.rebalance},
            {"bias_v", t.bias_v}};
}

train::TrainConfig train_from_json(const json& j, train::TrainConfig t) {
    jsonio::require_keys(j,
                         {"eta", "epochs", "err_quant", "pulse_dt", "tau0", "write_gain",
                          "target_mse", "rebalance", "bias_v"},
                         "train");
    read(j, "eta", t.eta);
    read(j, "epochs", t.epochs);
    if (j.contains("err_quant")) {
        t.err_quant = jsonio::quantizer_from_json(j.at("err_quant"));
    }
    read(j, "pulse_dt", t.pulse_dt);
    read(j, "tau0", t.tau0);
    read(j, "write_gain", t.write_gain);
    read(j, "target_mse", t.target_mse);
    read(j, "rebalance", t.rebalance);
    read(j, "bias_v", t.bias_v);
    return t;
}

json circuit_to_json(const train::CircuitOptions& c) {
    return {{"device", jsonio::device_to_json(c.device)},
            {"wire_resistance", c.wire_resistance},
            {"rf", c.rf},
            {"vdd", c.vdd},
            {"out_quant", jsonio::quantizer_to_json(c.out_quant)},
            {"dp_quant", jsonio::quantizer_to_json(c.dp_quant)},
            {"x_init_lo", c.x_init_lo},
            {"x_init_hi", c.x_init_hi}};
}

train::CircuitOptions circuit_from_json(const json& j, train::CircuitOptions c) {
    jsonio::require_keys(j,
                         {"device", "wire_resistance", "rf", "vdd", "out_quant", "dp_quant",
                          "x_init_lo", "x_init_hi"},
                         "circuit");
    if (j.contains("device")) {
        c.device = jsonio::device_from_json(j.at("device"), c.device);
    }
    read(j, "wire_resistance", c.wire_resistance);
    read(j, "rf", c.rf);
    read(j, "vdd", c.vdd);
    if (j.contains("out_quant")) {
        c.out_quant = jsonio::quantizer_from_json(j.at("out_quant"));
    }
    if (j.contains("dp_quant")) {
        c.dp_quant = jsonio::quantizer_from_json(j.at("dp_quant"));
    }
    read(j, "x_init_lo", c.x_init_lo);
    read(j, "x_init_hi", c.x_init_hi);
    return c;
}

json solver_to_json(const xbar::SolverConfig& s) {
    return {{"tolerance", s.tolerance},
            {"max_iterations", s.max_iterations},
            {"conduction", s.conduction == xbar::ConductionMode::sinh ? "sinh" : "linearized"},
            {"sweep", s.sweep == xbar::SweepKind::node ? "node" : "line"}};
}

xbar::SolverConfig solver_from_json(const json& j, xbar::SolverConfig s) {
    jsonio::require_keys(j, {"tolerance", "max_iterations", "conduction", "sweep"}, "solver");
    read(j, "tolerance", s.tolerance);
    read(j, "max_iterations", s.max_iterations);
    if (j.contains("conduction")) {
        const auto v = j.at("conduction").get<std::string>();
        if (v == "sinh") {
            s.conduction = xbar::ConductionMode::sinh;
        } else if (v == "linearized") {
            s.conduction = xbar::ConductionMode::linearized;
        } else {
            throw ConfigError("harness", "unknown conduction mode '" + v + "'");
        }
    }
    if (j.contains("sweep")) {
        const auto v = j.at("sweep").get<std::string>();
        if (v == "line") {
            s.sweep = xbar::SweepKind::line;
        } else if (v == "node") {
            s.sweep = xbar::SweepKind::node;
        } else {
            throw ConfigError("harness", "unknown sweep kind '" + v + "'");
        }
    }
    return s;
}

ExperimentConfig apply_json(const json& j, ExperimentConfig c) {
    jsonio::require_keys(j,
                         {"preset", "name", "mode", "topology", "seed", "data", "train",
                          "pretrain_epochs", "stop_fraction", "circuit", "constrained", "solver",
                          "limits", "mesh", "costs", "cost_app", "io_calibration",
                          "compare_software", "constraint_study", "out_dir"},
                         "config");
    if (j.contains("preset")) {
        c = preset(j.at("preset").get<std::string>());
    }
    read(j, "name", c.name);
    if (j.contains("mode")) {
        c.mode = mode_from_string(j.at("mode").get<std::string>());
    }
    read(j, "topology", c.topology);
    read(j, "seed", c.seed);
    if (j.contains("data")) {
        c.data = data_from_json(j.at("data"), c.data);
    }
    if (j.contains("train")) {
        c.train = train_from_json(j.at("train"), c.train);
    }
    read(j, "pretrain_epochs", c.pretrain_epochs);
    read(j, "stop_fraction", c.stop_fraction);
    if (j.contains("circuit")) {
        c.circuit = circuit_from_json(j.at("circuit"), c.circuit);
    }
    read(j, "constrained", c.constrained);
    if (j.contains("solver")) {
        c.solver = solver_from_json(j.at("solver"), c.solver);
    }
    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        jsonio::require_keys(l, {"max_inputs", "max_neurons"}, "limits");
        read(l, "max_inputs", c.limits.max_inputs);
        read(l, "max_neurons", c.limits.max_neurons);
    }
    if (j.contains("mesh")) {
        const auto& m = j.at("mesh");
        jsonio::require_keys(m, {"rows", "cols"}, "mesh");
        read(m, "rows", c.mesh.rows);
        read(m, "cols", c.mesh.cols);
    }
    if (j.contains("costs")) {
        c.costs = costs_from_json(j.at("costs"), c.costs);
    }
    read(j, "cost_app", c.cost_app);
    if (j.contains("io_calibration")) {
        const auto& v = j.at("io_calibration");
        c.io_calibration = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
    read(j, "compare_software", c.compare_software);
    read(j, "constraint_study", c.constraint_study);
    read(j, "out_dir", c.out_dir);
    return c;
}

// ---- data ----

struct Split {
    Matrix x_train;
    std::vector<int> y_train;
    Matrix x_test;
    std::vector<int> y_test;
    Matrix anomalies;  // anomaly mode only
};

Matrix head_rows(const Matrix& m, std::size_t first, std::size_t last) {
    Matrix out(last - first, m.cols());
    for (std::size_t r = first; r < last; ++r) {
        std::copy(m.row(r).begin(), m.row(r).end(), out.row(r - first).begin());
    }
    return out;
}

Matrix digits_at_side(const Matrix& images, std::size_t side) {
    return side == 28 ? images : downsample(images, 28, side);
}

Split load_split(const ExperimentConfig& cfg) {
    const auto& d = cfg.data;
    Split s;
    if (d.source == "synthetic-digits") {
        DigitOptions opts;
        auto train = synthetic_digits(d.train_samples, mix(cfg.seed, 1), opts);
        auto test = synthetic_digits(d.test_samples, mix(cfg.seed, 2), opts);
        s.x_train = digits_at_side(train.features, d.side);
        s.y_train = std::move(train.labels);
        s.x_test = digits_at_side(test.features, d.side);
        s.y_test = std::move(test.labels);
    } else if (d.source == "synthetic-traffic") {
        TrafficOptions opts;
        opts.features = cfg.topology.front();
        MinMaxScaler scaler;
        s.x_train = synthetic_traffic(d.train_samples, mix(cfg.seed, 1), scaler, opts);
        s.x_test = synthetic_traffic(d.test_samples, mix(cfg.seed, 2), scaler, opts);
    } else if (d.source == "idx") {
        if (d.images.empty() || d.labels.empty()) {
            throw ConfigError("harness", "idx source needs data.images and data.labels");
        }
        auto train = load_idx(d.images, d.labels, d.train_samples);
        s.x_train = digits_at_side(train.features, d.side);
        s.y_train = std::move(train.labels);
        if (!d.test_images.empty()) {
            if (d.test_labels.empty()) {
                throw ConfigError("harness", "data.test_images needs data.test_labels");
            }
            auto test = load_idx(d.test_images, d.test_labels, d.test_samples);
            s.x_test = digits_at_side(test.features, d.side);
            s.y_test = std::move(test.labels);
        } else {
            const std::size_t n = s.x_train.rows();
            const auto cut = n - static_cast<std::size_t>(std::floor(d.test_fraction * n));
            s.x_test = head_rows(s.x_train, cut, n);
            s.y_test.assign(s.y_train.begin() + cut, s.y_train.end());
            s.x_train = head_rows(s.x_train, 0, cut);
            s.y_train.resize(cut);
        }
    } else if (d.source == "csv") {
        if (d.csv.empty()) {
            throw ConfigError("harness", "csv source needs data.csv");
        }
        CsvOptions opts;
        opts.label_column = d.label_column;
        opts.categorical = d.categorical;
        opts.header = d.header;
        auto table = load_csv_table(d.csv, opts);
        const std::size_t n = table.raw.rows();
        const auto cut = n - static_cast<std::size_t>(std::floor(d.test_fraction * n));
        if (cut == 0 || cut == n) {
            throw ConfigError("harness", "csv test_fraction leaves an empty split");
        }
        MinMaxScaler scaler;
        const auto raw_train = head_rows(table.raw, 0, cut);
        scaler.fit(raw_train);
        s.x_train = scaler.transform(raw_train);
        s.x_test = scaler.transform(head_rows(table.raw, cut, n));
        if (!table.labels.empty()) {
            s.y_train.assign(table.labels.begin(), table.labels.begin() + cut);
            s.y_test.assign(table.labels.begin() + cut, table.labels.end());
        }
    } else {
        throw ConfigError("harness", "unknown data source '" + d.source + "'");
    }
    if (s.x_train.cols() != cfg.topology.front()) {
        throw ConfigError("harness", "data has " + std::to_string(s.x_train.cols()) +
                                         " features but the topology expects " +
                                         std::to_string(cfg.topology.front()));
    }
    if (s.x_train.rows() == 0 || s.x_test.rows() == 0) {
        throw ConfigError("harness", "empty training or test split");
    }
    if (cfg.mode == Mode::anomaly) {
        s.anomalies = inject_anomalies(s.x_test, d.anomaly_features, d.anomaly_sigma,
                                       mix(cfg.seed, 3));
    }
    return s;
}

std::vector<double> row_mse(const Matrix& out, const Matrix& target) {
    std::vector<double> e(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < out.cols(); ++c) {
            const double d = out(r, c) - target(r, c);
            acc += d * d;
        }
        e[r] = acc / static_cast<double>(out.cols());
    }
    return e;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double fraction_above(const std::vector<double>& v, double threshold) {
    const auto hits = std::count_if(v.begin(), v.end(), [&](double e) { return e > threshold; });
    return static_cast<double>(hits) / static_cast<double>(v.size());
}

// Effective circuit options for a run: core limits and the named ADCs
// only when constrained.
train::CircuitOptions circuit_for(const ExperimentConfig& cfg) {
    auto opts = cfg.circuit;
    if (cfg.constrained) {
        opts.limits = cfg.limits;
    } else {
        opts.limits.reset();
        opts.out_quant.reset();
    }
    return opts;
}

train::TrainConfig train_for(const ExperimentConfig& cfg) {
    auto t = cfg.train;
    t.seed = cfg.seed;
    if (!cfg.constrained) {
        t.err_quant.reset();
    }
    return t;
}

train::NetworkCircuit pretrain(const ExperimentConfig& cfg, const Matrix& x, Metrics& m) {
    auto pcfg = train_for(cfg);
    pcfg.epochs = cfg.pretrain_epochs;
    pcfg.target_mse = 0.0;
    std::vector<std::vector<double>> curves;
    auto net = train::pretrain_stack(cfg.topology, x, pcfg, cfg.solver, circuit_for(cfg), &curves);
    for (const auto& c : curves) {
        m.pretrain_final_mse.push_back(c.empty() ? 0.0 : c.back());
    }
    return net;
}

void run_classify(const ExperimentConfig& cfg, const Split& s, ExperimentResult& r) {
    const auto classes = cfg.topology.back();
    for (const auto* labels : {&s.y_train, &s.y_test}) {
        if (labels->size() == 0) {
            throw ConfigError("harness", "classification needs labeled data");
        }
        for (int l : *labels) {
            if (l < 0 || static_cast<std::size_t>(l) >= classes) {
                throw ConfigError("harness", "label " + std::to_string(l) + " outside " +
                                                 std::to_string(classes) + " output classes");
            }
        }
    }
    const auto opts = circuit_for(cfg);
    auto tcfg = train_for(cfg);
    const auto targets = one_hot(s.y_train, classes);

    auto net = cfg.pretrain_epochs > 0 && cfg.topology.size() >= 3
                   ? pretrain(cfg, s.x_train, r.metrics)
                   : train::init_network(cfg.topology, mix(cfg.seed, 4), opts);
    const double bias = tcfg.bias_v;
    r.metrics.initial_mse = train::evaluate_mse(net, s.x_train, targets, bias, cfg.solver);
    train::Trainer trainer(net, tcfg, cfg.solver);
    r.metrics.mse_curve = trainer.fit(s.x_train, targets);
    r.metrics.pulses = trainer.stats().pulses;
    r.metrics.saturations = trainer.stats().saturations;
    r.metrics.final_mse = train::evaluate_mse(net, s.x_train, targets, bias, cfg.solver);
    r.metrics.accuracy = accuracy(train::predict(net, s.x_test, bias, cfg.solver), s.y_test);

    if (cfg.compare_software) {
        train::SoftwareNet sw(cfg.topology, mix(cfg.seed, 5), 0.5, bias);
        if (cfg.pretrain_epochs > 0) {
            sw.pretrain(s.x_train, cfg.pretrain_epochs, cfg.train.eta, mix(cfg.seed, 6));
        }
        sw.fit(s.x_train, targets, cfg.train.epochs, cfg.train.eta, mix(cfg.seed, 7));
        Matrix pred(s.x_test.rows(), classes);
        for (std::size_t i = 0; i < s.x_test.rows(); ++i) {
            const auto y = sw.predict(s.x_test.row(i));
            std::copy(y.begin(), y.end(), pred.row(i).begin());
        }
        r.metrics.software_accuracy = accuracy(pred, s.y_test);
    }
    if (cfg.constraint_study && cfg.constrained) {
        auto free_cfg = cfg;
        free_cfg.constrained = false;
        free_cfg.compare_software = false;
        free_cfg.constraint_study = false;
        const auto free_run = run_experiment(free_cfg);
        r.metrics.unconstrained_accuracy = free_run.metrics.accuracy;
    }
    r.metrics.tiles = net.tile_count();
    r.net = std::move(net);
}

void keep_reconstructions(const train::NetworkCircuit& net, const Matrix& x, double bias,
                          const xbar::SolverConfig& solver, ExperimentResult& r) {
    const auto n = std::min<std::size_t>(10, x.rows());
    r.recon_inputs = head_rows(x, 0, n);
    r.recon_outputs = train::predict(net, r.recon_inputs, bias, solver);
}

void run_autoencoder(const ExperimentConfig& cfg, const Split& s, ExperimentResult& r) {
    const auto opts = circuit_for(cfg);
    auto tcfg = train_for(cfg);
    const double bias = tcfg.bias_v;
    auto net = train::init_network(cfg.topology, mix(cfg.seed, 4), opts);
    const double initial = train::evaluate_mse(net, s.x_train, s.x_train, bias, cfg.solver);
    r.metrics.initial_mse = initial;
    if (cfg.stop_fraction > 0.0) {
        tcfg.target_mse = cfg.stop_fraction * initial;
    }
    train::Trainer trainer(net, tcfg, cfg.solver);
    r.metrics.mse_curve = trainer.fit(s.x_train, s.x_train);
    r.metrics.pulses = trainer.stats().pulses;
    r.metrics.saturations = trainer.stats().saturations;
    r.metrics.final_mse = train::evaluate_mse(net, s.x_train, s.x_train, bias, cfg.solver);
    r.metrics.reconstruction_error =
        train::evaluate_mse(net, s.x_test, s.x_test, bias, cfg.solver);

    if (cfg.mode == Mode::anomaly) {
        const auto train_err =
            row_mse(train::predict(net, s.x_train, bias, cfg.solver), s.x_train);
        const double mean = mean_of(train_err);
        double var = 0.0;
        for (double e : train_err) {
            var += (e - mean) * (e - mean);
        }
        var /= static_cast<double>(train_err.size());
        const double threshold = mean + 2.0 * std::sqrt(var);
        r.metrics.anomaly_threshold = threshold;

        const auto normal_err =
            row_mse(train::predict(net, s.x_test, bias, cfg.solver), s.x_test);
        const auto anomaly_err =
            row_mse(train::predict(net, s.anomalies, bias, cfg.solver), s.anomalies);
        r.metrics.false_positive_rate = fraction_above(normal_err, threshold);
        r.metrics.detection_rate = fraction_above(anomaly_err, threshold);

        auto sorted = normal_err;
        std::sort(sorted.begin(), sorted.end());
        const auto k = static_cast<std::size_t>(std::ceil(0.9 * sorted.size())) - 1;
        r.metrics.above_p90_rate = fraction_above(anomaly_err, sorted[k]);
    }
    keep_reconstructions(net, s.x_test, bias, cfg.solver, r);
    r.metrics.tiles = net.tile_count();
    r.net = std::move(net);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw InvalidInput("harness", "cannot write " + p.string());
    }
    out << text;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string reconstruction_csv(const Matrix& in, const Matrix& out) {
    std::ostringstream os;
    const auto dims = in.cols();
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dims))));
    if (side * side == dims) {
        // Image grid: inputs side by side on top, reconstructions below.
        for (const Matrix* m : {&in, &out}) {
            for (std::size_t y = 0; y < side; ++y) {
                for (std::size_t k = 0; k < m->rows(); ++k) {
                    for (std::size_t x = 0; x < side; ++x) {
                        if (k + x > 0) {
                            os << ',';
                        }
                        os << fmt((*m)(k, y * side + x));
                    }
                }
                os << '\n';
            }
        }
        return os.str();
    }
    os << "sample,kind";
    for (std::size_t c = 0; c < dims; ++c) {
        os << ",v" << c;
    }
    os << '\n';
    for (std::size_t k = 0; k < in.rows(); ++k) {
        for (const auto& [m, kind] : {std::pair{&in, "input"}, std::pair{&out, "output"}}) {
            os << k << ',' << kind;
            for (std::size_t c = 0; c < dims; ++c) {
                os << ',' << fmt((*m)(k, c));
            }
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace

const char* to_string(Mode m) noexcept {
    switch (m) {
        case Mode::classify: return "classify";
        case Mode::autoencoder: return "autoencoder";
        case Mode::anomaly: return "anomaly";
        case Mode::plan: return "plan";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (topology.size() < 2) {
        throw ConfigError("harness", "topology needs at least two layer widths");
    }
    if (std::find(topology.begin(), topology.end(), 0u) != topology.end()) {
        throw ConfigError("harness", "topology widths must be >= 1");
    }
    if ((mode == Mode::autoencoder || mode == Mode::anomaly) &&
        (topology.size() != 3 || topology.front() != topology.back())) {
        throw ConfigError("harness", std::string(to_string(mode)) +
                                         " mode needs a width -> hidden -> width topology");
    }
    if (!(stop_fraction >= 0.0 && stop_fraction < 1.0)) {
        throw ConfigError("harness", "stop_fraction must be in [0, 1)");
    }
    if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
        throw ConfigError("harness", "data.test_fraction must be in (0, 1)");
    }
    if (mode != Mode::plan) {
        if (data.train_samples == 0 || data.test_samples == 0) {
            if (data.source.rfind("synthetic", 0) == 0) {
                throw ConfigError("harness", "synthetic sources need train and test samples");
            }
        }
        if (data.side < 1 || data.side > 28) {
            throw ConfigError("harness", "data.side must be in [1, 28]");
        }
    }
    if (!cost_app.empty()) {
        try {
            (void)cost::app_profile(cost_app);
        } catch (const InvalidInput& e) {
            throw ConfigError("harness", e.what());
        }
    }
    if (mesh.rows == 0 || mesh.cols == 0) {
        throw ConfigError("harness", "mesh dimensions must be >= 1");
    }
    try {
        train.validate();
        solver.validate();
        limits.validate();
        costs.validate();
        circuit.device.validate();
        if (circuit.out_quant) circuit.out_quant->validate();
        if (circuit.dp_quant) circuit.dp_quant->validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.module(), e.what());
    }
}

std::vector<std::string> preset_names() {
    return {"digits-desk", "mnist-ae", "mnist-deep", "mnist-table1", "isolet", "kdd", "caltech"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    c.train.eta = 0.2;
    if (name == "digits-desk") {
        c.mode = Mode::classify;
        c.topology = {64, 32, 16, 10};
        c.data.side = 8;
        c.pretrain_epochs = 3;
        c.train.epochs = 10;
        c.compare_software = true;
    } else if (name == "mnist-ae") {
        c.mode = Mode::autoencoder;
        c.topology = {784, 100, 784};
        c.data.test_samples = 100;
        c.train.epochs = 30;
        c.stop_fraction = 0.5;
    } else if (name == "mnist-deep") {
        c.mode = Mode::classify;
        c.topology = {784, 200, 100, 10};
        c.pretrain_epochs = 2;
        c.train.epochs = 5;
        c.cost_app = "mnist";
    } else if (name == "mnist-table1") {
        c.mode = Mode::plan;
        c.topology = {784, 300, 200, 100, 10};
        c.cost_app = "mnist";
    } else if (name == "isolet") {
        c.mode = Mode::plan;
        c.topology = {617, 2000, 1000, 500, 250, 26};
        c.cost_app = "isolet";
    } else if (name == "kdd") {
        c.mode = Mode::anomaly;
        c.topology = {41, 15, 41};
        c.data.source = "synthetic-traffic";
        c.train.epochs = 20;
        c.cost_app = "kdd";
    } else if (name == "caltech") {
        c.mode = Mode::plan;
        c.topology = {60000, 800, 1};
        c.mesh = {48, 48};  // the split plan needs more than 24x24 cores
        c.cost_app = "caltech";
    } else {
        throw ConfigError("harness", "unknown preset '" + name + "'");
    }
    c.out_dir = "out/" + name;
    return c;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
    try {
        return apply_json(j, std::move(base));
    } catch (const json::exception& e) {
        throw ConfigError("harness", std::string("bad config value: ") + e.what());
    }
}

json config_to_json(const ExperimentConfig& c) {
    return {{"name", c.name},
            {"mode", to_string(c.mode)},
            {"topology", c.topology},
            {"seed", c.seed},
            {"data", data_to_json(c.data)},
            {"train", train_to_json(c.train)},
            {"pretrain_epochs", c.pretrain_epochs},
            {"stop_fraction", c.stop_fraction},
            {"circuit", circuit_to_json(c.circuit)},
            {"constrained", c.constrained},
            {"solver", solver_to_json(c.solver)},
            {"limits", {{"max_inputs", c.limits.max_inputs}, {"max_neurons", c.limits.max_neurons}}},
            {"mesh", {{"rows", c.mesh.rows}, {"cols", c.mesh.cols}}},
            {"costs", costs_to_json(c.costs)},
            {"cost_app", c.cost_app},
            {"io_calibration", c.io_calibration ? json(*c.io_calibration) : json(nullptr)},
            {"compare_software", c.compare_software},
            {"constraint_study", c.constraint_study},
            {"out_dir", c.out_dir}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult r;
    r.config = cfg;

    // Mapping first: a capacity failure should not cost a training run.
    const auto split = map::split_network(cfg.topology, cfg.limits);
    r.plan = map::pack_cores(split, cfg.mesh);
    r.metrics.cores = r.plan.core_count();

    const std::size_t io_bits = cfg.topology.front() * 8;
    std::optional<double> io_cal = cfg.io_calibration;
    if (!io_cal && !cfg.cost_app.empty()) {
        io_cal = cost::app_profile(cfg.cost_app).io_calibration;
    }
    for (auto phase : {cost::Phase::training, cost::Phase::recognition}) {
        auto rep = cost::report(phase, r.plan, io_bits, io_cal, cfg.costs);
        rep.application = cfg.name + ":mapped";
        r.costs.push_back(std::move(rep));
    }
    if (!cfg.cost_app.empty()) {
        const auto& app = cost::app_profile(cfg.cost_app);
        for (auto phase : {cost::Phase::training, cost::Phase::recognition}) {
            r.costs.push_back(cost::report_for_app(phase, app, cfg.costs));
        }
    }
    if (cfg.mode == Mode::plan) {
        return r;
    }

    const auto data = load_split(cfg);
    if (cfg.mode == Mode::classify) {
        run_classify(cfg, data, r);
    } else {
        run_autoencoder(cfg, data, r);
    }
    return r;
}

ExperimentResult run_pretrain(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.mode != Mode::classify || cfg.topology.size() < 3 || cfg.pretrain_epochs == 0) {
        throw ConfigError("harness",
                          "pretraining needs classify mode, a hidden layer and pretrain_epochs > 0");
    }
    ExperimentResult r;
    r.config = cfg;
    r.plan = map::pack_cores(map::split_network(cfg.topology, cfg.limits), cfg.mesh);
    r.metrics.cores = r.plan.core_count();
    const auto data = load_split(cfg);
    auto net = pretrain(cfg, data.x_train, r.metrics);
    r.metrics.tiles = net.tile_count();
    r.net = std::move(net);
    return r;
}

json metrics_to_json(const Metrics& m) {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"pretrain_final_mse", m.pretrain_final_mse},
            {"mse_curve", m.mse_curve},
            {"initial_mse", opt(m.initial_mse)},
            {"final_mse", opt(m.final_mse)},
            {"accuracy", opt(m.accuracy)},
            {"software_accuracy", opt(m.software_accuracy)},
            {"unconstrained_accuracy", opt(m.unconstrained_accuracy)},
            {"reconstruction_error", opt(m.reconstruction_error)},
            {"anomaly_threshold", opt(m.anomaly_threshold)},
            {"detection_rate", opt(m.detection_rate)},
            {"false_positive_rate", opt(m.false_positive_rate)},
            {"above_p90_rate", opt(m.above_p90_rate)},
            {"cores", m.cores},
            {"tiles", m.tiles},
            {"pulses", m.pulses},
            {"saturations", m.saturations}};
}

void write_artifacts(const ExperimentResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::ostringstream mse;
    mse << "epoch,mse\n";
    for (std::size_t e = 0; e < r.metrics.mse_curve.size(); ++e) {
        mse << e + 1 << ',' << fmt(r.metrics.mse_curve[e]) << '\n';
    }
    write_text(dir / "mse.csv", mse.str());

    json metrics = metrics_to_json(r.metrics);
    metrics["name"] = r.config.name;
    metrics["mode"] = to_string(r.config.mode);
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");

    write_text(dir / "plan.json", map::to_json(r.plan) + "\n");

    std::ostringstream rep;
    rep << cost::csv_header() << '\n';
    json reports = json::array();
    for (const auto& c : r.costs) {
        rep << cost::to_csv_row(c) << '\n';
        reports.push_back(json::parse(cost::to_json(c)));
    }
    write_text(dir / "report.csv", rep.str());
    write_text(dir / "report.json", reports.dump(2) + "\n");

    write_text(dir / "config.json", config_to_json(r.config).dump(2) + "\n");

    if (r.net) {
        save_checkpoint(*r.net, r.config.circuit.device, dir / "checkpoint");
    }
    if (!r.recon_inputs.empty()) {
        write_text(dir / "reconstructions.csv",
                   reconstruction_csv(r.recon_inputs, r.recon_outputs));
    }
}

std::string config_hash(const ExperimentConfig& cfg) {
    const auto text = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const char* library_version() noexcept { return kVersion; }

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::string& command, double wall_seconds) {
    std::filesystem::create_directories(dir);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    json modules;
    for (const char* m : {"device", "xbar", "layer", "train", "map", "cost", "harness"}) {
        modules[m] = kVersion;
    }
    const json j = {{"config_hash", config_hash(cfg)},
                    {"library_version", kVersion},
                    {"modules", modules},
                    {"command", command},
                    {"seed", cfg.seed},
                    {"finished_utc", stamp},
                    {"wall_clock_seconds", wall_seconds},
                    {"config", config_to_json(cfg)}};
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace memcore::harness
