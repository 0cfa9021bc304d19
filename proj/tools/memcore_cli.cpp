// memcore-cli: drive the device, crossbar, training, mapping and cost models
// from the command line.  Every successful command writes manifest.json into
// its output directory.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memcore/bench.hpp"
#include "memcore/checkpoint.hpp"
#include "memcore/cost.hpp"
#include "memcore/device.hpp"
#include "memcore/error.hpp"
#include "memcore/experiment.hpp"
#include "memcore/map.hpp"
#include "memcore/xbar.hpp"

namespace fs = std::filesystem;
using namespace memcore;
using nlohmann::json;

namespace {

enum Exit { ok = 0, other = 1, config = 2, convergence = 3, capacity = 4, format = 5 };

constexpr const char* kConfigEnv = "MEMCORE_CONFIG";

struct Globals {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out;
};

harness::ExperimentConfig resolve_config(const Globals& g) {
    harness::ExperimentConfig cfg;
    if (!g.preset.empty()) {
        cfg = harness::preset(g.preset);
    }
    std::string path = g.config_path;
    if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
        path = env;
    }
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("harness", "cannot open config file " + path);
        }
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("harness", path + ": " + e.what());
        }
        cfg = harness::config_from_json(j, cfg);
    }
    if (g.seed) {
        cfg.seed = *g.seed;
    }
    if (!g.out.empty()) {
        cfg.out_dir = g.out;
    }
    return cfg;
}

std::vector<std::size_t> parse_topology(const std::string& text) {
    std::vector<std::size_t> t;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const auto v = std::stoull(item, &pos);
            if (pos != item.size()) {
                throw std::invalid_argument(item);
            }
            t.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("harness", "bad topology entry '" + item + "'");
        }
    }
    return t;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("harness", "bad number '" + item + "'");
        }
    }
    return v;
}

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

void print_metrics(const harness::ExperimentResult& r) {
    const auto& m = r.metrics;
    std::cout << r.config.name << " (" << harness::to_string(r.config.mode) << "): "
              << m.cores << " cores";
    if (m.tiles > 0) {
        std::cout << ", " << m.tiles << " crossbars";
    }
    std::cout << '\n';
    const auto show = [](const char* label, const std::optional<double>& v) {
        if (v) {
            std::cout << "  " << label << ": " << *v << '\n';
        }
    };
    show("initial mse", m.initial_mse);
    show("final mse", m.final_mse);
    show("accuracy", m.accuracy);
    show("software accuracy", m.software_accuracy);
    show("unconstrained accuracy", m.unconstrained_accuracy);
    show("reconstruction error", m.reconstruction_error);
    show("anomaly threshold", m.anomaly_threshold);
    show("detection rate", m.detection_rate);
    show("false positive rate", m.false_positive_rate);
    for (const auto& c : r.costs) {
        std::cout << "  " << cost::to_csv_row(c) << '\n';
    }
}

struct Run {
    Globals g;
    std::string command;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void finish(const harness::ExperimentConfig& cfg) const {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        harness::write_manifest(cfg.out_dir, cfg, command, secs);
    }
};

int cmd_device_sim(const Run& run, double x0, double volts, double duration, double dt,
                   std::size_t samples) {
    const auto cfg = resolve_config(run.g);
    const auto& p = cfg.circuit.device;
    if (!(duration > 0.0) || !(dt > 0.0) || samples == 0) {
        throw InvalidInput("device", "duration, dt and samples must be > 0");
    }
    std::ostringstream csv;
    csv << "t_s,x,resistance_ohm\n";
    device::MemristorState s{device::clamp_state(p, x0)};
    const double slice = duration / static_cast<double>(samples);
    csv << 0 << ',' << s.x << ',' << device::small_signal_resistance(p, s.x) << '\n';
    for (std::size_t k = 1; k <= samples; ++k) {
        s = device::apply_pulse(p, s, volts, slice, dt);
        csv << slice * static_cast<double>(k) << ',' << s.x << ','
            << device::small_signal_resistance(p, s.x) << '\n';
    }
    write_file(fs::path(cfg.out_dir) / "device.csv", csv.str());
    const double t99 = device::switching_time(p, s.x < x0 ? 1.0 : x0, 0.99, volts, dt, 1e-3);
    std::cout << "final x " << s.x << " after " << duration * 1e6 << " us at " << volts << " V\n";
    if (t99 >= 0.0) {
        std::cout << "time to x = 0.99: " << t99 * 1e6 << " us\n";
    }
    run.finish(cfg);
    return ok;
}

int cmd_xbar_solve(const Run& run, std::size_t rows, std::size_t cols, double rw, double r_lo,
                   double r_hi, const std::string& states, const std::string& inputs_text,
                   bool dense) {
    auto cfg = resolve_config(run.g);
    std::optional<xbar::Crossbar> xb;
    if (!states.empty()) {
        std::ifstream in(states);
        if (!in) {
            throw InvalidInput("xbar", "cannot open " + states);
        }
        xb = xbar::read_csv(in, cfg.circuit.device);
    } else {
        xb = harness::random_crossbar(rows, cols, rw, r_lo, r_hi, cfg.seed, cfg.circuit.device);
    }
    std::vector<double> inputs;
    if (!inputs_text.empty()) {
        inputs = parse_values(inputs_text);
    } else {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        inputs.resize(xb->rows());
        for (auto& v : inputs) {
            v = u(rng);
        }
    }
    auto solver = cfg.solver;
    solver.record_nodes = false;
    const auto sol = dense ? xbar::solve_dense(*xb, inputs) : xbar::solve_jacobi(*xb, inputs, solver);
    std::ostringstream csv;
    csv << "column,current_A\n";
    for (std::size_t j = 0; j < sol.column_currents.size(); ++j) {
        csv << j << ',' << sol.column_currents[j] << '\n';
    }
    write_file(fs::path(cfg.out_dir) / "currents.csv", csv.str());
    std::ofstream grid(fs::path(cfg.out_dir) / "crossbar.csv");
    xbar::write_csv(*xb, grid);
    std::cout << csv.str();
    if (!dense) {
        std::cout << "iterations " << sol.iterations << ", residual " << sol.residual << " V\n";
    }
    run.finish(cfg);
    return ok;
}

int cmd_xbar_bench(const Run& run, harness::BenchOptions opts) {
    const auto cfg = resolve_config(run.g);
    opts.seed = cfg.seed;
    opts.solver = cfg.solver;
    const auto r = harness::run_bench(opts);
    const json j = {{"rows", opts.rows},
                    {"cols", opts.cols},
                    {"wire_resistance", opts.wire_resistance},
                    {"r_lo", opts.r_lo},
                    {"r_hi", opts.r_hi},
                    {"iterations", r.iterations},
                    {"residual", r.residual},
                    {"seconds", r.seconds},
                    {"deviation", r.deviation},
                    {"worst_column_deviation", r.worst_column_deviation}};
    write_file(fs::path(cfg.out_dir) / "bench.json", j.dump(2) + "\n");
    std::cout << opts.rows << "x" << opts.cols << " Rw=" << opts.wire_resistance << ": "
              << r.iterations << " iterations, " << r.seconds << " s, deviation from Rw=0 "
              << r.deviation * 100.0 << "% (worst column " << r.worst_column_deviation * 100.0
              << "%)\n";
    run.finish(cfg);
    return ok;
}

int cmd_experiment(const Run& run, bool extras) {
    auto cfg = resolve_config(run.g);
    if (!extras) {
        if (cfg.mode == harness::Mode::plan) {
            throw ConfigError("harness", "train needs a classify, autoencoder or anomaly config");
        }
        cfg.compare_software = false;
        cfg.constraint_study = false;
    }
    const auto r = harness::run_experiment(cfg);
    harness::write_artifacts(r, cfg.out_dir);
    print_metrics(r);
    run.finish(cfg);
    return ok;
}

int cmd_pretrain(const Run& run) {
    const auto cfg = resolve_config(run.g);
    const auto r = harness::run_pretrain(cfg);
    harness::save_checkpoint(*r.net, cfg.circuit.device, fs::path(cfg.out_dir) / "checkpoint");
    json m = harness::metrics_to_json(r.metrics);
    write_file(fs::path(cfg.out_dir) / "metrics.json", m.dump(2) + "\n");
    std::cout << "pretrained " << r.metrics.pretrain_final_mse.size() << " layers, final mse:";
    for (double v : r.metrics.pretrain_final_mse) {
        std::cout << ' ' << v;
    }
    std::cout << '\n';
    run.finish(cfg);
    return ok;
}

int cmd_map(const Run& run, const std::string& topology) {
    auto cfg = resolve_config(run.g);
    if (!topology.empty()) {
        cfg.topology = parse_topology(topology);
    }
    if (cfg.topology.empty()) {
        throw ConfigError("harness", "map needs --topology, a preset or a config with a topology");
    }
    const auto plan = map::pack_cores(map::split_network(cfg.topology, cfg.limits), cfg.mesh);
    map::check_plan(plan);
    write_file(fs::path(cfg.out_dir) / "plan.json", map::to_json(plan) + "\n");
    std::size_t partial = 0;
    std::size_t combining = 0;
    for (const auto& u : plan.split.units) {
        partial += u.kind == map::UnitKind::partial;
        combining += u.kind == map::UnitKind::combining;
    }
    std::cout << plan.split.units.size() << " sub-layers (" << partial << " partial, "
              << combining << " combining), depth " << plan.split.transformed_depth() << ", "
              << plan.core_count() << " cores on a " << plan.mesh.rows << "x" << plan.mesh.cols
              << " mesh, " << plan.routes.size() << " routes\n";
    run.finish(cfg);
    return ok;
}

int cmd_cost(const Run& run, const std::string& app_name, const std::string& topology) {
    auto cfg = resolve_config(run.g);
    if (!topology.empty()) {
        cfg.topology = parse_topology(topology);
    }
    std::vector<cost::CostReport> reports;
    if (!app_name.empty() || (cfg.topology.empty() && !cfg.cost_app.empty())) {
        const auto& app = cost::app_profile(app_name.empty() ? cfg.cost_app : app_name);
        for (auto ph : {cost::Phase::training, cost::Phase::recognition}) {
            reports.push_back(cost::report_for_app(ph, app, cfg.costs));
        }
    } else {
        if (cfg.topology.empty()) {
            throw ConfigError("harness", "cost needs --app, --topology, a preset or a config");
        }
        auto plan_cfg = cfg;
        plan_cfg.mode = harness::Mode::plan;
        reports = harness::run_experiment(plan_cfg).costs;
    }
    std::ostringstream csv;
    csv << cost::csv_header() << '\n';
    json all = json::array();
    for (const auto& r : reports) {
        csv << cost::to_csv_row(r) << '\n';
        all.push_back(json::parse(cost::to_json(r)));
        for (const auto& f : r.flags) {
            std::cerr << "note: " << r.application << " " << cost::to_string(r.phase) << ": " << f
                      << '\n';
        }
    }
    write_file(fs::path(cfg.out_dir) / "report.csv", csv.str());
    write_file(fs::path(cfg.out_dir) / "report.json", all.dump(2) + "\n");
    std::cout << csv.str();
    run.finish(cfg);
    return ok;
}

int cmd_report(const Run& run, const std::string& dir) {
    const auto cfg = resolve_config(run.g);
    const fs::path src = dir.empty() ? fs::path(cfg.out_dir) : fs::path(dir);
    const auto metrics_path = src / "metrics.json";
    std::ifstream in(metrics_path);
    if (!in) {
        throw ConfigError("harness", "no metrics.json in " + src.string());
    }
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("harness", metrics_path.string() + ": " + e.what());
    }
    std::ostringstream os;
    os << "metric,value\n";
    for (const auto& item : m.items()) {
        if (item.value().is_number() || item.value().is_string()) {
            os << item.key() << ',' << (item.value().is_string() ? item.value().get<std::string>()
                                                                 : item.value().dump())
               << '\n';
        }
    }
    if (m.contains("mse_curve") && m["mse_curve"].is_array() && !m["mse_curve"].empty()) {
        const auto& c = m["mse_curve"];
        os << "epochs," << c.size() << '\n';
        os << "first_epoch_mse," << c.front().dump() << '\n';
        os << "last_epoch_mse," << c.back().dump() << '\n';
    }
    std::ifstream rep(src / "report.csv");
    if (rep) {
        os << '\n' << rep.rdbuf();
    }
    std::cout << os.str();
    write_file(fs::path(cfg.out_dir) / "summary.csv", os.str());
    run.finish(cfg);
    return ok;
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidInput*>(&e)) {
        return config;
    }
    if (dynamic_cast<const ConvergenceError*>(&e)) {
        return convergence;
    }
    if (dynamic_cast<const CapacityError*>(&e)) {
        return capacity;
    }
    if (dynamic_cast<const FormatError*>(&e)) {
        return format;
    }
    return other;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memristor multicore neural network simulator"};
    app.require_subcommand(1);
    Run run;
    for (int i = 0; i < argc; ++i) {
        run.command += (i > 0 ? " " : "") + std::string(argv[i]);
    }
    std::uint64_t seed = 0;
    app.add_option("--config", run.g.config_path,
                   std::string("experiment config JSON (") + kConfigEnv + " overrides)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--out", run.g.out, "output directory");
    app.add_option("--preset", run.g.preset, "named preset")
        ->check(CLI::IsMember(harness::preset_names()));

    std::function<int()> action;

    auto* device = app.add_subcommand("device", "device model")->require_subcommand(1);
    auto* sim = device->add_subcommand("sim", "integrate a constant-voltage pulse");
    double x0 = 0.001, volts = 2.5, duration = 20e-6, dt = 10e-9;
    std::size_t samples = 200;
    sim->add_option("--x0", x0, "initial state");
    sim->add_option("--voltage", volts, "pulse amplitude [V]");
    sim->add_option("--duration", duration, "pulse length [s]");
    sim->add_option("--dt", dt, "Euler step [s]");
    sim->add_option("--samples", samples, "trajectory points");
    sim->callback([&] { action = [&] { return cmd_device_sim(run, x0, volts, duration, dt, samples); }; });

    auto* xb = app.add_subcommand("xbar", "crossbar solver")->require_subcommand(1);
    auto* solve = xb->add_subcommand("solve", "column currents of one crossbar");
    std::size_t rows = 8, cols = 8;
    double rw = 1.5, r_lo = 1e6, r_hi = 10e6;
    std::string states, inputs;
    bool dense = false;
    solve->add_option("--rows", rows);
    solve->add_option("--cols", cols);
    solve->add_option("--rw", rw, "wire resistance per segment [ohm]");
    solve->add_option("--r-lo", r_lo, "device resistance band, low end [ohm]");
    solve->add_option("--r-hi", r_hi, "device resistance band, high end [ohm]");
    solve->add_option("--states", states, "crossbar CSV instead of a random array");
    solve->add_option("--inputs", inputs, "comma-separated row voltages");
    solve->add_flag("--dense", dense, "direct solve instead of Jacobi");
    solve->callback([&] {
        action = [&] { return cmd_xbar_solve(run, rows, cols, rw, r_lo, r_hi, states, inputs, dense); };
    });

    auto* bench = xb->add_subcommand("bench", "large-array solve against the Rw = 0 currents");
    harness::BenchOptions bopts;
    bench->add_option("--rows", bopts.rows);
    bench->add_option("--cols", bopts.cols);
    bench->add_option("--rw", bopts.wire_resistance);
    bench->add_option("--r-lo", bopts.r_lo);
    bench->add_option("--r-hi", bopts.r_hi);
    bench->callback([&] { action = [&] { return cmd_xbar_bench(run, bopts); }; });

    app.add_subcommand("train", "train the configured network (no software twin or study)")
        ->callback([&] { action = [&] { return cmd_experiment(run, false); }; });
    app.add_subcommand("pretrain", "layer-wise autoencoder pretraining only")
        ->callback([&] { action = [&] { return cmd_pretrain(run); }; });

    auto* mapc = app.add_subcommand("map", "split and pack a topology onto cores");
    std::string topology;
    mapc->add_option("--topology", topology, "comma-separated layer widths");
    mapc->callback([&] { action = [&] { return cmd_map(run, topology); }; });

    auto* costc = app.add_subcommand("cost", "time, energy and area report");
    std::string app_name;
    costc->add_option("--app", app_name, "table profile: mnist, isolet, kdd, caltech");
    costc->add_option("--topology", topology, "comma-separated layer widths");
    costc->callback([&] { action = [&] { return cmd_cost(run, app_name, topology); }; });

    app.add_subcommand("run", "full experiment with artifacts")
        ->callback([&] { action = [&] { return cmd_experiment(run, true); }; });

    auto* rep = app.add_subcommand("report", "summarize an output directory");
    std::string report_dir;
    rep->add_option("dir", report_dir, "directory holding metrics.json");
    rep->callback([&] { action = [&] { return cmd_report(run, report_dir); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config;
    }
    if (seed_opt->count() > 0) {
        run.g.seed = seed;
    }
    try {
        return action();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other;
    }
}
