#include "memcore/cost.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "memcore/error.hpp"
#include "memcore/map.hpp"

namespace memcore::cost {

void CostTables::validate() const {
    const double values[] = {t_fwd,       t_bwd,         t_upd,     p_fwd,
                             p_bwd,       p_upd,         p_ctrl,    io_bit,
                             route_clock, xbar_latency,  core_area, risc_area,
                             residual_area, recog_core_energy, recog_pipeline_overhead};
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw InvalidInput("cost", "cost table entries must be finite and >= 0");
        }
    }
}

const char* to_string(Phase p) noexcept {
    return p == Phase::training ? "training" : "recognition";
}

double training_compute_energy(std::size_t n_cores, const CostTables& t) {
    const double per_core = t.t_fwd * t.p_fwd + t.t_bwd * t.p_bwd + t.t_upd * t.p_upd;
    return static_cast<double>(n_cores) * per_core;
}

double recognition_compute_energy(std::size_t n_cores, const CostTables& t) {
    return static_cast<double>(n_cores) * t.recog_core_energy;
}

double training_latency(std::size_t n_layers, const CostTables& t, double route_overhead) {
    if (n_layers < 1) {
        throw InvalidInput("cost", "training latency needs at least one layer");
    }
    if (!(route_overhead >= 0.0)) {
        throw InvalidInput("cost", "route overhead must be >= 0");
    }
    return static_cast<double>(n_layers) * (t.t_fwd + t.t_bwd + t.t_upd) + route_overhead;
}

double recognition_latency(const CostTables& t) { return t.t_fwd + t.recog_pipeline_overhead; }

double io_energy(std::size_t bits, const CostTables& t) {
    return static_cast<double>(bits) * t.io_bit;
}

double area_estimate(std::size_t n_cores, const CostTables& t) {
    return static_cast<double>(n_cores) * t.core_area + t.risc_area + t.residual_area;
}

double AppProfile::implied_route_overhead(const CostTables& t) const {
    const double layers = static_cast<double>(topology.size() - 1);
    return train_time - layers * (t.t_fwd + t.t_bwd + t.t_upd);
}

const std::vector<AppProfile>& app_profiles() {
    static const std::vector<AppProfile> apps = {
        {"mnist", {784, 300, 200, 100, 10}, 57, 784 * 8, 8.43e-9, 7.29e-6, 4.18e-7, 4.26e-7,
         0.77e-6, 1.42e-8, 2.26e-8},
        {"isolet", {617, 2000, 1000, 500, 250, 26}, 132, 617 * 8, 2.66e-8, 8.86e-6, 9.67e-7,
         9.94e-7, 0.77e-6, 3.28e-8, 5.94e-8},
        {"kdd", {41, 15, 41}, 1, 41 * 8, 4.47e-9, 4.15e-6, 7.33e-9, 1.18e-8, 0.77e-6, 2.48e-10,
         4.73e-9},
        {"caltech", {60000, 800, 1}, 572, 60000 * 8, 5.29e-8, 5.7175e-6, 4.19e-6, 4.24e-6,
         0.77e-6, 1.42038e-7, 1.95e-7},
    };
    return apps;
}

const AppProfile& app_profile(const std::string& name) {
    for (const auto& a : app_profiles()) {
        if (a.name == name) {
            return a;
        }
    }
    throw InvalidInput("cost", "unknown application '" + name + "'");
}

CostReport report(const ReportInputs& in, const CostTables& t) {
    t.validate();
    CostReport r;
    r.phase = in.phase;
    r.n_cores = in.n_cores;
    r.n_layers = in.n_layers;
    r.application = in.application;
    if (in.phase == Phase::training) {
        r.route_overhead = in.route_overhead;
        r.time_per_input = training_latency(in.n_layers, t, in.route_overhead);
        r.compute_energy = training_compute_energy(in.n_cores, t);
    } else {
        r.time_per_input = recognition_latency(t);
        r.compute_energy = recognition_compute_energy(in.n_cores, t);
    }
    r.io_energy_bits = io_energy(in.io_bits, t);
    r.io_energy = in.io_calibration ? *in.io_calibration : r.io_energy_bits;
    if (!(r.io_energy >= 0.0)) {
        throw InvalidInput("cost", "I/O calibration must be >= 0");
    }
    r.total_energy = r.compute_energy + r.io_energy;
    r.area = area_estimate(in.n_cores, t);
    return r;
}

CostReport report(Phase phase, const map::CorePlan& plan, std::size_t io_bits,
                  std::optional<double> io_calibration, const CostTables& t,
                  double route_overhead) {
    ReportInputs in;
    in.phase = phase;
    in.n_cores = plan.core_count();
    in.n_layers = plan.split.transformed_depth();
    in.io_bits = io_bits;
    in.io_calibration = io_calibration;
    in.route_overhead = route_overhead;
    return report(in, t);
}

CostReport report_for_app(Phase phase, const AppProfile& app, const CostTables& t) {
    ReportInputs in;
    in.phase = phase;
    in.n_cores = app.cores;
    in.n_layers = app.topology.size() - 1;
    in.io_bits = app.input_bits;
    in.io_calibration = app.io_calibration;
    in.application = app.name;
    std::vector<std::string> flags;
    if (phase == Phase::training) {
        const double implied = app.implied_route_overhead(t);
        if (implied < 0.0) {
            char text[160];
            std::snprintf(text, sizeof text,
                          "table training time %.4g us is below %zu layers x step time; "
                          "route overhead clamped to 0",
                          app.train_time * 1e6, in.n_layers);
            flags.emplace_back(text);
        }
        in.route_overhead = implied > 0.0 ? implied : 0.0;
    }
    auto r = report(in, t);
    r.flags = std::move(flags);
    return r;
}

std::string to_json(const CostReport& r) {
    const nlohmann::json j = {{"application", r.application},
                              {"phase", to_string(r.phase)},
                              {"n_cores", r.n_cores},
                              {"n_layers", r.n_layers},
                              {"time_per_input_s", r.time_per_input},
                              {"compute_energy_J", r.compute_energy},
                              {"io_energy_J", r.io_energy},
                              {"io_energy_bit_model_J", r.io_energy_bits},
                              {"total_energy_J", r.total_energy},
                              {"area_mm2", r.area},
                              {"route_overhead_s", r.route_overhead},
                              {"flags", r.flags}};
    return j.dump(2);
}

std::string csv_header() {
    return "application,phase,cores,time_us,compute_energy_J,io_energy_J,total_energy_J,area_mm2,"
           "io_energy_bit_model_J";
}

std::string to_csv_row(const CostReport& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g",
                  r.application.c_str(), to_string(r.phase), r.n_cores, r.time_per_input * 1e6,
                  r.compute_energy, r.io_energy, r.total_energy, r.area, r.io_energy_bits);
    return buf;
}

}  // namespace memcore::cost
