#pragma once

// End-to-end experiments: data, pretraining, fine-tuning, mapping and cost,
// driven by a JSON config layered over a named preset.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memcore/cost.hpp"
#include "memcore/dataset.hpp"
#include "memcore/map.hpp"
#include "memcore/train.hpp"

namespace memcore::harness {

enum class Mode {
    classify,     // pretrain_stack, then supervised fine-tune
    autoencoder,  // width -> hidden -> width reconstruction
    anomaly,      // autoencoder on normal data; score = reconstruction error
    plan          // map and cost only
};

[[nodiscard]] const char* to_string(Mode m) noexcept;

struct DataConfig {
    std::string source = "synthetic-digits";  // synthetic-digits | synthetic-traffic | idx | csv
    std::size_t train_samples = 1000;
    std::size_t test_samples = 500;
    std::size_t side = 28;  // digit images are area-downsampled to side x side
    std::string images;     // idx
    std::string labels;
    std::string test_images;
    std::string test_labels;
    std::string csv;        // csv
    std::optional<std::size_t> label_column;
    CategoricalEncoding categorical = CategoricalEncoding::index;
    bool header = false;
    double test_fraction = 0.2;       // csv: trailing rows held out
    std::size_t anomaly_features = 3;  // features shifted per injected anomaly
    double anomaly_sigma = 5.0;
};

struct ExperimentConfig {
    std::string name = "custom";
    Mode mode = Mode::classify;
    std::vector<std::size_t> topology;
    std::uint64_t seed = 1;
    DataConfig data;
    train::TrainConfig train;
    std::size_t pretrain_epochs = 3;
    /// Autoencoder modes: stop once an epoch's mean MSE is <= this fraction
    /// of the pre-training MSE (0: run every epoch).
    double stop_fraction = 0.0;
    train::CircuitOptions circuit;
    /// Core limits, 3-bit outputs and 8-bit errors.  false: one crossbar per
    /// layer and no output or error ADCs; the DP ADC feeding the f' table stays.
    bool constrained = true;
    xbar::SolverConfig solver;
    map::CoreLimits limits;
    map::MeshDims mesh;
    cost::CostTables costs;
    std::string cost_app;  // table profile to reproduce alongside the plan ("" for none)
    std::optional<double> io_calibration;
    bool compare_software = false;  // also train a float twin with the same schedule
    bool constraint_study = false;  // also run the unconstrained circuit
    std::string out_dir = "out";

    /// Throws ConfigError on any inconsistency.
    void validate() const;
};

[[nodiscard]] std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
[[nodiscard]] ExperimentConfig preset(const std::string& name);

/// Apply a JSON document onto `base`; a "preset" key replaces `base` first.
/// Unknown keys and type errors are ConfigErrors.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j,
                                                ExperimentConfig base = {});
[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct Metrics {
    std::vector<double> pretrain_final_mse;  // last epoch of each pretraining autoencoder
    std::vector<double> mse_curve;           // fine-tune (or autoencoder) epochs
    std::optional<double> initial_mse;       // before fine-tuning
    std::optional<double> final_mse;         // after training, no updates
    std::optional<double> accuracy;
    std::optional<double> software_accuracy;
    std::optional<double> unconstrained_accuracy;
    std::optional<double> reconstruction_error;  // held-out reconstruction MSE
    std::optional<double> anomaly_threshold;
    std::optional<double> detection_rate;
    std::optional<double> false_positive_rate;
    std::optional<double> above_p90_rate;  // anomalies scoring above the normals' 90th percentile
    std::size_t cores = 0;
    std::size_t tiles = 0;
    std::size_t pulses = 0;
    std::size_t saturations = 0;
};

struct ExperimentResult {
    ExperimentConfig config;
    Metrics metrics;
    std::optional<train::NetworkCircuit> net;
    map::CorePlan plan;
    std::vector<cost::CostReport> costs;
    Matrix recon_inputs;   // autoencoder modes: a few held-out inputs
    Matrix recon_outputs;  // and their reconstructions
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Layer-wise pretraining of a classify config only; the result holds the
/// stack with its fresh output layer and no cost reports.
[[nodiscard]] ExperimentResult run_pretrain(const ExperimentConfig& cfg);

[[nodiscard]] nlohmann::json metrics_to_json(const Metrics& m);

/// mse.csv, metrics.json, plan.json, report.csv, config.json, checkpoint/ and,
/// for autoencoders, reconstructions.csv.
void write_artifacts(const ExperimentResult& r, const std::filesystem::path& dir);

/// manifest.json: config hash, module versions, command line and wall-clock.
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::string& command, double wall_seconds);

/// FNV-1a 64 of the canonical config JSON, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& cfg);

[[nodiscard]] const char* library_version() noexcept;

}  // namespace memcore::harness
