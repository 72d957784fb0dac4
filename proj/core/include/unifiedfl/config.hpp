#pragma once

#include <string>
#include <vector>

#include "unifiedfl/federation.hpp"

namespace ufl {

/// Full experiment description. Defaults match the training setup used for
/// all headline runs; a config file or CLI flags override them (flags win).
struct ExperimentConfig {
    FederationMode mode = FederationMode::Dynamic;
    std::vector<std::string> roster = {"MLP_a"};  // architecture name per client

    struct DatasetSource {
        std::string kind = "synthetic";  // synthetic | idx | csv
        // synthetic
        int num_classes = 4;
        int dim = 64;
        double class_separation = 4.0;
        int samples_per_class = 250;
        std::vector<int> label_map;
        // idx
        std::string images_path;
        std::string labels_path;
        // csv
        std::string csv_path;
    } dataset;

    std::string split = "noniid";  // noniid | iid
    double test_fraction = 0.2;

    Schedule schedule;
    OptimizerConfig optimizer;  // shared settings for theta and base features
    int batch_size = 32;

    ClusterSignal signal = ClusterSignal::Theta;
    SoftSignVariant variant = SoftSignVariant::Scaled;
    int num_edge_groups = 4;
    int num_node_groups = 4;
    std::size_t k_max = 6;
    int static_k = 2;
    double ema = 0.0;
    bool force_single_cluster = false;
    bool weighted_fedavg = false;
    bool inter_per_client_mean = false;

    int folds = 3;
    std::uint64_t seed = 1;
    std::string out_dir;
};

FederationMode mode_from_string(const std::string& s);
std::string mode_to_string(FederationMode m);
ClusterSignal signal_from_string(const std::string& s);
std::string signal_to_string(ClusterSignal s);

/// Parses a JSON config document over the defaults. Unknown keys and every
/// violated invariant are reported together in one ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// All invariant violations, empty when the config is valid. Re-run after
/// applying CLI overrides.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

/// Round-trippable snapshot (config.resolved.json).
std::string resolved_json(const ExperimentConfig& cfg);

}  // namespace ufl
