#include "unifiedfl/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "unifiedfl/arch.hpp"
#include "unifiedfl/errors.hpp"

namespace ufl {

using nlohmann::json;
using nlohmann::ordered_json;

FederationMode mode_from_string(const std::string& s) {
    if (s == "isolated") return FederationMode::Isolated;
    if (s == "fedavg" || s == "vanilla_fedavg") return FederationMode::VanillaFedAvg;
    if (s == "static" || s == "static_cluster") return FederationMode::StaticCluster;
    if (s == "unifiedfl" || s == "dynamic") return FederationMode::Dynamic;
    throw ConfigError("unknown mode: " + s);
}

std::string mode_to_string(FederationMode m) {
    switch (m) {
        case FederationMode::Isolated: return "isolated";
        case FederationMode::VanillaFedAvg: return "fedavg";
        case FederationMode::StaticCluster: return "static";
        case FederationMode::Dynamic: return "unifiedfl";
    }
    return "unknown";
}

ClusterSignal signal_from_string(const std::string& s) {
    if (s == "theta") return ClusterSignal::Theta;
    if (s == "descriptor") return ClusterSignal::TopologyDescriptor;
    if (s == "grad_moments") return ClusterSignal::GradientMoments;
    throw ConfigError("unknown clustering signal: " + s);
}

std::string signal_to_string(ClusterSignal s) {
    switch (s) {
        case ClusterSignal::Theta: return "theta";
        case ClusterSignal::TopologyDescriptor: return "descriptor";
        case ClusterSignal::GradientMoments: return "grad_moments";
    }
    return "unknown";
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& prefix,
                std::vector<std::string>& problems) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) problems.push_back("unknown key: " + prefix + key);
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    std::vector<std::string> problems;
    check_keys(j,
               {"mode", "roster", "dataset", "split", "test_fraction", "schedule", "optimizer",
                "batch_size", "signal", "softsign_variant", "num_edge_groups", "num_node_groups",
                "k_max", "static_k", "ema", "force_single_cluster", "weighted_fedavg",
                "inter_per_client_mean", "folds", "seed", "out_dir"},
               "", problems);

    ExperimentConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = mode_from_string(j.at("mode").get<std::string>());
        take(j, "roster", cfg.roster);
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            check_keys(d,
                       {"kind", "num_classes", "dim", "class_separation", "samples_per_class",
                        "label_map", "images_path", "labels_path", "csv_path"},
                       "dataset.", problems);
            take(d, "kind", cfg.dataset.kind);
            take(d, "num_classes", cfg.dataset.num_classes);
            take(d, "dim", cfg.dataset.dim);
            take(d, "class_separation", cfg.dataset.class_separation);
            take(d, "samples_per_class", cfg.dataset.samples_per_class);
            take(d, "label_map", cfg.dataset.label_map);
            take(d, "images_path", cfg.dataset.images_path);
            take(d, "labels_path", cfg.dataset.labels_path);
            take(d, "csv_path", cfg.dataset.csv_path);
        }
        take(j, "split", cfg.split);
        take(j, "test_fraction", cfg.test_fraction);
        if (j.contains("schedule")) {
            const json& s = j.at("schedule");
            check_keys(s, {"t_ic", "t_bc", "t_init", "t_update", "rounds"}, "schedule.",
                       problems);
            take(s, "t_ic", cfg.schedule.t_ic);
            take(s, "t_bc", cfg.schedule.t_bc);
            take(s, "t_init", cfg.schedule.t_init);
            take(s, "t_update", cfg.schedule.t_update);
            take(s, "rounds", cfg.schedule.rounds);
        }
        if (j.contains("optimizer")) {
            const json& o = j.at("optimizer");
            check_keys(o, {"kind", "lr", "beta1", "beta2", "weight_decay"}, "optimizer.",
                       problems);
            if (o.contains("kind")) {
                const std::string k = o.at("kind").get<std::string>();
                if (k == "sgd")
                    cfg.optimizer.kind = OptimizerKind::Sgd;
                else if (k == "adamw")
                    cfg.optimizer.kind = OptimizerKind::AdamW;
                else
                    problems.push_back("unknown optimizer kind: " + k);
            }
            take(o, "lr", cfg.optimizer.lr);
            take(o, "beta1", cfg.optimizer.beta1);
            take(o, "beta2", cfg.optimizer.beta2);
            take(o, "weight_decay", cfg.optimizer.weight_decay);
        }
        take(j, "batch_size", cfg.batch_size);
        if (j.contains("signal"))
            cfg.signal = signal_from_string(j.at("signal").get<std::string>());
        if (j.contains("softsign_variant")) {
            const std::string v = j.at("softsign_variant").get<std::string>();
            if (v == "scaled")
                cfg.variant = SoftSignVariant::Scaled;
            else if (v == "ratio")
                cfg.variant = SoftSignVariant::Ratio;
            else
                problems.push_back("unknown softsign_variant: " + v);
        }
        take(j, "num_edge_groups", cfg.num_edge_groups);
        take(j, "num_node_groups", cfg.num_node_groups);
        take(j, "k_max", cfg.k_max);
        take(j, "static_k", cfg.static_k);
        take(j, "ema", cfg.ema);
        take(j, "force_single_cluster", cfg.force_single_cluster);
        take(j, "weighted_fedavg", cfg.weighted_fedavg);
        take(j, "inter_per_client_mean", cfg.inter_per_client_mean);
        take(j, "folds", cfg.folds);
        take(j, "seed", cfg.seed);
        take(j, "out_dir", cfg.out_dir);
    } catch (const json::exception& e) {
        problems.push_back(std::string("malformed value: ") + e.what());
    } catch (const ConfigError& e) {
        problems.push_back(e.what());
    }

    const std::vector<std::string> invariant_problems = validate_config(cfg);
    problems.insert(problems.end(), invariant_problems.begin(), invariant_problems.end());
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> problems;
    if (cfg.roster.empty()) problems.push_back("roster must name at least one client");
    const std::vector<std::string> known = backbone_names();
    for (const std::string& name : cfg.roster)
        if (std::find(known.begin(), known.end(), name) == known.end())
            problems.push_back("unknown architecture in roster: " + name);
    try {
        validate_schedule(cfg.schedule);
    } catch (const ConfigError& e) {
        problems.push_back(e.what());
    }
    if (cfg.schedule.rounds < 1) problems.push_back("schedule.rounds must be >= 1");
    if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "idx" && cfg.dataset.kind != "csv")
        problems.push_back("dataset.kind must be synthetic, idx or csv");
    if (cfg.dataset.kind == "synthetic") {
        if (cfg.dataset.num_classes < 2) problems.push_back("dataset.num_classes must be >= 2");
        if (cfg.dataset.class_separation < 0.0)
            problems.push_back("dataset.class_separation must be >= 0");
        if (cfg.dataset.samples_per_class < 1)
            problems.push_back("dataset.samples_per_class must be >= 1");
    }
    if (cfg.dataset.kind == "idx" && cfg.dataset.images_path.empty())
        problems.push_back("dataset.images_path required for idx datasets");
    if (cfg.dataset.kind == "csv" && cfg.dataset.csv_path.empty())
        problems.push_back("dataset.csv_path required for csv datasets");
    if (cfg.split != "noniid" && cfg.split != "iid")
        problems.push_back("split must be noniid or iid");
    if (cfg.test_fraction <= 0.0 || cfg.test_fraction >= 1.0)
        problems.push_back("test_fraction must be in (0, 1)");
    if (cfg.batch_size < 1) problems.push_back("batch_size must be >= 1");
    if (cfg.optimizer.lr < 0.0) problems.push_back("optimizer.lr must be >= 0");
    if (cfg.num_edge_groups < 1) problems.push_back("num_edge_groups must be >= 1");
    if (cfg.num_node_groups < 1) problems.push_back("num_node_groups must be >= 1");
    if (cfg.k_max < 2) problems.push_back("k_max must be >= 2");
    if (cfg.static_k < 1) problems.push_back("static_k must be >= 1");
    if (cfg.ema < 0.0 || cfg.ema >= 1.0) problems.push_back("ema must be in [0, 1)");
    if (cfg.folds < 1) problems.push_back("folds must be >= 1");
    return problems;
}

std::string resolved_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["mode"] = mode_to_string(cfg.mode);
    j["roster"] = cfg.roster;
    ordered_json d;
    d["kind"] = cfg.dataset.kind;
    if (cfg.dataset.kind == "synthetic") {
        d["num_classes"] = cfg.dataset.num_classes;
        d["dim"] = cfg.dataset.dim;
        d["class_separation"] = cfg.dataset.class_separation;
        d["samples_per_class"] = cfg.dataset.samples_per_class;
        d["label_map"] = cfg.dataset.label_map;
    } else if (cfg.dataset.kind == "idx") {
        d["images_path"] = cfg.dataset.images_path;
        d["labels_path"] = cfg.dataset.labels_path;
    } else {
        d["csv_path"] = cfg.dataset.csv_path;
    }
    j["dataset"] = d;
    j["split"] = cfg.split;
    j["test_fraction"] = cfg.test_fraction;
    j["schedule"] = {{"t_ic", cfg.schedule.t_ic},
                     {"t_bc", cfg.schedule.t_bc},
                     {"t_init", cfg.schedule.t_init},
                     {"t_update", cfg.schedule.t_update},
                     {"rounds", cfg.schedule.rounds}};
    j["optimizer"] = {{"kind", cfg.optimizer.kind == OptimizerKind::Sgd ? "sgd" : "adamw"},
                      {"lr", cfg.optimizer.lr},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"weight_decay", cfg.optimizer.weight_decay}};
    j["batch_size"] = cfg.batch_size;
    j["signal"] = signal_to_string(cfg.signal);
    j["softsign_variant"] = cfg.variant == SoftSignVariant::Scaled ? "scaled" : "ratio";
    j["num_edge_groups"] = cfg.num_edge_groups;
    j["num_node_groups"] = cfg.num_node_groups;
    j["k_max"] = cfg.k_max;
    j["static_k"] = cfg.static_k;
    j["ema"] = cfg.ema;
    j["force_single_cluster"] = cfg.force_single_cluster;
    j["weighted_fedavg"] = cfg.weighted_fedavg;
    j["inter_per_client_mean"] = cfg.inter_per_client_mean;
    j["folds"] = cfg.folds;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    return j.dump(2) + "\n";
}

}  // namespace ufl
