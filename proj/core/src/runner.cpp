#include "unifiedfl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "unifiedfl/data.hpp"
#include "unifiedfl/errors.hpp"

namespace ufl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::uint64_t client_seed(std::uint64_t fold_seed, std::uint32_t client) {
    // splitmix64 over the combined identity; distinct per (fold, client).
    std::uint64_t z = fold_seed * 0x9E3779B97F4A7C15ull + (client + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::string make_run_directory(const ExperimentConfig& cfg) {
    std::string root = cfg.out_dir;
    if (root.empty()) {
        if (const char* env = std::getenv("UNIFIEDFL_OUT")) root = env;
    }
    if (root.empty()) root = "runs";
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d_%H%M%S", std::gmtime(&now));
    fs::path dir = fs::path(root) / ("run_" + std::string(stamp) + "_" + mode_to_string(cfg.mode));
    // Suffix on collision so two runs in one second both get a directory.
    fs::path candidate = dir;
    for (int i = 1; fs::exists(candidate); ++i)
        candidate = dir.string() + "_" + std::to_string(i);
    fs::create_directories(candidate);
    return candidate.string();
}

namespace {

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t fold_seed) {
    const auto& d = cfg.dataset;
    if (d.kind == "synthetic")
        return synth_gaussian_mixture(d.num_classes, d.dim, d.class_separation,
                                      d.samples_per_class, d.label_map, fold_seed);
    if (d.kind == "idx") return load_idx(d.images_path, d.labels_path);
    return load_csv(d.csv_path);
}

struct TrainTestSplit {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> test;
};

TrainTestSplit holdout_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           static_cast<double>(n) * test_fraction));
    TrainTestSplit split;
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    return split;
}

Dataset subset(const Dataset& d, const std::vector<std::uint32_t>& indices, SplitTag tag) {
    Dataset out;
    out.n = indices.size();
    out.input_shape = d.input_shape;
    out.num_classes = d.num_classes;
    out.split = tag;
    out.provenance = d.provenance;
    const std::size_t dim = d.dim();
    out.features.reserve(out.n * dim);
    out.labels.reserve(out.n);
    for (std::uint32_t i : indices) {
        out.features.insert(out.features.end(), d.features.begin() + i * dim,
                            d.features.begin() + (i + 1) * dim);
        out.labels.push_back(d.labels[i]);
    }
    return out;
}

FederationConfig to_federation_config(const ExperimentConfig& cfg) {
    FederationConfig f;
    f.mode = cfg.mode;
    f.schedule = cfg.schedule;
    f.signal = cfg.signal;
    f.theta_optimizer = cfg.optimizer;
    f.base_optimizer = cfg.optimizer;
    f.batch_size = cfg.batch_size;
    f.variant = cfg.variant;
    f.k_max = cfg.k_max;
    f.static_k = cfg.static_k;
    f.ema = cfg.ema;
    f.force_single_cluster = cfg.force_single_cluster;
    f.weighted_fedavg = cfg.weighted_fedavg;
    f.inter_per_client_mean = cfg.inter_per_client_mean;
    return f;
}

std::vector<int> predict(const ModelGraph& graph, const ThetaVector& theta, const Dataset& test,
                         SoftSignVariant variant) {
    std::vector<int> preds;
    preds.reserve(test.n);
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < test.n; start += chunk) {
        const std::size_t n = std::min(chunk, test.n - start);
        std::vector<double> feats(test.features.begin() + start * test.dim(),
                                  test.features.begin() + (start + n) * test.dim());
        const std::vector<double> logits = forward(graph, theta, feats, n, variant);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = logits.data() + i * test.num_classes;
            preds.push_back(static_cast<int>(
                std::max_element(row, row + test.num_classes) - row));
        }
    }
    return preds;
}

void write_events(const ExperimentResult& result, const ExperimentConfig& cfg,
                  const std::string& out_dir) {
    std::ofstream events(fs::path(out_dir) / "events.jsonl", std::ios::binary);
    std::ofstream partitions(fs::path(out_dir) / "partitions.jsonl", std::ios::binary);
    for (const FoldResult& fr : result.folds) {
        for (const RoundEvent& ev : fr.history.events) {
            ordered_json j;
            j["fold"] = fr.fold;
            j["round"] = ev.round;
            j["intra"] = ev.intra_fired;
            j["inter"] = ev.inter_fired;
            j["recluster"] = ev.recluster_fired;
            j["num_clusters"] = ev.num_clusters;
            j["silhouette"] = ev.silhouette_score;
            j["client_losses"] = ev.client_losses;
            events << j.dump() << '\n';
            if (ev.recluster_fired) {
                ordered_json p;
                p["fold"] = fr.fold;
                p["round"] = ev.round;
                p["assignments"] = ev.assignment;
                p["K"] = ev.num_clusters;
                p["silhouette"] = ev.silhouette_score;
                partitions << p.dump() << '\n';
            }
        }
    }
    (void)cfg;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::vector<std::string> problems = validate_config(cfg);
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    fs::create_directories(out_dir);

    ExperimentResult result;
    result.out_dir = out_dir;
    std::vector<ReportRow> all_rows;

    for (int fold = 0; fold < cfg.folds; ++fold) {
        const std::uint64_t fold_seed = cfg.seed + static_cast<std::uint64_t>(fold);
        const Dataset full = build_dataset(cfg, fold_seed);
        const TrainTestSplit holdout = holdout_split(full.n, cfg.test_fraction, fold_seed);
        const Dataset train = subset(full, holdout.train, SplitTag::Train);
        const Dataset test = subset(full, holdout.test, SplitTag::Test);

        const std::size_t m = cfg.roster.size();
        SplitPlan plan = cfg.split == "noniid" ? partition_noniid(train, m, fold_seed)
                                               : partition_iid(train, m, fold_seed);

        std::vector<ClientState> clients(m);
        for (std::size_t c = 0; c < m; ++c) {
            ClientState& cs = clients[c];
            cs.id = static_cast<std::uint32_t>(c);
            const std::uint64_t cseed = client_seed(fold_seed, cs.id);
            const ArchitectureSpec spec =
                make_backbone(cfg.roster[c], train.input_shape, train.num_classes);
            cs.graph = build_model_graph(spec, cseed);
            assign_groups(cs.graph, cfg.num_edge_groups, cfg.num_node_groups);
            cs.theta = init_theta(cfg.num_edge_groups, cfg.num_node_groups);
            cs.train_indices = plan.client_indices[c];
            cs.theta_opt = OptimizerState(cfg.optimizer);
            cs.weight_opt = OptimizerState(cfg.optimizer);
            cs.bias_opt = OptimizerState(cfg.optimizer);
            cs.rng.seed(cseed ^ 0xA5A5A5A5A5A5A5A5ull);
        }

        FoldResult fr;
        fr.fold = fold;
        fr.fold_seed = fold_seed;
        fr.history = run_federation(to_federation_config(cfg), clients, train);

        for (std::size_t c = 0; c < m; ++c) {
            const std::vector<int> preds =
                predict(clients[c].graph, clients[c].theta, test, cfg.variant);
            const Scores macro =
                precision_recall_f1(preds, test.labels, test.num_classes, Averaging::Macro);
            const Scores micro =
                precision_recall_f1(preds, test.labels, test.num_classes, Averaging::Micro);
            ReportRow row;
            row.mode = mode_to_string(cfg.mode);
            row.model = cfg.roster[c] + "#" + std::to_string(c);
            row.fold = fold;
            row.precision = macro.precision;
            row.recall = macro.recall;
            row.f1 = macro.f1;
            row.micro_f1 = micro.f1;
            fr.rows.push_back(row);
            all_rows.push_back(row);
        }
        result.folds.push_back(std::move(fr));
    }

    write_events(result, cfg, out_dir);
    write_report(all_rows, (fs::path(out_dir) / "metrics.csv").string(),
                 (fs::path(out_dir) / "summary.json").string());

    // Final checkpoint: mean of the last fold's client thetas (the global
    // reference the server would broadcast next).
    const std::vector<ThetaVector>& finals = result.folds.back().history.final_thetas;
    const ThetaVector global = inter_cluster_aggregate(finals);
    const std::vector<std::uint8_t> bytes = serialize_theta(global);
    std::ofstream theta_out(fs::path(out_dir) / "theta_final.uft", std::ios::binary);
    theta_out.write(reinterpret_cast<const char*>(bytes.data()),
                    static_cast<std::streamsize>(bytes.size()));

    std::ofstream resolved(fs::path(out_dir) / "config.resolved.json", std::ios::binary);
    resolved << resolved_json(cfg);
    return result;
}

}  // namespace ufl
