// Experiment runner CLI: run / validate / inspect subcommands over the
// federation library. Exit codes: 0 success, 1 config error, 2 runtime error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "unifiedfl/config.hpp"
#include "unifiedfl/errors.hpp"
#include "unifiedfl/runner.hpp"

namespace {

struct Overrides {
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> t_ic, t_bc, t_init, t_update, rounds, folds;
    std::optional<std::string> signal;
};

// Flags win over config-file values.
void apply(ufl::ExperimentConfig& cfg, const Overrides& o) {
    if (o.mode) cfg.mode = ufl::mode_from_string(*o.mode);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out_dir = *o.out;
    if (o.t_ic) cfg.schedule.t_ic = *o.t_ic;
    if (o.t_bc) cfg.schedule.t_bc = *o.t_bc;
    if (o.t_init) cfg.schedule.t_init = *o.t_init;
    if (o.t_update) cfg.schedule.t_update = *o.t_update;
    if (o.rounds) cfg.schedule.rounds = *o.rounds;
    if (o.folds) cfg.folds = *o.folds;
    if (o.signal) cfg.signal = ufl::signal_from_string(*o.signal);
}

ufl::ExperimentConfig load(const std::string& config_path, const Overrides& o) {
    ufl::ExperimentConfig cfg =
        config_path.empty() ? ufl::parse_config("{}") : ufl::load_config_file(config_path);
    apply(cfg, o);
    const std::vector<std::string> problems = ufl::validate_config(cfg);
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ufl::ConfigError(msg);
    }
    return cfg;
}

void add_override_flags(CLI::App* cmd, std::string& config_path, Overrides& o) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--mode", o.mode, "isolated|fedavg|static|unifiedfl");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output root directory");
    cmd->add_option("--t-ic", o.t_ic, "intra-cluster merge interval");
    cmd->add_option("--t-bc", o.t_bc, "inter-cluster merge interval");
    cmd->add_option("--t-init", o.t_init, "warm-up rounds");
    cmd->add_option("--t-update", o.t_update, "reclustering interval");
    cmd->add_option("--rounds", o.rounds, "total rounds");
    cmd->add_option("--folds", o.folds, "cross-validation folds");
    cmd->add_option("--signal", o.signal, "theta|descriptor|grad_moments");
}

int inspect(const std::string& events_path) {
    std::ifstream in(events_path);
    if (!in) {
        std::cerr << "cannot open " << events_path << "\n";
        return 2;
    }
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        std::ostringstream out;
        out << "fold " << j.value("fold", 0) << " round " << j.value("round", 0) << "  [";
        out << (j.value("intra", false) ? "intra " : "");
        out << (j.value("inter", false) ? "inter " : "");
        out << (j.value("recluster", false) ? "recluster" : "");
        out << "]  K=" << j.value("num_clusters", 0)
            << " silhouette=" << j.value("silhouette", 0.0);
        if (j.contains("client_losses")) {
            double sum = 0.0;
            for (double v : j.at("client_losses").get<std::vector<double>>()) sum += v;
            const std::size_t n = j.at("client_losses").size();
            if (n > 0) out << " mean_loss=" << sum / static_cast<double>(n);
        }
        std::cout << out.str() << "\n";
        ++rows;
    }
    std::cout << rows << " round records\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UnifiedFL federated training simulator"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    std::string events_path;

    CLI::App* run_cmd = app.add_subcommand("run", "execute an experiment");
    add_override_flags(run_cmd, config_path, overrides);

    CLI::App* validate_cmd = app.add_subcommand("validate", "check a config and exit");
    add_override_flags(validate_cmd, config_path, overrides);

    CLI::App* inspect_cmd = app.add_subcommand("inspect", "pretty-print an events.jsonl");
    inspect_cmd->add_option("events", events_path, "path to events.jsonl")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect_cmd->parsed()) return inspect(events_path);
        const ufl::ExperimentConfig cfg = load(config_path, overrides);
        if (validate_cmd->parsed()) {
            std::cout << "config ok\n" << ufl::resolved_json(cfg);
            return 0;
        }
        const std::string dir = ufl::make_run_directory(cfg);
        const ufl::ExperimentResult result = ufl::run_experiment(cfg, dir);
        std::cout << "run complete: " << result.folds.size() << " folds -> " << dir << "\n";
        return 0;
    } catch (const ufl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
