#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unifiedfl/clustering.hpp"
#include "unifiedfl/data.hpp"
#include "unifiedfl/engine.hpp"
#include "unifiedfl/model_graph.hpp"
#include "unifiedfl/theta.hpp"

namespace ufl {

enum class FederationMode { Isolated, VanillaFedAvg, StaticCluster, Dynamic };

enum class ClusterSignal { Theta, TopologyDescriptor, GradientMoments };

/// Aggregation cadence. Inter-cluster merges only fire after the warm-up.
struct Schedule {
    int t_ic = 5;       // rounds between intra-cluster merges
    int t_bc = 20;      // rounds between inter-cluster merges
    int t_init = 30;    // warm-up rounds before any inter-cluster merge
    int t_update = 20;  // rounds between reclusterings (dynamic mode)
    int rounds = 100;   // total rounds T
};

/// Throws ConfigError listing every violated constraint.
void validate_schedule(const Schedule& s);

struct ClientState {
    std::uint32_t id = 0;
    ModelGraph graph;
    ThetaVector theta;
    std::vector<std::uint32_t> train_indices;  // into the shared train split
    OptimizerState theta_opt;
    OptimizerState weight_opt;
    OptimizerState bias_opt;
    std::mt19937_64 rng{0};
    std::vector<double> epoch_losses;
    GradientBundle last_gradient;
};

/// One entry per value crossing the client/server boundary, for audit:
/// payload_kind must always be "theta".
struct Transmission {
    int round = 0;
    std::string direction;  // "client_to_server" or "server_to_client"
    std::uint32_t client = 0;
    std::string payload_kind;
    std::size_t payload_length = 0;
};

struct RoundEvent {
    int round = 0;
    bool intra_fired = false;
    bool inter_fired = false;
    bool recluster_fired = false;
    std::uint32_t num_clusters = 1;
    double silhouette_score = 0.0;  // 0 when no recluster fired or degenerate
    std::vector<double> client_losses;
    std::vector<std::uint32_t> assignment;  // partition snapshot after the round
};

struct RunHistory {
    std::vector<RoundEvent> events;
    std::vector<Transmission> transmissions;
    Partition final_partition;
    std::vector<ThetaVector> final_thetas;  // per client working theta
};

struct FederationConfig {
    FederationMode mode = FederationMode::Dynamic;
    Schedule schedule;
    ClusterSignal signal = ClusterSignal::Theta;
    OptimizerConfig theta_optimizer;
    OptimizerConfig base_optimizer;
    int batch_size = 32;
    SoftSignVariant variant = SoftSignVariant::Scaled;
    std::size_t k_max = 6;
    int static_k = 2;           // fixed K for static mode topology clustering
    double ema = 0.0;           // EMA coefficient on the distance matrix (0 = off)
    bool force_single_cluster = false;
    bool weighted_fedavg = false;        // shard-size gamma weights (fedavg mode)
    bool inter_per_client_mean = false;  // average over clients instead of centers
};

/// Unweighted coordinate-wise mean per cluster. Returns one center per
/// cluster id. Throws ContractError on an empty cluster.
std::vector<ThetaVector> intra_cluster_aggregate(const std::vector<ThetaVector>& thetas,
                                                 const Partition& p);

/// Unweighted mean of cluster centers. With unequal cluster sizes this
/// differs from the mean over clients.
ThetaVector inter_cluster_aggregate(const std::vector<ThetaVector>& centers);

/// One barrier-synchronized round: local epochs, then the gated aggregation
/// steps in order (intra, inter, recluster). Appends to history.
void run_round(const FederationConfig& cfg, int round, std::vector<ClientState>& clients,
               Partition& partition, const Dataset& train, RunHistory& history,
               std::vector<std::vector<double>>* ema_distances);

/// Full federation: initial partition per mode, then `rounds` calls of
/// run_round. Deterministic given config and pre-seeded client rngs.
RunHistory run_federation(const FederationConfig& cfg, std::vector<ClientState>& clients,
                          const Dataset& train);

/// Signal vector fed to the pairwise distance computation for one client.
std::vector<double> clustering_signal(const FederationConfig& cfg, const ClientState& client);

}  // namespace ufl
