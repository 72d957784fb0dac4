#include "unifiedfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unifiedfl/errors.hpp"

namespace ufl {

void validate_schedule(const Schedule& s) {
    std::vector<std::string> problems;
    if (s.t_ic < 1) problems.push_back("t_ic must be >= 1");
    if (s.t_bc <= s.t_ic) problems.push_back("t_bc must be > t_ic");
    if (s.t_init < 0) problems.push_back("t_init must be >= 0");
    if (s.t_update < 1) problems.push_back("t_update must be >= 1");
    if (s.rounds < 0) problems.push_back("rounds must be >= 0");
    if (!problems.empty()) {
        std::string msg = "invalid schedule:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw ConfigError(msg);
    }
}

std::vector<ThetaVector> intra_cluster_aggregate(const std::vector<ThetaVector>& thetas,
                                                 const Partition& p) {
    if (thetas.size() != p.assignment.size())
        throw ContractError("intra_cluster_aggregate: thetas do not cover the partition");
    const std::size_t m = p.num_clusters;
    const std::size_t plen = thetas.front().length();
    std::vector<std::vector<double>> sums(m, std::vector<double>(plen, 0.0));
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        const std::vector<double> flat = flatten(thetas[i]);
        if (flat.size() != plen)
            throw ContractError("intra_cluster_aggregate: theta length mismatch");
        const std::uint32_t c = p.assignment[i];
        for (std::size_t j = 0; j < plen; ++j) sums[c][j] += flat[j];
        ++counts[c];
    }
    std::vector<ThetaVector> centers;
    centers.reserve(m);
    const int ge = static_cast<int>(thetas.front().num_edge_groups());
    const int gv = static_cast<int>(thetas.front().num_node_groups());
    for (std::size_t c = 0; c < m; ++c) {
        if (counts[c] == 0) throw ContractError("intra_cluster_aggregate: empty cluster");
        for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
        centers.push_back(unflatten(sums[c], ge, gv));
    }
    return centers;
}

ThetaVector inter_cluster_aggregate(const std::vector<ThetaVector>& centers) {
    if (centers.empty()) throw ContractError("inter_cluster_aggregate: no centers");
    const std::size_t plen = centers.front().length();
    std::vector<double> sum(plen, 0.0);
    for (const ThetaVector& c : centers) {
        const std::vector<double> flat = flatten(c);
        if (flat.size() != plen)
            throw ContractError("inter_cluster_aggregate: center length mismatch");
        for (std::size_t j = 0; j < plen; ++j) sum[j] += flat[j];
    }
    for (double& v : sum) v /= static_cast<double>(centers.size());
    return unflatten(sum, static_cast<int>(centers.front().num_edge_groups()),
                     static_cast<int>(centers.front().num_node_groups()));
}

std::vector<double> clustering_signal(const FederationConfig& cfg, const ClientState& client) {
    switch (cfg.signal) {
        case ClusterSignal::Theta:
            return flatten(client.theta);
        case ClusterSignal::TopologyDescriptor: {
            // Combined signal: static topology summary plus the live theta.
            const TopologyDescriptor t = topology_descriptor(client.graph);
            std::vector<double> v(t.begin(), t.end());
            const std::vector<double> th = flatten(client.theta);
            v.insert(v.end(), th.begin(), th.end());
            return v;
        }
        case ClusterSignal::GradientMoments: {
            const auto d = gradient_moment_descriptor(
                client.last_gradient, client.theta.num_edge_groups(),
                client.theta.num_node_groups());
            return std::vector<double>(d.begin(), d.end());
        }
    }
    throw ContractError("clustering_signal: unknown signal");
}

namespace {

void log_upload(RunHistory& h, int round, std::uint32_t client, const char* kind,
                std::size_t len) {
    h.transmissions.push_back({round, "client_to_server", client, kind, len});
}

void log_download(RunHistory& h, int round, std::uint32_t client, std::size_t len) {
    h.transmissions.push_back({round, "server_to_client", client, "theta", len});
}

Partition single_cluster(std::size_t n) {
    Partition p;
    p.assignment.assign(n, 0);
    p.num_clusters = 1;
    return p;
}

void recluster(const FederationConfig& cfg, int round, std::vector<ClientState>& clients,
               Partition& partition, RunHistory& history, RoundEvent& ev,
               std::vector<std::vector<double>>* ema_distances) {
    ev.recluster_fired = true;
    if (cfg.force_single_cluster) {
        partition = single_cluster(clients.size());
        return;
    }
    std::vector<std::vector<double>> signals;
    signals.reserve(clients.size());
    for (const ClientState& c : clients) {
        std::vector<double> s = clustering_signal(cfg, c);
        log_upload(history, round, c.id,
                   cfg.signal == ClusterSignal::Theta ? "theta" : "descriptor", s.size());
        signals.push_back(std::move(s));
    }
    if (clients.size() < 3) {
        partition = single_cluster(clients.size());
        partition.degenerate = true;
        return;
    }
    DistanceMatrix d = pairwise_distances(signals);
    if (cfg.ema > 0.0 && ema_distances != nullptr) {
        if (!ema_distances->empty()) {
            for (std::size_t i = 0; i < d.n; ++i)
                for (std::size_t j = 0; j < d.n; ++j)
                    d.at(i, j) = cfg.ema * (*ema_distances)[i][j] + (1.0 - cfg.ema) * d.at(i, j);
        }
        ema_distances->assign(d.n, std::vector<double>(d.n));
        for (std::size_t i = 0; i < d.n; ++i)
            for (std::size_t j = 0; j < d.n; ++j) (*ema_distances)[i][j] = d.at(i, j);
    }
    const LinkageTree tree = ward_agglomerate(d);
    partition = cut_by_silhouette(tree, d, cfg.k_max);
    if (!partition.degenerate && partition.num_clusters >= 2)
        ev.silhouette_score = silhouette(d, partition);
}

}  // namespace

void run_round(const FederationConfig& cfg, int round, std::vector<ClientState>& clients,
               Partition& partition, const Dataset& train, RunHistory& history,
               std::vector<std::vector<double>>* ema_distances) {
    RoundEvent ev;
    ev.round = round;

    for (ClientState& c : clients) {
        try {
            const EpochResult r = run_local_epoch(
                c.graph, c.theta, train.features, train.labels, train.dim(), c.train_indices,
                c.theta_opt, c.weight_opt, c.bias_opt, c.rng, cfg.batch_size, cfg.variant);
            c.epoch_losses.push_back(r.mean_loss);
            c.last_gradient = r.last_gradient;
            ev.client_losses.push_back(r.mean_loss);
        } catch (const NumericError& e) {
            throw NumericError("client " + std::to_string(c.id) + ": " + e.what());
        }
    }

    const Schedule& s = cfg.schedule;
    if (cfg.mode == FederationMode::VanillaFedAvg) {
        // Direct (optionally shard-size-weighted) mean over clients, every round.
        const std::size_t plen = clients.front().theta.length();
        std::vector<double> sum(plen, 0.0);
        double wsum = 0.0;
        for (const ClientState& c : clients) {
            const std::vector<double> flat = flatten(c.theta);
            const double w =
                cfg.weighted_fedavg ? static_cast<double>(c.train_indices.size()) : 1.0;
            for (std::size_t j = 0; j < plen; ++j) sum[j] += w * flat[j];
            wsum += w;
            log_upload(history, round, c.id, "theta", plen);
        }
        for (double& v : sum) v /= wsum;
        const ThetaVector mean =
            unflatten(sum, static_cast<int>(clients.front().theta.num_edge_groups()),
                      static_cast<int>(clients.front().theta.num_node_groups()));
        for (ClientState& c : clients) {
            c.theta = mean;
            log_download(history, round, c.id, plen);
        }
        ev.intra_fired = true;
    } else if (cfg.mode != FederationMode::Isolated) {
        if (round % s.t_ic == 0) {
            ev.intra_fired = true;
            std::vector<ThetaVector> thetas;
            thetas.reserve(clients.size());
            for (const ClientState& c : clients) {
                thetas.push_back(c.theta);
                log_upload(history, round, c.id, "theta", c.theta.length());
            }
            const std::vector<ThetaVector> centers = intra_cluster_aggregate(thetas, partition);
            for (ClientState& c : clients) {
                c.theta = centers[partition.assignment[c.id]];
                log_download(history, round, c.id, c.theta.length());
            }
        }
        if (round > s.t_init && round % s.t_bc == 0) {
            ev.inter_fired = true;
            ThetaVector merged;
            if (cfg.inter_per_client_mean) {
                std::vector<ThetaVector> thetas;
                for (const ClientState& c : clients) {
                    thetas.push_back(c.theta);
                    log_upload(history, round, c.id, "theta", c.theta.length());
                }
                merged = inter_cluster_aggregate(thetas);
            } else {
                // Centers recomputed from the clients' current thetas.
                std::vector<ThetaVector> thetas;
                for (const ClientState& c : clients) {
                    thetas.push_back(c.theta);
                    log_upload(history, round, c.id, "theta", c.theta.length());
                }
                merged = inter_cluster_aggregate(intra_cluster_aggregate(thetas, partition));
            }
            for (ClientState& c : clients) {
                c.theta = merged;
                log_download(history, round, c.id, c.theta.length());
            }
        }
        if (cfg.mode == FederationMode::Dynamic && round % s.t_update == 0)
            recluster(cfg, round, clients, partition, history, ev, ema_distances);
    }

    ev.num_clusters = partition.num_clusters;
    ev.assignment = partition.assignment;
    history.events.push_back(std::move(ev));
}

RunHistory run_federation(const FederationConfig& cfg, std::vector<ClientState>& clients,
                          const Dataset& train) {
    validate_schedule(cfg.schedule);
    if (clients.empty()) throw ContractError("run_federation: no clients");
    for (const ClientState& c : clients) {
        if (c.train_indices.empty())
            throw ContractError("run_federation: client " + std::to_string(c.id) +
                                " has no data");
        if (c.theta.length() != clients.front().theta.length())
            throw ContractError("run_federation: theta length mismatch across clients");
    }

    RunHistory history;
    Partition partition;
    const std::size_t n = clients.size();
    switch (cfg.mode) {
        case FederationMode::Isolated:
            partition.assignment.resize(n);
            std::iota(partition.assignment.begin(), partition.assignment.end(), 0u);
            partition.num_clusters = static_cast<std::uint32_t>(n);
            break;
        case FederationMode::VanillaFedAvg:
            partition = single_cluster(n);
            break;
        case FederationMode::StaticCluster: {
            std::vector<TopologyDescriptor> descriptors;
            descriptors.reserve(n);
            for (const ClientState& c : clients)
                descriptors.push_back(topology_descriptor(c.graph));
            partition = static_topology_clusters(
                descriptors, std::min<std::size_t>(static_cast<std::size_t>(cfg.static_k), n));
            break;
        }
        case FederationMode::Dynamic: {
            if (cfg.force_single_cluster || n < 3) {
                partition = single_cluster(n);
                partition.degenerate = !cfg.force_single_cluster && n < 3;
            } else {
                // Initial partition from topology alone; theta is still uniform.
                std::vector<std::vector<double>> signals;
                for (const ClientState& c : clients) {
                    const TopologyDescriptor t = topology_descriptor(c.graph);
                    signals.emplace_back(t.begin(), t.end());
                }
                const DistanceMatrix d = pairwise_distances(signals);
                const LinkageTree tree = ward_agglomerate(d);
                partition = cut_by_silhouette(tree, d, cfg.k_max);
            }
            break;
        }
    }

    std::vector<std::vector<double>> ema_distances;
    for (int t = 1; t <= cfg.schedule.rounds; ++t)
        run_round(cfg, t, clients, partition, train, history, &ema_distances);

    history.final_partition = partition;
    history.final_thetas.reserve(n);
    for (const ClientState& c : clients) history.final_thetas.push_back(c.theta);
    return history;
}

}  // namespace ufl
