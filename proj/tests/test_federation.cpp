#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "unifiedfl/errors.hpp"
#include "unifiedfl/federation.hpp"

using namespace ufl;

namespace {

ThetaVector constant_theta(double v) {
    ThetaVector t = init_theta(1, 1);
    t.edge_scale[0] = v;
    t.edge_shift[0] = v;
    t.node_scale[0] = v;
    t.node_shift[0] = v;
    t.global_edge_scale = v;
    t.global_node_scale = v;
    return t;
}

// Fully initialized clients over a shared synthetic train split.
std::vector<ClientState> make_clients(const Dataset& train,
                                      const std::vector<std::string>& roster,
                                      const OptimizerConfig& opt, std::uint64_t seed_base,
                                      int ge = 4, int gv = 4) {
    const std::size_t m = roster.size();
    const SplitPlan plan = partition_iid(train, m, seed_base);
    std::vector<ClientState> clients(m);
    for (std::size_t c = 0; c < m; ++c) {
        ClientState& cs = clients[c];
        cs.id = static_cast<std::uint32_t>(c);
        const ArchitectureSpec spec = make_backbone(roster[c], train.input_shape,
                                                    train.num_classes);
        cs.graph = build_model_graph(spec, seed_base * 100 + c);
        assign_groups(cs.graph, ge, gv);
        cs.theta = init_theta(ge, gv);
        cs.train_indices = plan.client_indices[c];
        cs.theta_opt = OptimizerState(opt);
        cs.weight_opt = OptimizerState(opt);
        cs.bias_opt = OptimizerState(opt);
        cs.rng.seed(seed_base * 977 + c);
    }
    return clients;
}

FederationConfig small_config(FederationMode mode) {
    FederationConfig cfg;
    cfg.mode = mode;
    cfg.schedule = Schedule{5, 20, 30, 20, 100};
    cfg.batch_size = 16;
    return cfg;
}

}  // namespace

TEST_CASE("schedule validation reports every violation") {
    CHECK_NOTHROW(validate_schedule(Schedule{5, 20, 30, 20, 100}));
    try {
        validate_schedule(Schedule{5, 3, -1, 0, 100});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("t_bc") != std::string::npos);
        CHECK(msg.find("t_init") != std::string::npos);
        CHECK(msg.find("t_update") != std::string::npos);
    }
}

TEST_CASE("intra-cluster aggregation examples") {
    Partition p;
    p.assignment = {0};
    p.num_clusters = 1;
    const ThetaVector solo = constant_theta(0.7);
    CHECK(intra_cluster_aggregate({solo}, p)[0] == solo);

    // Midpoint of flattened (1,...) and (3,...).
    Partition pair;
    pair.assignment = {0, 0};
    pair.num_clusters = 1;
    const std::vector<ThetaVector> two = {constant_theta(1.0), constant_theta(3.0)};
    CHECK(intra_cluster_aggregate(two, pair)[0] == constant_theta(2.0));

    // One all-clients cluster equals the direct mean.
    Partition all;
    all.assignment = {0, 0, 0};
    all.num_clusters = 1;
    const std::vector<ThetaVector> three = {constant_theta(0.0), constant_theta(1.0),
                                            constant_theta(2.0)};
    CHECK(intra_cluster_aggregate(three, all)[0] == constant_theta(1.0));

    Partition holey;
    holey.assignment = {0, 0};
    holey.num_clusters = 2;  // cluster 1 has no members
    CHECK_THROWS_AS(intra_cluster_aggregate(two, holey), ContractError);
}

TEST_CASE("inter-cluster mean weights clusters, not clients") {
    // Clusters {A, B} and {C} with theta values 0, 1, 1.
    Partition p;
    p.assignment = {0, 0, 1};
    p.num_clusters = 2;
    const std::vector<ThetaVector> thetas = {constant_theta(0.0), constant_theta(1.0),
                                             constant_theta(1.0)};
    const std::vector<ThetaVector> centers = intra_cluster_aggregate(thetas, p);
    CHECK(inter_cluster_aggregate(centers) == constant_theta(0.75));
    CHECK(inter_cluster_aggregate(thetas) == constant_theta(2.0 / 3.0));  // per-client mean
    CHECK(inter_cluster_aggregate({constant_theta(0.3)}) == constant_theta(0.3));
}

TEST_CASE("intra centers stay within the coordinate-wise member envelope") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ThetaVector> thetas;
        for (int c = 0; c < 6; ++c) {
            ThetaVector t = init_theta(3, 2);
            std::vector<double> flat = flatten(t);
            for (double& v : flat) v = u(rng);
            thetas.push_back(unflatten(flat, 3, 2));
        }
        Partition p;
        p.assignment = {0, 0, 1, 1, 1, 0};
        p.num_clusters = 2;
        const std::vector<ThetaVector> centers = intra_cluster_aggregate(thetas, p);
        for (std::size_t c = 0; c < 2; ++c) {
            const std::vector<double> center = flatten(centers[c]);
            for (std::size_t k = 0; k < center.size(); ++k) {
                double lo = 1e30, hi = -1e30;
                for (std::size_t i = 0; i < thetas.size(); ++i)
                    if (p.assignment[i] == c) {
                        const double v = flatten(thetas[i])[k];
                        lo = std::min(lo, v);
                        hi = std::max(hi, v);
                    }
                CHECK(center[k] >= lo - 1e-12);
                CHECK(center[k] <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("event gates fire per the schedule and warm-up") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 40, {}, 2);
    OptimizerConfig zero;
    zero.lr = 0.0;
    zero.weight_decay = 0.0;
    FederationConfig cfg = small_config(FederationMode::Dynamic);
    cfg.theta_optimizer = zero;
    cfg.base_optimizer = zero;
    std::vector<ClientState> clients =
        make_clients(train, {"MLP_a", "MLP_a", "MLP_a", "MLP_a"}, zero, 3);
    const ThetaVector theta0 = clients[0].theta;
    const RunHistory h = run_federation(cfg, clients, train);
    REQUIRE(h.events.size() == 100);

    std::vector<int> intra, inter, recluster;
    for (const RoundEvent& ev : h.events) {
        if (ev.intra_fired) intra.push_back(ev.round);
        if (ev.inter_fired) inter.push_back(ev.round);
        if (ev.recluster_fired) recluster.push_back(ev.round);
    }
    CHECK(intra.size() == 20);
    CHECK(inter == std::vector<int>{40, 60, 80, 100});
    CHECK(recluster == std::vector<int>{20, 40, 60, 80, 100});
    for (int r : inter) CHECK(r > 30);

    // lr 0 everywhere: theta returns unchanged.
    for (const ThetaVector& t : h.final_thetas) CHECK(t == theta0);
}

TEST_CASE("isolated mode never aggregates") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 30, {}, 6);
    OptimizerConfig opt;
    FederationConfig cfg = small_config(FederationMode::Isolated);
    cfg.schedule.rounds = 12;
    std::vector<ClientState> clients = make_clients(train, {"MLP_a", "MLP_a", "MLP_a"}, opt, 4);
    const RunHistory h = run_federation(cfg, clients, train);
    for (const RoundEvent& ev : h.events) {
        CHECK_FALSE(ev.intra_fired);
        CHECK_FALSE(ev.inter_fired);
        CHECK_FALSE(ev.recluster_fired);
    }
    CHECK(h.transmissions.empty());
    // Clients diverge without aggregation.
    CHECK_FALSE(h.final_thetas[0] == h.final_thetas[1]);
}

TEST_CASE("run_federation with zero rounds is an empty history") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 30, {}, 6);
    OptimizerConfig opt;
    FederationConfig cfg = small_config(FederationMode::Dynamic);
    cfg.schedule.rounds = 0;
    std::vector<ClientState> clients = make_clients(train, {"MLP_a", "MLP_a", "MLP_a"}, opt, 4);
    const ThetaVector theta0 = clients[0].theta;
    const RunHistory h = run_federation(cfg, clients, train);
    CHECK(h.events.empty());
    for (const ThetaVector& t : h.final_thetas) CHECK(t == theta0);
}

TEST_CASE("identical configuration and seeds reproduce the run bit-exactly") {
    const Dataset train = synth_gaussian_mixture(3, 6, 3.0, 60, {}, 8);
    OptimizerConfig opt;
    FederationConfig cfg = small_config(FederationMode::Dynamic);
    cfg.schedule = Schedule{2, 6, 4, 4, 15};
    auto run_once = [&] {
        std::vector<ClientState> clients =
            make_clients(train, {"MLP_a", "MLP_b", "MLP_a", "MLP_b"}, opt, 12);
        return run_federation(cfg, clients, train);
    };
    const RunHistory a = run_once();
    const RunHistory b = run_once();
    REQUIRE(a.events.size() == b.events.size());
    CHECK(a.final_thetas == b.final_thetas);
    CHECK(a.final_partition == b.final_partition);
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].client_losses == b.events[i].client_losses);
        CHECK(a.events[i].assignment == b.events[i].assignment);
    }
}

TEST_CASE("forced single cluster reproduces the fedavg trajectory") {
    const Dataset train = synth_gaussian_mixture(2, 6, 4.0, 60, {}, 14);
    OptimizerConfig opt;
    const std::vector<std::string> roster = {"MLP_a", "MLP_a", "MLP_b", "MLP_b"};

    FederationConfig favg = small_config(FederationMode::VanillaFedAvg);
    favg.schedule = Schedule{1, 2, 0, 5, 12};
    std::vector<ClientState> a = make_clients(train, roster, opt, 30);

    FederationConfig dyn = small_config(FederationMode::Dynamic);
    dyn.schedule = Schedule{1, 2, 0, 5, 12};
    dyn.force_single_cluster = true;
    std::vector<ClientState> b = make_clients(train, roster, opt, 30);

    Partition pa, pb;
    pa.assignment.assign(4, 0);
    pa.num_clusters = 1;
    pb = pa;
    RunHistory ha, hb;
    for (int round = 1; round <= 12; ++round) {
        run_round(favg, round, a, pa, train, ha, nullptr);
        run_round(dyn, round, b, pb, train, hb, nullptr);
        for (std::size_t c = 0; c < 4; ++c) CHECK(a[c].theta == b[c].theta);
    }
}

TEST_CASE("boundary log carries only theta payloads of length P") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 40, {}, 9);
    OptimizerConfig opt;
    FederationConfig cfg = small_config(FederationMode::Dynamic);
    cfg.schedule = Schedule{2, 5, 3, 4, 20};
    std::vector<ClientState> clients =
        make_clients(train, {"MLP_a", "MLP_a", "MLP_b", "MLP_b"}, opt, 18);
    const std::size_t p_len = clients[0].theta.length();
    const RunHistory h = run_federation(cfg, clients, train);
    CHECK_FALSE(h.transmissions.empty());
    for (const Transmission& t : h.transmissions) {
        CHECK(t.payload_kind == "theta");
        CHECK(t.payload_length == p_len);
    }
}

TEST_CASE("gradient-moment and descriptor signals drive reclustering") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 60, {}, 10);
    OptimizerConfig opt;
    for (ClusterSignal signal :
         {ClusterSignal::GradientMoments, ClusterSignal::TopologyDescriptor}) {
        FederationConfig cfg = small_config(FederationMode::Dynamic);
        cfg.schedule = Schedule{2, 8, 10, 3, 9};
        cfg.signal = signal;
        std::vector<ClientState> clients =
            make_clients(train, {"MLP_a", "MLP_a", "MLP_b", "MLP_b"}, opt, 22);
        const RunHistory h = run_federation(cfg, clients, train);
        bool reclustered = false;
        for (const RoundEvent& ev : h.events) reclustered |= ev.recluster_fired;
        CHECK(reclustered);
    }
}

TEST_CASE("ema smoothing changes the distance stream deterministically") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 60, {}, 10);
    OptimizerConfig opt;
    FederationConfig cfg = small_config(FederationMode::Dynamic);
    cfg.schedule = Schedule{2, 8, 10, 3, 9};
    cfg.ema = 0.5;
    auto run_once = [&] {
        std::vector<ClientState> clients =
            make_clients(train, {"MLP_a", "MLP_a", "MLP_b", "MLP_b"}, opt, 25);
        return run_federation(cfg, clients, train);
    };
    const RunHistory a = run_once();
    const RunHistory b = run_once();
    CHECK(a.final_partition == b.final_partition);
}

TEST_CASE("fewer than three clients degrade to a single cluster") {
    const Dataset train = synth_gaussian_mixture(2, 4, 3.0, 40, {}, 11);
    OptimizerConfig opt;
    FederationConfig cfg = small_config(FederationMode::Dynamic);
    cfg.schedule = Schedule{1, 3, 0, 2, 4};
    std::vector<ClientState> clients = make_clients(train, {"MLP_a", "MLP_b"}, opt, 5);
    const RunHistory h = run_federation(cfg, clients, train);
    CHECK(h.final_partition.num_clusters == 1);
    CHECK(h.final_partition.degenerate);
}
