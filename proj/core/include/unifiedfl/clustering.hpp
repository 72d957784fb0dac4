#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "unifiedfl/engine.hpp"
#include "unifiedfl/model_graph.hpp"

namespace ufl {

/// Symmetric n x n distance matrix with zero diagonal.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // row-major n*n

    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// One agglomerative merge. Children < n refer to leaves; children >= n refer
/// to the merge with index child - n (scipy convention). Height is the Ward
/// cost (within-cluster sum-of-squares increase).
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;
};

struct LinkageTree {
    std::size_t num_leaves = 0;
    std::vector<Merge> merges;  // n - 1 entries, non-decreasing heights
};

struct Partition {
    std::vector<std::uint32_t> assignment;  // client id -> cluster id in [0, M)
    std::uint32_t num_clusters = 1;
    bool degenerate = false;  // set when n < 3 forced a single cluster

    friend bool operator==(const Partition&, const Partition&) = default;
};

/// Euclidean distances between equal-length vectors; each pair computed once.
DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& vectors);

/// Agglomerative clustering with Ward's linkage via the Lance-Williams
/// update. Initial pair cost d^2/2; ties broken by smallest (i, j) cluster-id
/// pair for determinism.
LinkageTree ward_agglomerate(const DistanceMatrix& d);

/// Flat partition from cutting the tree into k clusters. Cluster ids are
/// assigned by smallest member index.
Partition cut_tree(const LinkageTree& tree, std::size_t k);

/// Mean silhouette score over all points; singleton clusters score 0.
/// Requires 2 <= M <= n - 1.
double silhouette(const DistanceMatrix& d, const Partition& p);

/// Evaluates cuts K = 2 .. min(k_max, n-1) and returns the argmax-silhouette
/// partition (ties toward smaller K). For n < 3 returns a single-cluster
/// partition with the degenerate flag set.
Partition cut_by_silhouette(const LinkageTree& tree, const DistanceMatrix& d, std::size_t k_max);

/// Z-score-standardizes descriptor coordinates (dropping zero-variance ones),
/// then Ward + fixed-K cut. Computed once at round 0 in static mode.
Partition static_topology_clusters(const std::vector<TopologyDescriptor>& descriptors,
                                   std::size_t k);

/// Per-block (mean, uncorrected variance) of the four theta group blocks of a
/// gradient, concatenated: 8 values.
std::array<double, 8> gradient_moment_descriptor(const GradientBundle& g,
                                                 std::size_t num_edge_groups,
                                                 std::size_t num_node_groups);

}  // namespace ufl
