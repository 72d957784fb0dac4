#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "unifiedfl/arch.hpp"

namespace ufl {

enum class EdgeKind : std::uint8_t { Dense = 0, Conv2d = 1 };

struct NodeRecord {
    std::uint32_t layer = 0;      // 0 for input nodes, trainable layer index otherwise
    std::uint32_t group = 0;      // g_v(v)
    std::uint64_t bias_offset = 0;
    std::uint32_t bias_len = 0;   // 0 for input nodes
};

struct EdgeRecord {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    EdgeKind kind = EdgeKind::Dense;
    std::uint16_t kernel_h = 0;
    std::uint16_t kernel_w = 0;
    std::uint16_t stride = 1;
    std::uint16_t padding = 0;
    std::uint32_t group = 0;      // g_e(u, v)
    std::uint64_t weight_offset = 0;
    std::uint32_t weight_len = 1;
};

/// Executor-facing summary of one trainable layer. Edge weights of a layer
/// occupy one contiguous slice of ModelGraph::weights in row-major
/// [out][in](...) order, biases one contiguous slice of biases.
struct GraphLayer {
    LayerKind kind = LayerKind::Dense;       // Dense or Conv2d only
    ActivationKind act = ActivationKind::Identity;
    std::uint32_t edge_group = 0;
    std::uint32_t node_group = 0;
    std::uint32_t first_node = 0;            // node id range [first_node, first_node + node_count)
    std::uint32_t node_count = 0;
    std::uint64_t weight_offset = 0;
    std::uint64_t weight_count = 0;
    std::uint64_t bias_offset = 0;
    std::uint64_t bias_count = 0;
    // dense geometry
    std::uint32_t in_dim = 0;
    std::uint32_t out_dim = 0;
    // conv geometry
    std::uint32_t in_channels = 0, out_channels = 0;
    std::uint32_t kernel_h = 0, kernel_w = 0, stride = 1, padding = 0;
    std::uint32_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

/// Directed acyclic model-graph of one client backbone. Node biases and edge
/// weights live in flat arrays; per-node/per-edge records carry offsets into
/// them. Never transmitted in a federation.
struct ModelGraph {
    std::string arch_name;
    InputShape input;
    std::vector<NodeRecord> nodes;
    std::vector<EdgeRecord> edges;
    std::vector<double> weights;   // all edge weights, flat
    std::vector<double> biases;    // all node biases, flat
    std::vector<std::uint32_t> input_nodes;
    std::vector<std::uint32_t> output_nodes;
    std::uint32_t depth = 0;       // max layer index
    std::vector<GraphLayer> layers;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const { return edges.size(); }
    std::int64_t param_count() const {
        return static_cast<std::int64_t>(weights.size() + biases.size());
    }

    /// Incoming edge ids of a node (computed on demand from edge records).
    std::vector<std::vector<std::uint32_t>> incoming() const;
};

/// Fixed-length structural summary used by the static-clustering ablation:
/// [node count, edge count, depth, mean in-degree, max in-degree,
///  mean betweenness centrality, log10(param count), conv edge fraction].
using TopologyDescriptor = std::array<double, 8>;

/// Builds the channel-granularity model-graph for a validated spec. Dense
/// layers get one node per neuron and one scalar edge per weight; conv layers
/// get one node per output channel and one (in_ch -> out_ch) edge per pair,
/// each carrying its kernel_h x kernel_w slab. A dense layer downstream of
/// conv connects every channel node to every output neuron with a weight
/// vector over the channel's spatial positions. Weights are Glorot-uniform
/// from the given seed, biases zero. When init_bound > 0, each layer's Glorot
/// half-width is capped at init_bound.
ModelGraph build_model_graph(const ArchitectureSpec& spec, std::uint64_t seed,
                             double init_bound = 0.0);

/// Deterministic grouping by normalized layer depth:
/// group(edge) = floor(G_e * (layer(dst) - 1) / depth), analogously for nodes.
void assign_groups(ModelGraph& graph, int num_edge_groups, int num_node_groups);

/// Unnormalized directed shortest-path betweenness (Brandes accumulation).
std::vector<double> betweenness_centrality(const ModelGraph& graph);

TopologyDescriptor topology_descriptor(const ModelGraph& graph);

/// "UFG1" binary format; round-trips all fields bit-exactly.
std::vector<std::uint8_t> serialize_graph(const ModelGraph& graph);
ModelGraph deserialize_graph(const std::vector<std::uint8_t>& bytes);

bool operator==(const ModelGraph& a, const ModelGraph& b);

}  // namespace ufl
