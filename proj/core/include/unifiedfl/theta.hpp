#pragma once

#include <cstdint>
#include <vector>

#include "unifiedfl/model_graph.hpp"

namespace ufl {

enum class SoftSignVariant {
    Scaled,  // s * x / (1 + |x|)   (normative default)
    Ratio,   // x / (1 + |x| / s)
};

/// The shared parameter vector. Fixed length P = 2*G_e + 2*G_v + 2 for every
/// client in a federation; the only object that crosses the client/server
/// boundary. Flatten order: edge_scale || edge_shift || node_scale ||
/// node_shift || global_edge_scale || global_node_scale.
struct ThetaVector {
    std::vector<double> edge_scale;
    std::vector<double> edge_shift;
    std::vector<double> node_scale;
    std::vector<double> node_shift;
    double global_edge_scale = 1.0;
    double global_node_scale = 1.0;

    std::size_t num_edge_groups() const { return edge_scale.size(); }
    std::size_t num_node_groups() const { return node_scale.size(); }
    std::size_t length() const {
        return 2 * edge_scale.size() + 2 * node_scale.size() + 2;
    }

    friend bool operator==(const ThetaVector&, const ThetaVector&) = default;
};

/// Effective weights/biases produced by modulating a graph's base features
/// with a ThetaVector. Shapes mirror the graph's flat parameter arrays.
struct EffectiveParameters {
    std::vector<double> weights;
    std::vector<double> biases;
};

/// Element-wise two-argument softsign. Default variant: s * x / (1 + |x|);
/// odd in x, |output| < |s|.
double softsign(double x, double s, SoftSignVariant variant = SoftSignVariant::Scaled);

/// All per-group and global scales 1, all shifts 0.
ThetaVector init_theta(int num_edge_groups, int num_node_groups);

std::vector<double> flatten(const ThetaVector& theta);
ThetaVector unflatten(const std::vector<double>& v, int num_edge_groups, int num_node_groups);

/// Euclidean norm of the flattened difference. Throws ContractError on
/// length mismatch.
double theta_distance(const ThetaVector& a, const ThetaVector& b);

/// effective_weight = softsign(w * edge_scale[g] + edge_shift[g], global_edge_scale)
/// and analogously for biases. Pure; the graph is not mutated. Throws
/// ContractError if the graph's group indices exceed theta's group counts.
EffectiveParameters modulate(const ModelGraph& graph, const ThetaVector& theta,
                             SoftSignVariant variant = SoftSignVariant::Scaled);

/// "UFT1" checkpoint: header + G_e, G_v as u32 + P little-endian f64 values
/// in flatten order.
std::vector<std::uint8_t> serialize_theta(const ThetaVector& theta);
ThetaVector deserialize_theta(const std::vector<std::uint8_t>& bytes);

}  // namespace ufl
