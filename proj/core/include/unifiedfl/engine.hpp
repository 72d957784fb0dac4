#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "unifiedfl/model_graph.hpp"
#include "unifiedfl/theta.hpp"

namespace ufl {

/// One mini-batch of samples. Features are sample-major, flattened
/// channel-major for image inputs.
struct Batch {
    std::vector<double> features;  // n * dim
    std::vector<int> labels;       // n
    std::size_t n = 0;
    std::size_t dim = 0;
};

/// Gradients of a batch loss with respect to every theta coordinate and every
/// base weight/bias of one graph.
struct GradientBundle {
    std::vector<double> d_theta;    // length P, flatten order
    std::vector<double> d_weights;  // matches graph.weights
    std::vector<double> d_biases;   // matches graph.biases
    double loss_value = 0.0;
};

enum class OptimizerKind { Sgd, AdamW };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::AdamW;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-2;
    double eps = 1e-8;
};

/// Per-parameter-vector optimizer state (first/second moments for AdamW).
struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
};

/// In-place update of params from grads. AdamW uses decoupled weight decay
/// (skipped when apply_weight_decay is false, e.g. for biases).
void optimizer_step(OptimizerState& state, std::vector<double>& params,
                    const std::vector<double>& grads, bool apply_weight_decay);

/// Forward pass over the modulated graph. Returns logits (n * num_classes,
/// sample-major). Hidden activations follow each layer's activation kind;
/// the output layer is identity so the loss owns the softmax.
std::vector<double> forward(const ModelGraph& graph, const ThetaVector& theta,
                            const std::vector<double>& features, std::size_t n,
                            SoftSignVariant variant = SoftSignVariant::Scaled);

/// Mean batch cross-entropy with max-subtraction stabilization.
double loss_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels,
                          std::size_t num_classes);

/// Exact reverse-mode gradients of the batch loss, chained through the
/// softsign modulation.
GradientBundle backward(const ModelGraph& graph, const ThetaVector& theta, const Batch& batch,
                        SoftSignVariant variant = SoftSignVariant::Scaled);

struct EpochResult {
    double mean_loss = 0.0;
    GradientBundle last_gradient;  // consumed by the gradient-moment descriptor
};

/// One local epoch: shuffled mini-batches updating both the working theta
/// copy and the graph's base features via the supplied optimizer states.
/// `indices` selects the client's samples within (features, labels).
EpochResult run_local_epoch(ModelGraph& graph, ThetaVector& theta,
                            const std::vector<double>& features, const std::vector<int>& labels,
                            std::size_t feature_dim, const std::vector<std::uint32_t>& indices,
                            OptimizerState& theta_opt, OptimizerState& weight_opt,
                            OptimizerState& bias_opt, std::mt19937_64& rng, int batch_size,
                            SoftSignVariant variant = SoftSignVariant::Scaled);

/// Central-difference verification of backward. Checks every theta
/// coordinate and a seeded random sample of base coordinates
/// (base_fraction of them, capped at max_base_coords). Returns the max
/// relative error.
double gradient_check(const ModelGraph& graph, const ThetaVector& theta, const Batch& batch,
                      double eps, double base_fraction = 0.1, std::size_t max_base_coords = 200,
                      SoftSignVariant variant = SoftSignVariant::Scaled,
                      std::uint64_t sample_seed = 0);

}  // namespace ufl
