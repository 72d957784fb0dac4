#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unifiedfl/arch.hpp"

namespace ufl {

enum class SplitTag { Train, Val, Test };

/// Immutable sample collection. Features are sample-major, normalized to
/// [0, 1], flattened channel-major when input_shape is spatial.
struct Dataset {
    std::vector<double> features;  // n * input_shape.flat()
    std::vector<int> labels;       // n
    std::size_t n = 0;
    InputShape input_shape;
    int num_classes = 0;
    SplitTag split = SplitTag::Train;
    std::string provenance;

    std::size_t dim() const { return static_cast<std::size_t>(input_shape.flat()); }
};

/// Per-client index lists into a parent dataset's train split.
struct SplitPlan {
    std::vector<std::vector<std::uint32_t>> client_indices;
    std::string strategy;  // "noniid_kmeans" or "iid_random"
};

/// Isotropic unit-variance Gaussians at centers `class_separation` apart
/// (axis-aligned), min-max normalized to [0, 1]. label_map[c] relabels
/// mixture component c; empty means identity. Component geometry depends
/// only on (num_classes, dim, class_separation), so datasets generated with
/// different label maps share the same feature distribution.
Dataset synth_gaussian_mixture(int num_classes, int dim, double class_separation,
                               int samples_per_class, const std::vector<int>& label_map,
                               std::uint64_t seed);

struct KMeansResult {
    std::vector<std::uint32_t> assignments;
    std::vector<std::vector<double>> centers;
    double sse = 0.0;
    int iterations = 0;
};

/// k-means++-seeded Lloyd iterations; empty clusters repaired by stealing the
/// farthest point from the largest cluster.
KMeansResult kmeans(const std::vector<double>& features, std::size_t n, std::size_t dim,
                    std::size_t k, int max_iters, std::uint64_t seed);

/// Cluster-per-client k-means split of the dataset (strongly non-IID).
SplitPlan partition_noniid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed);

/// Uniform random shard split. When shard_sizes is non-empty the shards match
/// those sizes (for paired comparison against a non-IID plan); otherwise
/// near-equal.
SplitPlan partition_iid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed,
                        const std::vector<std::size_t>& shard_sizes = {});

/// Classic idx format (big-endian magic + dims), pixel bytes scaled to [0,1].
/// Labels default to zero unless a companion label file is given.
Dataset load_idx(const std::string& images_path, const std::string& labels_path = "");

/// CSV with label in the first column, features following; header optional.
Dataset load_csv(const std::string& path);

void write_idx(const Dataset& d, const std::string& images_path,
               const std::string& labels_path);

}  // namespace ufl
