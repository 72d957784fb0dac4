#pragma once

#include <cstdint>
#include <vector>

#include "unifiedfl/clustering.hpp"
#include "unifiedfl/data.hpp"
#include "unifiedfl/engine.hpp"

namespace testutil {

/// Adjusted Rand index between two labelings of the same items.
double adjusted_rand_index(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b);

/// Ward linkage recomputed from raw coordinates: every candidate merge cost
/// is evaluated as SSE(A u B) - SSE(A) - SSE(B) from the member points, no
/// Lance-Williams recurrence. Same id and tie-break conventions as the
/// library.
ufl::LinkageTree ward_oracle(const std::vector<std::vector<double>>& points);

/// Silhouette straight from the definition, one point at a time.
double silhouette_oracle(const ufl::DistanceMatrix& d, const ufl::Partition& p);

/// All samples of a dataset as one batch.
ufl::Batch as_batch(const ufl::Dataset& d);

/// Argmax predictions over the dataset.
std::vector<int> predict_all(const ufl::ModelGraph& graph, const ufl::ThetaVector& theta,
                             const ufl::Dataset& d,
                             ufl::SoftSignVariant variant = ufl::SoftSignVariant::Scaled);

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

}  // namespace testutil
