#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace testutil {

double adjusted_rand_index(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b) {
    const std::size_t n = a.size();
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> cont;
    std::map<std::uint32_t, double> row, col;
    for (std::size_t i = 0; i < n; ++i) {
        cont[{a[i], b[i]}] += 1.0;
        row[a[i]] += 1.0;
        col[b[i]] += 1.0;
    }
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_cont = 0.0, sum_row = 0.0, sum_col = 0.0;
    for (const auto& [k, v] : cont) sum_cont += choose2(v);
    for (const auto& [k, v] : row) sum_row += choose2(v);
    for (const auto& [k, v] : col) sum_col += choose2(v);
    const double total = choose2(static_cast<double>(n));
    const double expected = sum_row * sum_col / total;
    const double max_index = 0.5 * (sum_row + sum_col);
    if (max_index == expected) return 1.0;  // both labelings trivial
    return (sum_cont - expected) / (max_index - expected);
}

namespace {

double cluster_sse(const std::vector<std::vector<double>>& points,
                   const std::vector<std::size_t>& members) {
    const std::size_t dim = points.front().size();
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i : members)
        for (std::size_t c = 0; c < dim; ++c) mean[c] += points[i][c];
    for (double& v : mean) v /= static_cast<double>(members.size());
    double sse = 0.0;
    for (std::size_t i : members)
        for (std::size_t c = 0; c < dim; ++c) {
            const double diff = points[i][c] - mean[c];
            sse += diff * diff;
        }
    return sse;
}

}  // namespace

ufl::LinkageTree ward_oracle(const std::vector<std::vector<double>>& points) {
    const std::size_t n = points.size();
    struct Cluster {
        std::size_t id;
        std::vector<std::size_t> members;
    };
    std::vector<Cluster> active;
    for (std::size_t i = 0; i < n; ++i) active.push_back({i, {i}});

    ufl::LinkageTree tree;
    tree.num_leaves = n;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t x = 0; x < active.size(); ++x)
            for (std::size_t y = x + 1; y < active.size(); ++y) {
                std::vector<std::size_t> merged = active[x].members;
                merged.insert(merged.end(), active[y].members.begin(), active[y].members.end());
                const double cost = cluster_sse(points, merged) -
                                    cluster_sse(points, active[x].members) -
                                    cluster_sse(points, active[y].members);
                const auto ids = std::minmax(active[x].id, active[y].id);
                const auto best_ids = std::minmax(active[bi].id, active[bj].id);
                if (cost < best ||
                    (cost == best && (ids.first < best_ids.first ||
                                      (ids.first == best_ids.first &&
                                       ids.second < best_ids.second)))) {
                    best = cost;
                    bi = x;
                    bj = y;
                }
            }
        ufl::Merge m;
        m.left = std::min(active[bi].id, active[bj].id);
        m.right = std::max(active[bi].id, active[bj].id);
        m.height = best;
        m.size = active[bi].members.size() + active[bj].members.size();
        tree.merges.push_back(m);

        active[bi].members.insert(active[bi].members.end(), active[bj].members.begin(),
                                  active[bj].members.end());
        active[bi].id = n + step;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return tree;
}

double silhouette_oracle(const ufl::DistanceMatrix& d, const ufl::Partition& p) {
    const std::size_t n = d.n;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t ci = p.assignment[i];
        std::size_t own = 0;
        double a_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && p.assignment[j] == ci) {
                a_sum += d.at(i, j);
                ++own;
            }
        if (own == 0) continue;
        const double a = a_sum / static_cast<double>(own);
        double b = std::numeric_limits<double>::infinity();
        for (std::uint32_t c = 0; c < p.num_clusters; ++c) {
            if (c == ci) continue;
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (p.assignment[j] == c) {
                    sum += d.at(i, j);
                    ++count;
                }
            b = std::min(b, sum / static_cast<double>(count));
        }
        if (std::max(a, b) > 0.0) total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

ufl::Batch as_batch(const ufl::Dataset& d) {
    ufl::Batch b;
    b.features = d.features;
    b.labels = d.labels;
    b.n = d.n;
    b.dim = d.dim();
    return b;
}

std::vector<int> predict_all(const ufl::ModelGraph& graph, const ufl::ThetaVector& theta,
                             const ufl::Dataset& d, ufl::SoftSignVariant variant) {
    const std::vector<double> logits = ufl::forward(graph, theta, d.features, d.n, variant);
    std::vector<int> preds;
    preds.reserve(d.n);
    for (std::size_t i = 0; i < d.n; ++i) {
        const double* row = logits.data() + i * d.num_classes;
        preds.push_back(static_cast<int>(std::max_element(row, row + d.num_classes) - row));
    }
    return preds;
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

}  // namespace testutil
