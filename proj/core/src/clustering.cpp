#include "unifiedfl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "unifiedfl/errors.hpp"

namespace ufl {

DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& vectors) {
    const std::size_t n = vectors.size();
    if (n < 2) throw ContractError("pairwise_distances: need at least 2 vectors");
    for (const auto& v : vectors)
        if (v.size() != vectors.front().size())
            throw ContractError("pairwise_distances: length mismatch");

    DistanceMatrix d;
    d.n = n;
    d.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < vectors[i].size(); ++k) {
                const double diff = vectors[i][k] - vectors[j][k];
                sum += diff * diff;
            }
            const double dist = std::sqrt(sum);
            d.at(i, j) = dist;
            d.at(j, i) = dist;
        }
    return d;
}

LinkageTree ward_agglomerate(const DistanceMatrix& d) {
    const std::size_t n = d.n;
    LinkageTree tree;
    tree.num_leaves = n;
    if (n < 2) return tree;

    // Active clusters keyed by id: leaves 0..n-1, merges n..2n-2.
    struct Cluster {
        std::size_t id;
        std::size_t size;
    };
    std::vector<Cluster> active;
    active.reserve(n);
    for (std::size_t i = 0; i < n; ++i) active.push_back({i, 1});

    // cost[a][b]: Ward merge cost between active clusters at positions a, b.
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            cost[i][j] = 0.5 * d.at(i, j) * d.at(i, j);

    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                const double c = cost[a][b];
                const auto ids = std::minmax(active[a].id, active[b].id);
                const auto best_ids = std::minmax(active[bi].id, active[bj].id);
                if (c < best ||
                    (c == best && (ids.first < best_ids.first ||
                                   (ids.first == best_ids.first &&
                                    ids.second < best_ids.second)))) {
                    best = c;
                    bi = a;
                    bj = b;
                }
            }

        const Cluster ci = active[bi], cj = active[bj];
        Merge m;
        m.left = std::min(ci.id, cj.id);
        m.right = std::max(ci.id, cj.id);
        m.height = best;
        m.size = ci.size + cj.size;
        tree.merges.push_back(m);

        // Lance-Williams update for the Ward objective increase.
        const double ni = static_cast<double>(ci.size), nj = static_cast<double>(cj.size);
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (k == bi || k == bj) continue;
            const double nk = static_cast<double>(active[k].size);
            const double updated = ((ni + nk) * cost[bi][k] + (nj + nk) * cost[bj][k] -
                                    nk * cost[bi][bj]) /
                                   (ni + nj + nk);
            cost[bi][k] = updated;
            cost[k][bi] = updated;
        }
        active[bi] = {n + step, ci.size + cj.size};
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        for (std::size_t k = 0; k < active.size(); ++k) {
            // Shift row/column bj out of the working matrix.
            if (k >= bj)
                for (std::size_t a = 0; a < cost.size(); ++a) cost[a][k] = cost[a][k + 1];
        }
        for (std::size_t k = bj; k < active.size(); ++k) cost[k] = cost[k + 1];
    }
    return tree;
}

Partition cut_tree(const LinkageTree& tree, std::size_t k) {
    const std::size_t n = tree.num_leaves;
    if (k < 1 || k > n) throw ContractError("cut_tree: k out of range");

    // Union-find over leaves, applying the first n - k merges.
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t s = 0; s + k < n; ++s) {
        const Merge& m = tree.merges[s];
        const std::size_t id = n + s;
        parent[find(m.left)] = id;
        parent[find(m.right)] = id;
    }

    Partition p;
    p.assignment.assign(n, 0);
    p.num_clusters = static_cast<std::uint32_t>(k);
    std::vector<std::int64_t> label(2 * n - 1, -1);
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        if (label[root] < 0) label[root] = next++;
        p.assignment[i] = static_cast<std::uint32_t>(label[root]);
    }
    return p;
}

double silhouette(const DistanceMatrix& d, const Partition& p) {
    const std::size_t n = d.n;
    const std::size_t m = p.num_clusters;
    if (p.assignment.size() != n) throw ContractError("silhouette: partition size mismatch");
    if (m < 2 || m >= n)
        throw ContractError("silhouette: undefined for M = " + std::to_string(m) +
                            " with n = " + std::to_string(n));

    std::vector<std::size_t> cluster_size(m, 0);
    for (std::uint32_t c : p.assignment) ++cluster_size[c];
    for (std::size_t c = 0; c < m; ++c)
        if (cluster_size[c] == 0) throw ContractError("silhouette: empty cluster");

    double total = 0.0;
    std::vector<double> mean_to(m);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(mean_to.begin(), mean_to.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) mean_to[p.assignment[j]] += d.at(i, j);
        const std::uint32_t ci = p.assignment[i];
        if (cluster_size[ci] == 1) continue;  // s(i) = 0 for singletons
        const double a = mean_to[ci] / static_cast<double>(cluster_size[ci] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m; ++c)
            if (c != ci) b = std::min(b, mean_to[c] / static_cast<double>(cluster_size[c]));
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;  // coincident points score 0
    }
    return total / static_cast<double>(n);
}

Partition cut_by_silhouette(const LinkageTree& tree, const DistanceMatrix& d,
                            std::size_t k_max) {
    const std::size_t n = tree.num_leaves;
    if (k_max < 2) throw ContractError("cut_by_silhouette: k_max must be >= 2");
    if (n < 3) {
        Partition p;
        p.assignment.assign(n, 0);
        p.num_clusters = 1;
        p.degenerate = true;
        return p;
    }
    Partition best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 2; k <= std::min(k_max, n - 1); ++k) {
        Partition p = cut_tree(tree, k);
        const double score = silhouette(d, p);
        if (score > best_score) {  // ties keep the smaller K seen first
            best_score = score;
            best = std::move(p);
        }
    }
    return best;
}

Partition static_topology_clusters(const std::vector<TopologyDescriptor>& descriptors,
                                   std::size_t k) {
    const std::size_t n = descriptors.size();
    if (k > n) throw ContractError("static_topology_clusters: k > n");
    constexpr std::size_t dims = std::tuple_size_v<TopologyDescriptor>;

    std::vector<std::vector<double>> standardized(n);
    for (std::size_t c = 0; c < dims; ++c) {
        double mean = 0.0;
        for (const auto& t : descriptors) mean += t[c];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& t : descriptors) var += (t[c] - mean) * (t[c] - mean);
        var /= static_cast<double>(n);
        if (var <= 0.0) continue;  // constant coordinate dropped
        const double sd = std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i)
            standardized[i].push_back((descriptors[i][c] - mean) / sd);
    }
    if (standardized.front().empty())
        for (auto& v : standardized) v.push_back(0.0);  // all-constant descriptors

    const DistanceMatrix d = pairwise_distances(standardized);
    const LinkageTree tree = ward_agglomerate(d);
    return cut_tree(tree, k);
}

std::array<double, 8> gradient_moment_descriptor(const GradientBundle& g,
                                                 std::size_t num_edge_groups,
                                                 std::size_t num_node_groups) {
    const std::size_t ge = num_edge_groups, gv = num_node_groups;
    if (g.d_theta.size() != 2 * ge + 2 * gv + 2)
        throw ContractError("gradient_moment_descriptor: d_theta length mismatch");

    std::array<double, 8> out{};
    const std::array<std::pair<std::size_t, std::size_t>, 4> blocks = {{
        {0, ge},                  // edge_scale
        {ge, ge},                 // edge_shift
        {2 * ge, gv},             // node_scale
        {2 * ge + gv, gv},        // node_shift
    }};
    for (std::size_t b = 0; b < 4; ++b) {
        const auto [off, len] = blocks[b];
        double mean = 0.0;
        for (std::size_t i = 0; i < len; ++i) mean += g.d_theta[off + i];
        mean /= static_cast<double>(len);
        double var = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double dv = g.d_theta[off + i] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(len);
        out[2 * b] = mean;
        out[2 * b + 1] = var;
    }
    return out;
}

}  // namespace ufl
