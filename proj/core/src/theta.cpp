#include "unifiedfl/theta.hpp"

#include <cmath>
#include <cstring>

#include "unifiedfl/errors.hpp"

namespace ufl {

double softsign(double x, double s, SoftSignVariant variant) {
    if (variant == SoftSignVariant::Scaled) return s * x / (1.0 + std::fabs(x));
    // Ratio variant: x / (1 + |x|/s); degenerates to 0 at s = 0.
    if (s == 0.0) return 0.0;
    return x / (1.0 + std::fabs(x) / std::fabs(s));
}

ThetaVector init_theta(int num_edge_groups, int num_node_groups) {
    if (num_edge_groups < 1 || num_node_groups < 1)
        throw ContractError("init_theta: group counts must be >= 1");
    ThetaVector t;
    t.edge_scale.assign(static_cast<std::size_t>(num_edge_groups), 1.0);
    t.edge_shift.assign(static_cast<std::size_t>(num_edge_groups), 0.0);
    t.node_scale.assign(static_cast<std::size_t>(num_node_groups), 1.0);
    t.node_shift.assign(static_cast<std::size_t>(num_node_groups), 0.0);
    t.global_edge_scale = 1.0;
    t.global_node_scale = 1.0;
    return t;
}

std::vector<double> flatten(const ThetaVector& t) {
    std::vector<double> v;
    v.reserve(t.length());
    v.insert(v.end(), t.edge_scale.begin(), t.edge_scale.end());
    v.insert(v.end(), t.edge_shift.begin(), t.edge_shift.end());
    v.insert(v.end(), t.node_scale.begin(), t.node_scale.end());
    v.insert(v.end(), t.node_shift.begin(), t.node_shift.end());
    v.push_back(t.global_edge_scale);
    v.push_back(t.global_node_scale);
    return v;
}

ThetaVector unflatten(const std::vector<double>& v, int num_edge_groups, int num_node_groups) {
    const std::size_t ge = static_cast<std::size_t>(num_edge_groups);
    const std::size_t gv = static_cast<std::size_t>(num_node_groups);
    if (v.size() != 2 * ge + 2 * gv + 2)
        throw ContractError("unflatten: vector length " + std::to_string(v.size()) +
                            " does not match P = " + std::to_string(2 * ge + 2 * gv + 2));
    ThetaVector t;
    auto it = v.begin();
    t.edge_scale.assign(it, it + ge);
    it += ge;
    t.edge_shift.assign(it, it + ge);
    it += ge;
    t.node_scale.assign(it, it + gv);
    it += gv;
    t.node_shift.assign(it, it + gv);
    it += gv;
    t.global_edge_scale = *it++;
    t.global_node_scale = *it++;
    return t;
}

double theta_distance(const ThetaVector& a, const ThetaVector& b) {
    if (a.num_edge_groups() != b.num_edge_groups() ||
        a.num_node_groups() != b.num_node_groups())
        throw ContractError("theta_distance: length mismatch");
    const std::vector<double> fa = flatten(a), fb = flatten(b);
    double sum = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        const double d = fa[i] - fb[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

EffectiveParameters modulate(const ModelGraph& graph, const ThetaVector& theta,
                             SoftSignVariant variant) {
    const std::size_t ge = theta.num_edge_groups();
    const std::size_t gv = theta.num_node_groups();

    EffectiveParameters eff;
    eff.weights.resize(graph.weights.size());
    eff.biases.resize(graph.biases.size());

    for (const GraphLayer& l : graph.layers) {
        if (l.edge_group >= ge || l.node_group >= gv)
            throw ContractError("modulate: graph group index exceeds theta group count");
        const double es = theta.edge_scale[l.edge_group];
        const double esh = theta.edge_shift[l.edge_group];
        const double ns = theta.node_scale[l.node_group];
        const double nsh = theta.node_shift[l.node_group];
        for (std::uint64_t i = l.weight_offset; i < l.weight_offset + l.weight_count; ++i)
            eff.weights[i] = softsign(graph.weights[i] * es + esh,
                                      theta.global_edge_scale, variant);
        for (std::uint64_t i = l.bias_offset; i < l.bias_offset + l.bias_count; ++i)
            eff.biases[i] = softsign(graph.biases[i] * ns + nsh,
                                     theta.global_node_scale, variant);
    }
    return eff;
}

namespace {
constexpr char kThetaMagic[4] = {'U', 'F', 'T', '1'};
}

std::vector<std::uint8_t> serialize_theta(const ThetaVector& theta) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kThetaMagic, kThetaMagic + 4);
    auto put_u32 = [&buf](std::uint32_t v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf.insert(buf.end(), p, p + 4);
    };
    put_u32(static_cast<std::uint32_t>(theta.num_edge_groups()));
    put_u32(static_cast<std::uint32_t>(theta.num_node_groups()));
    for (double d : flatten(theta)) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&d);
        buf.insert(buf.end(), p, p + 8);
    }
    return buf;
}

ThetaVector deserialize_theta(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kThetaMagic, 4) != 0)
        throw ParseError("bad theta header", 0);
    std::uint32_t ge, gv;
    std::memcpy(&ge, bytes.data() + 4, 4);
    std::memcpy(&gv, bytes.data() + 8, 4);
    const std::size_t p = 2 * static_cast<std::size_t>(ge) + 2 * gv + 2;
    if (bytes.size() != 12 + 8 * p) throw ParseError("theta payload size mismatch", 12);
    std::vector<double> v(p);
    std::memcpy(v.data(), bytes.data() + 12, 8 * p);
    return unflatten(v, static_cast<int>(ge), static_cast<int>(gv));
}

}  // namespace ufl
