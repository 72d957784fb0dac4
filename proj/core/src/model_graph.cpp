#include "unifiedfl/model_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <random>

#include "unifiedfl/errors.hpp"

namespace ufl {

std::vector<std::vector<std::uint32_t>> ModelGraph::incoming() const {
    std::vector<std::vector<std::uint32_t>> in(nodes.size());
    for (std::uint32_t e = 0; e < edges.size(); ++e) in[edges[e].dst].push_back(e);
    return in;
}

ModelGraph build_model_graph(const ArchitectureSpec& spec, std::uint64_t seed,
                             double init_bound) {
    validate_spec(spec);

    ModelGraph g;
    g.arch_name = spec.name;
    g.input = spec.input;

    std::mt19937_64 rng(seed);

    // Collect trainable layers with their trailing activation.
    struct Trainable {
        LayerDesc desc;
        ActivationKind act = ActivationKind::Identity;
        bool flatten_before = false;
    };
    std::vector<Trainable> plan;
    bool flatten_pending = false;
    for (const LayerDesc& l : spec.layers) {
        if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv2d) {
            plan.push_back({l, ActivationKind::Identity, flatten_pending});
            flatten_pending = false;
        } else if (l.kind == LayerKind::Activation) {
            if (!plan.empty()) plan.back().act = l.act;
        } else {  // Flatten
            flatten_pending = true;
        }
    }

    // Layer 0: input nodes. One per channel if the first trainable layer is a
    // conv, one per flattened feature otherwise.
    const bool conv_first = plan.front().desc.kind == LayerKind::Conv2d;
    const int num_inputs = conv_first ? spec.input.channels : spec.input.flat();
    for (int i = 0; i < num_inputs; ++i) {
        NodeRecord n;
        n.layer = 0;
        g.nodes.push_back(n);
        g.input_nodes.push_back(static_cast<std::uint32_t>(i));
    }

    std::vector<std::uint32_t> prev_nodes = g.input_nodes;
    int prev_h = spec.input.height, prev_w = spec.input.width;
    bool prev_spatial = conv_first;

    for (std::uint32_t li = 0; li < plan.size(); ++li) {
        const Trainable& t = plan[li];
        const std::uint32_t layer_index = li + 1;
        GraphLayer gl;
        gl.act = t.act;
        gl.first_node = static_cast<std::uint32_t>(g.nodes.size());
        gl.weight_offset = g.weights.size();
        gl.bias_offset = g.biases.size();

        std::vector<std::uint32_t> cur_nodes;

        if (t.desc.kind == LayerKind::Dense) {
            const int in_dim = t.desc.in_dim;
            const int out_dim = t.desc.out_dim;
            const double fan = std::sqrt(6.0 / (in_dim + out_dim));
            const double bound = (init_bound > 0.0) ? std::min(fan, init_bound) : fan;
            std::uniform_real_distribution<double> dist(-bound, bound);

            gl.kind = LayerKind::Dense;
            gl.in_dim = static_cast<std::uint32_t>(in_dim);
            gl.out_dim = static_cast<std::uint32_t>(out_dim);
            gl.node_count = static_cast<std::uint32_t>(out_dim);

            const int per_src = prev_spatial ? prev_h * prev_w : 1;

            for (int j = 0; j < out_dim; ++j) {
                NodeRecord n;
                n.layer = layer_index;
                n.bias_offset = g.biases.size();
                n.bias_len = 1;
                g.biases.push_back(0.0);
                cur_nodes.push_back(static_cast<std::uint32_t>(g.nodes.size()));
                g.nodes.push_back(n);
            }
            // Row-major [out][in]: for each output neuron, one scalar edge per
            // input neuron, or one length-(h*w) edge per input channel node.
            for (int j = 0; j < out_dim; ++j) {
                for (std::uint32_t src : prev_nodes) {
                    EdgeRecord e;
                    e.src = src;
                    e.dst = cur_nodes[static_cast<std::size_t>(j)];
                    e.kind = EdgeKind::Dense;
                    e.weight_offset = g.weights.size();
                    e.weight_len = static_cast<std::uint32_t>(per_src);
                    for (int p = 0; p < per_src; ++p) g.weights.push_back(dist(rng));
                    g.edges.push_back(e);
                }
            }
            prev_spatial = false;
        } else {  // Conv2d
            const LayerDesc& c = t.desc;
            const int out_h = (prev_h + 2 * c.padding - c.kernel_h) / c.stride + 1;
            const int out_w = (prev_w + 2 * c.padding - c.kernel_w) / c.stride + 1;
            const int slab = c.kernel_h * c.kernel_w;
            const double fan =
                std::sqrt(6.0 / (static_cast<double>(slab) * (c.in_channels + c.out_channels)));
            const double bound = (init_bound > 0.0) ? std::min(fan, init_bound) : fan;
            std::uniform_real_distribution<double> dist(-bound, bound);

            gl.kind = LayerKind::Conv2d;
            gl.in_channels = static_cast<std::uint32_t>(c.in_channels);
            gl.out_channels = static_cast<std::uint32_t>(c.out_channels);
            gl.kernel_h = static_cast<std::uint32_t>(c.kernel_h);
            gl.kernel_w = static_cast<std::uint32_t>(c.kernel_w);
            gl.stride = static_cast<std::uint32_t>(c.stride);
            gl.padding = static_cast<std::uint32_t>(c.padding);
            gl.in_h = static_cast<std::uint32_t>(prev_h);
            gl.in_w = static_cast<std::uint32_t>(prev_w);
            gl.out_h = static_cast<std::uint32_t>(out_h);
            gl.out_w = static_cast<std::uint32_t>(out_w);
            gl.node_count = static_cast<std::uint32_t>(c.out_channels);

            for (int o = 0; o < c.out_channels; ++o) {
                NodeRecord n;
                n.layer = layer_index;
                n.bias_offset = g.biases.size();
                n.bias_len = 1;
                g.biases.push_back(0.0);
                cur_nodes.push_back(static_cast<std::uint32_t>(g.nodes.size()));
                g.nodes.push_back(n);
            }
            // [out_ch][in_ch][kh][kw] ordering.
            for (int o = 0; o < c.out_channels; ++o) {
                for (int i = 0; i < c.in_channels; ++i) {
                    EdgeRecord e;
                    e.src = prev_nodes[static_cast<std::size_t>(i)];
                    e.dst = cur_nodes[static_cast<std::size_t>(o)];
                    e.kind = EdgeKind::Conv2d;
                    e.kernel_h = static_cast<std::uint16_t>(c.kernel_h);
                    e.kernel_w = static_cast<std::uint16_t>(c.kernel_w);
                    e.stride = static_cast<std::uint16_t>(c.stride);
                    e.padding = static_cast<std::uint16_t>(c.padding);
                    e.weight_offset = g.weights.size();
                    e.weight_len = static_cast<std::uint32_t>(slab);
                    for (int p = 0; p < slab; ++p) g.weights.push_back(dist(rng));
                    g.edges.push_back(e);
                }
            }
            prev_h = out_h;
            prev_w = out_w;
            prev_spatial = true;
        }

        gl.weight_count = g.weights.size() - gl.weight_offset;
        gl.bias_count = g.biases.size() - gl.bias_offset;
        g.layers.push_back(gl);
        prev_nodes = std::move(cur_nodes);
    }

    g.output_nodes = prev_nodes;
    g.depth = static_cast<std::uint32_t>(plan.size());
    return g;
}

void assign_groups(ModelGraph& graph, int num_edge_groups, int num_node_groups) {
    if (num_edge_groups < 1 || num_node_groups < 1)
        throw ContractError("assign_groups: group counts must be >= 1");
    const std::uint32_t depth = graph.depth;
    auto group_of = [depth](std::uint32_t layer, int g) {
        return static_cast<std::uint32_t>(
            (static_cast<std::uint64_t>(g) * (layer - 1)) / depth);
    };
    for (EdgeRecord& e : graph.edges)
        e.group = group_of(graph.nodes[e.dst].layer, num_edge_groups);
    for (NodeRecord& n : graph.nodes)
        n.group = (n.layer == 0) ? 0 : group_of(n.layer, num_node_groups);
    for (std::uint32_t li = 0; li < graph.layers.size(); ++li) {
        graph.layers[li].edge_group = group_of(li + 1, num_edge_groups);
        graph.layers[li].node_group = group_of(li + 1, num_node_groups);
    }
}

std::vector<double> betweenness_centrality(const ModelGraph& graph) {
    const std::size_t n = graph.node_count();
    std::vector<std::vector<std::uint32_t>> out(n);
    for (const EdgeRecord& e : graph.edges) out[e.src].push_back(e.dst);

    std::vector<double> bc(n, 0.0);
    std::vector<double> sigma(n), delta(n);
    std::vector<int> dist(n);
    std::vector<std::vector<std::uint32_t>> preds(n);
    std::vector<std::uint32_t> order;
    order.reserve(n);

    for (std::uint32_t s = 0; s < n; ++s) {
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        for (auto& p : preds) p.clear();
        order.clear();

        sigma[s] = 1.0;
        dist[s] = 0;
        std::deque<std::uint32_t> queue{s};
        while (!queue.empty()) {
            const std::uint32_t v = queue.front();
            queue.pop_front();
            order.push_back(v);
            for (std::uint32_t w : out[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    preds[w].push_back(v);
                }
            }
        }
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::uint32_t w = *it;
            for (std::uint32_t v : preds[w])
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            if (w != s) bc[w] += delta[w];
        }
    }
    return bc;
}

TopologyDescriptor topology_descriptor(const ModelGraph& graph) {
    const double n = static_cast<double>(graph.node_count());
    std::vector<std::size_t> indeg(graph.node_count(), 0);
    std::size_t conv_edges = 0;
    for (const EdgeRecord& e : graph.edges) {
        ++indeg[e.dst];
        if (e.kind == EdgeKind::Conv2d) ++conv_edges;
    }
    double mean_in = 0.0, max_in = 0.0;
    for (std::size_t d : indeg) {
        mean_in += static_cast<double>(d);
        max_in = std::max(max_in, static_cast<double>(d));
    }
    mean_in /= n;

    const std::vector<double> bc = betweenness_centrality(graph);
    double mean_bc = 0.0;
    for (double b : bc) mean_bc += b;
    mean_bc /= n;

    return TopologyDescriptor{
        n,
        static_cast<double>(graph.edge_count()),
        static_cast<double>(graph.depth),
        mean_in,
        max_in,
        mean_bc,
        std::log10(static_cast<double>(graph.param_count())),
        graph.edge_count() ? static_cast<double>(conv_edges) / graph.edge_count() : 0.0,
    };
}

// ---- serialization -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'U', 'F', 'G', '1'};

struct Writer {
    std::vector<std::uint8_t> buf;
    void raw(const void* p, std::size_t len) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + len);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;
    void raw(void* p, std::size_t len) {
        if (pos + len > buf.size()) throw ParseError("truncated stream", pos);
        std::memcpy(p, buf.data() + pos, len);
        pos += len;
    }
    std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
    std::uint16_t u16() { std::uint16_t v; raw(&v, 2); return v; }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::string str() {
        const std::uint32_t len = u32();
        if (pos + len > buf.size()) throw ParseError("truncated string", pos);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), len);
        pos += len;
        return s;
    }
};

}  // namespace

std::vector<std::uint8_t> serialize_graph(const ModelGraph& g) {
    Writer w;
    w.raw(kMagic, 4);
    w.str(g.arch_name);
    w.u32(static_cast<std::uint32_t>(g.input.channels));
    w.u32(static_cast<std::uint32_t>(g.input.height));
    w.u32(static_cast<std::uint32_t>(g.input.width));
    w.u32(g.depth);
    w.u64(g.nodes.size());
    w.u64(g.edges.size());
    w.u64(g.layers.size());
    for (const NodeRecord& n : g.nodes) {
        w.u32(n.group);
        w.u8(0);  // kind tag: node
        w.u32(n.layer);
        w.u32(n.bias_len);
        for (std::uint32_t i = 0; i < n.bias_len; ++i) w.f64(g.biases[n.bias_offset + i]);
    }
    for (const EdgeRecord& e : g.edges) {
        w.u32(e.group);
        w.u8(static_cast<std::uint8_t>(e.kind));
        w.u32(e.src);
        w.u32(e.dst);
        w.u16(e.kernel_h);
        w.u16(e.kernel_w);
        w.u16(e.stride);
        w.u16(e.padding);
        w.u32(e.weight_len);
        for (std::uint32_t i = 0; i < e.weight_len; ++i) w.f64(g.weights[e.weight_offset + i]);
    }
    for (const GraphLayer& l : g.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.u8(static_cast<std::uint8_t>(l.act));
        w.u32(l.edge_group);
        w.u32(l.node_group);
        w.u32(l.first_node);
        w.u32(l.node_count);
        w.u32(l.in_dim);
        w.u32(l.out_dim);
        w.u32(l.in_channels);
        w.u32(l.out_channels);
        w.u32(l.kernel_h);
        w.u32(l.kernel_w);
        w.u32(l.stride);
        w.u32(l.padding);
        w.u32(l.in_h);
        w.u32(l.in_w);
        w.u32(l.out_h);
        w.u32(l.out_w);
    }
    return std::move(w.buf);
}

ModelGraph deserialize_graph(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad magic", 0);

    ModelGraph g;
    g.arch_name = r.str();
    g.input.channels = static_cast<int>(r.u32());
    g.input.height = static_cast<int>(r.u32());
    g.input.width = static_cast<int>(r.u32());
    g.depth = r.u32();
    const std::uint64_t num_nodes = r.u64();
    const std::uint64_t num_edges = r.u64();
    const std::uint64_t num_layers = r.u64();

    g.nodes.reserve(num_nodes);
    for (std::uint64_t i = 0; i < num_nodes; ++i) {
        NodeRecord n;
        n.group = r.u32();
        if (r.u8() != 0) throw ParseError("bad node kind tag", r.pos - 1);
        n.layer = r.u32();
        n.bias_len = r.u32();
        n.bias_offset = g.biases.size();
        for (std::uint32_t k = 0; k < n.bias_len; ++k) g.biases.push_back(r.f64());
        if (n.layer == 0) g.input_nodes.push_back(static_cast<std::uint32_t>(i));
        g.nodes.push_back(n);
    }
    g.edges.reserve(num_edges);
    for (std::uint64_t i = 0; i < num_edges; ++i) {
        EdgeRecord e;
        e.group = r.u32();
        const std::uint8_t kind = r.u8();
        if (kind > 1) throw ParseError("bad edge kind tag", r.pos - 1);
        e.kind = static_cast<EdgeKind>(kind);
        e.src = r.u32();
        e.dst = r.u32();
        if (e.src >= num_nodes || e.dst >= num_nodes)
            throw ParseError("edge endpoint out of range", r.pos);
        e.kernel_h = r.u16();
        e.kernel_w = r.u16();
        e.stride = r.u16();
        e.padding = r.u16();
        e.weight_len = r.u32();
        e.weight_offset = g.weights.size();
        for (std::uint32_t k = 0; k < e.weight_len; ++k) g.weights.push_back(r.f64());
        g.edges.push_back(e);
    }
    for (std::uint64_t i = 0; i < num_layers; ++i) {
        GraphLayer l;
        l.kind = static_cast<LayerKind>(r.u8());
        l.act = static_cast<ActivationKind>(r.u8());
        l.edge_group = r.u32();
        l.node_group = r.u32();
        l.first_node = r.u32();
        l.node_count = r.u32();
        l.in_dim = r.u32();
        l.out_dim = r.u32();
        l.in_channels = r.u32();
        l.out_channels = r.u32();
        l.kernel_h = r.u32();
        l.kernel_w = r.u32();
        l.stride = r.u32();
        l.padding = r.u32();
        l.in_h = r.u32();
        l.in_w = r.u32();
        l.out_h = r.u32();
        l.out_w = r.u32();
        g.layers.push_back(l);
    }
    if (r.pos != bytes.size()) throw ParseError("trailing bytes", r.pos);

    // Recompute derived offsets/ranges.
    std::uint64_t woff = 0, boff = 0;
    for (NodeRecord& n : g.nodes) {
        n.bias_offset = boff;
        boff += n.bias_len;
    }
    for (EdgeRecord& e : g.edges) {
        e.weight_offset = woff;
        woff += e.weight_len;
    }
    std::uint64_t lw = 0, lb = 0;
    for (GraphLayer& l : g.layers) {
        l.weight_offset = lw;
        l.bias_offset = lb;
        std::uint64_t wc = 0;
        if (l.kind == LayerKind::Dense)
            wc = static_cast<std::uint64_t>(l.in_dim) * l.out_dim;
        else
            wc = static_cast<std::uint64_t>(l.in_channels) * l.out_channels * l.kernel_h *
                 l.kernel_w;
        l.weight_count = wc;
        l.bias_count = l.node_count;
        lw += wc;
        lb += l.node_count;
    }
    if (lw != g.weights.size() || lb != g.biases.size())
        throw ParseError("layer table inconsistent with weight payload", bytes.size());
    for (const GraphLayer& l : g.layers)
        for (std::uint32_t k = 0; k < l.node_count; ++k) {
            if (l.first_node + k >= g.nodes.size())
                throw ParseError("layer node range out of bounds", bytes.size());
        }
    g.output_nodes.clear();
    if (!g.layers.empty()) {
        const GraphLayer& last = g.layers.back();
        for (std::uint32_t k = 0; k < last.node_count; ++k)
            g.output_nodes.push_back(last.first_node + k);
    }
    return g;
}

bool operator==(const ModelGraph& a, const ModelGraph& b) {
    auto node_eq = [](const NodeRecord& x, const NodeRecord& y) {
        return x.layer == y.layer && x.group == y.group && x.bias_offset == y.bias_offset &&
               x.bias_len == y.bias_len;
    };
    auto edge_eq = [](const EdgeRecord& x, const EdgeRecord& y) {
        return x.src == y.src && x.dst == y.dst && x.kind == y.kind &&
               x.kernel_h == y.kernel_h && x.kernel_w == y.kernel_w && x.stride == y.stride &&
               x.padding == y.padding && x.group == y.group &&
               x.weight_offset == y.weight_offset && x.weight_len == y.weight_len;
    };
    if (a.arch_name != b.arch_name || a.depth != b.depth || a.weights != b.weights ||
        a.biases != b.biases || a.input_nodes != b.input_nodes ||
        a.output_nodes != b.output_nodes || a.nodes.size() != b.nodes.size() ||
        a.edges.size() != b.edges.size())
        return false;
    if (a.input.channels != b.input.channels || a.input.height != b.input.height ||
        a.input.width != b.input.width)
        return false;
    for (std::size_t i = 0; i < a.nodes.size(); ++i)
        if (!node_eq(a.nodes[i], b.nodes[i])) return false;
    for (std::size_t i = 0; i < a.edges.size(); ++i)
        if (!edge_eq(a.edges[i], b.edges[i])) return false;
    return true;
}

}  // namespace ufl
