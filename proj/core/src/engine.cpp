#include "unifiedfl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unifiedfl/errors.hpp"

namespace ufl {

namespace {

std::size_t layer_output_size(const GraphLayer& l) {
    if (l.kind == LayerKind::Dense) return l.out_dim;
    return static_cast<std::size_t>(l.out_channels) * l.out_h * l.out_w;
}

std::size_t layer_input_size(const GraphLayer& l) {
    if (l.kind == LayerKind::Dense) return l.in_dim;
    return static_cast<std::size_t>(l.in_channels) * l.in_h * l.in_w;
}

void apply_activation(ActivationKind act, std::vector<double>& v) {
    if (act == ActivationKind::Relu)
        for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// Dense: out[s][j] = sum_i W[j][i] * in[s][i] + b[j]
void dense_forward(const GraphLayer& l, const double* W, const double* b,
                   const std::vector<double>& in, std::vector<double>& out, std::size_t n) {
    const std::size_t id = l.in_dim, od = l.out_dim;
    for (std::size_t s = 0; s < n; ++s) {
        const double* x = in.data() + s * id;
        double* y = out.data() + s * od;
        for (std::size_t j = 0; j < od; ++j) {
            const double* wr = W + j * id;
            double acc = b[j];
            for (std::size_t i = 0; i < id; ++i) acc += wr[i] * x[i];
            y[j] = acc;
        }
    }
}

void conv_forward(const GraphLayer& l, const double* W, const double* b,
                  const std::vector<double>& in, std::vector<double>& out, std::size_t n) {
    const int ic = static_cast<int>(l.in_channels), oc = static_cast<int>(l.out_channels);
    const int ih = static_cast<int>(l.in_h), iw = static_cast<int>(l.in_w);
    const int oh = static_cast<int>(l.out_h), ow = static_cast<int>(l.out_w);
    const int kh = static_cast<int>(l.kernel_h), kw = static_cast<int>(l.kernel_w);
    const int stride = static_cast<int>(l.stride), pad = static_cast<int>(l.padding);
    const std::size_t in_sz = static_cast<std::size_t>(ic) * ih * iw;
    const std::size_t out_sz = static_cast<std::size_t>(oc) * oh * ow;

    for (std::size_t s = 0; s < n; ++s) {
        const double* x = in.data() + s * in_sz;
        double* y = out.data() + s * out_sz;
        for (int o = 0; o < oc; ++o) {
            const double bias = b[o];
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias;
                    for (int i = 0; i < ic; ++i) {
                        const double* k = W + ((static_cast<std::size_t>(o) * ic + i) * kh) * kw;
                        const double* xi = x + static_cast<std::size_t>(i) * ih * iw;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int yy = oy * stride - pad + ky;
                            if (yy < 0 || yy >= ih) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int xx = ox * stride - pad + kx;
                                if (xx < 0 || xx >= iw) continue;
                                acc += k[ky * kw + kx] * xi[yy * iw + xx];
                            }
                        }
                    }
                    y[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
                }
        }
    }
}

struct Trace {
    // act[0] is the input batch; act[k] the post-activation output of layer k.
    std::vector<std::vector<double>> act;
    // pre[k] is the pre-activation output of layer k (1-based, pre[0] unused).
    std::vector<std::vector<double>> pre;
    EffectiveParameters eff;
};

std::vector<double> forward_impl(const ModelGraph& graph, const ThetaVector& theta,
                                 const std::vector<double>& features, std::size_t n,
                                 SoftSignVariant variant, Trace* trace) {
    if (graph.layers.empty()) throw ContractError("forward: graph has no layers");
    const std::size_t in_dim = layer_input_size(graph.layers.front());
    if (features.size() != n * in_dim)
        throw ContractError("forward: feature size " + std::to_string(features.size()) +
                            " != n * input dim " + std::to_string(n * in_dim));

    EffectiveParameters eff = modulate(graph, theta, variant);
    for (const GraphLayer& l : graph.layers) {
        for (std::uint64_t i = l.weight_offset; i < l.weight_offset + l.weight_count; ++i)
            if (!std::isfinite(eff.weights[i]))
                throw NumericError("forward: non-finite effective weight at layer node " +
                                   std::to_string(l.first_node));
        for (std::uint64_t i = l.bias_offset; i < l.bias_offset + l.bias_count; ++i)
            if (!std::isfinite(eff.biases[i]))
                throw NumericError("forward: non-finite effective bias at layer node " +
                                   std::to_string(l.first_node));
    }
    std::vector<double> cur = features;
    if (trace) {
        trace->act.assign(graph.layers.size() + 1, {});
        trace->pre.assign(graph.layers.size() + 1, {});
        trace->act[0] = cur;
    }

    for (std::size_t li = 0; li < graph.layers.size(); ++li) {
        const GraphLayer& l = graph.layers[li];
        if (cur.size() != n * layer_input_size(l))
            throw ContractError("forward: shape mismatch entering layer " + std::to_string(li) +
                                " (node " + std::to_string(l.first_node) + ")");
        std::vector<double> out(n * layer_output_size(l));
        const double* W = eff.weights.data() + l.weight_offset;
        const double* b = eff.biases.data() + l.bias_offset;
        if (l.kind == LayerKind::Dense)
            dense_forward(l, W, b, cur, out, n);
        else
            conv_forward(l, W, b, cur, out, n);
        if (trace) trace->pre[li + 1] = out;
        apply_activation(l.act, out);
        if (trace) trace->act[li + 1] = out;
        cur = std::move(out);
    }
    if (trace) trace->eff = std::move(eff);
    return cur;
}

}  // namespace

std::vector<double> forward(const ModelGraph& graph, const ThetaVector& theta,
                            const std::vector<double>& features, std::size_t n,
                            SoftSignVariant variant) {
    return forward_impl(graph, theta, features, n, variant, nullptr);
}

double loss_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels,
                          std::size_t num_classes) {
    const std::size_t n = labels.size();
    if (n == 0 || logits.size() != n * num_classes)
        throw ContractError("loss_cross_entropy: size mismatch");
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double* z = logits.data() + s * num_classes;
        double zmax = z[0];
        for (std::size_t c = 1; c < num_classes; ++c) zmax = std::max(zmax, z[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) denom += std::exp(z[c] - zmax);
        total += std::log(denom) - (z[static_cast<std::size_t>(labels[s])] - zmax);
    }
    return total / static_cast<double>(n);
}

GradientBundle backward(const ModelGraph& graph, const ThetaVector& theta, const Batch& batch,
                        SoftSignVariant variant) {
    const std::size_t n = batch.n;
    const std::size_t num_classes = graph.layers.back().out_dim;
    Trace trace;
    const std::vector<double> logits =
        forward_impl(graph, theta, batch.features, n, variant, &trace);

    GradientBundle g;
    g.loss_value = loss_cross_entropy(logits, batch.labels, num_classes);
    g.d_theta.assign(theta.length(), 0.0);
    g.d_weights.assign(graph.weights.size(), 0.0);
    g.d_biases.assign(graph.biases.size(), 0.0);

    std::vector<double> d_eff_w(graph.weights.size(), 0.0);
    std::vector<double> d_eff_b(graph.biases.size(), 0.0);

    // d(loss)/d(logits) = (softmax - onehot) / n
    std::vector<double> delta(n * num_classes);
    for (std::size_t s = 0; s < n; ++s) {
        const double* z = logits.data() + s * num_classes;
        double zmax = z[0];
        for (std::size_t c = 1; c < num_classes; ++c) zmax = std::max(zmax, z[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) denom += std::exp(z[c] - zmax);
        for (std::size_t c = 0; c < num_classes; ++c) {
            double p = std::exp(z[c] - zmax) / denom;
            if (static_cast<int>(c) == batch.labels[s]) p -= 1.0;
            delta[s * num_classes + c] = p / static_cast<double>(n);
        }
    }

    for (std::size_t li = graph.layers.size(); li-- > 0;) {
        const GraphLayer& l = graph.layers[li];
        const std::vector<double>& a_prev = trace.act[li];
        const std::vector<double>& pre = trace.pre[li + 1];

        // delta currently holds d(loss)/d(post-activation of layer li);
        // fold in the activation derivative.
        if (l.act == ActivationKind::Relu)
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (pre[i] <= 0.0) delta[i] = 0.0;
        for (double d : delta)
            if (!std::isfinite(d))
                throw NumericError("backward: non-finite gradient at layer node " +
                                   std::to_string(l.first_node));

        const double* W = trace.eff.weights.data() + l.weight_offset;
        double* dW = d_eff_w.data() + l.weight_offset;
        double* db = d_eff_b.data() + l.bias_offset;
        std::vector<double> d_prev(n * layer_input_size(l), 0.0);

        if (l.kind == LayerKind::Dense) {
            const std::size_t id = l.in_dim, od = l.out_dim;
            for (std::size_t s = 0; s < n; ++s) {
                const double* x = a_prev.data() + s * id;
                const double* dz = delta.data() + s * od;
                double* dx = d_prev.data() + s * id;
                for (std::size_t j = 0; j < od; ++j) {
                    const double d = dz[j];
                    if (d == 0.0) continue;
                    db[j] += d;
                    double* dwr = dW + j * id;
                    const double* wr = W + j * id;
                    for (std::size_t i = 0; i < id; ++i) {
                        dwr[i] += d * x[i];
                        dx[i] += d * wr[i];
                    }
                }
            }
        } else {
            const int ic = static_cast<int>(l.in_channels), oc = static_cast<int>(l.out_channels);
            const int ih = static_cast<int>(l.in_h), iw = static_cast<int>(l.in_w);
            const int oh = static_cast<int>(l.out_h), ow = static_cast<int>(l.out_w);
            const int kh = static_cast<int>(l.kernel_h), kw = static_cast<int>(l.kernel_w);
            const int stride = static_cast<int>(l.stride), pad = static_cast<int>(l.padding);
            const std::size_t in_sz = static_cast<std::size_t>(ic) * ih * iw;
            const std::size_t out_sz = static_cast<std::size_t>(oc) * oh * ow;
            for (std::size_t s = 0; s < n; ++s) {
                const double* x = a_prev.data() + s * in_sz;
                const double* dz = delta.data() + s * out_sz;
                double* dx = d_prev.data() + s * in_sz;
                for (int o = 0; o < oc; ++o) {
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            const double d = dz[(static_cast<std::size_t>(o) * oh + oy) * ow + ox];
                            if (d == 0.0) continue;
                            db[o] += d;
                            for (int i = 0; i < ic; ++i) {
                                const std::size_t kbase =
                                    (static_cast<std::size_t>(o) * ic + i) * kh * kw;
                                const double* xi = x + static_cast<std::size_t>(i) * ih * iw;
                                double* dxi = dx + static_cast<std::size_t>(i) * ih * iw;
                                for (int ky = 0; ky < kh; ++ky) {
                                    const int yy = oy * stride - pad + ky;
                                    if (yy < 0 || yy >= ih) continue;
                                    for (int kx = 0; kx < kw; ++kx) {
                                        const int xx = ox * stride - pad + kx;
                                        if (xx < 0 || xx >= iw) continue;
                                        dW[kbase + ky * kw + kx] += d * xi[yy * iw + xx];
                                        dxi[yy * iw + xx] += d * W[kbase + ky * kw + kx];
                                    }
                                }
                            }
                        }
                }
            }
        }
        delta = std::move(d_prev);
    }

    // Chain d(loss)/d(effective params) through the softsign modulation into
    // base features and theta coordinates.
    const std::size_t ge = theta.num_edge_groups();
    const std::size_t gv = theta.num_node_groups();
    double* dth = g.d_theta.data();
    double* d_edge_scale = dth;
    double* d_edge_shift = dth + ge;
    double* d_node_scale = dth + 2 * ge;
    double* d_node_shift = dth + 2 * ge + gv;
    double& d_global_edge = dth[2 * ge + 2 * gv];
    double& d_global_node = dth[2 * ge + 2 * gv + 1];

    for (const GraphLayer& l : graph.layers) {
        const double es = theta.edge_scale[l.edge_group];
        const double esh = theta.edge_shift[l.edge_group];
        const double Se = theta.global_edge_scale;
        for (std::uint64_t i = l.weight_offset; i < l.weight_offset + l.weight_count; ++i) {
            const double dm = d_eff_w[i];
            if (dm == 0.0) continue;
            const double w = graph.weights[i];
            const double a = w * es + esh;
            const double inv = 1.0 / (1.0 + std::fabs(a));
            double dmda, dmds;
            if (variant == SoftSignVariant::Scaled) {
                dmda = Se * inv * inv;
                dmds = a * inv;
            } else {
                const double sa = std::fabs(Se);
                const double inv2 = 1.0 / (sa + std::fabs(a));
                dmda = sa * sa * inv2 * inv2;
                dmds = (Se >= 0.0 ? 1.0 : -1.0) * a * std::fabs(a) * inv2 * inv2;
            }
            g.d_weights[i] = dm * dmda * es;
            d_edge_scale[l.edge_group] += dm * dmda * w;
            d_edge_shift[l.edge_group] += dm * dmda;
            d_global_edge += dm * dmds;
        }
        const double ns = theta.node_scale[l.node_group];
        const double nsh = theta.node_shift[l.node_group];
        const double Sn = theta.global_node_scale;
        for (std::uint64_t i = l.bias_offset; i < l.bias_offset + l.bias_count; ++i) {
            const double dm = d_eff_b[i];
            if (dm == 0.0) continue;
            const double b = graph.biases[i];
            const double a = b * ns + nsh;
            const double inv = 1.0 / (1.0 + std::fabs(a));
            double dmda, dmds;
            if (variant == SoftSignVariant::Scaled) {
                dmda = Sn * inv * inv;
                dmds = a * inv;
            } else {
                const double sa = std::fabs(Sn);
                const double inv2 = 1.0 / (sa + std::fabs(a));
                dmda = sa * sa * inv2 * inv2;
                dmds = (Sn >= 0.0 ? 1.0 : -1.0) * a * std::fabs(a) * inv2 * inv2;
            }
            g.d_biases[i] = dm * dmda * ns;
            d_node_scale[l.node_group] += dm * dmda * b;
            d_node_shift[l.node_group] += dm * dmda;
            d_global_node += dm * dmds;
        }
    }
    return g;
}

void optimizer_step(OptimizerState& state, std::vector<double>& params,
                    const std::vector<double>& grads, bool apply_weight_decay) {
    if (params.size() != grads.size())
        throw ContractError("optimizer_step: param/grad size mismatch");
    const OptimizerConfig& c = state.config;
    if (c.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= c.lr * grads[i];
        ++state.step;
        return;
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    const double wd = apply_weight_decay ? c.weight_decay : 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= c.lr * (mhat / (std::sqrt(vhat) + c.eps) + wd * params[i]);
    }
}

EpochResult run_local_epoch(ModelGraph& graph, ThetaVector& theta,
                            const std::vector<double>& features, const std::vector<int>& labels,
                            std::size_t feature_dim, const std::vector<std::uint32_t>& indices,
                            OptimizerState& theta_opt, OptimizerState& weight_opt,
                            OptimizerState& bias_opt, std::mt19937_64& rng, int batch_size,
                            SoftSignVariant variant) {
    if (indices.empty()) throw ConfigError("local_epoch: empty dataset");
    std::vector<std::uint32_t> order = indices;
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t ge = theta.num_edge_groups();
    const std::size_t gv = theta.num_node_groups();
    EpochResult result;
    double loss_sum = 0.0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        Batch batch;
        batch.n = end - start;
        batch.dim = feature_dim;
        batch.features.resize(batch.n * feature_dim);
        batch.labels.resize(batch.n);
        for (std::size_t k = 0; k < batch.n; ++k) {
            const std::uint32_t idx = order[start + k];
            std::copy_n(features.data() + static_cast<std::size_t>(idx) * feature_dim,
                        feature_dim, batch.features.data() + k * feature_dim);
            batch.labels[k] = labels[idx];
        }

        GradientBundle grad = backward(graph, theta, batch, variant);
        loss_sum += grad.loss_value;
        ++batches;

        std::vector<double> flat = flatten(theta);
        optimizer_step(theta_opt, flat, grad.d_theta, true);
        theta = unflatten(flat, static_cast<int>(ge), static_cast<int>(gv));
        optimizer_step(weight_opt, graph.weights, grad.d_weights, true);
        optimizer_step(bias_opt, graph.biases, grad.d_biases, false);

        result.last_gradient = std::move(grad);
    }
    result.mean_loss = loss_sum / static_cast<double>(batches);
    return result;
}

double gradient_check(const ModelGraph& graph, const ThetaVector& theta, const Batch& batch,
                      double eps, double base_fraction, std::size_t max_base_coords,
                      SoftSignVariant variant, std::uint64_t sample_seed) {
    if (eps <= 0.0) throw ContractError("gradient_check: eps must be positive");
    const std::size_t num_classes = graph.layers.back().out_dim;
    const GradientBundle analytic = backward(graph, theta, batch, variant);

    const int ge = static_cast<int>(theta.num_edge_groups());
    const int gv = static_cast<int>(theta.num_node_groups());

    auto loss_at = [&](const ThetaVector& th, const ModelGraph& gr) {
        return loss_cross_entropy(forward(gr, th, batch.features, batch.n, variant),
                                  batch.labels, num_classes);
    };
    auto rel_err = [](double a, double b) {
        return std::fabs(a - b) / std::max(1e-6, std::fabs(a) + std::fabs(b));
    };

    double max_err = 0.0;
    std::vector<double> flat = flatten(theta);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double save = flat[i];
        flat[i] = save + eps;
        const double lp = loss_at(unflatten(flat, ge, gv), graph);
        flat[i] = save - eps;
        const double lm = loss_at(unflatten(flat, ge, gv), graph);
        flat[i] = save;
        max_err = std::max(max_err, rel_err((lp - lm) / (2.0 * eps), analytic.d_theta[i]));
    }

    const std::size_t base_total = graph.weights.size() + graph.biases.size();
    std::size_t sample =
        std::min(max_base_coords,
                 static_cast<std::size_t>(base_fraction * static_cast<double>(base_total)));
    std::mt19937_64 rng(sample_seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<std::size_t> pick(0, base_total - 1);
    ModelGraph work = graph;
    for (std::size_t k = 0; k < sample; ++k) {
        const std::size_t idx = pick(rng);
        double* p = idx < work.weights.size() ? &work.weights[idx]
                                              : &work.biases[idx - work.weights.size()];
        const double expected = idx < work.weights.size()
                                    ? analytic.d_weights[idx]
                                    : analytic.d_biases[idx - work.weights.size()];
        const double save = *p;
        *p = save + eps;
        const double lp = loss_at(theta, work);
        *p = save - eps;
        const double lm = loss_at(theta, work);
        *p = save;
        max_err = std::max(max_err, rel_err((lp - lm) / (2.0 * eps), expected));
    }
    return max_err;
}

}  // namespace ufl
