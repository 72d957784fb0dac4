#include "unifiedfl/arch.hpp"

#include <numeric>

#include "unifiedfl/errors.hpp"

namespace ufl {

LayerDesc LayerDesc::dense(int in, int out) {
    LayerDesc d;
    d.kind = LayerKind::Dense;
    d.in_dim = in;
    d.out_dim = out;
    return d;
}

LayerDesc LayerDesc::conv2d(int in_ch, int out_ch, int kh, int kw, int stride, int padding) {
    LayerDesc d;
    d.kind = LayerKind::Conv2d;
    d.in_channels = in_ch;
    d.out_channels = out_ch;
    d.kernel_h = kh;
    d.kernel_w = kw;
    d.stride = stride;
    d.padding = padding;
    return d;
}

LayerDesc LayerDesc::activation(ActivationKind a) {
    LayerDesc d;
    d.kind = LayerKind::Activation;
    d.act = a;
    return d;
}

LayerDesc LayerDesc::flatten() {
    LayerDesc d;
    d.kind = LayerKind::Flatten;
    return d;
}

namespace {

struct ShapeState {
    bool spatial;  // still carrying (c, h, w)
    int c, h, w;
    int flat_dim;
};

int conv_out(int in, int k, int stride, int pad, const std::string& where) {
    const int out = (in + 2 * pad - k) / stride + 1;
    if (out < 1)
        throw ConfigError(where + ": kernel does not fit input extent " + std::to_string(in));
    return out;
}

}  // namespace

void validate_spec(const ArchitectureSpec& spec) {
    if (spec.layers.empty())
        throw ConfigError("architecture '" + spec.name + "': no layers");
    if (spec.input.flat() < 1)
        throw ConfigError("architecture '" + spec.name + "': empty input shape");

    ShapeState st{true, spec.input.channels, spec.input.height, spec.input.width,
                  spec.input.flat()};
    int trainable = 0;
    int last_trainable = -1;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        const std::string where =
            "architecture '" + spec.name + "', layer " + std::to_string(i);
        switch (l.kind) {
            case LayerKind::Dense: {
                if (l.in_dim < 1 || l.out_dim < 1)
                    throw ConfigError(where + ": dense dims must be positive");
                if (l.in_dim != st.flat_dim)
                    throw ConfigError(where + ": dense expects in_dim " +
                                      std::to_string(st.flat_dim) + ", got " +
                                      std::to_string(l.in_dim));
                st.spatial = false;
                st.flat_dim = l.out_dim;
                ++trainable;
                last_trainable = static_cast<int>(i);
                break;
            }
            case LayerKind::Conv2d: {
                if (!st.spatial)
                    throw ConfigError(where + ": conv2d after flatten/dense");
                if (l.in_channels != st.c)
                    throw ConfigError(where + ": conv2d expects " + std::to_string(st.c) +
                                      " input channels, got " + std::to_string(l.in_channels));
                if (l.out_channels < 1 || l.kernel_h < 1 || l.kernel_w < 1 || l.stride < 1 ||
                    l.padding < 0)
                    throw ConfigError(where + ": bad conv2d geometry");
                st.h = conv_out(st.h, l.kernel_h, l.stride, l.padding, where);
                st.w = conv_out(st.w, l.kernel_w, l.stride, l.padding, where);
                st.c = l.out_channels;
                st.flat_dim = st.c * st.h * st.w;
                ++trainable;
                last_trainable = static_cast<int>(i);
                break;
            }
            case LayerKind::Activation:
                break;
            case LayerKind::Flatten:
                if (!st.spatial)
                    throw ConfigError(where + ": flatten after flatten/dense");
                st.spatial = false;
                break;
        }
    }
    if (trainable == 0)
        throw ConfigError("architecture '" + spec.name + "': no trainable layer");
    if (spec.layers[static_cast<std::size_t>(last_trainable)].kind != LayerKind::Dense)
        throw ConfigError("architecture '" + spec.name + "': final trainable layer must be dense");
}

std::int64_t spec_param_count(const ArchitectureSpec& spec) {
    std::int64_t total = 0;
    for (const LayerDesc& l : spec.layers) {
        if (l.kind == LayerKind::Dense)
            total += static_cast<std::int64_t>(l.in_dim) * l.out_dim + l.out_dim;
        else if (l.kind == LayerKind::Conv2d)
            total += static_cast<std::int64_t>(l.kernel_h) * l.kernel_w * l.in_channels *
                         l.out_channels +
                     l.out_channels;
    }
    return total;
}

namespace {

ArchitectureSpec make_mlp(const std::string& name, InputShape input, int num_classes,
                          std::vector<int> hidden) {
    ArchitectureSpec spec;
    spec.name = name;
    spec.input = input;
    int prev = input.flat();
    if (input.height > 1 || input.width > 1 || input.channels > 1)
        spec.layers.push_back(LayerDesc::flatten());
    for (int h : hidden) {
        spec.layers.push_back(LayerDesc::dense(prev, h));
        spec.layers.push_back(LayerDesc::activation(ActivationKind::Relu));
        prev = h;
    }
    spec.layers.push_back(LayerDesc::dense(prev, num_classes));
    return spec;
}

}  // namespace

ArchitectureSpec make_backbone(const std::string& name, InputShape input, int num_classes) {
    // Hidden widths chosen so the 28x28 grayscale / 10-class instantiation
    // lands within 2% of each family's nominal parameter budget.
    if (name == "MLP_a") return make_mlp(name, input, num_classes, {68});
    if (name == "MLP_b") return make_mlp(name, input, num_classes, {155, 120});
    if (name == "MLP_c") return make_mlp(name, input, num_classes, {290, 180, 120});
    if (name == "MLP_d") return make_mlp(name, input, num_classes, {520, 400, 256, 192, 128});
    if (name == "MLP_e")
        return make_mlp(name, input, num_classes, {1000, 640, 512, 384, 256, 192, 128});
    if (name == "MLP_f")
        return make_mlp(name, input, num_classes,
                        {1400, 1000, 768, 640, 512, 384, 256, 192, 128});
    if (name == "CNN_a") {
        ArchitectureSpec spec;
        spec.name = name;
        spec.input = input;
        const int chans[4] = {48, 96, 176, 248};
        int c = input.channels, h = input.height, w = input.width;
        for (int i = 0; i < 4; ++i) {
            const int stride = (i == 0) ? 1 : 2;
            spec.layers.push_back(LayerDesc::conv2d(c, chans[i], 3, 3, stride, 1));
            spec.layers.push_back(LayerDesc::activation(ActivationKind::Relu));
            h = (h + 2 - 3) / stride + 1;
            w = (w + 2 - 3) / stride + 1;
            c = chans[i];
        }
        spec.layers.push_back(LayerDesc::flatten());
        spec.layers.push_back(LayerDesc::dense(c * h * w, num_classes));
        return spec;
    }
    throw ConfigError("unknown backbone '" + name + "'");
}

const std::vector<std::string>& backbone_names() {
    static const std::vector<std::string> names = {"MLP_a", "MLP_b", "MLP_c", "MLP_d",
                                                   "MLP_e", "MLP_f", "CNN_a"};
    return names;
}

}  // namespace ufl
