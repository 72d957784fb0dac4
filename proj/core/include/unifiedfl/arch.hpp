#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ufl {

enum class LayerKind { Dense, Conv2d, Activation, Flatten };
enum class ActivationKind { Relu, Identity };

struct LayerDesc {
    LayerKind kind = LayerKind::Dense;
    // dense
    int in_dim = 0;
    int out_dim = 0;
    // conv2d
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int padding = 0;
    // activation
    ActivationKind act = ActivationKind::Identity;

    static LayerDesc dense(int in, int out);
    static LayerDesc conv2d(int in_ch, int out_ch, int kh, int kw, int stride = 1, int padding = 0);
    static LayerDesc activation(ActivationKind a);
    static LayerDesc flatten();
};

struct InputShape {
    int channels = 1;
    int height = 1;
    int width = 1;
    int flat() const { return channels * height * width; }
};

/// Ordered layer roster for one client backbone.
struct ArchitectureSpec {
    std::string name;
    InputShape input;
    std::vector<LayerDesc> layers;
};

/// Throws ConfigError naming the offending layer if adjacent dimensions are
/// inconsistent, the final layer is not dense, or no trainable layer exists.
void validate_spec(const ArchitectureSpec& spec);

/// Total scalar parameter count (weights + biases) implied by the spec.
std::int64_t spec_param_count(const ArchitectureSpec& spec);

/// Instantiate a named backbone (MLP_a..MLP_f, CNN_a) for the given input
/// shape and class count. Hidden widths are fixed per family; only the input
/// and output dimensions adapt to the task. Throws ConfigError on unknown name.
ArchitectureSpec make_backbone(const std::string& name, InputShape input, int num_classes);

/// Names accepted by make_backbone.
const std::vector<std::string>& backbone_names();

}  // namespace ufl
