#pragma once

// Minimal 1-D convolutional network engine: SAME convolutions, ReLU,
// interleaving, residual shortcuts, reverse-mode gradients and adaptive
// optimizers. Everything is 64-bit.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace padc::nn {

using Sequence = std::vector<double>;

enum class Activation : std::uint8_t { None = 0, Relu = 1 };

// Feature channels are rows, time steps are columns. Eigen's column-major
// storage therefore keeps all channels of one time step contiguous, which the
// convolution relies on.
struct FeatureMap {
    Eigen::MatrixXd data;

    FeatureMap() = default;
    FeatureMap(Eigen::Index channels, Eigen::Index length);
    explicit FeatureMap(Eigen::MatrixXd values);

    static FeatureMap from_sequence(std::span<const double> x);

    Eigen::Index channels() const { return data.rows(); }
    Eigen::Index length() const { return data.cols(); }
};

struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;
    Activation activation = Activation::None;
    // out_channels x (kernel * in_channels); column tap * in_channels + c.
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;

    ConvLayer() = default;
    // Zero-initialized layer.
    ConvLayer(int in, int out, int kernel_width, Activation act);

    double& weight(int out, int in, int tap) { return weights(out, tap * in_channels + in); }
    double weight(int out, int in, int tap) const { return weights(out, tap * in_channels + in); }

    std::size_t parameter_count() const;
    void validate() const;
};

// Zero-padded cross-correlation, output length == input length.
FeatureMap conv1d_same(const FeatureMap& x, const ConvLayer& layer);

// ITL: out[:, t*N + m] = maps[m][:, t].
FeatureMap interleave(std::span<const FeatureMap> maps);
std::vector<FeatureMap> deinterleave(const FeatureMap& map, std::size_t n);

Sequence interleave_sequences(std::span<const Sequence> channels);
std::vector<Sequence> deinterleave_sequence(std::span<const double> x, std::size_t n);

struct ResidualBlock {
    ConvLayer first;
    ConvLayer second;
    std::optional<ConvLayer> projection;
};

enum class NetKind : std::uint8_t { Linearization = 0, Matching = 1 };

struct Net {
    NetKind kind = NetKind::Linearization;
    // Adds the (interleaved) raw input to the output layer's result.
    bool global_skip = true;
    // Inputs are multiplied by this before the first layer and outputs divided
    // by it on exit. Always a power of two so it can be folded exactly into the
    // parameters.
    double input_scale = 1.0;

    std::vector<ConvLayer> input_layers;
    std::vector<ResidualBlock> blocks;
    ConvLayer output_layer;

    std::size_t n_inputs() const { return input_layers.size(); }
    std::size_t parameter_count() const;

    // Half-width of the dependency window of one output sample, measured on
    // the output (interleaved) grid.
    std::size_t receptive_radius() const;

    // Canonical order: input layers, then per block {first, second,
    // projection?}, then the output layer. Parameter vectors, gradients and
    // checkpoints all follow it.
    std::vector<const ConvLayer*> layers() const;
    std::vector<ConvLayer*> layers();

    void validate() const;
};

// Flattened parameters; per layer the weights in [out][in][tap] order then the
// bias.
Eigen::VectorXd get_parameters(const Net& net);
void set_parameters(Net& net, const Eigen::VectorXd& params);

// Returns an equivalent net with input_scale == 1 whose forward pass is
// bit-identical to the original.
Net fold_input_scale(const Net& net);

// Intermediates recorded by forward() and consumed by backward(). Buffers are
// kept between calls so a training loop does not reallocate every step; a
// cache must not be shared between threads.
class ForwardCache {
public:
    bool empty() const { return !valid_; }
    void clear();

    struct LayerTrace {
        Eigen::MatrixXd padded_input;
        Eigen::MatrixXd output;
    };
    struct LayerGrad {
        Eigen::MatrixXd weights;
        Eigen::VectorXd bias;
    };

private:
    std::vector<LayerTrace> traces_;
    std::vector<Eigen::MatrixXd> block_outputs_;
    Eigen::MatrixXd stem_;
    Eigen::MatrixXd skip_;
    std::size_t output_length_ = 0;
    const Net* net_ = nullptr;
    bool valid_ = false;

    struct Scratch {
        Eigen::MatrixXd dh, d_short, da, tmp;
        std::vector<Eigen::MatrixXd> parts;
        std::vector<LayerGrad> grads;
    };
    mutable Scratch scratch_;

    friend Sequence forward(const Net&, std::span<const Sequence>, ForwardCache*);
    friend Eigen::VectorXd backward(const Net&, const ForwardCache&, std::span<const double>);
};

Sequence forward(const Net& net, std::span<const Sequence> inputs, ForwardCache* cache = nullptr);

// Gradient of sum_t loss_grad[t] * output[t] with respect to every parameter,
// in get_parameters() order.
Eigen::VectorXd backward(const Net& net, const ForwardCache& cache, std::span<const double> loss_grad);

enum class OptimizerKind : std::uint8_t { Adam = 0, AdaGrad = 1 };

struct OptimizerState {
    OptimizerKind algorithm = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    // Adam: first/second moments. AdaGrad: second_moment holds the running sum
    // of squared gradients and first_moment is unused.
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;

    static OptimizerState make(OptimizerKind kind, std::size_t n_params, double learning_rate);
};

void opt_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads);

// Checkpoint format "PADN" v1. The net is folded to input_scale == 1 before
// writing. Bit 7 of the kind byte is set when the global skip is disabled.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_checkpoint(const Net& net, std::ostream& out);
Net read_checkpoint(std::istream& in);
void save_checkpoint(const Net& net, const std::filesystem::path& path);
Net load_checkpoint(const std::filesystem::path& path);

} // namespace padc::nn
