#include "padc/nn.hpp"

#include "padc/binary_io.hpp"
#include "padc/errors.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace padc::nn {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using ColumnWindow = Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>>;

using LayerTrace = ForwardCache::LayerTrace;
using LayerGrad = ForwardCache::LayerGrad;

// The padded input viewed as its im2col matrix: column t stacks the K input
// columns t..t+K-1, which are already contiguous in column-major storage.
ColumnWindow im2col(const MatrixXd& padded, int kernel, Index length) {
    return ColumnWindow(padded.data(), kernel * padded.rows(), length, Eigen::OuterStride<>(padded.rows()));
}

// Writes the layer output into trace.output and returns it.
const MatrixXd& apply_layer(const ConvLayer& layer, const MatrixXd& x, LayerTrace& trace) {
    if (x.rows() != layer.in_channels) {
        throw ShapeError("conv layer expects " + std::to_string(layer.in_channels) + " input channels, got " +
                         std::to_string(x.rows()));
    }
    const int pad = layer.kernel / 2;
    const Index length = x.cols();
    trace.padded_input.resize(x.rows(), length + 2 * pad);
    trace.padded_input.leftCols(pad).setZero();
    trace.padded_input.middleCols(pad, length) = x;
    trace.padded_input.rightCols(pad).setZero();
    trace.output.resize(layer.out_channels, length);
    trace.output.noalias() = layer.weights * im2col(trace.padded_input, layer.kernel, length);
    trace.output.colwise() += layer.bias;
    if (layer.activation == Activation::Relu) {
        trace.output = trace.output.cwiseMax(0.0);
    }
    return trace.output;
}

// `grad` holds dL/d(output) on entry and dL/d(pre-activation) on exit.
void layer_backward(const ConvLayer& layer, const LayerTrace& trace, MatrixXd& grad, LayerGrad& out,
                    MatrixXd* grad_in) {
    const Index length = grad.cols();
    if (layer.activation == Activation::Relu) {
        grad = (trace.output.array() > 0.0).select(grad, 0.0);
    }
    out.weights.resize(layer.out_channels, layer.kernel * layer.in_channels);
    out.weights.noalias() = grad * im2col(trace.padded_input, layer.kernel, length).transpose();
    out.bias = grad.rowwise().sum();
    if (grad_in == nullptr) {
        return;
    }
    // dX[:, s] = sum_tap W_tap^T * G[:, s + pad - tap]
    const int pad = layer.kernel / 2;
    const Index cin = layer.in_channels;
    grad_in->resize(cin, length);
    grad_in->noalias() = layer.weights.middleCols(pad * cin, cin).transpose() * grad;
    for (int tap = 0; tap < layer.kernel; ++tap) {
        const Index shift = pad - tap;
        const Index width = length - std::abs(shift);
        if (shift == 0 || width <= 0) {
            continue;
        }
        const auto w_tap = layer.weights.middleCols(tap * cin, cin).transpose();
        if (shift > 0) {
            grad_in->leftCols(width).noalias() += w_tap * grad.rightCols(width);
        } else {
            grad_in->rightCols(width).noalias() += w_tap * grad.leftCols(width);
        }
    }
}

MatrixXd interleave_matrices(const std::vector<MatrixXd>& parts) {
    const Index n = static_cast<Index>(parts.size());
    const Index length = parts.front().cols();
    MatrixXd out(parts.front().rows(), n * length);
    for (Index t = 0; t < length; ++t) {
        for (Index m = 0; m < n; ++m) {
            out.col(t * n + m) = parts[static_cast<std::size_t>(m)].col(t);
        }
    }
    return out;
}

std::vector<MatrixXd> deinterleave_matrix(const MatrixXd& x, Index n) {
    const Index length = x.cols() / n;
    std::vector<MatrixXd> parts(static_cast<std::size_t>(n), MatrixXd(x.rows(), length));
    for (Index t = 0; t < length; ++t) {
        for (Index m = 0; m < n; ++m) {
            parts[static_cast<std::size_t>(m)].col(t) = x.col(t * n + m);
        }
    }
    return parts;
}

bool all_finite(const ConvLayer& layer) {
    return layer.weights.allFinite() && layer.bias.allFinite();
}

} // namespace

FeatureMap::FeatureMap(Index channels, Index length) : data(MatrixXd::Zero(channels, length)) {}

FeatureMap::FeatureMap(MatrixXd values) : data(std::move(values)) {
    if (!data.allFinite()) {
        throw ShapeError("feature map contains non-finite values");
    }
}

FeatureMap FeatureMap::from_sequence(std::span<const double> x) {
    MatrixXd m(1, static_cast<Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        m(0, static_cast<Index>(i)) = x[i];
    }
    return FeatureMap(std::move(m));
}

ConvLayer::ConvLayer(int in, int out, int kernel_width, Activation act)
    : in_channels(in), out_channels(out), kernel(kernel_width), activation(act),
      weights(MatrixXd::Zero(out, kernel_width * in)), bias(VectorXd::Zero(out)) {
    validate();
}

std::size_t ConvLayer::parameter_count() const {
    return static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels) *
               static_cast<std::size_t>(kernel) +
           static_cast<std::size_t>(out_channels);
}

void ConvLayer::validate() const {
    if (in_channels < 1 || out_channels < 1) {
        throw ShapeError("conv layer needs at least one input and one output channel");
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw ShapeError("conv kernel width must be odd, got " + std::to_string(kernel));
    }
    if (weights.rows() != out_channels || weights.cols() != kernel * in_channels || bias.size() != out_channels) {
        throw ShapeError("conv layer parameter shapes disagree with its channel counts");
    }
}

FeatureMap conv1d_same(const FeatureMap& x, const ConvLayer& layer) {
    LayerTrace trace;
    apply_layer(layer, x.data, trace);
    return FeatureMap(std::move(trace.output));
}

FeatureMap interleave(std::span<const FeatureMap> maps) {
    if (maps.empty()) {
        throw ShapeError("interleave needs at least one map");
    }
    std::vector<MatrixXd> parts;
    parts.reserve(maps.size());
    for (const auto& m : maps) {
        if (m.channels() != maps.front().channels() || m.length() != maps.front().length()) {
            throw ShapeError("interleave requires maps of identical shape");
        }
        parts.push_back(m.data);
    }
    return FeatureMap(interleave_matrices(parts));
}

std::vector<FeatureMap> deinterleave(const FeatureMap& map, std::size_t n) {
    if (n == 0 || map.length() % static_cast<Index>(n) != 0) {
        throw ShapeError("deinterleave: length " + std::to_string(map.length()) + " is not a multiple of " +
                         std::to_string(n));
    }
    std::vector<FeatureMap> out;
    for (auto& part : deinterleave_matrix(map.data, static_cast<Index>(n))) {
        out.emplace_back(std::move(part));
    }
    return out;
}

Sequence interleave_sequences(std::span<const Sequence> channels) {
    if (channels.empty()) {
        throw ShapeError("interleave needs at least one channel");
    }
    const std::size_t n = channels.size();
    const std::size_t length = channels.front().size();
    for (const auto& c : channels) {
        if (c.size() != length) {
            throw ShapeError("interleave requires channels of equal length");
        }
    }
    Sequence out(n * length);
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t m = 0; m < n; ++m) {
            out[t * n + m] = channels[m][t];
        }
    }
    return out;
}

std::vector<Sequence> deinterleave_sequence(std::span<const double> x, std::size_t n) {
    if (n == 0 || x.size() % n != 0) {
        throw ShapeError("deinterleave: length " + std::to_string(x.size()) + " is not a multiple of " +
                         std::to_string(n));
    }
    std::vector<Sequence> out(n, Sequence(x.size() / n));
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k % n][k / n] = x[k];
    }
    return out;
}

std::size_t Net::parameter_count() const {
    std::size_t total = 0;
    for (const auto* layer : layers()) {
        total += layer->parameter_count();
    }
    return total;
}

std::size_t Net::receptive_radius() const {
    std::size_t radius = 0;
    if (!input_layers.empty()) {
        radius += static_cast<std::size_t>(input_layers.front().kernel / 2) * n_inputs();
    }
    for (const auto& block : blocks) {
        radius += static_cast<std::size_t>(block.first.kernel / 2 + block.second.kernel / 2);
    }
    return radius + static_cast<std::size_t>(output_layer.kernel / 2);
}

std::vector<const ConvLayer*> Net::layers() const {
    std::vector<const ConvLayer*> out;
    for (const auto& l : input_layers) {
        out.push_back(&l);
    }
    for (const auto& b : blocks) {
        out.push_back(&b.first);
        out.push_back(&b.second);
        if (b.projection) {
            out.push_back(&*b.projection);
        }
    }
    out.push_back(&output_layer);
    return out;
}

std::vector<ConvLayer*> Net::layers() {
    std::vector<ConvLayer*> out;
    for (const auto* l : std::as_const(*this).layers()) {
        out.push_back(const_cast<ConvLayer*>(l));
    }
    return out;
}

void Net::validate() const {
    if (input_layers.empty()) {
        throw ShapeError("net has no input layer");
    }
    if (kind == NetKind::Linearization && n_inputs() != 1) {
        throw ShapeError("linearization nets take exactly one input");
    }
    if (kind == NetKind::Matching && n_inputs() < 2) {
        throw ShapeError("matching nets take at least two inputs");
    }
    int exponent = 0;
    if (!(input_scale > 0.0) || std::frexp(input_scale, &exponent) != 0.5) {
        throw ShapeError("input_scale must be a positive power of two");
    }
    for (const auto* layer : layers()) {
        layer->validate();
        if (!all_finite(*layer)) {
            throw ShapeError("net contains non-finite parameters");
        }
    }
    const int width = input_layers.front().out_channels;
    for (const auto& l : input_layers) {
        if (l.in_channels != 1 || l.out_channels != width || l.kernel != input_layers.front().kernel) {
            throw ShapeError("input layers must all map 1 channel to the same width");
        }
    }
    int current = width;
    for (const auto& b : blocks) {
        if (b.first.in_channels != current || b.second.in_channels != b.first.out_channels) {
            throw ShapeError("residual block channel chain is broken");
        }
        if (b.projection) {
            if (b.projection->kernel != 1 || b.projection->in_channels != current ||
                b.projection->out_channels != b.second.out_channels) {
                throw ShapeError("shortcut projection must be k=1 from block input to block output width");
            }
        } else if (b.second.out_channels != current) {
            throw ShapeError("residual block changes width without a shortcut projection");
        }
        current = b.second.out_channels;
    }
    if (output_layer.in_channels != current || output_layer.out_channels != 1) {
        throw ShapeError("output layer must map the last block width to one channel");
    }
}

VectorXd get_parameters(const Net& net) {
    VectorXd params(static_cast<Index>(net.parameter_count()));
    Index k = 0;
    for (const auto* layer : net.layers()) {
        for (int o = 0; o < layer->out_channels; ++o) {
            for (int c = 0; c < layer->in_channels; ++c) {
                for (int tap = 0; tap < layer->kernel; ++tap) {
                    params(k++) = layer->weight(o, c, tap);
                }
            }
        }
        params.segment(k, layer->out_channels) = layer->bias;
        k += layer->out_channels;
    }
    return params;
}

void set_parameters(Net& net, const VectorXd& params) {
    if (params.size() != static_cast<Index>(net.parameter_count())) {
        throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, net needs " +
                         std::to_string(net.parameter_count()));
    }
    Index k = 0;
    for (auto* layer : net.layers()) {
        for (int o = 0; o < layer->out_channels; ++o) {
            for (int c = 0; c < layer->in_channels; ++c) {
                for (int tap = 0; tap < layer->kernel; ++tap) {
                    layer->weight(o, c, tap) = params(k++);
                }
            }
        }
        layer->bias = params.segment(k, layer->out_channels);
        k += layer->out_channels;
    }
}

Net fold_input_scale(const Net& net) {
    Net folded = net;
    const double s = net.input_scale;
    for (auto& l : folded.input_layers) {
        l.weights *= s;
    }
    folded.output_layer.weights /= s;
    folded.output_layer.bias /= s;
    folded.input_scale = 1.0;
    return folded;
}

void ForwardCache::clear() {
    valid_ = false;
    output_length_ = 0;
    net_ = nullptr;
}

Sequence forward(const Net& net, std::span<const Sequence> inputs, ForwardCache* cache) {
    if (inputs.size() != net.n_inputs()) {
        throw ShapeError("net takes " + std::to_string(net.n_inputs()) + " input sequences, got " +
                         std::to_string(inputs.size()));
    }
    const std::size_t length = inputs.front().size();
    if (length == 0) {
        throw ShapeError("input sequences must not be empty");
    }
    for (const auto& in : inputs) {
        if (in.size() != length) {
            throw ShapeError("input sequences must have equal length");
        }
    }

    ForwardCache local;
    ForwardCache& c = cache != nullptr ? *cache : local;
    c.clear();
    c.traces_.resize(net.layers().size());
    c.block_outputs_.resize(net.blocks.size());

    std::size_t next = 0;
    auto run = [&](const ConvLayer& layer, const MatrixXd& x) -> const MatrixXd& {
        return apply_layer(layer, x, c.traces_[next++]);
    };

    const double s = net.input_scale;
    const std::size_t n = net.n_inputs();
    const Index len = static_cast<Index>(length);
    const MatrixXd* h = nullptr;
    if (n == 1) {
        c.skip_ = Eigen::Map<const Eigen::RowVectorXd>(inputs[0].data(), len) * s;
        h = &run(net.input_layers[0], c.skip_);
    } else {
        c.stem_.resize(net.input_layers.front().out_channels, static_cast<Index>(n) * len);
        c.skip_.resize(1, static_cast<Index>(n) * len);
        Eigen::RowVectorXd x(len);
        for (std::size_t m = 0; m < n; ++m) {
            x = Eigen::Map<const Eigen::RowVectorXd>(inputs[m].data(), len) * s;
            const MatrixXd& head = run(net.input_layers[m], x);
            for (Index t = 0; t < len; ++t) {
                c.stem_.col(t * static_cast<Index>(n) + static_cast<Index>(m)) = head.col(t);
                c.skip_(0, t * static_cast<Index>(n) + static_cast<Index>(m)) = x(t);
            }
        }
        h = &c.stem_;
    }

    for (std::size_t b = 0; b < net.blocks.size(); ++b) {
        const auto& block = net.blocks[b];
        const MatrixXd& a = run(block.first, *h);
        const MatrixXd& main = run(block.second, a);
        MatrixXd& out = c.block_outputs_[b];
        if (block.projection) {
            const MatrixXd& shortcut = run(*block.projection, *h);
            out.noalias() = main + shortcut;
        } else {
            out.noalias() = main + *h;
        }
        h = &out;
    }
    const MatrixXd& head = run(net.output_layer, *h);

    Sequence y(static_cast<std::size_t>(head.cols()));
    for (Index t = 0; t < head.cols(); ++t) {
        const double v = net.global_skip ? head(0, t) + c.skip_(0, t) : head(0, t);
        y[static_cast<std::size_t>(t)] = v / s;
    }
    c.output_length_ = y.size();
    c.net_ = &net;
    c.valid_ = true;
    return y;
}

VectorXd backward(const Net& net, const ForwardCache& cache, std::span<const double> loss_grad) {
    if (cache.empty() || cache.net_ != &net) {
        throw StateError("backward called without a forward pass of this net");
    }
    if (loss_grad.size() != cache.output_length_) {
        throw ShapeError("loss gradient length " + std::to_string(loss_grad.size()) +
                         " does not match output length " + std::to_string(cache.output_length_));
    }
    const auto layer_list = net.layers();
    if (cache.traces_.size() != layer_list.size()) {
        throw StateError("forward cache does not match the net structure");
    }
    auto& sc = cache.scratch_;
    sc.grads.resize(layer_list.size());

    // Trace index of each block's first layer.
    std::vector<std::size_t> block_start;
    std::size_t idx = net.n_inputs();
    for (const auto& b : net.blocks) {
        block_start.push_back(idx);
        idx += b.projection ? 3 : 2;
    }
    const std::size_t output_index = idx;

    sc.tmp = Eigen::Map<const Eigen::RowVectorXd>(loss_grad.data(), static_cast<Index>(loss_grad.size())) /
             net.input_scale;
    layer_backward(net.output_layer, cache.traces_[output_index], sc.tmp, sc.grads[output_index], &sc.dh);

    for (std::size_t bi = net.blocks.size(); bi-- > 0;) {
        const auto& block = net.blocks[bi];
        const std::size_t first = block_start[bi];
        if (block.projection) {
            layer_backward(*block.projection, cache.traces_[first + 2], sc.dh, sc.grads[first + 2], &sc.d_short);
        } else {
            sc.d_short = sc.dh;
        }
        layer_backward(block.second, cache.traces_[first + 1], sc.dh, sc.grads[first + 1], &sc.da);
        layer_backward(block.first, cache.traces_[first], sc.da, sc.grads[first], &sc.tmp);
        sc.tmp += sc.d_short;
        std::swap(sc.dh, sc.tmp);
    }

    const std::size_t n = net.n_inputs();
    if (n == 1) {
        layer_backward(net.input_layers[0], cache.traces_[0], sc.dh, sc.grads[0], nullptr);
    } else {
        const Index len = sc.dh.cols() / static_cast<Index>(n);
        sc.parts.resize(n);
        for (std::size_t m = 0; m < n; ++m) {
            auto& part = sc.parts[m];
            part.resize(sc.dh.rows(), len);
            for (Index t = 0; t < len; ++t) {
                part.col(t) = sc.dh.col(t * static_cast<Index>(n) + static_cast<Index>(m));
            }
            layer_backward(net.input_layers[m], cache.traces_[m], part, sc.grads[m], nullptr);
        }
    }

    VectorXd flat(static_cast<Index>(net.parameter_count()));
    Index k = 0;
    for (std::size_t li = 0; li < layer_list.size(); ++li) {
        const ConvLayer& layer = *layer_list[li];
        const LayerGrad& lg = sc.grads[li];
        for (int o = 0; o < layer.out_channels; ++o) {
            for (int ci = 0; ci < layer.in_channels; ++ci) {
                for (int tap = 0; tap < layer.kernel; ++tap) {
                    flat(k++) = lg.weights(o, tap * layer.in_channels + ci);
                }
            }
        }
        flat.segment(k, layer.out_channels) = lg.bias;
        k += layer.out_channels;
    }
    return flat;
}

OptimizerState OptimizerState::make(OptimizerKind kind, std::size_t n_params, double learning_rate) {
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    OptimizerState state;
    state.algorithm = kind;
    state.learning_rate = learning_rate;
    if (kind == OptimizerKind::AdaGrad) {
        state.epsilon = 1e-10;
    }
    state.first_moment = VectorXd::Zero(static_cast<Index>(n_params));
    state.second_moment = VectorXd::Zero(static_cast<Index>(n_params));
    return state;
}

void opt_step(OptimizerState& state, VectorXd& params, const VectorXd& grads) {
    if (params.size() != grads.size() || state.second_moment.size() != params.size() ||
        state.first_moment.size() != params.size()) {
        throw ShapeError("optimizer state, parameters and gradients must have the same size");
    }
    ++state.step;
    if (state.algorithm == OptimizerKind::Adam) {
        state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
        state.second_moment =
            state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
        const double t = static_cast<double>(state.step);
        const double c1 = 1.0 - std::pow(state.beta1, t);
        const double c2 = 1.0 - std::pow(state.beta2, t);
        params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                          ((state.second_moment.array() / c2).sqrt() + state.epsilon);
    } else {
        state.second_moment += grads.cwiseProduct(grads);
        params.array() -= state.learning_rate * grads.array() / (state.second_moment.array().sqrt() + state.epsilon);
    }
}

void write_checkpoint(const Net& net, std::ostream& out) {
    net.validate();
    const Net folded = fold_input_scale(net);
    const auto layer_list = folded.layers();
    io::BinaryWriter w(out);
    w.magic("PADN");
    w.put<std::uint16_t>(kCheckpointVersion);
    auto kind = static_cast<std::uint8_t>(folded.kind);
    if (!folded.global_skip) {
        kind |= 0x80;
    }
    w.put<std::uint8_t>(kind);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(folded.n_inputs()));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(layer_list.size()));
    for (const auto* layer : layer_list) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer->in_channels));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer->out_channels));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer->kernel));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(layer->activation));
        for (int o = 0; o < layer->out_channels; ++o) {
            for (int c = 0; c < layer->in_channels; ++c) {
                for (int tap = 0; tap < layer->kernel; ++tap) {
                    w.put<double>(layer->weight(o, c, tap));
                }
            }
        }
        for (int o = 0; o < layer->out_channels; ++o) {
            w.put<double>(layer->bias(o));
        }
    }
    w.check();
}

Net read_checkpoint(std::istream& in) {
    io::BinaryReader r(in);
    r.expect_magic("PADN", "checkpoint");
    const std::uint64_t version_at = r.offset();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
                              std::to_string(kCheckpointVersion) + ")",
                          version_at);
    }
    const std::uint64_t kind_at = r.offset();
    const auto kind_byte = r.get<std::uint8_t>("net kind");
    const auto kind_value = static_cast<std::uint8_t>(kind_byte & 0x7f);
    if (kind_value > 1) {
        throw FormatError("unknown net kind " + std::to_string(kind_value), kind_at);
    }
    const auto n_inputs = r.get<std::uint8_t>("input count");
    const std::uint64_t count_at = r.offset();
    const auto layer_count = r.get<std::uint16_t>("layer count");
    if (n_inputs < 1 || layer_count < static_cast<std::uint32_t>(n_inputs) + 1U) {
        throw FormatError("layer count too small for the declared inputs", count_at);
    }

    std::vector<ConvLayer> layers;
    layers.reserve(layer_count);
    for (std::uint16_t i = 0; i < layer_count; ++i) {
        const std::uint64_t layer_at = r.offset();
        const auto in_ch = r.get<std::uint32_t>("in_ch");
        const auto out_ch = r.get<std::uint32_t>("out_ch");
        const auto kernel = r.get<std::uint32_t>("kernel");
        const auto act = r.get<std::uint8_t>("activation");
        if (in_ch == 0 || out_ch == 0 || in_ch > 4096 || out_ch > 4096 || kernel == 0 || kernel > 63 ||
            kernel % 2 == 0 || act > 1) {
            throw FormatError("invalid layer header for layer " + std::to_string(i), layer_at);
        }
        ConvLayer layer(static_cast<int>(in_ch), static_cast<int>(out_ch), static_cast<int>(kernel),
                        static_cast<Activation>(act));
        for (int o = 0; o < layer.out_channels; ++o) {
            for (int c = 0; c < layer.in_channels; ++c) {
                for (int tap = 0; tap < layer.kernel; ++tap) {
                    layer.weight(o, c, tap) = r.get<double>("weights");
                }
            }
        }
        for (int o = 0; o < layer.out_channels; ++o) {
            layer.bias(o) = r.get<double>("bias");
        }
        layers.push_back(std::move(layer));
    }
    const std::uint64_t end_at = r.offset();
    r.expect_end();

    Net net;
    net.kind = static_cast<NetKind>(kind_value);
    net.global_skip = (kind_byte & 0x80) == 0;
    std::size_t i = 0;
    for (; i < n_inputs; ++i) {
        net.input_layers.push_back(layers[i]);
    }
    const std::size_t last = layers.size() - 1;
    while (i < last) {
        if (i + 1 >= last) {
            throw FormatError("incomplete residual block in layer listing", end_at);
        }
        ResidualBlock block{layers[i], layers[i + 1], std::nullopt};
        i += 2;
        if (i < last && layers[i].kernel == 1) {
            block.projection = layers[i];
            ++i;
        }
        net.blocks.push_back(std::move(block));
    }
    net.output_layer = layers[last];
    try {
        net.validate();
    } catch (const ShapeError& e) {
        throw FormatError(std::string("inconsistent layer structure: ") + e.what(), end_at);
    }
    return net;
}

void save_checkpoint(const Net& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_checkpoint(net, out);
    out.flush();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

Net load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    return read_checkpoint(in);
}

} // namespace padc::nn
