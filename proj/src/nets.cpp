#include "padc/nets.hpp"

#include "padc/errors.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace padc::nets {

namespace {

using nn::Activation;
using nn::ConvLayer;

ConvLayer he_uniform(int in, int out, int kernel, Activation act, std::mt19937_64& rng) {
    ConvLayer layer(in, out, kernel, act);
    const double limit = std::sqrt(6.0 / static_cast<double>(in * kernel));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
        layer.weights.data()[i] = dist(rng);
    }
    return layer;
}

void add_trunk(nn::Net& net, const NetSpec& spec, std::mt19937_64& rng) {
    int width = spec.base_channels;
    for (int j : spec.pyramid) {
        nn::ResidualBlock block{he_uniform(width, j, spec.kernel_width, Activation::Relu, rng),
                                he_uniform(j, j, spec.kernel_width, Activation::Relu, rng), std::nullopt};
        if (j != width) {
            block.projection = he_uniform(width, j, 1, Activation::None, rng);
        }
        net.blocks.push_back(std::move(block));
        width = j;
    }
    net.output_layer = ConvLayer(width, 1, spec.kernel_width, Activation::None);
}

const char* activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "none";
}

std::string layer_line(const std::string& role, const ConvLayer& l) {
    std::ostringstream os;
    os << role << ' ' << l.in_channels << "->" << l.out_channels << " k" << l.kernel << ' '
       << activation_name(l.activation);
    return os.str();
}

} // namespace

void NetSpec::validate() const {
    if (kind == nn::NetKind::Linearization && n_inputs != 1) {
        throw ConfigError("linearization nets take exactly one input");
    }
    if (kind == nn::NetKind::Matching && (n_inputs < 2 || n_inputs > 255)) {
        throw ConfigError("matching nets need 2..255 inputs");
    }
    if (base_channels < 1) {
        throw ConfigError("base_channels must be positive");
    }
    if (kernel_width < 1 || kernel_width % 2 == 0) {
        throw ConfigError("kernel_width must be odd");
    }
    if (pyramid.empty()) {
        throw ConfigError("pyramid needs at least one residual block");
    }
    int previous = 0;
    for (int j : pyramid) {
        if (j < 1 || j < previous) {
            throw ConfigError("pyramid widths must be positive and nondecreasing");
        }
        previous = j;
    }
}

NetSpec default_linearization_spec(std::uint64_t seed) {
    NetSpec spec;
    spec.rng_seed = seed;
    return spec;
}

NetSpec default_matching_spec(std::size_t n_channels, std::uint64_t seed) {
    NetSpec spec;
    spec.kind = nn::NetKind::Matching;
    spec.n_inputs = n_channels;
    spec.rng_seed = seed;
    return spec;
}

nn::Net build_linearization_net(const NetSpec& spec) {
    if (spec.kind != nn::NetKind::Linearization) {
        throw ConfigError("build_linearization_net needs a linearization spec");
    }
    spec.validate();
    std::mt19937_64 rng(spec.rng_seed);
    nn::Net net;
    net.kind = nn::NetKind::Linearization;
    net.global_skip = spec.global_skip;
    net.input_layers.push_back(he_uniform(1, spec.base_channels, spec.kernel_width, Activation::None, rng));
    add_trunk(net, spec, rng);
    net.validate();
    return net;
}

nn::Net build_matching_net(const NetSpec& spec) {
    if (spec.kind != nn::NetKind::Matching) {
        throw ConfigError("build_matching_net needs a matching spec");
    }
    spec.validate();
    std::mt19937_64 rng(spec.rng_seed);
    nn::Net net;
    net.kind = nn::NetKind::Matching;
    net.global_skip = spec.global_skip;
    for (std::size_t m = 0; m < spec.n_inputs; ++m) {
        net.input_layers.push_back(he_uniform(1, spec.base_channels, spec.kernel_width, Activation::None, rng));
    }
    add_trunk(net, spec, rng);
    net.validate();
    return net;
}

nn::Net build_net(const NetSpec& spec) {
    return spec.kind == nn::NetKind::Linearization ? build_linearization_net(spec) : build_matching_net(spec);
}

std::vector<std::string> describe_architecture(const nn::Net& net) {
    std::vector<std::string> lines;
    for (std::size_t m = 0; m < net.input_layers.size(); ++m) {
        std::string role = net.n_inputs() == 1 ? "input" : "input[" + std::to_string(m) + "]";
        lines.push_back(layer_line(role, net.input_layers[m]));
    }
    if (net.n_inputs() > 1) {
        lines.push_back("itl x" + std::to_string(net.n_inputs()) + " " +
                        std::to_string(net.input_layers.front().out_channels) + " channels");
    }
    for (std::size_t b = 0; b < net.blocks.size(); ++b) {
        const auto& block = net.blocks[b];
        const std::string prefix = "block" + std::to_string(b + 1);
        lines.push_back(layer_line(prefix + ".conv1", block.first));
        lines.push_back(layer_line(prefix + ".conv2", block.second));
        if (block.projection) {
            lines.push_back(layer_line(prefix + ".shortcut", *block.projection));
        } else {
            lines.push_back(prefix + ".shortcut identity");
        }
    }
    lines.push_back(layer_line("output", net.output_layer));
    lines.push_back(net.global_skip ? "skip add-input" : "skip none");
    return lines;
}

} // namespace padc::nets
