#pragma once

// Builders for the two residual architectures: linearization nets (one input
// sequence) and matching nets (N channel sequences interleaved after
// per-channel input convolutions).

#include "padc/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace padc::nets {

struct NetSpec {
    nn::NetKind kind = nn::NetKind::Linearization;
    std::size_t n_inputs = 1;
    int base_channels = 32;
    std::vector<int> pyramid{34, 38, 44, 52};
    int kernel_width = 3;
    bool global_skip = true;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

NetSpec default_linearization_spec(std::uint64_t seed = 0);
NetSpec default_matching_spec(std::size_t n_channels, std::uint64_t seed = 0);

// He-uniform initialization for every layer except the output layer, which
// starts at zero so a fresh net is the identity map on its skip input.
nn::Net build_linearization_net(const NetSpec& spec);
nn::Net build_matching_net(const NetSpec& spec);
nn::Net build_net(const NetSpec& spec);

// One line per layer: "<role> <in>-><out> k<kernel> <act>", plus an "itl"
// line where the matching net interleaves and a "skip" line for the global
// skip.
std::vector<std::string> describe_architecture(const nn::Net& net);

} // namespace padc::nets
