#include "doctest.h"

#include "padc/errors.hpp"
#include "padc/nets.hpp"

#include <random>

using namespace padc;
using namespace padc::nn;

namespace {

std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) {
    return in * out * k + out;
}

} // namespace

TEST_CASE("default linearization architecture") {
    const auto net = nets::build_linearization_net(nets::default_linearization_spec());
    const std::vector<std::string> golden{
        "input 1->32 k3 none",
        "block1.conv1 32->34 k3 relu",
        "block1.conv2 34->34 k3 relu",
        "block1.shortcut 32->34 k1 none",
        "block2.conv1 34->38 k3 relu",
        "block2.conv2 38->38 k3 relu",
        "block2.shortcut 34->38 k1 none",
        "block3.conv1 38->44 k3 relu",
        "block3.conv2 44->44 k3 relu",
        "block3.shortcut 38->44 k1 none",
        "block4.conv1 44->52 k3 relu",
        "block4.conv2 52->52 k3 relu",
        "block4.shortcut 44->52 k1 none",
        "output 52->1 k3 none",
        "skip add-input",
    };
    CHECK(nets::describe_architecture(net) == golden);

    std::size_t expected = conv_params(1, 32, 3);
    std::size_t width = 32;
    for (std::size_t j : {34u, 38u, 44u, 52u}) {
        expected += conv_params(width, j, 3) + conv_params(j, j, 3) + conv_params(width, j, 1);
        width = j;
    }
    expected += conv_params(width, 1, 3);
    CHECK(expected == 47869);
    CHECK(net.parameter_count() == expected);
    CHECK(static_cast<std::size_t>(get_parameters(net).size()) == expected);
}

TEST_CASE("matching architecture") {
    const auto net = nets::build_matching_net(nets::default_matching_spec(8));
    const auto lines = nets::describe_architecture(net);
    CHECK(lines.front() == "input[0] 1->32 k3 none");
    CHECK(lines[8] == "itl x8 32 channels");
    CHECK(net.parameter_count() == 47869 + 7 * conv_params(1, 32, 3));

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Sequence> in(8, Sequence(105));
    for (auto& s : in) {
        for (double& v : s) {
            v = u(rng);
        }
    }
    CHECK(forward(net, in).size() == 840);
}

TEST_CASE("nets accept any length of three or more") {
    auto spec = nets::default_linearization_spec(2);
    spec.base_channels = 6;
    spec.pyramid = {6, 8};
    auto net = nets::build_net(spec);
    Eigen::VectorXd p = get_parameters(net);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        p[i] = u(rng);
    }
    set_parameters(net, p);
    for (std::size_t L : {3u, 4u, 17u, 1000u, 1731u}) {
        Sequence x(L);
        for (double& v : x) {
            v = u(rng);
        }
        const auto y = forward(net, std::vector<Sequence>{x});
        CHECK(y.size() == L);
        for (double v : y) {
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("construction is seeded") {
    const auto a = nets::build_net(nets::default_linearization_spec(11));
    const auto b = nets::build_net(nets::default_linearization_spec(11));
    const auto c = nets::build_net(nets::default_linearization_spec(12));
    CHECK(get_parameters(a) == get_parameters(b));
    CHECK(get_parameters(a) != get_parameters(c));
    CHECK(a.output_layer.weights.isZero(0.0));
}

TEST_CASE("spec validation") {
    auto s = nets::default_linearization_spec();
    s.n_inputs = 2;
    CHECK_THROWS_AS(nets::build_net(s), ConfigError);
    s = nets::default_linearization_spec();
    s.pyramid = {};
    CHECK_THROWS_AS(nets::build_net(s), ConfigError);
    s.pyramid = {40, 36};
    CHECK_THROWS_AS(nets::build_net(s), ConfigError);
    CHECK_THROWS_AS(nets::build_net(nets::default_matching_spec(1)), ConfigError);
    CHECK_THROWS_AS(nets::build_linearization_net(nets::default_matching_spec(2)), ConfigError);
}
