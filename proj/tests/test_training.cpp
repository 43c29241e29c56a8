#include "doctest.h"

#include "padc/errors.hpp"
#include "padc/nets.hpp"
#include "padc/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace padc;
using namespace padc::training;

namespace {

// Pairs of one tone each; the target is a fixed gain of the input
// so a small net can learn it exactly.
dataset::Corpus gain_corpus(std::size_t n_pairs, std::size_t n_valid, std::size_t length, double gain) {
    dataset::Corpus c;
    c.kind = nn::NetKind::Linearization;
    c.sample_rate = 1.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const double cycles = 5.0 + 3.0 * static_cast<double>(i);
        const double amp = 0.1 + 0.02 * static_cast<double>(i % 7);
        dataset::DataPair p;
        p.spec = frontend::WaveformSpec::sine(cycles / static_cast<double>(length), amp);
        std::vector<double> x(length), y(length);
        for (std::size_t k = 0; k < length; ++k) {
            x[k] = amp * std::sin(2 * std::numbers::pi * cycles * static_cast<double>(k) / static_cast<double>(length));
            y[k] = gain * x[k];
        }
        p.original = {x};
        p.reference = y;
        c.pairs.push_back(std::move(p));
        (i < n_pairs - n_valid ? c.train : c.valid).push_back(i);
    }
    return c;
}

nn::Net small_net(std::uint64_t seed = 1) {
    auto spec = nets::default_linearization_spec(seed);
    spec.base_channels = 4;
    spec.pyramid = {4};
    return nets::build_net(spec);
}

TrainConfig small_config(std::size_t steps, std::size_t every) {
    TrainConfig cfg;
    cfg.total_steps = steps;
    cfg.validation_every = every;
    cfg.rng_seed = 7;
    return cfg;
}

} // namespace

TEST_CASE("l1 loss") {
    CHECK(l1_loss(std::vector<double>{1, 2}, std::vector<double>{2, 4}) == 1.5);
    CHECK(l1_loss(std::vector<double>{-1, 1, 0}, std::vector<double>{-1, 1, 0}) == 0.0);
    CHECK_THROWS_AS(l1_loss(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
    CHECK_THROWS_AS(l1_loss(std::vector<double>{}, std::vector<double>{}), ShapeError);
}

TEST_CASE("training learns a gain map") {
    const auto corpus = gain_corpus(12, 3, 64, 0.8);
    const auto result = train(small_net(), corpus, small_config(3000, 500));
    REQUIRE(result.history.records.size() == 6);
    const double initial = evaluate_split(small_net(), corpus, corpus.valid).valid_loss;
    CHECK(initial > 0.01);
    CHECK(result.history.records.back().valid_loss < 0.1 * initial);
    const auto best = std::min_element(result.history.records.begin(), result.history.records.end(),
                                       [](const auto& a, const auto& b) { return a.valid_loss < b.valid_loss; });
    CHECK(evaluate_split(result.best_net, corpus, corpus.valid).valid_loss == doctest::Approx(best->valid_loss));
}

TEST_CASE("validation cadence over a full-length run") {
    const auto corpus = gain_corpus(6, 2, 64, 1.0);
    std::size_t calls = 0;
    const auto result = train(small_net(), corpus, small_config(50000, 1000), [&](const TrainRecord&) { ++calls; });
    CHECK(result.history.records.size() == 50);
    CHECK(calls == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(result.history.records[i].step == 1000 * (i + 1));
    }
}

TEST_CASE("training is deterministic and resumes exactly") {
    const auto corpus = gain_corpus(10, 2, 64, 0.7);
    const auto full = train(small_net(), corpus, small_config(2000, 250));
    const auto again = train(small_net(), corpus, small_config(2000, 250));
    CHECK(nn::get_parameters(full.net) == nn::get_parameters(again.net));

    const auto half = train(small_net(), corpus, small_config(1000, 250));
    const auto path = std::filesystem::temp_directory_path() / "padc_test_state.pads";
    save_train_state(half.state, path);
    const TrainState loaded = load_train_state(path);
    std::filesystem::remove(path);
    const auto rest = resume(small_net(), loaded, corpus, small_config(2000, 250));

    REQUIRE(rest.history.records.size() == full.history.records.size());
    for (std::size_t i = 0; i < full.history.records.size(); ++i) {
        const auto& a = full.history.records[i];
        const auto& b = rest.history.records[i];
        CHECK(a.step == b.step);
        CHECK(a.train_loss == b.train_loss);
        CHECK(a.valid_loss == b.valid_loss);
        CHECK(a.mean_valid_sinad_db == b.mean_valid_sinad_db);
    }
    CHECK(nn::get_parameters(rest.net) == nn::get_parameters(full.net));
    CHECK(nn::get_parameters(rest.best_net) == nn::get_parameters(full.best_net));

    std::ostringstream csv;
    write_history_csv(full.history, csv);
    CHECK(csv.str().rfind("step,train_loss,valid_loss,mean_valid_sinad_db\n250,", 0) == 0);
}

TEST_CASE("divergence is reported with the history so far") {
    const auto corpus = gain_corpus(6, 2, 64, 0.5);
    auto cfg = small_config(2000, 1);
    cfg.learning_rate = 1e300;
    try {
        train(small_net(), corpus, cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.history().records.size() < 2000);
    }
}

TEST_CASE("incompatible setups are rejected") {
    const auto corpus = gain_corpus(6, 2, 64, 1.0);
    auto cfg = small_config(10, 5);
    cfg.sequence_length = 128;
    CHECK_THROWS_AS(train(small_net(), corpus, cfg), ConfigError);
    CHECK_THROWS_AS(train(nets::build_net(nets::default_matching_spec(2)), corpus, small_config(10, 5)),
                    ConfigError);
    auto bad = small_config(10, 20);
    CHECK_THROWS_AS(train(small_net(), corpus, bad), ConfigError);
    auto state = train(small_net(), corpus, small_config(10, 5)).state;
    CHECK_THROWS_AS(resume(small_net(), state, corpus, small_config(5, 5)), ConfigError);
    CHECK_THROWS_AS(load_train_state("/nonexistent/state.pads"), IoError);
}

TEST_CASE("input scale is a power of two near the target rms") {
    const auto corpus = gain_corpus(6, 2, 64, 1.0);
    const double s = choose_input_scale(corpus, 0.25);
    int e = 0;
    CHECK(std::frexp(s, &e) == 0.5);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i : corpus.train) {
        for (double v : corpus.pairs[i].original[0]) {
            sum += v * v;
            ++count;
        }
    }
    const double scaled = s * std::sqrt(sum / static_cast<double>(count));
    CHECK(scaled >= 0.25 / std::sqrt(2.0));
    CHECK(scaled <= 0.25 * std::sqrt(2.0));
}
