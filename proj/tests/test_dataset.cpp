#include "doctest.h"

#include "padc/dataset.hpp"
#include "padc/errors.hpp"
#include "padc/fft.hpp"
#include "padc/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

using namespace padc;
using namespace padc::dataset;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> tone(std::size_t n, double cycles, double amp, double phase = 0.3) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = amp * std::sin(2 * kPi * cycles * static_cast<double>(k) / static_cast<double>(n) + phase);
    }
    return x;
}

// Least-squares fit of a*sin + b*cos at a known frequency; returns amplitude.
double fitted_amplitude(const std::vector<double>& x, double cycles) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double ph = 2 * kPi * cycles * static_cast<double>(k) / static_cast<double>(n);
        A(k, 0) = std::sin(ph);
        A(k, 1) = std::cos(ph);
        y[k] = x[static_cast<std::size_t>(k)];
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
    return c.norm();
}

// First-zone image by repeated subtraction, independent of fmod.
double brute_alias(double f, double fs) {
    while (f >= fs) {
        f -= fs;
    }
    return f > fs / 2 ? fs - f : f;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double peak = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        peak = std::max(peak, std::abs(a[i]));
        diff = std::max(diff, std::abs(a[i] - b[i]));
    }
    return diff / peak;
}

double bin_power(const std::vector<double>& x, std::size_t k) {
    return std::norm(fft::rfft(x)[k]);
}

frontend::FrontEndConfig clean(std::size_t n_channels, double fs) {
    frontend::FrontEndConfig cfg;
    cfg.sample_rate = fs;
    cfg.n_channels = n_channels;
    cfg.mismatches.assign(n_channels, frontend::MismatchProfile{});
    return cfg;
}

} // namespace

TEST_CASE("harmonic removal leaves a pure tone alone") {
    const auto x = tone(1000, 97, 0.8);
    const auto y = harmonic_removal_reference(x, 97.0 * 10e9 / 1000, 10e9);
    CHECK(max_rel_diff(x, y) < 1e-10);
}

TEST_CASE("harmonic power folds into the fundamental") {
    const std::size_t n = 1000;
    auto x = tone(n, 37, 1.0, 0.0);
    const auto h3 = tone(n, 111, 0.1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += h3[i];
    }
    ReferenceDiagnostics d;
    const auto y = harmonic_removal_reference(x, 37.0, n, 5, &d);
    CHECK(fitted_amplitude(y, 37) == doctest::Approx(std::sqrt(1.01)).epsilon(1e-10));
    CHECK(fitted_amplitude(y, 37) == doctest::Approx(1.00499).epsilon(1e-5));
    CHECK(fitted_amplitude(y, 111) < 1e-12);
    CHECK(d.fundamental_after == doctest::Approx(d.fundamental_before + d.removed).epsilon(1e-12));
}

TEST_CASE("harmonic clusters sit at aliased positions") {
    const double fs = 20e9;
    const std::size_t n = 1000;
    ReferenceDiagnostics d;
    const auto x = tone(n, 400, 1.0);
    // The 4th harmonic of 8 GHz folds back onto 8 GHz, so only 2..3 are
    // separable here.
    CHECK(brute_alias(32e9, fs) == 8e9);
    CHECK_THROWS_AS(harmonic_removal_reference(x, 8e9, fs, 5), AmbiguityError);
    harmonic_removal_reference(x, 8e9, fs, 3, &d);
    const std::set<std::size_t> removed(d.removed_bins.begin(), d.removed_bins.end());
    CHECK(brute_alias(16e9, fs) == 4e9);
    CHECK(removed.count(200) == 1);
    for (int k = 2; k <= 3; ++k) {
        const auto bin = static_cast<std::size_t>(std::llround(brute_alias(k * 8e9, fs) / fs * n));
        if (bin != 0) {
            CHECK(removed.count(bin) == 1);
        }
    }
    CHECK(removed.count(0) == 0);
}

TEST_CASE("harmonic removal errors") {
    const std::size_t n = 1000;
    CHECK_THROWS_AS(harmonic_removal_reference(tone(n, 1, 1.0), 1.0, n), RangeError);
    CHECK_THROWS_AS(harmonic_removal_reference(tone(n, 499, 1.0), 499.0, n), RangeError);
    // 3 * 250 folds to 250.
    CHECK_THROWS_AS(harmonic_removal_reference(tone(n, 250, 1.0), 250.0, n), AmbiguityError);
    CHECK_THROWS_AS(harmonic_removal_reference(tone(32, 5, 1.0), 5.0, 32), ShapeError);
}

TEST_CASE("power conservation of both oracles") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2000;
        const double cycles = 10 + static_cast<double>(rng() % 400);
        auto x = tone(n, cycles, 1.0);
        std::normal_distribution<double> g(0.0, 0.01);
        for (double& v : x) {
            v += 0.05 * std::sin(v * 3.0) + g(rng);
        }
        for (int which = 0; which < 2; ++which) {
            ReferenceDiagnostics d;
            try {
                if (which == 0) {
                    harmonic_removal_reference(x, cycles, n, 5, &d);
                } else {
                    matching_reference(x, cycles, n, 2, &d);
                }
            } catch (const AmbiguityError&) {
                continue;
            }
            CHECK(d.fundamental_after == doctest::Approx(d.fundamental_before + d.removed).epsilon(1e-9));
        }
    }
}

TEST_CASE("matching reference") {
    const std::size_t L = 1000;
    const double fs = 20e9;
    const double f0 = 137.0 * fs / (2 * L);
    const auto spec = frontend::WaveformSpec::sine(f0, 0.3, 0.1);
    auto cfg = clean(2, fs);
    const auto source = [&](double t) { return frontend::synth_at(spec, t); };

    SUBCASE("matched channels are untouched") {
        const auto x = frontend::sample_source(source, cfg, 2 * L).interleaved();
        CHECK(max_rel_diff(x, matching_reference(x, f0, fs, 2)) < 1e-10);
    }
    SUBCASE("gain mismatch spur at fs/2 - f0 is removed") {
        cfg.mismatches[1].gain = 0.95;
        const auto x = frontend::sample_source(source, cfg, 2 * L).interleaved();
        const std::size_t spur = std::llround((fs / 2 - f0) / fs * 2 * L);
        CHECK(bin_power(x, spur) > 1e-6 * bin_power(x, 137));
        const auto y = matching_reference(x, f0, fs, 2);
        CHECK(bin_power(y, spur) < 1e-20 * bin_power(y, 137));
        metrics::ToneOptions rect;
        rect.sinad_window = metrics::Window::Rectangular;
        CHECK(metrics::sinad(y, fs, rect) >= 80.0);
        CHECK(metrics::sinad(y, fs) >= 80.0);
    }
    SUBCASE("four channels with delays") {
        auto cfg4 = clean(4, fs);
        cfg4.mismatches[1].delay = 3e-12;
        cfg4.mismatches[2].delay = -5e-12;
        cfg4.mismatches[3].delay = 8e-12;
        const std::size_t n = 4 * L;
        const double f4 = 613.0 * fs / n;
        const auto spec4 = frontend::WaveformSpec::sine(f4, 0.3);
        const auto x = frontend::sample_source([&](double t) { return frontend::synth_at(spec4, t); }, cfg4, n)
                           .interleaved();
        const auto y = matching_reference(x, f4, fs, 4);
        // Scan every bin: only the fundamental cluster may carry power.
        const auto bins = fft::rfft(y);
        const auto before = fft::rfft(x);
        const double fund = std::norm(bins[613]);
        std::size_t images_seen = 0;
        for (std::size_t m = 1; m < 4; ++m) {
            for (double f : {f4 + m * fs / 4, m * fs / 4 - f4}) {
                const auto k = static_cast<std::size_t>(std::llround(brute_alias(std::abs(f), fs) / fs * n));
                images_seen += std::norm(before[k]) > 1e-8 * fund;
                CHECK(std::norm(bins[k]) < 1e-20 * fund);
            }
        }
        CHECK(images_seen >= 3);
        for (std::size_t k = 1; k < bins.size(); ++k) {
            if (k < 611 || k > 615) {
                CHECK(std::norm(bins[k]) < 1e-20 * fund);
            }
        }
    }
    SUBCASE("spur on the fundamental is ambiguous") {
        const double quarter = 500.0 * fs / (2 * L);
        const auto x = tone(2 * L, 500, 1.0);
        CHECK_THROWS_AS(matching_reference(x, quarter, fs, 2), AmbiguityError);
    }
}

TEST_CASE("analytic reference agrees with the harmonic-removal oracle") {
    auto cfg = clean(1, 20e9);
    cfg.mzm.bias_error = 0.1;
    std::mt19937_64 rng(99);
    const std::size_t n = 1000;
    int checked = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const double cycles = 5 + static_cast<double>(rng() % 480);
        const double dbm = -2.0 + 17.0 * std::generate_canonical<double, 64>(rng);
        auto spec = frontend::WaveformSpec::sine(cycles * cfg.sample_rate / n, 0.0, 1.0);
        spec.power_dbm = dbm;
        const auto x = frontend::sample_frontend(spec, cfg, n).channels[0];
        std::vector<double> h;
        try {
            h = harmonic_removal_reference(x, spec.f0, cfg.sample_rate);
        } catch (const AmbiguityError&) {
            continue;
        }
        auto a = analytic_reference(spec, cfg, n);
        // Compare AC parts only.
        double mean = 0.0;
        for (double v : h) {
            mean += v;
        }
        mean /= static_cast<double>(n);
        double sig = 0.0, diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sig += a[i] * a[i];
            diff += (h[i] - mean - a[i]) * (h[i] - mean - a[i]);
        }
        CHECK(diff <= 1e-6 * sig);
        ++checked;
    }
    CHECK(checked >= 20);

    const auto lfm = frontend::WaveformSpec::lfm(1.6e9, 2.2e9, 0.5, 50e-9);
    const auto r = analytic_reference(lfm, cfg, 1000);
    const double g = power_equivalent_gain(lfm, cfg.mzm, cfg.sample_rate, 1000);
    for (std::size_t k = 0; k < r.size(); ++k) {
        CHECK(r[k] == g * frontend::synth_at(lfm, static_cast<double>(k) / cfg.sample_rate));
    }
    // Small drive: the gain tends to the modulator slope at quadrature.
    const auto tiny = frontend::WaveformSpec::sine(1e9, 1e-6);
    CHECK(power_equivalent_gain(tiny, frontend::MzmConfig{}) == doctest::Approx(kPi / 7.0).epsilon(1e-9));
}

TEST_CASE("linearization corpus defaults") {
    const auto fe = frontend::preset("default-20gs");
    auto cc = default_corpus_config("default-20gs");
    cc.rng_seed = 3;
    const auto c = gen_linearization_corpus(fe, cc);
    CHECK(c.pairs.size() == 417);
    CHECK(c.train.size() == 367);
    CHECK(c.valid.size() == 50);
    CHECK_NOTHROW(c.validate());
    for (const auto& p : c.pairs) {
        CHECK_FALSE((p.spec.f0 >= 4e9 && p.spec.f0 <= 6e9));
        CHECK(p.spec.f0 > 0.0);
        CHECK(p.spec.f0 <= 10e9);
        REQUIRE(p.spec.power_dbm.has_value());
        CHECK(*p.spec.power_dbm >= -2.0);
        CHECK(*p.spec.power_dbm <= 15.0);
        CHECK(p.original.size() == 1);
        CHECK(p.original[0].size() == 1000);
        CHECK(p.reference.size() == 1000);
    }
}

TEST_CASE("linearization references are clean") {
    auto fe = frontend::preset("default-20gs");
    fe.noise_sigma = 0.0;
    fe.jitter_sigma = 0.0;
    fe.quant_bits.reset();
    CorpusConfig cc = default_corpus_config("default-20gs");
    cc.n_pairs = 20;
    cc.n_valid = 4;
    const auto c = gen_linearization_corpus(fe, cc);
    for (const auto& p : c.pairs) {
        CHECK(metrics::sinad(p.reference, c.sample_rate) >= 80.0);
    }
}

TEST_CASE("corpus generation is deterministic and rejects empty bands") {
    const auto fe = frontend::preset("default-20gs");
    CorpusConfig cc = default_corpus_config("default-20gs");
    cc.n_pairs = 6;
    cc.n_valid = 2;
    cc.rng_seed = 1;
    const auto a = gen_linearization_corpus(fe, cc);
    const auto b = gen_linearization_corpus(fe, cc);
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].original == b.pairs[i].original);
        CHECK(a.pairs[i].reference == b.pairs[i].reference);
    }
    CHECK(a.train == b.train);

    cc.stop_band = std::make_pair(0.0, 20e9);
    CHECK_THROWS_AS(gen_linearization_corpus(fe, cc), ConfigError);
    cc.stop_band.reset();
    cc.n_pairs = 0;
    CHECK_THROWS_AS(gen_linearization_corpus(fe, cc), ConfigError);
}

TEST_CASE("matching corpus") {
    auto fe = clean(2, 20e9);
    CorpusConfig cc = default_corpus_config("default-20gs");
    cc.n_pairs = 8;
    cc.n_valid = 2;

    SUBCASE("lengths") {
        const auto c = gen_matching_corpus(fe, cc);
        CHECK(c.pairs[0].original.size() == 2);
        CHECK(c.pairs[0].original[0].size() == 1000);
        CHECK(c.pairs[0].reference.size() == 2000);
        CHECK(c.original_rate() == 10e9);
    }
    SUBCASE("matched channels interleave to the reference") {
        const auto c = gen_matching_corpus(fe, cc);
        for (const auto& p : c.pairs) {
            CHECK(nn::interleave_sequences(p.original) == p.reference);
        }
    }
    SUBCASE("a 7 ps skew leaves a spur at fs/2 - f0") {
        fe.mismatches[1].delay = 7e-12;
        const auto c = gen_matching_corpus(fe, cc);
        for (const auto& p : c.pairs) {
            const auto x = nn::interleave_sequences(p.original);
            const std::size_t fund = std::llround(p.spec.f0 / 20e9 * 2000);
            const std::size_t spur = 1000 - fund;
            CHECK(bin_power(x, spur) > 1e-6 * bin_power(x, fund));
            CHECK(bin_power(p.reference, spur) < 1e-20 * bin_power(p.reference, fund));
        }
    }
    SUBCASE("cascade mode") {
        auto fe2 = frontend::preset("default-20gs");
        fe2.noise_sigma = 0.0;
        fe2.jitter_sigma = 0.0;
        fe2.quant_bits.reset();
        cc.matching_mode = MatchingMode::Cascade;
        const auto c = gen_matching_corpus(fe2, cc);
        CHECK(c.pairs.size() == 8);
        for (const auto& p : c.pairs) {
            CHECK(metrics::sinad(p.reference, 20e9) >= 80.0);
        }
    }
    SUBCASE("single channel is rejected") {
        CHECK_THROWS_AS(gen_matching_corpus(clean(1, 20e9), cc), ConfigError);
    }
}

TEST_CASE("split_dataset") {
    Corpus c;
    c.pairs.resize(417, DataPair{{{0.0}}, {0.0}, {}, 0, 0});
    const auto s = split_dataset(c, 367, 50, 9);
    CHECK(s.train.size() == 367);
    CHECK(s.valid.size() == 50);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (std::size_t i : s.valid) {
        CHECK(all.insert(i).second);
    }
    CHECK(all.size() == 417);
    const auto again = split_dataset(c, 367, 50, 9);
    CHECK(again.train == s.train);
    CHECK(again.valid == s.valid);

    Corpus ten;
    ten.pairs.resize(10, DataPair{{{0.0}}, {0.0}, {}, 0, 0});
    const auto t = split_dataset(ten, 10, 0, 1);
    CHECK(t.train.size() == 10);
    CHECK(t.valid.empty());
    CHECK_THROWS_AS(split_dataset(ten, 8, 3, 1), ConfigError);
}

TEST_CASE("corpus directory round trip") {
    auto fe = frontend::preset("default-20gs");
    CorpusConfig cc = default_corpus_config("default-20gs");
    cc.n_pairs = 5;
    cc.n_valid = 1;
    cc.length = 128;
    const auto c = gen_matching_corpus(fe, cc);
    const auto dir = std::filesystem::temp_directory_path() / "padc_corpus_roundtrip";
    std::filesystem::remove_all(dir);
    save_corpus(c, dir, true);
    const auto back = load_corpus(dir);
    CHECK(back.kind == c.kind);
    CHECK(back.train == c.train);
    CHECK(back.valid == c.valid);
    CHECK(back.sample_rate == c.sample_rate);
    CHECK(back.frontend.hash() == c.frontend.hash());
    REQUIRE(back.pairs.size() == c.pairs.size());
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
        CHECK(back.pairs[i].original == c.pairs[i].original);
        CHECK(back.pairs[i].reference == c.pairs[i].reference);
        CHECK(back.pairs[i].spec.f0 == c.pairs[i].spec.f0);
        CHECK(back.pairs[i].spec.power_dbm == c.pairs[i].spec.power_dbm);
    }
    CHECK(std::filesystem::exists(dir / "pair_00000.csv"));
    std::filesystem::remove(dir / "pair_00002.ref.padc");
    CHECK_THROWS_AS(load_corpus(dir), IoError);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_corpus(dir), IoError);
}
