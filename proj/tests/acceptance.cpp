// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Criteria can be picked on the command line (e.g. `acceptance 1
// 7`); by default all nine run, the long training runs included.

#include "padc/dataset.hpp"
#include "padc/errors.hpp"
#include "padc/experiments.hpp"
#include "padc/frontend.hpp"
#include "padc/metrics.hpp"
#include "padc/nets.hpp"
#include "padc/nn.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace padc;
namespace fs = std::filesystem;
namespace ex = padc::experiments;

namespace {

// Tolerances, pinned.
constexpr double kGradRelTol = 1e-4;
constexpr double kOracleMinSinadDb = 60.0;
constexpr double kPowerRelTol = 1e-9;
constexpr double kLinMinGainDb = 10.0;
constexpr double kLinMinSinadDb = 40.0;
constexpr double kMatchMinSuppressionDb = 15.0;
constexpr double kSweepMaxSpreadDb = 6.0;
constexpr double kSweepMinGainDb = 8.0;
constexpr double kQuantTolDb = 0.5;
constexpr double kLengthTolDb = 2.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

frontend::FrontEndConfig noise_free(frontend::FrontEndConfig fe) {
    fe.noise_sigma = 0.0;
    fe.jitter_sigma = 0.0;
    fe.quant_bits.reset();
    return fe;
}

// 1. Reverse-mode gradients against central differences.
double worst_gradient_error(nn::Net net, const std::vector<nn::Sequence>& in, const std::vector<double>& c) {
    const auto objective = [&](const nn::Net& n) {
        const auto y = nn::forward(n, in);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            s += c[i] * y[i];
        }
        return s;
    };
    nn::ForwardCache cache;
    nn::forward(net, in, &cache);
    const Eigen::VectorXd g = nn::backward(net, cache, c);
    Eigen::VectorXd p = nn::get_parameters(net);
    const double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + h;
        nn::set_parameters(net, p);
        const double up = objective(net);
        p[i] = saved - h;
        nn::set_parameters(net, p);
        const double down = objective(net);
        p[i] = saved;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
    }
    return worst;
}

Outcome gradient_check() {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto random_seq = [&](std::size_t n) {
        std::vector<double> x(n);
        for (double& v : x) {
            v = u(rng);
        }
        return x;
    };
    const auto randomize = [&](nn::Net& net) {
        Eigen::VectorXd p = nn::get_parameters(net);
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            p[i] = 0.5 * u(rng);
        }
        nn::set_parameters(net, p);
    };
    const std::size_t L = 16;

    auto lin_spec = nets::default_linearization_spec(1);
    lin_spec.base_channels = 4;
    lin_spec.pyramid = {6, 8};
    auto lin = nets::build_net(lin_spec);
    randomize(lin);
    const double e_lin = worst_gradient_error(lin, {random_seq(L)}, random_seq(L));

    auto match_spec = nets::default_matching_spec(2, 1);
    match_spec.base_channels = 4;
    match_spec.pyramid = {6, 8};
    auto match = nets::build_net(match_spec);
    randomize(match);
    const double e_match = worst_gradient_error(match, {random_seq(L), random_seq(L)}, random_seq(2 * L));

    const double worst = std::max(e_lin, e_match);
    return {worst < kGradRelTol,
            fmt("max relative error %.2e over %zu + %zu parameters (limit %.0e)", worst, lin.parameter_count(),
                match.parameter_count(), kGradRelTol)};
}

// 2. Golden layer listings.
Outcome architecture() {
    const std::vector<std::string> lin_golden{
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
    const auto lin = nets::describe_architecture(nets::build_net(nets::default_linearization_spec()));
    const auto match = nets::describe_architecture(nets::build_net(nets::default_matching_spec(2)));
    std::vector<std::string> match_golden{"input[0] 1->32 k3 none", "input[1] 1->32 k3 none", "itl x2 32 channels"};
    match_golden.insert(match_golden.end(), lin_golden.begin() + 1, lin_golden.end());
    const bool lin_ok = lin == lin_golden;
    const bool match_ok = match == match_golden;
    std::string detail = fmt("linearization listing %s, matching listing %s", lin_ok ? "matches" : "differs",
                             match_ok ? "matches" : "differs");
    if (!match_ok) {
        for (const auto& line : match) {
            detail += "\n      got: " + line;
        }
    }
    return {lin_ok && match_ok, detail};
}

// 3. Harmonic-removal oracle against the analytic reference.
Outcome oracle_equivalence() {
    auto fe = noise_free(frontend::preset("default-20gs"));
    fe.n_channels = 1;
    fe.mismatches.assign(1, frontend::MismatchProfile{});
    const std::size_t n = 1000;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> bin(3, static_cast<int>(n / 2) - 3);
    std::uniform_real_distribution<double> dbm(-2.0, 15.0);
    std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
    double worst_sinad = INFINITY, worst_power = 0.0;
    int accepted = 0, ambiguous = 0;
    while (accepted < 50) {
        auto spec = frontend::WaveformSpec::sine(bin(rng) * fe.sample_rate / static_cast<double>(n), 0.0, phase(rng));
        spec.power_dbm = dbm(rng);
        const auto x = frontend::sample_frontend(spec, fe, n).channels[0];
        dataset::ReferenceDiagnostics d;
        std::vector<double> h;
        try {
            h = dataset::harmonic_removal_reference(x, spec.f0, fe.sample_rate, 5, &d);
        } catch (const AmbiguityError&) {
            ++ambiguous;
            continue;
        }
        const auto a = dataset::analytic_reference(spec, fe, n);
        double mean = 0.0;
        for (double v : h) {
            mean += v;
        }
        mean /= static_cast<double>(n);
        double sig = 0.0, diff = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            sig += a[k] * a[k];
            diff += (h[k] - mean - a[k]) * (h[k] - mean - a[k]);
        }
        worst_sinad = std::min(worst_sinad, 10 * std::log10(sig / diff));
        const double expect = d.fundamental_before + d.removed;
        worst_power = std::max(worst_power, std::abs(d.fundamental_after - expect) / expect);
        ++accepted;
    }
    return {worst_sinad >= kOracleMinSinadDb && worst_power <= kPowerRelTol,
            fmt("worst SINAD of difference %.1f dB (min %.0f), worst power error %.1e (max %.0e), %d tones, %d "
                "ambiguous skipped",
                worst_sinad, kOracleMinSinadDb, worst_power, kPowerRelTol, accepted, ambiguous)};
}

// 4. Linearization recovery on held-out tones.
std::optional<ex::LinearizationStudy> g_lin;

const ex::LinearizationStudy& linearization_run() {
    if (!g_lin) {
        auto cfg = ex::default_linearization_study("default-20gs");
        cfg.frontend = noise_free(cfg.frontend);
        g_lin = ex::run_linearization_study(cfg);
    }
    return *g_lin;
}

Outcome linearization() {
    const auto& s = linearization_run();
    const double gain = s.mean_test_sinad_after_db - s.mean_test_sinad_before_db;
    return {gain >= kLinMinGainDb && s.mean_test_sinad_after_db >= kLinMinSinadDb,
            fmt("held-out SINAD %.2f -> %.2f dB, gain %.2f dB (need >= %.0f dB gain and >= %.0f dB)",
                s.mean_test_sinad_before_db, s.mean_test_sinad_after_db, gain, kLinMinGainDb, kLinMinSinadDb)};
}

// 5. Matching: image spur at fs/2 - f0 on held-out tones.
Outcome matching() {
    const auto cfg = ex::default_matching_study("default-20gs");
    const auto s = ex::run_matching_study(cfg);
    return {s.mean_spur_suppression_db >= kMatchMinSuppressionDb,
            fmt("mean fs/2-f0 spur suppression %.2f dB (min %.0f); held-out SINAD %.2f -> %.2f dB",
                s.mean_spur_suppression_db, kMatchMinSuppressionDb, s.mean_test_sinad_before_db,
                s.mean_test_sinad_after_db)};
}

// 6. Channel-count sweep, 3 draws at 10k steps.
Outcome expandability() {
    auto cfg = ex::default_sweep("default-20gs");
    cfg.draws = 3;
    cfg.train.total_steps = 10000;
    cfg.parallel = 4;
    const auto r = ex::run_multichannel_sweep(cfg);
    std::map<std::size_t, std::pair<double, double>> sums;  // N -> (input, final)
    std::map<std::size_t, int> counts;
    bool all_ok = true;
    for (const auto& row : r.rows) {
        all_ok = all_ok && row.ok;
        sums[row.n_channels].first += row.input_mean_valid_sinad_db;
        sums[row.n_channels].second += row.final_mean_valid_sinad_db;
        ++counts[row.n_channels];
    }
    double lo = INFINITY, hi = -INFINITY, worst_gain = INFINITY;
    std::string per_n;
    for (const auto& [n, s] : sums) {
        const double in = s.first / counts[n], out = s.second / counts[n];
        lo = std::min(lo, out);
        hi = std::max(hi, out);
        worst_gain = std::min(worst_gain, out - in);
        per_n += fmt("\n      N=%zu: %.2f -> %.2f dB", n, in, out);
    }
    const bool pass = all_ok && counts.size() == 7 && hi - lo <= kSweepMaxSpreadDb && worst_gain >= kSweepMinGainDb;
    return {pass, fmt("recovered SINAD spread %.2f dB (max %.0f), smallest gain %.2f dB (min %.0f), rows ok: %s",
                      hi - lo, kSweepMaxSpreadDb, worst_gain, kSweepMinGainDb, all_ok ? "yes" : "no") +
                      per_n};
}

// 7. Metric formulas.
Outcome metric_formulas() {
    bool ok = metrics::enob(1.76) == 0.0;
    std::string detail = fmt("enob(1.76)=%g", metrics::enob(1.76));

    const std::size_t n = 4096;
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / n;
        x[k] = 0.4 * std::sin(2 * std::numbers::pi * 211 * t) + 0.003 * std::sin(2 * std::numbers::pi * 633 * t);
    }
    const auto rep = metrics::analyze(x, 1.0);
    const bool consistent = rep.enob_bits == metrics::enob(rep.sinad_db) &&
                            rep.sinad_db == metrics::sinad(x, 1.0) &&
                            rep.enob_bits == (rep.sinad_db - 1.76) / 6.02;
    ok = ok && consistent;
    detail += consistent ? "; report fields consistent" : "; report fields INCONSISTENT";

    // Monte Carlo over random phases and coprime tone bins.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
    std::uniform_int_distribution<int> bin(500, 7000);
    const std::size_t m = 1 << 14;
    for (int bits : {6, 8, 10}) {
        const double step = 1.0 / std::ldexp(1.0, bits - 1);
        const double amp = 1.0 - step / 2;
        double mean = 0.0;
        const int trials = 20;
        for (int t = 0; t < trials; ++t) {
            int c = bin(rng) | 1;
            const double ph = phase(rng);
            std::vector<double> y(m);
            for (std::size_t k = 0; k < m; ++k) {
                y[k] = amp * std::sin(2 * std::numbers::pi * c * static_cast<double>(k) / m + ph);
            }
            mean += metrics::sinad(frontend::quantize(y, bits, 1.0), 1.0) / trials;
        }
        const double ideal = 6.02 * bits + 1.76;
        ok = ok && std::abs(mean - ideal) <= kQuantTolDb;
        detail += fmt("; b=%d %.2f dB vs %.2f", bits, mean, ideal);
    }
    const double alias = frontend::alias_frequency(21.13e9, 20e9);
    ok = ok && std::abs(alias - 1.13e9) <= 1e-6;
    detail += fmt("; alias(21.13 GHz, 20 GS/s)=%.6g Hz", alias);
    return {ok, detail};
}

// 8. Re-running CLI commands gives byte-identical artifacts.
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const fs::path& work, const std::string& args) {
    const std::string cmd = "cd '" + work.string() + "' && '" PADC_CLI_PATH "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    const fs::path work = fs::path(PADC_ACCEPTANCE_WORKDIR) / "determinism";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::vector<std::string> commands{
        "generate --pairs 8 --valid 2 --length 128 --seed 11 --out {}/lin_corpus",
        "generate --kind matching --pairs 6 --valid 2 --length 128 --seed 11 --out {}/match_corpus",
        "train-linearize --corpus {}/lin_corpus --steps 300 --validation-every 100 --seed 11 --out {}/lin",
        "train-match --corpus {}/match_corpus --steps 200 --validation-every 100 --seed 11 --out {}/match",
        "sweep --channels 2..3 --draws 1 --pairs 4 --steps 50 --validation-every 25 --parallel 2 --out {}/sweep",
    };
    for (const char* tag : {"a", "b"}) {
        for (std::string c : commands) {
            for (auto pos = c.find("{}"); pos != std::string::npos; pos = c.find("{}")) {
                c.replace(pos, 2, tag);
            }
            if (const int rc = run_cli(work, c); rc != 0) {
                return {false, fmt("command failed with exit %d: %s", rc, c.c_str())};
            }
        }
    }
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(work / "a")) {
        if (!e.is_regular_file()) {
            continue;
        }
        const auto rel = fs::relative(e.path(), work / "a");
        if (slurp(e.path()) != slurp(work / "b" / rel)) {
            return {false, "differs: " + rel.string()};
        }
        ++compared;
    }
    const bool has_artifacts = fs::exists(work / "a/lin/history.csv") && fs::exists(work / "a/lin/final.padn") &&
                               fs::exists(work / "a/match/best.padn") && fs::exists(work / "a/sweep/sweep.csv");
    return {has_artifacts && compared > 0,
            fmt("%zu files byte-identical across two runs (corpora, histories, checkpoints, states, sweep)",
                compared)};
}

// 9. The linearization net from criterion 4 (trained at L=1000) on a held-out
// tone at other lengths.
Outcome length_agnostic() {
    const auto& s = linearization_run();
    const auto test = ex::test_corpus(s.config);
    const auto& pair = test.pairs.at(test.valid.at(0));
    const double rate = test.original_rate();
    auto fe = s.config.frontend;
    fe.n_channels = 1;
    fe.sample_rate = rate;
    fe.mismatches.assign(1, frontend::MismatchProfile{});

    auto spec = pair.spec;
    spec.f0 = dataset::snap_to_bin(spec.f0, rate, 1000);
    std::map<std::size_t, double> sinad;
    for (std::size_t L : {500, 1000, 4000}) {
        const auto x = frontend::sample_frontend(spec, fe, L).channels[0];
        const auto y = nn::forward(s.training.best_net, std::vector<nn::Sequence>{x});
        if (y.size() != L) {
            return {false, fmt("output length %zu for input length %zu", y.size(), L)};
        }
        sinad[L] = metrics::sinad(y, rate);
    }
    const double delta = std::abs(sinad[4000] - sinad[1000]);
    return {delta <= kLengthTolDb && std::isfinite(sinad[500]),
            fmt("SINAD at L=500/1000/4000: %.2f / %.2f / %.2f dB, |L4000 - L1000| = %.2f dB (max %.0f)", sinad[500],
                sinad[1000], sinad[4000], delta, kLengthTolDb)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient check", gradient_check},
        {"architecture listing", architecture},
        {"reference oracle equivalence", oracle_equivalence},
        {"linearization recovery", linearization},
        {"matching recovery", matching},
        {"multichannel expandability", expandability},
        {"metric formulas", metric_formulas},
        {"determinism", determinism},
        {"length agnosticism", length_agnostic},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        wanted.insert(std::atoi(argv[i]));
    }
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted.empty() && !wanted.count(id)) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %d %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
