#include "padc/experiments.hpp"

#include "padc/errors.hpp"
#include "padc/seeding.hpp"
#include "padc/version.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

namespace padc::experiments {

namespace {

constexpr double kReferenceRate = 20e9;
constexpr long long kSpurHalfwidth = 3;
// Salt that separates the test-tone stream from the training corpus stream.
constexpr std::uint64_t kTestSalt = 0x74657374746f6e65ULL;
constexpr std::uint64_t kControlDraw = std::numeric_limits<std::uint64_t>::max();

double nan() {
    return std::numeric_limits<double>::quiet_NaN();
}

double db(double ratio) {
    return 10.0 * std::log10(ratio);
}

double uniform01(std::mt19937_64& rng) {
    return std::generate_canonical<double, 64>(rng);
}

std::size_t bin_of(double f, double sample_rate, std::size_t n) {
    const double folded = frontend::alias_frequency(f, sample_rate);
    return static_cast<std::size_t>(std::llround(folded * static_cast<double>(n) / sample_rate));
}

std::set<std::size_t> cluster_bins(std::size_t center, std::size_t n_bins) {
    std::set<std::size_t> bins;
    for (long long k = static_cast<long long>(center) - kSpurHalfwidth;
         k <= static_cast<long long>(center) + kSpurHalfwidth; ++k) {
        if (k >= 0 && k < static_cast<long long>(n_bins)) {
            bins.insert(static_cast<std::size_t>(k));
        }
    }
    return bins;
}

double cluster_power(const std::vector<double>& power, const std::set<std::size_t>& bins) {
    double p = 0.0;
    for (std::size_t k : bins) {
        p += power[k];
    }
    return p;
}

// Largest +-3-bin cluster outside the wanted tones and the DC bins, relative
// to the wanted power.
double strongest_spur_dbc(std::span<const double> x, double sample_rate, std::span<const double> wanted) {
    const auto s = metrics::power_spectrum(x, sample_rate, metrics::Window::Blackman);
    const std::size_t n_bins = s.power.size();
    std::set<std::size_t> excluded;
    double wanted_power = 0.0;
    for (double f : wanted) {
        const auto bins = cluster_bins(bin_of(f, sample_rate, x.size()), n_bins);
        wanted_power += cluster_power(s.power, bins);
        excluded.insert(bins.begin(), bins.end());
    }
    for (std::size_t k = 0; k <= static_cast<std::size_t>(kSpurHalfwidth) && k < n_bins; ++k) {
        excluded.insert(k);
    }
    double worst = 0.0;
    for (std::size_t c = 0; c < n_bins; ++c) {
        if (excluded.count(c)) {
            continue;
        }
        double p = 0.0;
        for (std::size_t k : cluster_bins(c, n_bins)) {
            if (!excluded.count(k)) {
                p += s.power[k];
            }
        }
        worst = std::max(worst, p);
    }
    return db(std::max(worst, wanted_power * 1e-30) / wanted_power);
}

double sdr_db(std::span<const double> y, std::span<const double> ref) {
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    const double mr = std::accumulate(ref.begin(), ref.end(), 0.0) / static_cast<double>(ref.size());
    double signal = 0.0;
    double error = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = ref[i] - mr;
        const double e = (y[i] - my) - r;
        signal += r * r;
        error += e * e;
    }
    return db(signal / std::max(error, signal * 1e-30));
}

// Tone metrics where they are defined; for signals without a dominant tone
// only the spectrum is filled and the scalar fields are NaN.
metrics::MetricsReport report_of(std::span<const double> x, double sample_rate, bool tonal,
                                 std::optional<metrics::StftRequest> stft = std::nullopt) {
    if (tonal) {
        try {
            return metrics::analyze(x, sample_rate, {}, stft);
        } catch (const AmbiguityError&) {
        }
    }
    metrics::MetricsReport r;
    const auto s = metrics::power_spectrum(x, sample_rate, metrics::Window::Hann);
    r.sinad_db = r.enob_bits = r.sfdr_db = r.fundamental_hz = nan();
    r.spectrum_frequency = s.frequency;
    for (double p : s.power) {
        r.spectrum_db.push_back(10.0 * std::log10(std::max(p, 1e-300)));
    }
    if (stft) {
        r.stft = metrics::stft(x, sample_rate, stft->window_len, stft->hop);
    }
    return r;
}

// Mean over frames of the strongest mismatch image of the instantaneous LFM
// frequency relative to the signal ridge. Frames where an image sits within
// a few bins of the signal are skipped.
double lfm_sideband_dbc(const metrics::Stft& g, const frontend::WaveformSpec& spec, double sample_rate,
                        std::size_t n_channels) {
    const std::size_t n_bins = g.frequency.size();
    const std::size_t window = 2 * (n_bins - 1);
    const auto peak = [&](const std::vector<double>& row, std::size_t center) {
        double best = -std::numeric_limits<double>::infinity();
        for (long long k = static_cast<long long>(center) - 2; k <= static_cast<long long>(center) + 2; ++k) {
            if (k >= 0 && k < static_cast<long long>(n_bins)) {
                best = std::max(best, row[static_cast<std::size_t>(k)]);
            }
        }
        return best;
    };
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < g.power_db.size(); ++f) {
        const double t = g.frame_time[f];
        const double inst = spec.f0 + (spec.f1 - spec.f0) * t / spec.chirp_duration;
        const std::size_t sig = bin_of(inst, sample_rate, window);
        double worst = -std::numeric_limits<double>::infinity();
        bool usable = sig > 4 && sig + 4 < n_bins;
        for (std::size_t k = 1; k < n_channels && usable; ++k) {
            for (double sign : {-1.0, 1.0}) {
                const double img = static_cast<double>(k) * sample_rate / static_cast<double>(n_channels) +
                                   sign * inst;
                const std::size_t b = bin_of(img, sample_rate, window);
                if (b + 8 > sig && b < sig + 8) {
                    usable = false;
                    break;
                }
                worst = std::max(worst, peak(g.power_db[f], b));
            }
        }
        if (usable) {
            sum += worst - peak(g.power_db[f], sig);
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : nan();
}

// The front-end as seen by one channel: its own rate and mismatch.
frontend::FrontEndConfig single_channel_view(const frontend::FrontEndConfig& fe, std::size_t channel) {
    frontend::FrontEndConfig one = fe;
    one.sample_rate = fe.channel_rate();
    one.n_channels = 1;
    one.mismatches = {fe.mismatches.at(channel)};
    return one;
}

void check_kind(const StudyConfig& cfg, nn::NetKind kind) {
    if (cfg.net.kind != kind) {
        throw ConfigError(kind == nn::NetKind::Linearization ? "linearization study needs a linearization net"
                                                             : "matching study needs a matching net");
    }
}

training::TrainResult train_study(const StudyConfig& cfg, const dataset::Corpus& corpus,
                                  const training::ValidationHook& hook) {
    return training::train(nets::build_net(cfg.net), corpus, cfg.train, hook);
}

SignalReport make_report(const frontend::WaveformSpec& spec, double sample_rate, nn::Sequence input,
                         nn::Sequence output, nn::Sequence reference, bool tonal,
                         std::optional<metrics::StftRequest> stft = std::nullopt) {
    SignalReport r;
    r.spec = spec;
    r.sample_rate = sample_rate;
    r.before = report_of(input, sample_rate, tonal, stft);
    r.after = report_of(output, sample_rate, tonal, stft);
    r.sdr_before_db = sdr_db(input, reference);
    r.sdr_after_db = sdr_db(output, reference);
    r.spur_before_dbc = r.spur_after_dbc = nan();
    r.sideband_before_dbc = r.sideband_after_dbc = nan();
    r.input = std::move(input);
    r.output = std::move(output);
    r.reference = std::move(reference);
    return r;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + config::format_double(v[i]);
    }
    return s;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find(',', start), text.size());
        std::string item = text.substr(start, end - start);
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        out.push_back(config::parse_double(item, key));
        start = end + 1;
    }
    return out;
}

std::size_t parse_size(const std::string& text, const std::string& key) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || text.empty() || text[0] == '-') {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + text + "'");
    }
    return static_cast<std::size_t>(v);
}

template <typename Apply>
void for_each_key(const config::Tree& section, const std::string& name, const std::set<std::string>& known,
                  Apply apply) {
    for (const auto& [key, child] : section) {
        if (!known.count(key)) {
            throw ConfigError("unknown key '" + key + "' in [" + name + "]");
        }
        apply(key, child.template get_value<std::string>());
    }
}

} // namespace

StudyConfig default_linearization_study(const std::string& preset) {
    StudyConfig cfg;
    cfg.frontend = frontend::preset(preset);
    cfg.corpus = dataset::default_corpus_config(preset);
    cfg.corpus.n_pairs = 64;
    cfg.corpus.n_valid = 10;
    cfg.net = nets::default_linearization_spec();
    return cfg;
}

StudyConfig default_matching_study(const std::string& preset) {
    StudyConfig cfg;
    cfg.frontend = frontend::preset(preset);
    if (cfg.frontend.n_channels < 2) {
        cfg.frontend.n_channels = 2;
        cfg.frontend.mismatches = {frontend::MismatchProfile{},
                                   frontend::MismatchProfile{7e-12 * kReferenceRate / cfg.frontend.sample_rate,
                                                             0.97, 0.0}};
    }
    cfg.corpus = dataset::default_corpus_config(preset);
    cfg.corpus.n_pairs = 64;
    cfg.corpus.n_valid = 10;
    cfg.net = nets::default_matching_spec(cfg.frontend.n_channels);
    return cfg;
}

dataset::Corpus test_corpus(const StudyConfig& cfg) {
    if (cfg.test_pairs == 0) {
        throw ConfigError("a study needs at least one test tone");
    }
    dataset::CorpusConfig cc = cfg.corpus;
    cc.n_pairs = cfg.test_pairs;
    cc.n_valid = cfg.test_pairs;
    cc.rng_seed = derive_seed(cfg.corpus.rng_seed, kTestSalt);
    return cfg.net.kind == nn::NetKind::Linearization ? dataset::gen_linearization_corpus(cfg.frontend, cc)
                                                      : dataset::gen_matching_corpus(cfg.frontend, cc);
}

double mean_input_sinad(const dataset::Corpus& corpus, std::span<const std::size_t> indices) {
    if (indices.empty()) {
        return nan();
    }
    double sum = 0.0;
    for (std::size_t i : indices) {
        const auto& p = corpus.pairs.at(i);
        const nn::Sequence x = p.original.size() == 1 ? p.original[0] : nn::interleave_sequences(p.original);
        try {
            sum += metrics::sinad(x, corpus.sample_rate);
        } catch (const AmbiguityError&) {
        }
    }
    return sum / static_cast<double>(indices.size());
}

double mean_output_sinad(const nn::Net& net, const dataset::Corpus& corpus, std::span<const std::size_t> indices) {
    if (indices.empty()) {
        return nan();
    }
    return training::evaluate_split(net, corpus, indices).mean_valid_sinad_db;
}

double mismatch_spur_dbc(std::span<const double> x, double f0, double sample_rate, std::size_t n_channels) {
    if (n_channels < 2) {
        throw ConfigError("mismatch images need at least two channels");
    }
    const auto s = metrics::power_spectrum(x, sample_rate, metrics::Window::Blackman);
    const std::size_t n_bins = s.power.size();
    const auto fund = cluster_bins(bin_of(f0, sample_rate, x.size()), n_bins);
    const double p_fund = cluster_power(s.power, fund);
    double worst = 0.0;
    for (std::size_t k = 1; k < n_channels; ++k) {
        for (double sign : {-1.0, 1.0}) {
            const double img = static_cast<double>(k) * sample_rate / static_cast<double>(n_channels) + sign * f0;
            auto bins = cluster_bins(bin_of(img, sample_rate, x.size()), n_bins);
            for (std::size_t b : fund) {
                bins.erase(b);
            }
            worst = std::max(worst, cluster_power(s.power, bins));
        }
    }
    return db(std::max(worst, p_fund * 1e-30) / p_fund);
}

LinearizationStudy run_linearization_study(const StudyConfig& cfg, const training::ValidationHook& hook) {
    check_kind(cfg, nn::NetKind::Linearization);
    const auto corpus = dataset::gen_linearization_corpus(cfg.frontend, cfg.corpus);
    const auto tests = test_corpus(cfg);

    LinearizationStudy out;
    out.config = cfg;
    out.training = train_study(cfg, corpus, hook);
    const nn::Net& net = out.training.best_net;
    out.mean_test_sinad_before_db = mean_input_sinad(tests, tests.valid);
    out.mean_test_sinad_after_db = mean_output_sinad(net, tests, tests.valid);

    const auto& first = tests.pairs.at(tests.valid.front());
    out.sine = make_report(first.spec, tests.sample_rate, first.original[0],
                           nn::forward(net, std::vector<nn::Sequence>{first.original[0]}), first.reference, true);
    out.sine.spur_before_dbc = -out.sine.before.sfdr_db;
    out.sine.spur_after_dbc = -out.sine.after.sfdr_db;

    // Unseen waveforms through channel 0 at the channel rate, at the middle of
    // the training drive range.
    const auto view = single_channel_view(cfg.frontend, 0);
    const double fs = view.sample_rate;
    const std::size_t n = cfg.corpus.length;
    const double amplitude = frontend::dbm_to_peak_volts(0.5 * (cfg.corpus.dbm_min + cfg.corpus.dbm_max));
    const auto run = [&](const frontend::WaveformSpec& spec, bool tonal) {
        const auto set = frontend::sample_frontend(spec, view, n);
        const auto y = nn::forward(net, std::vector<nn::Sequence>{set.channels[0]});
        return make_report(spec, fs, set.channels[0], y, dataset::analytic_reference(spec, view, n), tonal,
                           tonal ? std::nullopt : std::optional<metrics::StftRequest>(metrics::StftRequest{}));
    };
    const double fa = dataset::snap_to_bin(0.11 * fs, fs, n);
    const double fb = dataset::snap_to_bin(0.14 * fs, fs, n);
    out.dual_tone = run(frontend::WaveformSpec::dual_tone(fa, fb, amplitude), true);
    const std::vector<double> wanted{fa, fb};
    out.dual_tone.spur_before_dbc = strongest_spur_dbc(out.dual_tone.input, fs, wanted);
    out.dual_tone.spur_after_dbc = strongest_spur_dbc(out.dual_tone.output, fs, wanted);
    out.lfm = run(frontend::WaveformSpec::lfm(0.05 * fs, 0.4 * fs, amplitude, static_cast<double>(n) / fs), false);
    return out;
}

MatchingStudy run_matching_study(const StudyConfig& cfg, const training::ValidationHook& hook) {
    check_kind(cfg, nn::NetKind::Matching);
    const std::size_t n_ch = cfg.frontend.n_channels;
    if (n_ch < 2) {
        throw ConfigError("matching study needs at least two channels");
    }
    const auto corpus = dataset::gen_matching_corpus(cfg.frontend, cfg.corpus);
    const auto tests = test_corpus(cfg);

    MatchingStudy out;
    out.config = cfg;
    out.training = train_study(cfg, corpus, hook);
    const nn::Net& net = out.training.best_net;
    out.mean_test_sinad_before_db = mean_input_sinad(tests, tests.valid);
    out.mean_test_sinad_after_db = mean_output_sinad(net, tests, tests.valid);

    const double fs = tests.sample_rate;
    double suppression = 0.0;
    for (std::size_t i : tests.valid) {
        const auto& p = tests.pairs[i];
        const auto in = nn::interleave_sequences(p.original);
        const auto y = nn::forward(net, p.original);
        suppression += mismatch_spur_dbc(in, p.spec.f0, fs, n_ch) - mismatch_spur_dbc(y, p.spec.f0, fs, n_ch);
        if (i == tests.valid.front()) {
            out.sine = make_report(p.spec, fs, in, y, p.reference, true);
            out.sine.spur_before_dbc = mismatch_spur_dbc(in, p.spec.f0, fs, n_ch);
            out.sine.spur_after_dbc = mismatch_spur_dbc(y, p.spec.f0, fs, n_ch);
        }
    }
    out.mean_spur_suppression_db = suppression / static_cast<double>(tests.valid.size());

    // LFM through the same acquisition chain as the training tones.
    const std::size_t total = n_ch * cfg.corpus.length;
    const double amplitude = frontend::dbm_to_peak_volts(0.5 * (cfg.corpus.dbm_min + cfg.corpus.dbm_max));
    const auto spec = frontend::WaveformSpec::lfm(0.05 * fs, 0.2 * fs, amplitude, static_cast<double>(total) / fs);
    auto reference = dataset::analytic_reference(spec, cfg.frontend, total);
    // Both corpus modes present the net with linear, mismatched channels.
    const double g = dataset::power_equivalent_gain(spec, cfg.frontend.mzm, fs, total);
    const auto channels =
        frontend::sample_source([&](double t) { return g * frontend::synth_at(spec, t); }, cfg.frontend, total)
            .channels;
    const auto in = nn::interleave_sequences(channels);
    const auto y = nn::forward(net, channels);
    out.lfm = make_report(spec, fs, in, y, std::move(reference), false, metrics::StftRequest{});
    out.lfm.sideband_before_dbc = lfm_sideband_dbc(*out.lfm.before.stft, spec, fs, n_ch);
    out.lfm.sideband_after_dbc = lfm_sideband_dbc(*out.lfm.after.stft, spec, fs, n_ch);
    return out;
}

void SweepConfig::validate() const {
    frontend.validate();
    net.validate();
    train.validate();
    if (min_channels < 2 || max_channels > 8 || min_channels > max_channels) {
        throw ConfigError("sweep channel range must lie within 2..8");
    }
    if (draws == 0) {
        throw ConfigError("sweep needs at least one mismatch draw");
    }
    for (std::size_t n = min_channels; n <= max_channels; ++n) {
        if (total_length % n != 0) {
            throw ConfigError("total_length " + std::to_string(total_length) + " is not divisible by " +
                              std::to_string(n) + " channels");
        }
    }
    if (!(nominal_delay >= 0.0) || !(delay_spread >= 0.0) || delay_spread > 1.0) {
        throw ConfigError("delay settings must satisfy nominal_delay >= 0 and 0 <= delay_spread <= 1");
    }
    if (!(gain_tolerance >= 0.0) || gain_tolerance >= 1.0) {
        throw ConfigError("gain_tolerance must be in [0, 1)");
    }
    if (parallel == 0) {
        throw ConfigError("parallel must be at least 1");
    }
}

SweepConfig default_sweep(const std::string& preset) {
    SweepConfig cfg;
    const auto base = default_matching_study(preset);
    cfg.frontend = base.frontend;
    cfg.corpus = base.corpus;
    cfg.net = base.net;
    cfg.train = base.train;
    return cfg;
}

bool SweepResult::all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
}

std::size_t effective_parallelism(std::size_t requested) {
    std::size_t n = std::max<std::size_t>(requested, 1);
    if (const char* env = std::getenv("PADC_THREADS")) {
        char* end = nullptr;
        const unsigned long long cap = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && cap > 0) {
            n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
        }
    }
    return n;
}

std::uint64_t sweep_row_seed(std::uint64_t seed, std::size_t n_channels, std::size_t draw_index, bool control) {
    return derive_seed(derive_seed(seed, n_channels), control ? kControlDraw : draw_index);
}

frontend::FrontEndConfig sweep_frontend(const SweepConfig& cfg, std::size_t n_channels, std::uint64_t row_seed,
                                        bool control) {
    frontend::FrontEndConfig fe = cfg.frontend;
    fe.n_channels = n_channels;
    fe.mismatches.assign(n_channels, frontend::MismatchProfile{});
    fe.rng_seed = row_seed;
    if (control) {
        return fe;
    }
    std::mt19937_64 rng(row_seed);
    const double delay = cfg.nominal_delay * kReferenceRate / fe.sample_rate;
    for (std::size_t m = 1; m < n_channels; ++m) {
        fe.mismatches[m].delay = delay * (1.0 - cfg.delay_spread + 2.0 * cfg.delay_spread * uniform01(rng));
        fe.mismatches[m].gain = 1.0 + cfg.gain_tolerance * (2.0 * uniform01(rng) - 1.0);
    }
    return fe;
}

namespace {

SweepRow run_row(const SweepConfig& cfg, std::size_t n_channels, std::size_t draw, bool control) {
    SweepRow row;
    row.n_channels = n_channels;
    row.draw_index = draw;
    row.control = control;
    row.seed = sweep_row_seed(cfg.rng_seed, n_channels, draw, control);
    try {
        const auto fe = sweep_frontend(cfg, n_channels, row.seed, control);
        for (const auto& m : fe.mismatches) {
            row.delays.push_back(m.delay);
            row.gains.push_back(m.gain);
        }
        dataset::CorpusConfig cc = cfg.corpus;
        cc.length = cfg.total_length / n_channels;
        cc.rng_seed = row.seed;
        const auto corpus = dataset::gen_matching_corpus(fe, cc);
        nets::NetSpec spec = cfg.net;
        spec.kind = nn::NetKind::Matching;
        spec.n_inputs = n_channels;
        spec.rng_seed = row.seed;
        training::TrainConfig tc = cfg.train;
        tc.rng_seed = row.seed;
        row.input_mean_valid_sinad_db = mean_input_sinad(corpus, corpus.valid);
        const auto result = training::train(nets::build_net(spec), corpus, tc);
        row.steps = result.state.step;
        row.final_mean_valid_sinad_db = result.history.records.empty()
                                            ? mean_output_sinad(result.net, corpus, corpus.valid)
                                            : result.history.records.back().mean_valid_sinad_db;
        row.ok = true;
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        row.final_mean_valid_sinad_db = nan();
    }
    return row;
}

} // namespace

SweepResult run_multichannel_sweep(const SweepConfig& cfg, const RowHook& on_row) {
    cfg.validate();
    struct Job {
        std::size_t n;
        std::size_t draw;
        bool control;
    };
    std::vector<Job> jobs;
    for (std::size_t n = cfg.min_channels; n <= cfg.max_channels; ++n) {
        if (cfg.control) {
            jobs.push_back({n, 0, true});
        }
        for (std::size_t d = 0; d < cfg.draws; ++d) {
            jobs.push_back({n, d, false});
        }
    }
    SweepResult result;
    result.rows.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex hook_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            result.rows[i] = run_row(cfg, jobs[i].n, jobs[i].draw, jobs[i].control);
            if (on_row) {
                std::lock_guard lock(hook_mutex);
                on_row(result.rows[i]);
            }
        }
    };
    const std::size_t workers = std::min(effective_parallelism(cfg.parallel), jobs.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    return result;
}

StudyConfig EnobConfig::linearization_study() const {
    StudyConfig s;
    s.frontend = frontend;
    s.corpus = linearization_corpus;
    s.net = linearization_net;
    s.train = train;
    return s;
}

StudyConfig EnobConfig::matching_study() const {
    StudyConfig s;
    s.frontend = frontend;
    s.corpus = matching_corpus;
    s.net = matching_net;
    s.train = train;
    return s;
}

void EnobConfig::validate() const {
    frontend.validate();
    linearization_net.validate();
    train.validate();
    if (linearization_net.kind != nn::NetKind::Linearization) {
        throw ConfigError("enob cascade needs a linearization net in [net]");
    }
    if (frontend.n_channels > 1) {
        matching_net.validate();
        if (matching_net.kind != nn::NetKind::Matching || matching_net.n_inputs != frontend.n_channels) {
            throw ConfigError("enob cascade needs a matching net with one input per channel");
        }
    }
    if (tones.empty()) {
        throw ConfigError("enob characterization needs at least one tone");
    }
    for (double f : tones) {
        if (!(f > 0.0) || !std::isfinite(f)) {
            throw ConfigError("tones must be positive frequencies");
        }
    }
    if (record_length % frontend.n_channels != 0 || record_length / frontend.n_channels < 64) {
        throw ConfigError("record_length must be a multiple of the channel count with at least 64 samples each");
    }
}

EnobConfig default_enob(const std::string& preset) {
    EnobConfig cfg;
    const auto lin = default_linearization_study(preset);
    cfg.frontend = lin.frontend;
    cfg.linearization_corpus = lin.corpus;
    cfg.linearization_net = lin.net;
    cfg.train = lin.train;
    cfg.matching_corpus = lin.corpus;
    cfg.matching_corpus.matching_mode = dataset::MatchingMode::Cascade;
    cfg.matching_net = nets::default_matching_spec(std::max<std::size_t>(cfg.frontend.n_channels, 2));
    if (preset == "low-noise-100ms") {
        cfg.tones = {23.332e9};
    } else {
        cfg.tones = {3.44e9, 21.13e9};
    }
    return cfg;
}

std::vector<EnobRow> measure_enob(const EnobConfig& cfg, const nn::Net& linearization, const nn::Net* matching) {
    cfg.validate();
    const std::size_t n_ch = cfg.frontend.n_channels;
    if (n_ch > 1 && matching == nullptr) {
        throw ConfigError("a multichannel cascade needs a matching net");
    }
    const double fs = cfg.frontend.sample_rate;
    const std::size_t n = cfg.record_length;
    std::vector<EnobRow> rows;
    for (double tone : cfg.tones) {
        EnobRow row;
        // On the record's bin grid so the alias lands on a bin as well.
        row.tone_hz = std::round(tone * static_cast<double>(n) / fs) * fs / static_cast<double>(n);
        row.alias_hz = frontend::alias_frequency(row.tone_hz, fs);
        const auto spec = frontend::WaveformSpec::sine(row.tone_hz, frontend::dbm_to_peak_volts(cfg.tone_dbm));
        const auto set = frontend::sample_frontend(spec, cfg.frontend, n);
        row.before = metrics::analyze(set.interleaved(), fs);
        std::vector<nn::Sequence> linear;
        for (const auto& ch : set.channels) {
            linear.push_back(nn::forward(linearization, std::vector<nn::Sequence>{ch}));
        }
        const nn::Sequence out = n_ch > 1 ? nn::forward(*matching, linear) : linear.front();
        row.after = metrics::analyze(out, fs);
        rows.push_back(std::move(row));
    }
    return rows;
}

EnobResult run_enob_characterization(const EnobConfig& cfg, const training::ValidationHook& hook) {
    cfg.validate();
    EnobResult result;
    const auto lin_cfg = cfg.linearization_study();
    result.linearization =
        training::train(nets::build_net(lin_cfg.net), dataset::gen_linearization_corpus(lin_cfg.frontend, lin_cfg.corpus),
                        lin_cfg.train, hook);
    const nn::Net* matching = nullptr;
    if (cfg.frontend.n_channels > 1) {
        const auto m_cfg = cfg.matching_study();
        result.matching = training::train(nets::build_net(m_cfg.net),
                                          dataset::gen_matching_corpus(m_cfg.frontend, m_cfg.corpus), m_cfg.train, hook);
        matching = &result.matching->best_net;
    }
    result.rows = measure_enob(cfg, result.linearization.best_net, matching);
    return result;
}

config::Tree study_tree(const StudyConfig& cfg) {
    config::Tree t;
    t.add_child("frontend", config::frontend_section(cfg.frontend));
    t.add_child("corpus", config::corpus_section(cfg.corpus));
    t.add_child("net", config::net_section(cfg.net));
    auto train = config::train_section(cfg.train);
    train.put("test_pairs", cfg.test_pairs);
    t.add_child("train", train);
    return t;
}

StudyConfig read_study(const config::Tree& root, StudyConfig base) {
    base.frontend = config::read_frontend(config::section(root, "frontend"), base.frontend);
    base.corpus = config::read_corpus(config::section(root, "corpus"), base.corpus);
    base.net = config::read_net(config::section(root, "net"), base.net);
    config::Tree train = config::section(root, "train");
    if (auto v = train.get_optional<std::string>("test_pairs")) {
        base.test_pairs = parse_size(*v, "test_pairs");
        train.erase("test_pairs");
    }
    base.train = config::read_train(train, base.train);
    return base;
}

config::Tree sweep_tree(const SweepConfig& cfg) {
    config::Tree t;
    t.add_child("frontend", config::frontend_section(cfg.frontend));
    t.add_child("corpus", config::corpus_section(cfg.corpus));
    t.add_child("net", config::net_section(cfg.net));
    t.add_child("train", config::train_section(cfg.train));
    config::Tree s;
    s.put("min_channels", cfg.min_channels);
    s.put("max_channels", cfg.max_channels);
    s.put("draws", cfg.draws);
    s.put("total_length", cfg.total_length);
    s.put("nominal_delay", config::format_double(cfg.nominal_delay));
    s.put("delay_spread", config::format_double(cfg.delay_spread));
    s.put("gain_tolerance", config::format_double(cfg.gain_tolerance));
    s.put("control", cfg.control ? "on" : "off");
    s.put("parallel", cfg.parallel);
    s.put("seed", cfg.rng_seed);
    t.add_child("sweep", s);
    return t;
}

SweepConfig read_sweep(const config::Tree& root, SweepConfig base) {
    base.frontend = config::read_frontend(config::section(root, "frontend"), base.frontend);
    base.corpus = config::read_corpus(config::section(root, "corpus"), base.corpus);
    base.net = config::read_net(config::section(root, "net"), base.net);
    base.train = config::read_train(config::section(root, "train"), base.train);
    auto& c = base;
    for_each_key(config::section(root, "sweep"), "sweep",
                 {"min_channels", "max_channels", "draws", "total_length", "nominal_delay", "delay_spread",
                  "gain_tolerance", "control", "parallel", "seed"},
                 [&](const std::string& key, const std::string& v) {
                     if (key == "min_channels") {
                         c.min_channels = parse_size(v, key);
                     } else if (key == "max_channels") {
                         c.max_channels = parse_size(v, key);
                     } else if (key == "draws") {
                         c.draws = parse_size(v, key);
                     } else if (key == "total_length") {
                         c.total_length = parse_size(v, key);
                     } else if (key == "nominal_delay") {
                         c.nominal_delay = config::parse_double(v, key);
                     } else if (key == "delay_spread") {
                         c.delay_spread = config::parse_double(v, key);
                     } else if (key == "gain_tolerance") {
                         c.gain_tolerance = config::parse_double(v, key);
                     } else if (key == "control") {
                         if (v != "on" && v != "off") {
                             throw ConfigError("key 'control' must be on or off");
                         }
                         c.control = v == "on";
                     } else if (key == "parallel") {
                         c.parallel = parse_size(v, key);
                     } else {
                         c.rng_seed = parse_size(v, key);
                     }
                 });
    return base;
}

config::Tree enob_tree(const EnobConfig& cfg) {
    config::Tree t;
    t.add_child("frontend", config::frontend_section(cfg.frontend));
    t.add_child("corpus", config::corpus_section(cfg.linearization_corpus));
    t.add_child("matching_corpus", config::corpus_section(cfg.matching_corpus));
    t.add_child("net", config::net_section(cfg.linearization_net));
    t.add_child("matching_net", config::net_section(cfg.matching_net));
    t.add_child("train", config::train_section(cfg.train));
    config::Tree e;
    e.put("tones", join_doubles(cfg.tones));
    e.put("tone_dbm", config::format_double(cfg.tone_dbm));
    e.put("record_length", cfg.record_length);
    t.add_child("enob", e);
    return t;
}

EnobConfig read_enob(const config::Tree& root, EnobConfig base) {
    base.frontend = config::read_frontend(config::section(root, "frontend"), base.frontend);
    base.linearization_corpus = config::read_corpus(config::section(root, "corpus"), base.linearization_corpus);
    base.matching_corpus = config::read_corpus(config::section(root, "matching_corpus"), base.matching_corpus);
    base.linearization_net = config::read_net(config::section(root, "net"), base.linearization_net);
    base.matching_net = config::read_net(config::section(root, "matching_net"), base.matching_net);
    base.train = config::read_train(config::section(root, "train"), base.train);
    for_each_key(config::section(root, "enob"), "enob", {"tones", "tone_dbm", "record_length"},
                 [&](const std::string& key, const std::string& v) {
                     if (key == "tones") {
                         base.tones = parse_doubles(v, key);
                     } else if (key == "tone_dbm") {
                         base.tone_dbm = config::parse_double(v, key);
                     } else {
                         base.record_length = parse_size(v, key);
                     }
                 });
    return base;
}

config::Tree manifest(const std::string& study, config::Tree resolved) {
    config::Tree run;
    run.put("study", study);
    run.put("tool_version", std::string(kVersion));
    run.put("config_hash", config::hex64(config::fingerprint(resolved)));
    config::Tree out;
    out.add_child("run", run);
    for (auto& [name, child] : resolved) {
        out.add_child(name, child);
    }
    return out;
}

void write_signal_report(const SignalReport& r, const std::filesystem::path& dir, const std::string& stem) {
    const auto open = [&](const std::string& suffix) {
        std::ofstream out(dir / (stem + suffix));
        if (!out) {
            throw IoError("cannot write " + (dir / (stem + suffix)).string());
        }
        out << std::setprecision(17);
        return out;
    };
    {
        auto out = open("_time.csv");
        out << "index,time_s,input,output,reference\n";
        for (std::size_t k = 0; k < r.input.size(); ++k) {
            out << k << ',' << static_cast<double>(k) / r.sample_rate << ',' << r.input[k] << ',' << r.output[k]
                << ',' << r.reference[k] << '\n';
        }
    }
    {
        auto out = open("_spectrum.csv");
        out << "frequency_hz,before_db,after_db\n";
        for (std::size_t k = 0; k < r.before.spectrum_db.size(); ++k) {
            out << r.before.spectrum_frequency[k] << ',' << r.before.spectrum_db[k] << ',' << r.after.spectrum_db[k]
                << '\n';
        }
    }
    if (r.before.stft && r.after.stft) {
        auto before = open("_stft_before.csv");
        metrics::write_stft_csv(*r.before.stft, before);
        auto after = open("_stft_after.csv");
        metrics::write_stft_csv(*r.after.stft, after);
    }
    {
        auto out = open("_summary.csv");
        out << "metric,before,after\n";
        out << "sinad_db," << r.before.sinad_db << ',' << r.after.sinad_db << '\n';
        out << "enob_bits," << r.before.enob_bits << ',' << r.after.enob_bits << '\n';
        out << "sfdr_db," << r.before.sfdr_db << ',' << r.after.sfdr_db << '\n';
        out << "sdr_db," << r.sdr_before_db << ',' << r.sdr_after_db << '\n';
        out << "spur_dbc," << r.spur_before_dbc << ',' << r.spur_after_dbc << '\n';
        out << "sideband_dbc," << r.sideband_before_dbc << ',' << r.sideband_after_dbc << '\n';
    }
}

void write_sweep_csv(const SweepResult& r, std::ostream& out) {
    out << "n_channels,draw_index,control,seed,delays_ps,gains,input_mean_valid_sinad_db,"
           "final_mean_valid_sinad_db,steps,ok,error\n"
        << std::setprecision(17);
    for (const auto& row : r.rows) {
        std::string delays, gains;
        for (std::size_t m = 0; m < row.delays.size(); ++m) {
            delays += (m ? ";" : "") + config::format_double(row.delays[m] * 1e12);
            gains += (m ? ";" : "") + config::format_double(row.gains[m]);
        }
        std::string error = row.error;
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
        out << row.n_channels << ',' << row.draw_index << ',' << (row.control ? 1 : 0) << ',' << row.seed << ','
            << delays << ',' << gains << ',' << row.input_mean_valid_sinad_db << ','
            << row.final_mean_valid_sinad_db << ',' << row.steps << ',' << (row.ok ? 1 : 0) << ',' << error << '\n';
    }
}

void write_enob_csv(const std::vector<EnobRow>& rows, std::ostream& out) {
    out << "tone_hz,alias_hz,sinad_before_db,sinad_after_db,enob_before,enob_after,sfdr_before_db,sfdr_after_db\n"
        << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.tone_hz << ',' << r.alias_hz << ',' << r.before.sinad_db << ',' << r.after.sinad_db << ','
            << r.before.enob_bits << ',' << r.after.enob_bits << ',' << r.before.sfdr_db << ',' << r.after.sfdr_db
            << '\n';
    }
}

} // namespace padc::experiments
