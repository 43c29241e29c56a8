#include "padc/dataset.hpp"

#include "padc/config.hpp"
#include "padc/errors.hpp"
#include "padc/fft.hpp"
#include "padc/seeding.hpp"
#include "padc/version.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace padc::dataset {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMinReferenceLength = 64;
constexpr int kMaxDrawAttempts = 1000;

using Bins = std::vector<std::complex<double>>;

// Bin position (fractional) of the first-zone image of `cycles` per record.
double folded_position(double cycles, std::size_t n) {
    const double len = static_cast<double>(n);
    double p = std::fmod(cycles, len);
    if (p < 0.0) {
        p += len;
    }
    return p <= len / 2.0 ? p : len - p;
}

// +/- kClusterHalfwidth bins around `center`, reflected at DC and Nyquist.
std::set<std::size_t> cluster(long long center, std::size_t n) {
    std::set<std::size_t> bins;
    const long long last = static_cast<long long>(n / 2);
    for (long long d = -kClusterHalfwidth; d <= kClusterHalfwidth; ++d) {
        long long b = center + d;
        if (b < 0) {
            b = -b;
        }
        if (b > last) {
            b = static_cast<long long>(n) - b;
        }
        bins.insert(static_cast<std::size_t>(b));
    }
    return bins;
}

double bin_power(const Bins& bins, std::size_t k, std::size_t n) {
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    return (edge ? 1.0 : 2.0) * std::norm(bins[k]) / (static_cast<double>(n) * static_cast<double>(n));
}

bool intersects(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
    return std::any_of(a.begin(), a.end(), [&](std::size_t k) { return b.count(k) != 0; });
}

struct Fundamental {
    std::size_t bin = 0;
    std::set<std::size_t> bins;
    double cycles = 0.0;  // f0 * n / fs
};

Fundamental locate_fundamental(std::span<const double> x, double f0, double sample_rate) {
    if (x.size() < kMinReferenceLength) {
        throw ShapeError("reference construction needs at least " + std::to_string(kMinReferenceLength) +
                         " samples, got " + std::to_string(x.size()));
    }
    if (!(f0 > 0.0) || !(sample_rate > 0.0)) {
        throw ConfigError("f0 and sample_rate must be positive");
    }
    const std::size_t n = x.size();
    Fundamental f;
    f.cycles = f0 * static_cast<double>(n) / sample_rate;
    f.bin = static_cast<std::size_t>(std::llround(folded_position(f.cycles, n)));
    if (f.bin <= static_cast<std::size_t>(kClusterHalfwidth)) {
        throw RangeError("fundamental image is adjacent to DC");
    }
    if (f.bin + kClusterHalfwidth > n / 2) {
        throw RangeError("fundamental image is adjacent to the Nyquist frequency");
    }
    f.bins = cluster(static_cast<long long>(f.bin), n);
    return f;
}

std::vector<double> fold_into_fundamental(std::span<const double> x, const Fundamental& fund,
                                          const std::set<std::size_t>& remove, ReferenceDiagnostics* diag) {
    const std::size_t n = x.size();
    Bins bins = fft::rfft(x);
    double p_fund = 0.0;
    for (std::size_t k : fund.bins) {
        p_fund += bin_power(bins, k, n);
    }
    if (!(p_fund > 0.0)) {
        throw AmbiguityError("no energy at the fundamental");
    }
    double p_removed = 0.0;
    for (std::size_t k : remove) {
        p_removed += bin_power(bins, k, n);
        bins[k] = 0.0;
    }
    const double gain = std::sqrt((p_fund + p_removed) / p_fund);
    double p_after = 0.0;
    for (std::size_t k : fund.bins) {
        bins[k] *= gain;
        p_after += bin_power(bins, k, n);
    }
    if (diag) {
        diag->fundamental_before = p_fund;
        diag->removed = p_removed;
        diag->fundamental_after = p_after;
        diag->fundamental_bin = fund.bin;
        diag->removed_bins.assign(remove.begin(), remove.end());
    }
    return fft::irfft(bins, n);
}

struct Interval {
    double lo, hi;
};

std::vector<Interval> allowed_band(const frontend::FrontEndConfig& fe, const CorpusConfig& c) {
    const double hi = c.f_max > 0.0 ? c.f_max : fe.sample_rate / 2.0;
    std::vector<Interval> band{{c.f_min, hi}};
    if (c.stop_band) {
        const auto [s0, s1] = *c.stop_band;
        band = {{c.f_min, std::min(hi, s0)}, {std::max(c.f_min, s1), hi}};
    }
    std::erase_if(band, [](const Interval& i) { return !(i.hi > i.lo); });
    return band;
}

bool in_band(double f, const std::vector<Interval>& band) {
    return std::any_of(band.begin(), band.end(), [f](const Interval& i) { return f > i.lo && f <= i.hi; });
}

double uniform01(std::mt19937_64& rng) {
    return std::generate_canonical<double, 64>(rng);
}

// Random tone in the allowed band, snapped to the bin grid of an n-point
// record at `grid_rate` when requested.
frontend::WaveformSpec draw_tone(std::mt19937_64& rng, const std::vector<Interval>& band, const CorpusConfig& c,
                                 double grid_rate, std::size_t n) {
    double total = 0.0;
    for (const auto& i : band) {
        total += i.hi - i.lo;
    }
    for (int attempt = 0; attempt < kMaxDrawAttempts; ++attempt) {
        double u = uniform01(rng) * total;
        double f = band.back().hi;
        for (const auto& i : band) {
            if (u < i.hi - i.lo) {
                f = i.lo + u;
                break;
            }
            u -= i.hi - i.lo;
        }
        const double dbm = c.dbm_min + (c.dbm_max - c.dbm_min) * uniform01(rng);
        const double phase = 2.0 * kPi * uniform01(rng);
        if (c.snap_to_bins) {
            f = snap_to_bin(f, grid_rate, n);
        }
        if (!(f > 0.0) || !in_band(f, band)) {
            continue;
        }
        frontend::WaveformSpec spec = frontend::WaveformSpec::sine(f, frontend::dbm_to_peak_volts(dbm), phase);
        spec.power_dbm = dbm;
        return spec;
    }
    throw ConfigError("could not draw a tone inside the configured band");
}

std::vector<std::size_t> parse_indices(const std::string& text) {
    std::vector<std::size_t> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(static_cast<std::size_t>(std::stoull(item)));
        }
    }
    return out;
}

std::string join_indices(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + std::to_string(v[i]);
    }
    return s;
}

std::string pair_stem(std::size_t i) {
    std::ostringstream s;
    s << "pair_" << std::setw(5) << std::setfill('0') << i;
    return s.str();
}

const char* wave_name(frontend::WaveKind k) {
    switch (k) {
    case frontend::WaveKind::Sine:
        return "sine";
    case frontend::WaveKind::DualTone:
        return "dual-tone";
    case frontend::WaveKind::Lfm:
        return "lfm";
    }
    return "sine";
}

frontend::WaveKind parse_wave(const std::string& s) {
    if (s == "sine") {
        return frontend::WaveKind::Sine;
    }
    if (s == "dual-tone") {
        return frontend::WaveKind::DualTone;
    }
    if (s == "lfm") {
        return frontend::WaveKind::Lfm;
    }
    throw FormatError("unknown waveform kind '" + s + "' in pairs.csv", 0);
}

} // namespace

std::vector<double> harmonic_removal_reference(std::span<const double> x, double f0, double sample_rate,
                                               int max_harmonic, ReferenceDiagnostics* diag) {
    if (max_harmonic < 1) {
        throw ConfigError("max_harmonic must be at least 1");
    }
    const Fundamental fund = locate_fundamental(x, f0, sample_rate);
    const std::size_t n = x.size();
    std::set<std::size_t> remove;
    for (int k = 2; k <= max_harmonic; ++k) {
        const auto center = std::llround(folded_position(k * fund.cycles, n));
        const auto bins = cluster(center, n);
        if (intersects(bins, fund.bins)) {
            throw AmbiguityError("harmonic " + std::to_string(k) + " folds onto the fundamental");
        }
        remove.insert(bins.begin(), bins.end());
    }
    remove.erase(0);
    return fold_into_fundamental(x, fund, remove, diag);
}

std::vector<double> matching_reference(std::span<const double> x, double f0, double sample_rate,
                                       std::size_t n_channels, ReferenceDiagnostics* diag) {
    if (n_channels < 1) {
        throw ConfigError("n_channels must be at least 1");
    }
    const Fundamental fund = locate_fundamental(x, f0, sample_rate);
    const std::size_t n = x.size();
    const double per_channel = static_cast<double>(n) / static_cast<double>(n_channels);
    std::set<std::size_t> remove;
    for (std::size_t m = 1; m < n_channels; ++m) {
        const double shift = static_cast<double>(m) * per_channel;
        for (double image : {shift + fund.cycles, shift - fund.cycles}) {
            const auto bins = cluster(std::llround(folded_position(image, n)), n);
            if (intersects(bins, fund.bins)) {
                throw AmbiguityError("mismatch spur of channel offset " + std::to_string(m) +
                                     " falls on the fundamental");
            }
            remove.insert(bins.begin(), bins.end());
        }
        const auto offset_bins = cluster(std::llround(folded_position(shift, n)), n);
        if (!intersects(offset_bins, fund.bins)) {
            remove.insert(offset_bins.begin(), offset_bins.end());
        }
    }
    remove.erase(0);
    return fold_into_fundamental(x, fund, remove, diag);
}

double power_equivalent_gain(const frontend::WaveformSpec& spec, const frontend::MzmConfig& mzm, double sample_rate,
                             std::size_t n) {
    spec.validate();
    mzm.validate();
    const double half = mzm.extinction / 2.0;
    if (spec.kind == frontend::WaveKind::Sine) {
        const double amp = spec.peak_volts();
        const double a = kPi * amp / mzm.v_pi;
        double odd = 0.0;
        double even = 0.0;
        const int terms = 40 + static_cast<int>(2.0 * a);
        for (int k = 1; k <= terms; ++k) {
            const double j = std::cyl_bessel_j(static_cast<double>(k), a);
            (k % 2 ? odd : even) += j * j;
        }
        const double c = std::cos(mzm.bias_error);
        const double s = std::sin(mzm.bias_error);
        const double ac_power = half * half * 2.0 * (c * c * odd + s * s * even);
        return std::sqrt(ac_power / (amp * amp / 2.0));
    }
    if (!(sample_rate > 0.0) || n < 2) {
        throw ConfigError("non-sine waveforms need a sample rate and record length for the gain");
    }
    std::vector<double> y(n), s(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / sample_rate;
        s[k] = frontend::synth_at(spec, t);
        y[k] = frontend::centered_transfer(s[k], mzm);
    }
    const auto ac_power = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double e : v) {
            mean += e;
        }
        mean /= static_cast<double>(v.size());
        double p = 0.0;
        for (double e : v) {
            p += (e - mean) * (e - mean);
        }
        return p / static_cast<double>(v.size());
    };
    return std::sqrt(ac_power(y) / ac_power(s));
}

std::vector<double> analytic_reference(const frontend::WaveformSpec& spec, const frontend::FrontEndConfig& cfg,
                                       std::size_t n) {
    cfg.validate();
    const double g = power_equivalent_gain(spec, cfg.mzm, cfg.sample_rate, n);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = g * frontend::synth_at(spec, static_cast<double>(k) / cfg.sample_rate);
    }
    return out;
}

double snap_to_bin(double f, double sample_rate, std::size_t n) {
    const double bins = std::round(f * static_cast<double>(n) / sample_rate);
    return bins * sample_rate / static_cast<double>(n);
}

void CorpusConfig::validate(const frontend::FrontEndConfig& fe) const {
    fe.validate();
    if (n_pairs == 0) {
        throw ConfigError("corpus needs at least one pair");
    }
    if (n_valid > n_pairs) {
        throw ConfigError("n_valid exceeds n_pairs");
    }
    if (length < kMinReferenceLength) {
        throw ConfigError("sequence length must be at least " + std::to_string(kMinReferenceLength));
    }
    if (!(f_min >= 0.0) || !(f_max >= 0.0) || (f_max > 0.0 && f_max <= f_min)) {
        throw ConfigError("frequency range must satisfy 0 <= f_min < f_max");
    }
    if (stop_band && !(stop_band->second > stop_band->first)) {
        throw ConfigError("stop band must be an increasing pair");
    }
    if (!(dbm_max >= dbm_min)) {
        throw ConfigError("dbm_max must not be below dbm_min");
    }
    if (max_harmonic < 1) {
        throw ConfigError("max_harmonic must be at least 1");
    }
    if (allowed_band(fe, *this).empty()) {
        throw ConfigError("frequency range is empty after the stop band is excluded");
    }
}

CorpusConfig default_corpus_config(std::string_view preset_name) {
    CorpusConfig c;
    if (preset_name == "default-20gs") {
        c.stop_band = std::make_pair(4e9, 6e9);
        return c;
    }
    if (preset_name == "low-noise-100ms") {
        c.n_pairs = 274;
        c.n_valid = 30;
        c.f_min = 400e6;
        c.f_max = 450e6;
        return c;
    }
    throw ConfigError("unknown front-end preset '" + std::string(preset_name) + "'");
}

double Corpus::original_rate() const {
    if (kind == nn::NetKind::Linearization || pairs.empty()) {
        return sample_rate;
    }
    return sample_rate / static_cast<double>(pairs.front().original.size());
}

void Corpus::validate() const {
    std::size_t channels = 0;
    std::size_t length = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (p.original.empty()) {
            throw ShapeError("pair " + std::to_string(i) + " has no original sequence");
        }
        if (i == 0) {
            channels = p.original.size();
            length = p.original.front().size();
        }
        if (p.original.size() != channels) {
            throw ShapeError("pair " + std::to_string(i) + " has a different channel count");
        }
        for (const auto& seq : p.original) {
            if (seq.size() != length) {
                throw ShapeError("pair " + std::to_string(i) + " has channels of unequal length");
            }
        }
        if (p.reference.size() != channels * length) {
            throw ShapeError("pair " + std::to_string(i) + " reference length does not match its originals");
        }
    }
    if (kind == nn::NetKind::Linearization && channels > 1) {
        throw ShapeError("linearization pairs carry exactly one original sequence");
    }
    if (kind == nn::NetKind::Matching && !pairs.empty() && channels < 2) {
        throw ShapeError("matching pairs need at least two channels");
    }
    std::set<std::size_t> seen;
    for (const auto* split : {&train, &valid}) {
        for (std::size_t i : *split) {
            if (i >= pairs.size()) {
                throw ShapeError("split index " + std::to_string(i) + " out of range");
            }
            if (!seen.insert(i).second) {
                throw ShapeError("pair " + std::to_string(i) + " appears twice in the split");
            }
        }
    }
}

Corpus gen_linearization_corpus(const frontend::FrontEndConfig& cfg, const CorpusConfig& corpus) {
    corpus.validate(cfg);
    const std::size_t n_ch = cfg.n_channels;
    const double rate = cfg.channel_rate();
    const auto band = allowed_band(cfg, corpus);

    Corpus out;
    out.kind = nn::NetKind::Linearization;
    out.frontend = cfg;
    out.config = corpus;
    out.sample_rate = rate;
    out.pairs.reserve(corpus.n_pairs);
    for (std::size_t i = 0; i < corpus.n_pairs; ++i) {
        const std::uint64_t pair_seed = derive_seed(corpus.rng_seed, i);
        std::mt19937_64 rng(pair_seed);
        bool done = false;
        for (int attempt = 0; attempt < kMaxDrawAttempts && !done; ++attempt) {
            DataPair pair;
            pair.spec = draw_tone(rng, band, corpus, rate, corpus.length);
            frontend::FrontEndConfig fe = cfg;
            fe.rng_seed = derive_seed(pair_seed, static_cast<std::uint64_t>(attempt));
            auto set = frontend::sample_frontend(pair.spec, fe, n_ch * corpus.length);
            pair.source_channel = static_cast<std::size_t>(rng() % n_ch);
            try {
                pair.reference = harmonic_removal_reference(set.channels[pair.source_channel], pair.spec.f0, rate,
                                                            corpus.max_harmonic);
            } catch (const AmbiguityError&) {
                continue;
            } catch (const RangeError&) {
                continue;
            }
            pair.original.push_back(std::move(set.channels[pair.source_channel]));
            pair.config_hash = cfg.hash();
            out.pairs.push_back(std::move(pair));
            done = true;
        }
        if (!done) {
            throw ConfigError("could not draw a usable tone for pair " + std::to_string(i));
        }
    }
    return split_dataset(std::move(out), corpus.n_pairs - corpus.n_valid, corpus.n_valid, corpus.rng_seed);
}

Corpus gen_matching_corpus(const frontend::FrontEndConfig& cfg, const CorpusConfig& corpus) {
    corpus.validate(cfg);
    const std::size_t n_ch = cfg.n_channels;
    if (n_ch < 2) {
        throw ConfigError("matching corpora need at least two channels");
    }
    const std::size_t total = n_ch * corpus.length;
    const auto band = allowed_band(cfg, corpus);

    Corpus out;
    out.kind = nn::NetKind::Matching;
    out.frontend = cfg;
    out.config = corpus;
    out.sample_rate = cfg.sample_rate;
    out.pairs.reserve(corpus.n_pairs);
    for (std::size_t i = 0; i < corpus.n_pairs; ++i) {
        const std::uint64_t pair_seed = derive_seed(corpus.rng_seed, i);
        std::mt19937_64 rng(pair_seed);
        bool done = false;
        for (int attempt = 0; attempt < kMaxDrawAttempts && !done; ++attempt) {
            DataPair pair;
            pair.spec = draw_tone(rng, band, corpus, cfg.sample_rate, total);
            frontend::FrontEndConfig fe = cfg;
            fe.rng_seed = derive_seed(pair_seed, static_cast<std::uint64_t>(attempt));
            try {
                if (corpus.matching_mode == MatchingMode::CleanTones) {
                    pair.reference = analytic_reference(pair.spec, cfg, total);
                    // Only checks that no spur image collides with the tone.
                    matching_reference(pair.reference, pair.spec.f0, cfg.sample_rate, n_ch);
                    const double g = power_equivalent_gain(pair.spec, cfg.mzm, cfg.sample_rate, total);
                    const auto& spec = pair.spec;
                    auto set = frontend::sample_source(
                        [&](double t) { return g * frontend::synth_at(spec, t); }, fe, total);
                    pair.original = std::move(set.channels);
                } else {
                    auto set = frontend::sample_frontend(pair.spec, fe, total);
                    for (auto& ch : set.channels) {
                        pair.original.push_back(harmonic_removal_reference(ch, pair.spec.f0, cfg.channel_rate(),
                                                                           corpus.max_harmonic));
                    }
                    pair.reference = matching_reference(nn::interleave_sequences(pair.original), pair.spec.f0,
                                                        cfg.sample_rate, n_ch);
                }
            } catch (const AmbiguityError&) {
                continue;
            } catch (const RangeError&) {
                continue;
            }
            pair.config_hash = cfg.hash();
            out.pairs.push_back(std::move(pair));
            done = true;
        }
        if (!done) {
            throw ConfigError("could not draw a usable tone for pair " + std::to_string(i));
        }
    }
    return split_dataset(std::move(out), corpus.n_pairs - corpus.n_valid, corpus.n_valid, corpus.rng_seed);
}

Corpus split_dataset(Corpus corpus, std::size_t n_train, std::size_t n_valid, std::uint64_t rng_seed) {
    if (n_train + n_valid > corpus.pairs.size()) {
        throw ConfigError("split of " + std::to_string(n_train) + " + " + std::to_string(n_valid) +
                          " exceeds the " + std::to_string(corpus.pairs.size()) + " available pairs");
    }
    std::vector<std::size_t> order(corpus.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::mt19937_64 rng(splitmix64(rng_seed));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng() % i]);
    }
    corpus.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    corpus.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    std::sort(corpus.train.begin(), corpus.train.end());
    std::sort(corpus.valid.begin(), corpus.valid.end());
    corpus.split_seed = rng_seed;
    return corpus;
}

void write_pair_csv(const DataPair& pair, std::ostream& out) {
    const auto original = pair.original.size() == 1 ? pair.original.front()
                                                    : nn::interleave_sequences(pair.original);
    out << "index,original,reference\n" << std::setprecision(17);
    for (std::size_t k = 0; k < pair.reference.size(); ++k) {
        out << k << ',' << original[k] << ',' << pair.reference[k] << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir, bool with_csv) {
    corpus.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }

    config::Tree manifest;
    config::Tree gen;
    gen.put("format", "padc-corpus");
    gen.put("format_version", 1);
    gen.put("tool_version", kVersion);
    gen.put("kind", corpus.kind == nn::NetKind::Matching ? "matching" : "linearization");
    gen.put("sample_rate", config::format_double(corpus.sample_rate));
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << corpus.frontend.hash();
    gen.put("config_hash", hash.str());
    gen.put("n_pairs", corpus.pairs.size());
    gen.put("n_train", corpus.train.size());
    gen.put("n_valid", corpus.valid.size());
    gen.put("split_seed", corpus.split_seed);
    gen.put("train", join_indices(corpus.train));
    gen.put("valid", join_indices(corpus.valid));
    manifest.add_child("corpus_data", gen);
    manifest.add_child("frontend", config::frontend_section(corpus.frontend));
    manifest.add_child("corpus", config::corpus_section(corpus.config));
    config::write_ini(manifest, dir / "manifest.ini");

    std::ofstream meta(dir / "pairs.csv", std::ios::trunc);
    if (!meta) {
        throw IoError("cannot write " + (dir / "pairs.csv").string());
    }
    meta << "index,kind,f0,f1,amplitude,phase,chirp_duration,power_dbm,source_channel,config_hash\n";
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        const auto& p = corpus.pairs[i];
        const auto& s = p.spec;
        meta << i << ',' << wave_name(s.kind) << ',' << config::format_double(s.f0) << ','
             << config::format_double(s.f1) << ',' << config::format_double(s.amplitude) << ','
             << config::format_double(s.phase) << ',' << config::format_double(s.chirp_duration) << ','
             << (s.power_dbm ? config::format_double(*s.power_dbm) : std::string("none")) << ',' << p.source_channel
             << ',' << p.config_hash << '\n';

        frontend::ChannelSet orig;
        orig.channels = p.original;
        orig.sample_rate = corpus.original_rate() * static_cast<double>(p.original.size());
        for (std::size_t m = 0; m < p.original.size(); ++m) {
            orig.channel_phase.push_back(m);
        }
        frontend::save_channel_set(orig, dir / (pair_stem(i) + ".orig.padc"));
        frontend::ChannelSet ref;
        ref.channels = {p.reference};
        ref.sample_rate = corpus.sample_rate;
        ref.channel_phase = {0};
        frontend::save_channel_set(ref, dir / (pair_stem(i) + ".ref.padc"));
        if (with_csv) {
            std::ofstream csv(dir / (pair_stem(i) + ".csv"), std::ios::trunc);
            write_pair_csv(p, csv);
            if (!csv) {
                throw IoError("failed writing CSV for pair " + std::to_string(i));
            }
        }
    }
    if (!meta) {
        throw IoError("failed writing pairs.csv");
    }
}

Corpus load_corpus(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.ini";
    if (!std::filesystem::exists(manifest_path)) {
        throw IoError("no corpus manifest at " + manifest_path.string());
    }
    const config::Tree manifest = config::read_ini(manifest_path);
    const auto& gen = config::section(manifest, "corpus_data");
    if (gen.get<std::string>("format", "") != "padc-corpus") {
        throw FormatError(manifest_path.string() + " is not a corpus manifest", 0);
    }
    Corpus c;
    try {
        c.kind = gen.get<std::string>("kind") == "matching" ? nn::NetKind::Matching : nn::NetKind::Linearization;
        c.sample_rate = config::parse_double(gen.get<std::string>("sample_rate"), "sample_rate");
        c.split_seed = gen.get<std::uint64_t>("split_seed");
        c.train = parse_indices(gen.get<std::string>("train", ""));
        c.valid = parse_indices(gen.get<std::string>("valid", ""));
        c.frontend = config::read_frontend(config::section(manifest, "frontend"), frontend::FrontEndConfig{});
        c.config = config::read_corpus(config::section(manifest, "corpus"), CorpusConfig{});
        const auto n_pairs = gen.get<std::size_t>("n_pairs");

        std::ifstream meta(dir / "pairs.csv");
        if (!meta) {
            throw IoError("cannot open " + (dir / "pairs.csv").string());
        }
        std::string line;
        std::getline(meta, line);
        for (std::size_t i = 0; i < n_pairs; ++i) {
            if (!std::getline(meta, line)) {
                throw FormatError("pairs.csv ends after " + std::to_string(i) + " rows", 0);
            }
            std::vector<std::string> f;
            std::istringstream row(line);
            std::string cell;
            while (std::getline(row, cell, ',')) {
                f.push_back(cell);
            }
            if (f.size() != 10) {
                throw FormatError("pairs.csv row " + std::to_string(i) + " has " + std::to_string(f.size()) +
                                      " fields",
                                  0);
            }
            DataPair p;
            p.spec.kind = parse_wave(f[1]);
            p.spec.f0 = config::parse_double(f[2], "f0");
            p.spec.f1 = config::parse_double(f[3], "f1");
            p.spec.amplitude = config::parse_double(f[4], "amplitude");
            p.spec.phase = config::parse_double(f[5], "phase");
            p.spec.chirp_duration = config::parse_double(f[6], "chirp_duration");
            if (f[7] != "none") {
                p.spec.power_dbm = config::parse_double(f[7], "power_dbm");
            }
            p.source_channel = std::stoull(f[8]);
            p.config_hash = std::stoull(f[9]);
            p.original = frontend::load_channel_set(dir / (pair_stem(i) + ".orig.padc")).channels;
            p.reference = frontend::load_channel_set(dir / (pair_stem(i) + ".ref.padc")).channels.at(0);
            c.pairs.push_back(std::move(p));
        }
    } catch (const boost::property_tree::ptree_error& e) {
        throw FormatError(std::string("malformed corpus manifest: ") + e.what(), 0);
    } catch (const std::invalid_argument&) {
        throw FormatError("malformed number in pairs.csv", 0);
    }
    c.validate();
    return c;
}

} // namespace padc::dataset
