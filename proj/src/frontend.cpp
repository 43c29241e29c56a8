#include "padc/frontend.hpp"

#include "padc/binary_io.hpp"
#include "padc/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace padc::frontend {

namespace {

constexpr double kPi = std::numbers::pi;

bool finite(double x) {
    return std::isfinite(x);
}

class Fnv1a {
public:
    void add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            hash_ ^= (v >> (8 * i)) & 0xffU;
            hash_ *= 0x100000001b3ULL;
        }
    }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

} // namespace

WaveformSpec WaveformSpec::sine(double f0, double amplitude, double phase) {
    WaveformSpec s;
    s.kind = WaveKind::Sine;
    s.f0 = f0;
    s.amplitude = amplitude;
    s.phase = phase;
    return s;
}

WaveformSpec WaveformSpec::dual_tone(double f0, double f1, double amplitude) {
    WaveformSpec s;
    s.kind = WaveKind::DualTone;
    s.f0 = f0;
    s.f1 = f1;
    s.amplitude = amplitude;
    return s;
}

WaveformSpec WaveformSpec::lfm(double f0, double f1, double amplitude, double chirp_duration, double phase) {
    WaveformSpec s;
    s.kind = WaveKind::Lfm;
    s.f0 = f0;
    s.f1 = f1;
    s.amplitude = amplitude;
    s.chirp_duration = chirp_duration;
    s.phase = phase;
    return s;
}

double WaveformSpec::peak_volts() const {
    return power_dbm ? dbm_to_peak_volts(*power_dbm) : amplitude;
}

void WaveformSpec::validate() const {
    if (!(f0 > 0.0) || !finite(f0)) {
        throw ConfigError("waveform f0 must be a positive frequency");
    }
    if (kind != WaveKind::Sine && (!(f1 > 0.0) || !finite(f1))) {
        throw ConfigError("dual-tone and LFM waveforms need a positive f1");
    }
    if (kind == WaveKind::Lfm && (!(chirp_duration > 0.0) || !finite(chirp_duration))) {
        throw ConfigError("LFM waveforms need a positive chirp_duration");
    }
    if (power_dbm) {
        if (!finite(*power_dbm)) {
            throw ConfigError("power_dbm must be finite");
        }
    } else if (!(amplitude > 0.0) || !finite(amplitude)) {
        throw ConfigError("waveform amplitude must be positive");
    }
    if (!finite(phase)) {
        throw ConfigError("waveform phase must be finite");
    }
}

double dbm_to_peak_volts(double dbm) {
    return std::sqrt(2.0 * std::pow(10.0, dbm / 10.0) * 1e-3 * 50.0);
}

double peak_volts_to_dbm(double volts) {
    return 10.0 * std::log10(volts * volts / (2.0 * 50.0 * 1e-3));
}

void MzmConfig::validate() const {
    if (!(v_pi > 0.0) || !finite(v_pi)) {
        throw ConfigError("mzm v_pi must be positive");
    }
    if (!(std::abs(bias_error) < kPi / 2)) {
        throw ConfigError("mzm |bias_error| must be below pi/2");
    }
    if (!(extinction > 0.0 && extinction <= 1.0)) {
        throw ConfigError("mzm extinction must lie in (0, 1]");
    }
}

void FrontEndConfig::validate() const {
    if (!(sample_rate > 0.0) || !finite(sample_rate)) {
        throw ConfigError("sample_rate must be positive");
    }
    if (n_channels < 1) {
        throw ConfigError("n_channels must be at least 1");
    }
    if (mismatches.size() != n_channels) {
        throw ConfigError("expected " + std::to_string(n_channels) + " mismatch profiles, got " +
                          std::to_string(mismatches.size()));
    }
    for (const auto& m : mismatches) {
        if (!(m.gain > 0.0) || !finite(m.gain) || !finite(m.delay) || !finite(m.offset)) {
            throw ConfigError("mismatch gain must be positive and all mismatch fields finite");
        }
    }
    mzm.validate();
    if (!(noise_sigma >= 0.0) || !(jitter_sigma >= 0.0)) {
        throw ConfigError("noise_sigma and jitter_sigma must be non-negative");
    }
    if (quant_bits && (*quant_bits < 1 || *quant_bits > 30)) {
        throw ConfigError("quant_bits must be in 1..30");
    }
    if (!(full_scale > 0.0)) {
        throw ConfigError("full_scale must be positive");
    }
}

std::uint64_t FrontEndConfig::hash() const {
    Fnv1a h;
    h.add(sample_rate);
    h.add(static_cast<std::uint64_t>(n_channels));
    h.add(mzm.v_pi);
    h.add(mzm.bias_error);
    h.add(mzm.extinction);
    for (const auto& m : mismatches) {
        h.add(m.delay);
        h.add(m.gain);
        h.add(m.offset);
    }
    h.add(noise_sigma);
    h.add(jitter_sigma);
    h.add(static_cast<std::uint64_t>(quant_bits.value_or(0)));
    h.add(full_scale);
    h.add(rng_seed);
    return h.value();
}

double noise_sigma_for_enob(int bits, double full_scale, double target_enob) {
    const double signal = full_scale * full_scale / 2.0;
    const double total = signal / std::pow(10.0, (6.02 * target_enob + 1.76) / 10.0);
    const double step = full_scale / std::ldexp(1.0, bits - 1);
    const double extra = total - step * step / 12.0;
    return extra > 0.0 ? std::sqrt(extra) : 0.0;
}

FrontEndConfig preset(std::string_view name) {
    FrontEndConfig cfg;
    if (name == "default-20gs") {
        cfg.sample_rate = 20e9;
        cfg.n_channels = 2;
        cfg.mzm = MzmConfig{3.5, 0.1, 1.0};
        cfg.mismatches = {MismatchProfile{0.0, 1.0, 0.0}, MismatchProfile{7e-12, 0.97, 0.002}};
        cfg.quant_bits = 8;
        cfg.full_scale = 0.5;
        cfg.noise_sigma = noise_sigma_for_enob(8, cfg.full_scale, 7.4);
        cfg.jitter_sigma = 26.5e-15;
        cfg.rng_seed = 1;
        return cfg;
    }
    if (name == "low-noise-100ms") {
        cfg.sample_rate = 100e6;
        cfg.n_channels = 1;
        cfg.mzm = MzmConfig{3.5, 0.1, 1.0};
        cfg.mismatches = {MismatchProfile{}};
        cfg.quant_bits = 16;
        cfg.full_scale = 0.5;
        cfg.noise_sigma = noise_sigma_for_enob(16, cfg.full_scale, 9.37);
        cfg.jitter_sigma = 2e-15;
        cfg.rng_seed = 1;
        return cfg;
    }
    throw ConfigError("unknown front-end preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
    return {"default-20gs", "low-noise-100ms"};
}

std::vector<double> ChannelSet::interleaved() const {
    validate();
    const std::size_t n = channels.size();
    const std::size_t len = channel_length();
    std::vector<double> out(n * len);
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t t = 0; t < len; ++t) {
            out[t * n + channel_phase[m]] = channels[m][t];
        }
    }
    return out;
}

void ChannelSet::validate() const {
    if (channels.empty()) {
        throw ShapeError("channel set is empty");
    }
    for (const auto& c : channels) {
        if (c.size() != channels.front().size()) {
            throw ShapeError("all channels must have equal length");
        }
    }
    if (channel_phase.size() != channels.size()) {
        throw ShapeError("channel_phase must list one index per channel");
    }
}

double synth_at(const WaveformSpec& spec, double t) {
    const double a = spec.peak_volts();
    switch (spec.kind) {
    case WaveKind::Sine:
        return a * std::sin(2.0 * kPi * spec.f0 * t + spec.phase);
    case WaveKind::DualTone:
        return a * (std::sin(2.0 * kPi * spec.f0 * t) + std::sin(2.0 * kPi * spec.f1 * t)) / 2.0;
    case WaveKind::Lfm: {
        const double rate = (spec.f1 - spec.f0) / (2.0 * spec.chirp_duration);
        return a * std::sin(2.0 * kPi * (spec.f0 * t + rate * t * t) + spec.phase);
    }
    }
    throw ConfigError("unknown waveform kind");
}

std::vector<double> synth_waveform(const WaveformSpec& spec, std::span<const double> times) {
    spec.validate();
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        if (!finite(t)) {
            throw ConfigError("sample times must be finite");
        }
        out.push_back(synth_at(spec, t));
    }
    return out;
}

double mzm_transfer(double v, const MzmConfig& cfg) {
    return cfg.extinction * 0.5 * (1.0 + std::sin(kPi * v / cfg.v_pi + cfg.bias_error));
}

double centered_transfer(double v, const MzmConfig& cfg) {
    return cfg.extinction * 0.5 * std::sin(kPi * v / cfg.v_pi + cfg.bias_error);
}

ChannelSet sample_frontend(const WaveformSpec& spec, const FrontEndConfig& cfg, std::size_t n_samples) {
    spec.validate();
    // Subtracting the quadrature level (extinction / 2) from the pulse
    // intensity models AC-coupled detection.
    return sample_source([&](double t) { return centered_transfer(synth_at(spec, t), cfg.mzm); }, cfg, n_samples);
}

ChannelSet sample_source(const std::function<double(double)>& source, const FrontEndConfig& cfg,
                         std::size_t n_samples) {
    cfg.validate();
    const std::size_t n = cfg.n_channels;
    if (n_samples % n != 0) {
        throw ShapeError("n_samples (" + std::to_string(n_samples) + ") must be divisible by n_channels (" +
                         std::to_string(n) + ")");
    }
    ChannelSet set;
    set.sample_rate = cfg.sample_rate;
    set.channels.assign(n, std::vector<double>(n_samples / n));
    for (std::size_t m = 0; m < n; ++m) {
        set.channel_phase.push_back(m);
    }

    std::mt19937_64 rng(cfg.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const std::size_t m = k % n;
        const MismatchProfile& mis = cfg.mismatches[m];
        double t = static_cast<double>(k) / cfg.sample_rate + mis.delay;
        if (cfg.jitter_sigma > 0.0) {
            t += cfg.jitter_sigma * gauss(rng);
        }
        double sample = mis.gain * source(t) + mis.offset;
        if (cfg.noise_sigma > 0.0) {
            sample += cfg.noise_sigma * gauss(rng);
        }
        set.channels[m][k / n] = sample;
    }
    if (cfg.quant_bits) {
        for (auto& c : set.channels) {
            c = quantize(c, *cfg.quant_bits, cfg.full_scale);
        }
    }
    return set;
}

std::vector<double> quantize(std::span<const double> x, int bits, double full_scale) {
    if (bits < 1 || bits > 30) {
        throw ConfigError("quantizer bits must be in 1..30");
    }
    if (!(full_scale > 0.0)) {
        throw ConfigError("quantizer full_scale must be positive");
    }
    const double step = full_scale / std::ldexp(1.0, bits - 1);
    const double lowest = -std::ldexp(1.0, bits - 1);
    const double highest = std::ldexp(1.0, bits - 1) - 1.0;
    std::vector<double> out;
    out.reserve(x.size());
    for (double v : x) {
        const double code = std::clamp(std::round(v / step), lowest, highest);
        out.push_back(code * step);
    }
    return out;
}

double alias_frequency(double f, double sample_rate) {
    if (!(f > 0.0) || !(sample_rate > 0.0)) {
        throw ConfigError("alias_frequency needs positive frequency and sample rate");
    }
    const double r = std::fmod(f, sample_rate);
    return r <= sample_rate / 2.0 ? r : sample_rate - r;
}

void write_channel_set(const ChannelSet& set, std::ostream& out) {
    set.validate();
    io::BinaryWriter w(out);
    w.magic("PADC");
    w.put<std::uint16_t>(kChannelSetVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(set.n_channels()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(set.channel_length()));
    w.put<double>(set.sample_rate);
    for (const auto& c : set.channels) {
        for (double v : c) {
            w.put<double>(v);
        }
    }
    w.check();
}

ChannelSet read_channel_set(std::istream& in) {
    io::BinaryReader r(in);
    r.expect_magic("PADC", "channel set");
    const std::uint64_t version_at = r.offset();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kChannelSetVersion) {
        throw FormatError("unsupported channel set version " + std::to_string(version), version_at);
    }
    const std::uint64_t header_at = r.offset();
    const auto n = r.get<std::uint32_t>("n_channels");
    const auto length = r.get<std::uint32_t>("length");
    if (n == 0 || n > 4096) {
        throw FormatError("implausible channel count " + std::to_string(n), header_at);
    }
    ChannelSet set;
    set.sample_rate = r.get<double>("sample_rate");
    set.channels.assign(n, {});
    for (std::uint32_t m = 0; m < n; ++m) {
        set.channel_phase.push_back(m);
        auto& c = set.channels[m];
        c.reserve(length);
        for (std::uint32_t t = 0; t < length; ++t) {
            c.push_back(r.get<double>("samples"));
        }
    }
    r.expect_end();
    return set;
}

void save_channel_set(const ChannelSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_channel_set(set, out);
    out.flush();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

ChannelSet load_channel_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_channel_set(in);
}

void write_channel_set_csv(const ChannelSet& set, std::ostream& out) {
    set.validate();
    for (std::size_t m = 0; m < set.n_channels(); ++m) {
        out << (m ? "," : "") << "ch" << m;
    }
    out << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < set.channel_length(); ++t) {
        for (std::size_t m = 0; m < set.n_channels(); ++m) {
            out << (m ? "," : "") << set.channels[m][t];
        }
        out << '\n';
    }
}

} // namespace padc::frontend
