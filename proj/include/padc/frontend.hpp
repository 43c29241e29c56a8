#pragma once

// Simulation of the photonic sampling front-end and the electronic quantizers:
// analytic RF waveforms, the electro-optic (MZM) transfer, time-division
// demultiplexing into N channels with per-channel mismatch, jitter, noise and
// uniform quantization.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace padc::frontend {

enum class WaveKind { Sine, DualTone, Lfm };

struct WaveformSpec {
    WaveKind kind = WaveKind::Sine;
    double f0 = 0.0;              // Hz
    double f1 = 0.0;              // Hz; second tone or LFM end frequency
    double amplitude = 0.0;       // volts peak
    double phase = 0.0;           // radians
    double chirp_duration = 0.0;  // seconds, LFM only
    // When set, overrides `amplitude` (50 ohm convention).
    std::optional<double> power_dbm;

    static WaveformSpec sine(double f0, double amplitude, double phase = 0.0);
    static WaveformSpec dual_tone(double f0, double f1, double amplitude);
    static WaveformSpec lfm(double f0, double f1, double amplitude, double chirp_duration, double phase = 0.0);

    double peak_volts() const;
    void validate() const;
};

double dbm_to_peak_volts(double dbm);
double peak_volts_to_dbm(double volts);

struct MzmConfig {
    double v_pi = 3.5;        // half-wave voltage
    double bias_error = 0.0;  // radians away from quadrature
    double extinction = 1.0;  // modulation-depth ceiling in (0, 1]

    void validate() const;
};

struct MismatchProfile {
    double delay = 0.0;   // seconds
    double gain = 1.0;
    double offset = 0.0;  // volts
};

struct FrontEndConfig {
    double sample_rate = 20e9;  // aggregate
    std::size_t n_channels = 1;
    MzmConfig mzm;
    std::vector<MismatchProfile> mismatches{MismatchProfile{}};
    double noise_sigma = 0.0;   // volts, per sample
    double jitter_sigma = 0.0;  // seconds
    std::optional<int> quant_bits;
    double full_scale = 0.5;  // volts
    std::uint64_t rng_seed = 0;

    void validate() const;
    double channel_rate() const { return sample_rate / static_cast<double>(n_channels); }
    // Stable 64-bit digest of every field, used to tag data pairs.
    std::uint64_t hash() const;
};

// Presets: "default-20gs" (two-channel 20 GS/s setup, 8-bit quantizer with
// noise tuned to ~7.4 ENOB, 26.5 fs jitter) and "low-noise-100ms" (single
// channel 100 MS/s, 2 fs jitter, quantizer noise tuned to ~9.37 ENOB).
FrontEndConfig preset(std::string_view name);
std::vector<std::string> preset_names();

// Noise sigma that brings an ideal `bits` quantizer driven by a full-scale
// sine down to `target_enob`.
double noise_sigma_for_enob(int bits, double full_scale, double target_enob);

struct ChannelSet {
    std::vector<std::vector<double>> channels;
    double sample_rate = 0.0;  // aggregate
    std::vector<std::size_t> channel_phase;

    std::size_t n_channels() const { return channels.size(); }
    std::size_t channel_length() const { return channels.empty() ? 0 : channels.front().size(); }
    std::vector<double> interleaved() const;
    void validate() const;
};

double synth_at(const WaveformSpec& spec, double t);
std::vector<double> synth_waveform(const WaveformSpec& spec, std::span<const double> times);

double mzm_transfer(double v, const MzmConfig& cfg);

// Noise-free, mismatch-free front-end output for drive voltage v (before
// quantization): extinction/2 * sin(pi v / v_pi + bias_error).
double centered_transfer(double v, const MzmConfig& cfg);

ChannelSet sample_frontend(const WaveformSpec& spec, const FrontEndConfig& cfg, std::size_t n_samples);

// The same acquisition chain (skew, jitter, gain, offset, noise, quantizer)
// applied to an arbitrary analog signal in place of the modulator output.
ChannelSet sample_source(const std::function<double(double)>& source, const FrontEndConfig& cfg,
                         std::size_t n_samples);

std::vector<double> quantize(std::span<const double> x, int bits, double full_scale);

double alias_frequency(double f, double sample_rate);

// ChannelSet file: "PADC", u16 version, u32 n_channels, u32 length, f64
// sample_rate, then each channel's samples as f64, all little-endian.
inline constexpr std::uint16_t kChannelSetVersion = 1;

void write_channel_set(const ChannelSet& set, std::ostream& out);
ChannelSet read_channel_set(std::istream& in);
void save_channel_set(const ChannelSet& set, const std::filesystem::path& path);
ChannelSet load_channel_set(const std::filesystem::path& path);
void write_channel_set_csv(const ChannelSet& set, std::ostream& out);

} // namespace padc::frontend
