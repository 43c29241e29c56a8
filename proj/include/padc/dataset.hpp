#pragma once

// Training corpora of (original, reference) pairs, and the reference oracles
// that build clean targets from distorted tones.

#include "padc/frontend.hpp"
#include "padc/nn.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace padc::dataset {

// Bins on each side of an ideal bin that belong to a tone or spur.
inline constexpr int kClusterHalfwidth = 2;

struct ReferenceDiagnostics {
    double fundamental_before = 0.0;  // one-sided power of the fundamental cluster
    double removed = 0.0;             // power of every zeroed cluster
    double fundamental_after = 0.0;
    std::size_t fundamental_bin = 0;
    std::vector<std::size_t> removed_bins;
};

// Zeroes the clusters of harmonics 2..max_harmonic (at their aliased
// positions) and folds their power into the fundamental cluster. Bin 0 is
// never removed so DC offsets survive.
std::vector<double> harmonic_removal_reference(std::span<const double> x, double f0, double sample_rate,
                                               int max_harmonic = 5, ReferenceDiagnostics* diag = nullptr);

// Same procedure for interleaving spurs: images of +/-f0 + m*fs/N and the
// offset tones m*fs/N, m = 1..N-1. Offset tones that coincide with the
// fundamental are left in place.
std::vector<double> matching_reference(std::span<const double> x, double f0, double sample_rate,
                                       std::size_t n_channels, ReferenceDiagnostics* diag = nullptr);

// Gain g for which g * synth(t) has the same AC power as the noise-free,
// mismatch-free modulator output. Closed form for sines; other waveforms use
// an n-sample record on the aggregate grid.
double power_equivalent_gain(const frontend::WaveformSpec& spec, const frontend::MzmConfig& mzm,
                             double sample_rate = 0.0, std::size_t n = 0);

// g * synth(k / fs) for k < n: the linearly sampled ideal waveform.
std::vector<double> analytic_reference(const frontend::WaveformSpec& spec, const frontend::FrontEndConfig& cfg,
                                       std::size_t n);

// Nearest frequency on the bin grid of an n-point DFT at sample_rate.
double snap_to_bin(double f, double sample_rate, std::size_t n);

enum class MatchingMode {
    // Originals are mismatched channel samples of the clean (linear) tone;
    // the reference is the analytic interleaved tone.
    CleanTones,
    // Originals are per-channel harmonic-removal references of the distorted
    // front-end output; the reference is matching_reference of their
    // interleave.
    Cascade,
};

struct CorpusConfig {
    std::size_t n_pairs = 417;
    std::size_t n_valid = 50;
    std::size_t length = 1000;  // per channel
    double f_min = 0.0;         // Hz
    double f_max = 0.0;         // Hz; 0 means the aggregate Nyquist frequency
    std::optional<std::pair<double, double>> stop_band;
    double dbm_min = -2.0;
    double dbm_max = 15.0;
    bool snap_to_bins = true;
    int max_harmonic = 5;
    MatchingMode matching_mode = MatchingMode::CleanTones;
    std::uint64_t rng_seed = 0;

    void validate(const frontend::FrontEndConfig& fe) const;
};

// Tone ranges that go with each front-end preset.
CorpusConfig default_corpus_config(std::string_view preset_name);

struct DataPair {
    std::vector<std::vector<double>> original;  // 1 sequence, or one per channel
    std::vector<double> reference;
    frontend::WaveformSpec spec;
    std::uint64_t config_hash = 0;
    std::size_t source_channel = 0;  // linearization pairs only
};

struct Corpus {
    nn::NetKind kind = nn::NetKind::Linearization;
    frontend::FrontEndConfig frontend;
    CorpusConfig config;
    double sample_rate = 0.0;  // rate of the reference grid
    std::vector<DataPair> pairs;
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    std::uint64_t split_seed = 0;

    // Rate of each original sequence.
    double original_rate() const;
    void validate() const;
};

Corpus gen_linearization_corpus(const frontend::FrontEndConfig& cfg, const CorpusConfig& corpus);
Corpus gen_matching_corpus(const frontend::FrontEndConfig& cfg, const CorpusConfig& corpus);

Corpus split_dataset(Corpus corpus, std::size_t n_train, std::size_t n_valid, std::uint64_t rng_seed);

// Corpus directory: manifest.ini, pairs.csv (per-pair metadata) and
// pair_NNNNN.orig.padc / pair_NNNNN.ref.padc channel-set records.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir, bool with_csv = false);
Corpus load_corpus(const std::filesystem::path& dir);

// index,original,reference with originals interleaved onto the reference grid.
void write_pair_csv(const DataPair& pair, std::ostream& out);

} // namespace padc::dataset
