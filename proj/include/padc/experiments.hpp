#pragma once

// Desk-scale studies: linearization and matching validation, the
// multichannel expandability sweep and before/after ENOB characterization.
// Each study is a pure function of its config; the write_* helpers lay the
// results out on disk.

#include "padc/config.hpp"
#include "padc/dataset.hpp"
#include "padc/metrics.hpp"
#include "padc/nets.hpp"
#include "padc/training.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace padc::experiments {

// Everything one training run needs.
struct StudyConfig {
    frontend::FrontEndConfig frontend;
    dataset::CorpusConfig corpus;
    nets::NetSpec net;
    training::TrainConfig train;
    // Extra tones drawn from the same distribution but never used for training
    // or model selection; the after-training numbers are measured on them.
    std::size_t test_pairs = 10;
};

// 64-pair corpora (10 held out) and 50k steps on the given preset. The
// matching default forces at least two channels.
StudyConfig default_linearization_study(const std::string& preset = "default-20gs");
StudyConfig default_matching_study(const std::string& preset = "default-20gs");

// Before/after view of one test signal.
struct SignalReport {
    frontend::WaveformSpec spec;
    double sample_rate = 0.0;
    std::vector<double> input;      // what the net sees (interleaved for matching)
    std::vector<double> output;     // net output
    std::vector<double> reference;  // ideal linear signal
    metrics::MetricsReport before;  // of `input`
    metrics::MetricsReport after;   // of `output`
    // Mean-removed signal-to-distortion ratio against `reference`.
    double sdr_before_db = 0.0;
    double sdr_after_db = 0.0;
    // Strongest unwanted spectral cluster relative to the wanted tones
    // (dual tones: harmonics and intermodulation; matching: mismatch images).
    double spur_before_dbc = 0.0;
    double spur_after_dbc = 0.0;
    // LFM only: mean STFT power along the mismatch image ridge relative to the
    // signal ridge.
    double sideband_before_dbc = 0.0;
    double sideband_after_dbc = 0.0;
};

// Nets are scored on the test tones with the parameters that had the lowest
// validation loss.
struct LinearizationStudy {
    StudyConfig config;
    training::TrainResult training;
    double mean_test_sinad_before_db = 0.0;
    double mean_test_sinad_after_db = 0.0;
    SignalReport sine;       // first test tone
    SignalReport dual_tone;  // never seen in training
    SignalReport lfm;        // never seen in training
};

struct MatchingStudy {
    StudyConfig config;
    training::TrainResult training;
    double mean_test_sinad_before_db = 0.0;
    double mean_test_sinad_after_db = 0.0;
    // Mean over test tones of the mismatch-image level before minus after.
    double mean_spur_suppression_db = 0.0;
    SignalReport sine;
    SignalReport lfm;
};

LinearizationStudy run_linearization_study(const StudyConfig& cfg, const training::ValidationHook& hook = {});
MatchingStudy run_matching_study(const StudyConfig& cfg, const training::ValidationHook& hook = {});

// Corpus of test tones for a study: same settings, independent seed, all
// pairs in `valid`.
dataset::Corpus test_corpus(const StudyConfig& cfg);

// Mean SINAD over a split of the raw inputs (interleaved for matching pairs)
// or, with a net, of its outputs.
double mean_input_sinad(const dataset::Corpus& corpus, std::span<const std::size_t> indices);
double mean_output_sinad(const nn::Net& net, const dataset::Corpus& corpus, std::span<const std::size_t> indices);

// Strongest mismatch image k*fs/N +- f0 (k = 1..N-1) relative to the
// fundamental, Blackman window, +-3-bin clusters. For N = 2 this is the
// fs/2 - f0 spur.
double mismatch_spur_dbc(std::span<const double> x, double f0, double sample_rate, std::size_t n_channels);

struct SweepConfig {
    frontend::FrontEndConfig frontend;  // rate, noise and quantizer; channels and mismatches are replaced
    dataset::CorpusConfig corpus;       // length is ignored, see total_length
    nets::NetSpec net;                  // n_inputs is replaced per row
    training::TrainConfig train;
    std::size_t min_channels = 2;
    std::size_t max_channels = 8;
    std::size_t draws = 10;
    std::size_t total_length = 840;     // interleaved samples per pair, divisible by every N
    double nominal_delay = 7e-12;       // at the 20 GS/s reference rate; scaled by 20e9 / sample_rate
    double delay_spread = 0.5;          // delays ~ U[(1 - spread), (1 + spread)] * nominal
    double gain_tolerance = 0.05;       // gains ~ 1 + U[-tol, tol]
    bool control = false;               // add one zero-mismatch row per N
    std::size_t parallel = 1;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

SweepConfig default_sweep(const std::string& preset = "default-20gs");

struct SweepRow {
    std::size_t n_channels = 0;
    std::size_t draw_index = 0;
    bool control = false;
    std::vector<double> delays;  // seconds, channel 0 first
    std::vector<double> gains;
    std::uint64_t seed = 0;
    double input_mean_valid_sinad_db = 0.0;
    double final_mean_valid_sinad_db = 0.0;
    std::size_t steps = 0;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // sorted by (n_channels, control first, draw_index)

    bool all_ok() const;
};

// Effective worker count: min(requested, PADC_THREADS if set), at least 1.
std::size_t effective_parallelism(std::size_t requested);

// Mismatch draw of one row. Channel 0 is the timing reference.
frontend::FrontEndConfig sweep_frontend(const SweepConfig& cfg, std::size_t n_channels, std::uint64_t row_seed,
                                        bool control);
std::uint64_t sweep_row_seed(std::uint64_t seed, std::size_t n_channels, std::size_t draw_index, bool control);

using RowHook = std::function<void(const SweepRow&)>;

SweepResult run_multichannel_sweep(const SweepConfig& cfg, const RowHook& on_row = {});

struct EnobConfig {
    frontend::FrontEndConfig frontend;
    dataset::CorpusConfig linearization_corpus;
    dataset::CorpusConfig matching_corpus;  // ignored for single-channel front-ends
    nets::NetSpec linearization_net;
    nets::NetSpec matching_net;
    training::TrainConfig train;
    std::vector<double> tones;  // Hz, may lie above the Nyquist frequency
    double tone_dbm = 10.0;
    std::size_t record_length = 4000;  // interleaved samples per test record

    StudyConfig linearization_study() const;
    StudyConfig matching_study() const;
    void validate() const;
};

EnobConfig default_enob(const std::string& preset = "default-20gs");

struct EnobRow {
    double tone_hz = 0.0;
    double alias_hz = 0.0;
    metrics::MetricsReport before;
    metrics::MetricsReport after;
};

struct EnobResult {
    training::TrainResult linearization;
    std::optional<training::TrainResult> matching;
    std::vector<EnobRow> rows;
};

// Trains the cascade (per-channel linearization, then matching) and measures
// each tone through it.
EnobResult run_enob_characterization(const EnobConfig& cfg, const training::ValidationHook& hook = {});

// Measures tones through an already trained cascade.
std::vector<EnobRow> measure_enob(const EnobConfig& cfg, const nn::Net& linearization, const nn::Net* matching);

// Resolved config trees, one section per module plus [sweep] / [enob]
// where needed, and the matching readers. Readers take the whole file.
config::Tree study_tree(const StudyConfig& cfg);
config::Tree sweep_tree(const SweepConfig& cfg);
config::Tree enob_tree(const EnobConfig& cfg);
StudyConfig read_study(const config::Tree& root, StudyConfig base);
SweepConfig read_sweep(const config::Tree& root, SweepConfig base);
EnobConfig read_enob(const config::Tree& root, EnobConfig base);

// Adds a [run] section (study name, tool version, config hash) to a resolved
// config tree. Feeding the result back as a config file reproduces the run.
config::Tree manifest(const std::string& study, config::Tree resolved);

void write_signal_report(const SignalReport& r, const std::filesystem::path& dir, const std::string& stem);
void write_sweep_csv(const SweepResult& r, std::ostream& out);
void write_enob_csv(const std::vector<EnobRow>& rows, std::ostream& out);

} // namespace padc::experiments
