#pragma once

// Single-tone converter metrics (SINAD, ENOB, SFDR), one-sided power spectra
// and short-time spectra.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace padc::metrics {

enum class Window { Rectangular, Hann, Blackman };

// Periodic (DFT-even) window of length n.
std::vector<double> make_window(Window kind, std::size_t n);

// One-sided power spectrum normalized so that, for the rectangular window,
// the bins sum to the mean square of x. Bin k sits at k * sample_rate / n.
struct Spectrum {
    std::vector<double> frequency;
    std::vector<double> power;
};

Spectrum power_spectrum(std::span<const double> x, double sample_rate, Window window);

struct ToneOptions {
    Window sinad_window = Window::Hann;
    Window sfdr_window = Window::Blackman;
    // Bins on each side of the peak that belong to a tone.
    int cluster_halfwidth = 3;
    // Bins 0..dc_bins are ignored entirely.
    int dc_bins = 3;
};

double sinad(std::span<const double> x, double sample_rate, const ToneOptions& opts = {});
double sfdr(std::span<const double> x, double sample_rate, const ToneOptions& opts = {});
double enob(double sinad_db);
double sinad_for_enob(double bits);

// Frequency of the dominant non-DC tone under the SINAD window.
double fundamental_frequency(std::span<const double> x, double sample_rate, const ToneOptions& opts = {});

// power_db[frame][bin]; frame f covers samples [f*hop, f*hop + window_len).
struct Stft {
    std::vector<double> frame_time;
    std::vector<double> frequency;
    std::vector<std::vector<double>> power_db;
};

Stft stft(std::span<const double> x, double sample_rate, std::size_t window_len, std::size_t hop);

struct MetricsReport {
    double sinad_db = 0.0;
    double enob_bits = 0.0;
    double sfdr_db = 0.0;
    double fundamental_hz = 0.0;
    std::vector<double> spectrum_frequency;
    std::vector<double> spectrum_db;
    std::optional<Stft> stft;
};

struct StftRequest {
    std::size_t window_len = 256;
    std::size_t hop = 64;
};

MetricsReport analyze(std::span<const double> x, double sample_rate, const ToneOptions& opts = {},
                      std::optional<StftRequest> stft_request = std::nullopt);

void write_spectrum_csv(const MetricsReport& report, std::ostream& out);
void write_stft_csv(const Stft& grid, std::ostream& out);

} // namespace padc::metrics
