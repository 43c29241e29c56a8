#include "padc/metrics.hpp"

#include "padc/errors.hpp"
#include "padc/fft.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace padc::metrics {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMinLength = 64;

void check_input(std::span<const double> x, double sample_rate) {
    if (x.size() < kMinLength) {
        throw ShapeError("tone metrics need at least " + std::to_string(kMinLength) + " samples, got " +
                         std::to_string(x.size()));
    }
    if (!(sample_rate > 0.0)) {
        throw ConfigError("sample_rate must be positive");
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw RangeError("sequence contains non-finite samples");
        }
    }
}

void check_options(const ToneOptions& opts) {
    if (opts.cluster_halfwidth < 0 || opts.dc_bins < 0) {
        throw ConfigError("cluster_halfwidth and dc_bins must be non-negative");
    }
}

struct ToneSplit {
    std::size_t peak = 0;
    double fundamental = 0.0;
    double rest = 0.0;       // everything outside DC and the fundamental
    double largest_spur = 0.0;
};

// Sums a +/- halfwidth cluster around `center`, skipping bins flagged in
// `taken`, and marks the bins it used.
double take_cluster(const std::vector<double>& p, std::vector<bool>& taken, std::size_t center, int halfwidth) {
    const std::size_t lo = center > static_cast<std::size_t>(halfwidth) ? center - halfwidth : 0;
    const std::size_t hi = std::min(p.size() - 1, center + halfwidth);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        if (!taken[k]) {
            sum += p[k];
            taken[k] = true;
        }
    }
    return sum;
}

std::size_t argmax_free(const std::vector<double>& p, const std::vector<bool>& taken) {
    std::size_t best = p.size();
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!taken[k] && (best == p.size() || p[k] > p[best])) {
            best = k;
        }
    }
    return best;
}

ToneSplit split_tone(const std::vector<double>& p, const ToneOptions& opts) {
    const std::size_t dc_last = static_cast<std::size_t>(opts.dc_bins);
    if (p.size() <= dc_last + 1) {
        throw ShapeError("record too short for the configured DC exclusion");
    }
    std::vector<bool> taken(p.size(), false);
    for (std::size_t k = 0; k <= dc_last; ++k) {
        taken[k] = true;
    }
    ToneSplit s;
    s.peak = argmax_free(p, taken);
    s.fundamental = take_cluster(p, taken, s.peak, opts.cluster_halfwidth);

    std::vector<bool> spur_taken = taken;
    const std::size_t spur = argmax_free(p, spur_taken);
    if (spur < p.size()) {
        s.largest_spur = take_cluster(p, spur_taken, spur, opts.cluster_halfwidth);
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!taken[k]) {
            s.rest += p[k];
        }
    }
    if (!(s.fundamental > 0.0) || s.fundamental < 2.0 * s.largest_spur) {
        throw AmbiguityError("no dominant tone: fundamental is less than 3 dB above the next spectral cluster");
    }
    return s;
}

// Power ratios are floored relative to the fundamental so that a perfect
// tone yields a large finite figure rather than infinity.
double ratio_db(double signal, double other) {
    return 10.0 * std::log10(signal / std::max(other, signal * 1e-30));
}

} // namespace

std::vector<double> make_window(Window kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double phase = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
        switch (kind) {
        case Window::Rectangular:
            break;
        case Window::Hann:
            w[i] = 0.5 - 0.5 * std::cos(phase);
            break;
        case Window::Blackman:
            w[i] = 0.42 - 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
            break;
        }
    }
    return w;
}

Spectrum power_spectrum(std::span<const double> x, double sample_rate, Window window) {
    const std::size_t n = x.size();
    if (n < 2) {
        throw ShapeError("power spectrum needs at least 2 samples");
    }
    const std::vector<double> w = make_window(window, n);
    std::vector<double> xw(n);
    double w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xw[i] = x[i] * w[i];
        w2 += w[i] * w[i];
    }
    const auto bins = fft::rfft(xw);
    Spectrum s;
    s.frequency.resize(bins.size());
    s.power.resize(bins.size());
    const double norm = 1.0 / (static_cast<double>(n) * w2);
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
        s.frequency[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n);
        s.power[k] = std::norm(bins[k]) * norm * (edge ? 1.0 : 2.0);
    }
    return s;
}

double sinad(std::span<const double> x, double sample_rate, const ToneOptions& opts) {
    check_input(x, sample_rate);
    check_options(opts);
    const Spectrum s = power_spectrum(x, sample_rate, opts.sinad_window);
    const ToneSplit t = split_tone(s.power, opts);
    return ratio_db(t.fundamental, t.rest);
}

double sfdr(std::span<const double> x, double sample_rate, const ToneOptions& opts) {
    check_input(x, sample_rate);
    check_options(opts);
    const Spectrum s = power_spectrum(x, sample_rate, opts.sfdr_window);
    const ToneSplit t = split_tone(s.power, opts);
    return ratio_db(t.fundamental, t.largest_spur);
}

double enob(double sinad_db) {
    return (sinad_db - 1.76) / 6.02;
}

double sinad_for_enob(double bits) {
    return 6.02 * bits + 1.76;
}

double fundamental_frequency(std::span<const double> x, double sample_rate, const ToneOptions& opts) {
    check_input(x, sample_rate);
    check_options(opts);
    const Spectrum s = power_spectrum(x, sample_rate, opts.sinad_window);
    return s.frequency[split_tone(s.power, opts).peak];
}

Stft stft(std::span<const double> x, double sample_rate, std::size_t window_len, std::size_t hop) {
    if (window_len < 2 || window_len > x.size()) {
        throw ConfigError("stft window_len must be in [2, sequence length]");
    }
    if (hop < 1) {
        throw ConfigError("stft hop must be at least 1");
    }
    if (!(sample_rate > 0.0)) {
        throw ConfigError("sample_rate must be positive");
    }
    Stft grid;
    for (std::size_t start = 0; start + window_len <= x.size(); start += hop) {
        const Spectrum s = power_spectrum(x.subspan(start, window_len), sample_rate, Window::Hann);
        if (grid.frequency.empty()) {
            grid.frequency = s.frequency;
        }
        std::vector<double> row(s.power.size());
        for (std::size_t k = 0; k < row.size(); ++k) {
            row[k] = 10.0 * std::log10(std::max(s.power[k], 1e-300));
        }
        grid.frame_time.push_back((static_cast<double>(start) + 0.5 * static_cast<double>(window_len)) / sample_rate);
        grid.power_db.push_back(std::move(row));
    }
    return grid;
}

MetricsReport analyze(std::span<const double> x, double sample_rate, const ToneOptions& opts,
                      std::optional<StftRequest> stft_request) {
    check_input(x, sample_rate);
    check_options(opts);
    MetricsReport r;
    const Spectrum s = power_spectrum(x, sample_rate, opts.sinad_window);
    const ToneSplit t = split_tone(s.power, opts);
    r.sinad_db = ratio_db(t.fundamental, t.rest);
    r.enob_bits = enob(r.sinad_db);
    r.sfdr_db = sfdr(x, sample_rate, opts);
    r.fundamental_hz = s.frequency[t.peak];
    r.spectrum_frequency = s.frequency;
    r.spectrum_db.reserve(s.power.size());
    for (double p : s.power) {
        r.spectrum_db.push_back(10.0 * std::log10(std::max(p, 1e-300)));
    }
    if (stft_request) {
        r.stft = stft(x, sample_rate, stft_request->window_len, stft_request->hop);
    }
    return r;
}

void write_spectrum_csv(const MetricsReport& report, std::ostream& out) {
    out << "frequency_hz,power_db\n" << std::setprecision(17);
    for (std::size_t k = 0; k < report.spectrum_db.size(); ++k) {
        out << report.spectrum_frequency[k] << ',' << report.spectrum_db[k] << '\n';
    }
}

void write_stft_csv(const Stft& grid, std::ostream& out) {
    out << "frame,time_s,frequency_hz,power_db\n" << std::setprecision(17);
    for (std::size_t f = 0; f < grid.power_db.size(); ++f) {
        for (std::size_t k = 0; k < grid.frequency.size(); ++k) {
            out << f << ',' << grid.frame_time[f] << ',' << grid.frequency[k] << ',' << grid.power_db[f][k] << '\n';
        }
    }
}

} // namespace padc::metrics
