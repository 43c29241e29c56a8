#pragma once

// Real-input DFT helpers on top of FFTW. Plans are cached per length and
// shared between threads; execution itself is re-entrant.

#include <complex>
#include <span>
#include <vector>

namespace padc::fft {

// Unnormalized forward transform, bins 0..n/2.
std::vector<std::complex<double>> rfft(std::span<const double> x);

// Inverse of rfft (includes the 1/n factor). `n` is the time-domain length;
// the imaginary parts of bin 0 and, for even n, bin n/2 are ignored.
std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n);

} // namespace padc::fft
