#include "padc/fft.hpp"

#include "padc/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace padc::fft {

namespace {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> allocate(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
    if (!p) {
        throw std::bad_alloc();
    }
    return FftwBuffer<T>(p);
}

// FFTW's planner is not thread-safe, so every plan is created under this lock
// and kept for the life of the process.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan cached_plan(std::size_t n, bool forward) {
    static std::map<std::pair<std::size_t, bool>, fftw_plan> plans;
    std::lock_guard lock(planner_mutex());
    auto it = plans.find({n, forward});
    if (it != plans.end()) {
        return it->second;
    }
    auto real = allocate<double>(n);
    auto cplx = allocate<fftw_complex>(n / 2 + 1);
    const int len = static_cast<int>(n);
    fftw_plan plan = forward ? fftw_plan_dft_r2c_1d(len, real.get(), cplx.get(), FFTW_ESTIMATE)
                             : fftw_plan_dft_c2r_1d(len, cplx.get(), real.get(), FFTW_ESTIMATE);
    if (!plan) {
        throw RunError("FFTW could not plan a transform of length " + std::to_string(n));
    }
    plans.emplace(std::make_pair(n, forward), plan);
    return plan;
}

} // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) {
        throw ShapeError("rfft of an empty sequence");
    }
    auto in = allocate<double>(n);
    auto out = allocate<fftw_complex>(n / 2 + 1);
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute_dft_r2c(cached_plan(n, true), in.get(), out.get());
    std::vector<std::complex<double>> bins(n / 2 + 1);
    for (std::size_t k = 0; k < bins.size(); ++k) {
        bins[k] = {out[k][0], out[k][1]};
    }
    return bins;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n) {
    if (n == 0 || bins.size() != n / 2 + 1) {
        throw ShapeError("irfft needs n/2 + 1 bins for a length-n output");
    }
    auto in = allocate<fftw_complex>(bins.size());
    auto out = allocate<double>(n);
    for (std::size_t k = 0; k < bins.size(); ++k) {
        in[k][0] = bins[k].real();
        in[k][1] = bins[k].imag();
    }
    in[0][1] = 0.0;
    if (n % 2 == 0) {
        in[n / 2][1] = 0.0;
    }
    // c2r destroys its input, which is our private copy.
    fftw_execute_dft_c2r(cached_plan(n, false), in.get(), out.get());
    std::vector<double> x(out.get(), out.get() + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : x) {
        v *= scale;
    }
    return x;
}

} // namespace padc::fft
