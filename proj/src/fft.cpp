#include "fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

#include "errors.hpp"

namespace crx::fft {

namespace {

// FFTW planning is not thread safe; execution via the new-array interface is.
// Plans are created once per size with FFTW_UNALIGNED so they can run on any
// caller-provided buffers.
class PlanCache {
public:
    fftw_plan r2c(size_t n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = r2c_.find(n);
        if (it != r2c_.end()) return it->second;
        std::vector<double> in(n);
        std::vector<fftw_complex> out(n / 2 + 1);
        fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                           FFTW_ESTIMATE | FFTW_UNALIGNED);
        r2c_[n] = p;
        return p;
    }

    fftw_plan c2r(size_t n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = c2r_.find(n);
        if (it != c2r_.end()) return it->second;
        std::vector<fftw_complex> in(n / 2 + 1);
        std::vector<double> out(n);
        fftw_plan p = fftw_plan_dft_c2r_1d(static_cast<int>(n), in.data(), out.data(),
                                           FFTW_ESTIMATE | FFTW_UNALIGNED);
        c2r_[n] = p;
        return p;
    }

    fftw_plan c2c_backward(size_t n) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = c2c_back_.find(n);
        if (it != c2c_back_.end()) return it->second;
        std::vector<fftw_complex> in(n), out(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in.data(), out.data(),
                                       FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        c2c_back_[n] = p;
        return p;
    }

private:
    std::mutex mutex_;
    std::map<size_t, fftw_plan> r2c_, c2r_, c2c_back_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

constexpr double kEdgeEps = 1e-9;

bool in_band(double f, double f_lo, double f_hi, bool include_lo, bool include_hi) {
    const bool above = include_lo ? (f >= f_lo - kEdgeEps) : (f > f_lo + kEdgeEps);
    const bool below = include_hi ? (f <= f_hi + kEdgeEps) : (f < f_hi - kEdgeEps);
    return above && below;
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const size_t n = x.size();
    require(n > 0, CRX_E_EMPTY_INPUT, "rfft: empty input");
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(cache().r2c(n), in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, size_t n) {
    require(n > 0 && spectrum.size() == n / 2 + 1, CRX_E_LENGTH_MISMATCH,
            "irfft: spectrum length does not match n");
    // c2r destroys its input, so copy.
    std::vector<std::complex<double>> in(spectrum.begin(), spectrum.end());
    std::vector<double> out(n);
    fftw_execute_dft_c2r(cache().c2r(n), reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= scale;
    return out;
}

std::vector<double> bandpass(std::span<const double> x, double rate_hz,
                             double f_lo, double f_hi,
                             bool include_lo, bool include_hi) {
    const size_t n = x.size();
    require(n > 1, CRX_E_TOO_SHORT, "bandpass: need at least 2 samples");
    auto spec = rfft(x);
    const double df = rate_hz / static_cast<double>(n);
    for (size_t k = 0; k < spec.size(); ++k) {
        const double f = df * static_cast<double>(k);
        if (!in_band(f, f_lo, f_hi, include_lo, include_hi)) spec[k] = 0.0;
    }
    return irfft(spec, n);
}

std::vector<std::complex<double>> analytic_band(std::span<const double> x, double rate_hz,
                                                double f_lo, double f_hi) {
    const size_t n = x.size();
    require(n > 1, CRX_E_TOO_SHORT, "analytic_band: need at least 2 samples");
    auto spec = rfft(x);  // bins 0..n/2

    std::vector<std::complex<double>> full(n, 0.0);
    const double df = rate_hz / static_cast<double>(n);
    for (size_t k = 1; k + 1 <= n - k; ++k) {  // strictly positive, non-Nyquist bins
        const double f = df * static_cast<double>(k);
        if (in_band(f, f_lo, f_hi, true, true)) full[k] = 2.0 * spec[k];
    }

    std::vector<std::complex<double>> out(n);
    fftw_execute_dft(cache().c2c_backward(n), reinterpret_cast<fftw_complex*>(full.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= scale;
    return out;
}

std::vector<double> resample_fourier(std::span<const double> x, double src_rate_hz,
                                     double dst_rate_hz, double cutoff_frac) {
    require(src_rate_hz > 0 && dst_rate_hz > 0, CRX_E_INVALID_RATE,
            "resample: rates must be positive");
    require(dst_rate_hz <= src_rate_hz + 1e-12, CRX_E_UPSAMPLING_REQUESTED,
            "resample: target rate exceeds source rate");
    const size_t n = x.size();
    require(n > 1, CRX_E_TOO_SHORT, "resample: need at least 2 samples");

    if (std::abs(dst_rate_hz - src_rate_hz) < 1e-9 * src_rate_hz)
        return std::vector<double>(x.begin(), x.end());

    const auto m = static_cast<size_t>(
        std::llround(static_cast<double>(n) * dst_rate_hz / src_rate_hz));
    require(m >= 2, CRX_E_TOO_SHORT, "resample: output would be shorter than 2 samples");

    auto spec = rfft(x);
    // Input and output share the same bin spacing (same duration); copy the
    // surviving low-frequency bins and apply the anti-alias cutoff.
    const double df = src_rate_hz / static_cast<double>(n);
    const double cutoff = cutoff_frac * dst_rate_hz;
    std::vector<std::complex<double>> out_spec(m / 2 + 1, 0.0);
    const size_t n_copy = std::min(spec.size(), out_spec.size());
    for (size_t k = 0; k < n_copy; ++k) {
        const double f = df * static_cast<double>(k);
        if (f <= cutoff + kEdgeEps) out_spec[k] = spec[k];
    }
    // Never carry a bare Nyquist bin into the shorter spectrum.
    if (m % 2 == 0 && !out_spec.empty()) {
        const double f_nyq = df * static_cast<double>(m / 2);
        if (f_nyq > cutoff + kEdgeEps) out_spec[m / 2] = 0.0;
    }

    std::vector<std::complex<double>> in(out_spec.begin(), out_spec.end());
    std::vector<double> out(m);
    fftw_execute_dft_c2r(cache().c2r(m), reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
    const double scale = 1.0 / static_cast<double>(n);  // preserves amplitude
    for (double& v : out) v *= scale;
    return out;
}

}  // namespace crx::fft
