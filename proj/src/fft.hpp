#pragma once

#include <complex>
#include <span>
#include <vector>

namespace crx::fft {

// Thin deterministic wrapper over FFTW3. Plans are cached per transform
// size (FFTW_ESTIMATE | FFTW_UNALIGNED) behind a mutex; execution uses the
// new-array interface and is safe to call from multiple threads.

// Forward real FFT: n real samples -> n/2+1 complex bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

// Inverse of rfft, normalized by 1/n so irfft(rfft(x), n) == x.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, size_t n);

// Exact band-limiting by spectral masking over the whole signal.
// A bin at frequency f survives when it lies inside (f_lo, f_hi) with the
// given edge inclusion; the DC bin is kept only if include_lo and f_lo <= 0.
std::vector<double> bandpass(std::span<const double> x, double rate_hz,
                             double f_lo, double f_hi,
                             bool include_lo, bool include_hi);

// Band-limited analytic signal: positive-frequency bins inside the band are
// doubled, everything else (including DC and negative frequencies) is
// zeroed. real() is the band-passed signal, arg() its instantaneous phase.
std::vector<std::complex<double>> analytic_band(std::span<const double> x, double rate_hz,
                                                double f_lo, double f_hi);

// Fourier-domain resampling to round(n * dst/src) samples with a brick-wall
// anti-alias cutoff at cutoff_frac * dst_rate. Requires dst <= src.
std::vector<double> resample_fourier(std::span<const double> x, double src_rate_hz,
                                     double dst_rate_hz, double cutoff_frac);

}  // namespace crx::fft
