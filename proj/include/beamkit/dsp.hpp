#ifndef BEAMKIT_DSP_HPP
#define BEAMKIT_DSP_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace beamkit::dsp {

std::size_t next_pow2(std::size_t n);

// In-place iterative radix-2 FFT; x.size() must be a power of two.
// inverse=true applies the 1/N scaling.
void fft(std::vector<std::complex<double>>& x, bool inverse = false);

// Real FFT convenience: forward transform of a zero-padded real signal.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t nfft);

// Linear convolution via FFT, length a.size() + b.size() - 1.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

// y[k] ~= x[k - shift] for fractional shift (band-limited interpolation via
// FFT phase ramp). Output has the same length as the input; the signal must
// have decayed near both ends for the circular padding to be harmless.
std::vector<double> fractional_shift(std::span<const double> x, double shift_samples);

// sum_l taps[l] * exp(-j*omega*l) at normalized omega = 2*pi*f/fs.
std::complex<double> dtft(std::span<const double> taps, double omega);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

double energy(std::span<const double> x);

} // namespace beamkit::dsp

#endif
