#include "beamkit/dsp.hpp"

#include <cmath>

#include "beamkit/error.hpp"

namespace beamkit::dsp {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

void fft(std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw_numeric("fft size must be a power of two");
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1)
            j ^= bit;
        j ^= bit;
        if (i < j)
            std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = x[i + k];
                const std::complex<double> v = x[i + k + len / 2] * w;
                x[i + k] = u + v;
                x[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : x)
            v *= scale;
    }
}

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t nfft) {
    std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
    const std::size_t n = std::min(nfft, x.size());
    for (std::size_t i = 0; i < n; ++i)
        buf[i] = x[i];
    fft(buf, false);
    return buf;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty())
        return {};
    const std::size_t out_len = a.size() + b.size() - 1;
    const std::size_t nfft = next_pow2(out_len);
    auto fa = rfft(a, nfft);
    auto fb = rfft(b, nfft);
    for (std::size_t i = 0; i < nfft; ++i)
        fa[i] *= fb[i];
    fft(fa, true);
    std::vector<double> out(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out[i] = fa[i].real();
    return out;
}

std::vector<double> fractional_shift(std::span<const double> x, double shift_samples) {
    if (x.empty())
        return {};
    const std::size_t margin = static_cast<std::size_t>(std::ceil(std::abs(shift_samples))) + 8;
    const std::size_t nfft = next_pow2(x.size() + 2 * margin);
    auto buf = rfft(x, nfft);
    // phase ramp with conjugate symmetry; the Nyquist bin stays real
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
        const double w = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(nfft);
        if (k == nfft / 2) {
            buf[k] *= std::cos(M_PI * shift_samples);
        } else {
            buf[k] *= std::exp(std::complex<double>(0.0, -w * shift_samples));
            if (k != 0)
                buf[nfft - k] = std::conj(buf[k]);
        }
    }
    fft(buf, true);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = buf[i].real();
    return out;
}

std::complex<double> dtft(std::span<const double> taps, double omega) {
    // Horner evaluation of sum taps[l] z^-l at z = e^{j omega}
    std::complex<double> acc(0.0, 0.0);
    const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -omega));
    for (std::size_t l = taps.size(); l-- > 0;)
        acc = acc * zinv + taps[l];
    return acc;
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

double energy(std::span<const double> x) {
    double e = 0.0;
    for (double v : x)
        e += v * v;
    return e;
}

} // namespace beamkit::dsp
