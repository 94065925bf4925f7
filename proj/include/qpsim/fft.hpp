#ifndef QPSIM_FFT_HPP
#define QPSIM_FFT_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qpsim {

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft_radix2: length not a power of two");
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double base = inverse ? 2.0 * M_PI : -2.0 * M_PI;
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = base / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

} // namespace detail

// DFT of arbitrary length via Bluestein's chirp-z transform.
inline std::vector<std::complex<double>> fft(const std::vector<std::complex<double>>& input) {
    const size_t n = input.size();
    if (n == 0) return {};
    if ((n & (n - 1)) == 0) {
        auto a = input;
        detail::fft_radix2(a, false);
        return a;
    }
    size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;
    // chirp: w_k = exp(-i pi k^2 / n); use k^2 mod 2n to keep the angle bounded
    std::vector<std::complex<double>> w(n);
    for (size_t k = 0; k < n; ++k) {
        size_t k2 = (k * k) % (2 * n);
        double ang = -M_PI * static_cast<double>(k2) / static_cast<double>(n);
        w[k] = std::complex<double>(std::cos(ang), std::sin(ang));
    }
    std::vector<std::complex<double>> a(m, {0.0, 0.0}), b(m, {0.0, 0.0});
    for (size_t k = 0; k < n; ++k) a[k] = input[k] * w[k];
    b[0] = std::conj(w[0]);
    for (size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(w[k]);
    detail::fft_radix2(a, false);
    detail::fft_radix2(b, false);
    for (size_t k = 0; k < m; ++k) a[k] *= b[k];
    detail::fft_radix2(a, true);
    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) out[k] = a[k] * w[k];
    return out;
}

// Periodogram of a real sampled signal, frequencies k/(N dt) for k=1..N/2.
// Convention: S(f) = |X(f)|^2 dt / N (symmetric two-sided density evaluated
// on the positive axis), so a white sequence of variance s^2 has level s^2 dt
// and the full-circle sum of S df over k != 0 equals the signal variance.
struct Periodogram {
    std::vector<double> freq;
    std::vector<double> psd;
};

inline Periodogram periodogram(const std::vector<double>& x, double dt) {
    const size_t n = x.size();
    if (n < 2) throw std::invalid_argument("periodogram: need at least 2 samples");
    if (dt <= 0.0) throw std::invalid_argument("periodogram: dt must be positive");
    std::vector<std::complex<double>> c(n);
    for (size_t i = 0; i < n; ++i) c[i] = {x[i], 0.0};
    auto spec = fft(c);
    Periodogram out;
    const size_t half = n / 2;
    out.freq.resize(half);
    out.psd.resize(half);
    const double scale = dt / static_cast<double>(n);
    for (size_t k = 1; k <= half; ++k) {
        out.freq[k - 1] = static_cast<double>(k) / (static_cast<double>(n) * dt);
        out.psd[k - 1] = std::norm(spec[k]) * scale;
    }
    return out;
}

} // namespace qpsim

#endif
