#ifndef QPSIM_PARITY_DECODE_HPP
#define QPSIM_PARITY_DECODE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "qpsim/fft.hpp"
#include "qpsim/fit.hpp"
#include "qpsim/parity_synth.hpp"

namespace qpsim {

using MaskWindows = std::vector<std::pair<size_t, size_t>>; // [start, end) shot ranges

struct DigitalParity {
    std::vector<int8_t> values; // +1, -1, 0 = masked
    int moving_average_n = 1;
    MaskWindows mask_windows;

    size_t size() const { return values.size(); }
};

/// Centered boxcar of width n; edges shrink to the available points, so the
/// output length matches the input. n = 1 is the identity.
inline std::vector<double> moving_average(const std::vector<double>& samples, int n) {
    if (n < 1) throw std::invalid_argument("moving_average: n must be >= 1");
    if (static_cast<size_t>(n) > samples.size())
        throw std::invalid_argument("moving_average: n exceeds trace length");
    const size_t len = samples.size();
    std::vector<double> prefix(len + 1, 0.0);
    for (size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + samples[i];
    std::vector<double> out(len);
    const long half_lo = (n - 1) / 2;
    const long half_hi = n - 1 - half_lo;
    for (size_t i = 0; i < len; ++i) {
        long lo = std::max<long>(0, static_cast<long>(i) - half_lo);
        long hi = std::min<long>(static_cast<long>(len) - 1, static_cast<long>(i) + half_hi);
        out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
    return out;
}

namespace detail {

inline std::vector<uint8_t> mask_flags(size_t n, const MaskWindows& windows) {
    std::vector<uint8_t> masked(n, 0);
    for (const auto& [a, b] : windows) {
        size_t lo = std::min(a, n), hi = std::min(b, n);
        for (size_t i = lo; i < hi; ++i) masked[i] = 1;
    }
    return masked;
}

inline MaskWindows windows_from_flags(const std::vector<uint8_t>& masked) {
    MaskWindows out;
    size_t i = 0;
    while (i < masked.size()) {
        if (masked[i]) {
            size_t j = i;
            while (j < masked.size() && masked[j]) ++j;
            out.emplace_back(i, j);
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

// rolling max of |x - mid| over a centered window, via monotonic deque
inline std::vector<double> rolling_excursion(const std::vector<double>& x, double mid, int window) {
    const size_t n = x.size();
    std::vector<double> dev(n);
    for (size_t i = 0; i < n; ++i) dev[i] = std::fabs(x[i] - mid);
    std::vector<double> out(n);
    std::deque<size_t> dq;
    const long half_lo = (window - 1) / 2;
    const long half_hi = window - 1 - half_lo;
    size_t added = 0;
    for (size_t i = 0; i < n; ++i) {
        long hi = std::min<long>(static_cast<long>(n) - 1, static_cast<long>(i) + half_hi);
        while (static_cast<long>(added) <= hi) {
            while (!dq.empty() && dev[dq.back()] <= dev[added]) dq.pop_back();
            dq.push_back(added);
            ++added;
        }
        long lo = std::max<long>(0, static_cast<long>(i) - half_lo);
        while (!dq.empty() && static_cast<long>(dq.front()) < lo) dq.pop_front();
        out[i] = dev[dq.front()];
    }
    return out;
}

} // namespace detail

/// Flags stretches where the parity signal never swings toward either readout
/// level: the peak-to-peak excursion of the smoothed trace about the
/// calibration midpoint stays below threshold_fraction times the even/odd
/// separation, as happens when the offset charge sits near degeneracy.
inline MaskWindows envelope_mask(const std::vector<double>& samples, const ReadoutChannel& channel,
                                 int window = 100, double threshold_fraction = 0.5) {
    if (window < 2) throw std::invalid_argument("envelope_mask: window must be >= 2");
    if (samples.size() < static_cast<size_t>(window))
        throw std::invalid_argument("envelope_mask: trace shorter than window");
    std::vector<double> avg = moving_average(samples, window);
    std::vector<double> env = detail::rolling_excursion(avg, channel.midpoint(), window);
    const double threshold = threshold_fraction * std::fabs(channel.separation());
    std::vector<uint8_t> masked(samples.size(), 0);
    for (size_t i = 0; i < env.size(); ++i) masked[i] = (2.0 * env[i] < threshold) ? 1 : 0;
    return detail::windows_from_flags(masked);
}

/// Two-state hidden Markov decode of the averaged parity signal by Viterbi.
/// Emissions come from the readout calibration Gaussians; the symmetric
/// per-shot transition probability is 1 - exp(-Gamma_p * dt_rep). Masked
/// shots are excluded from the path and emitted as 0.
inline DigitalParity hmm_decode(const std::vector<double>& averaged, const ReadoutChannel& channel,
                                double gamma_p_prior, double dt_rep,
                                const MaskWindows& mask_windows, int moving_average_n = 1) {
    if (gamma_p_prior <= 0.0) throw std::invalid_argument("hmm_decode: Gamma_p prior must be > 0");
    if (dt_rep <= 0.0) throw std::invalid_argument("hmm_decode: dt_rep must be > 0");
    const size_t n = averaged.size();
    auto masked = detail::mask_flags(n, mask_windows);
    size_t n_unmasked = 0;
    for (auto m : masked) n_unmasked += (m == 0);
    if (n_unmasked == 0) throw std::runtime_error("hmm_decode: no unmasked data");

    double p_sw = 1.0 - std::exp(-gamma_p_prior * dt_rep);
    p_sw = std::clamp(p_sw, 1e-300, 1.0 - 1e-12);
    const double log_stay = std::log1p(-p_sw);
    const double log_switch = std::log(p_sw);

    const double le_norm = -std::log(channel.sigma_even);
    const double lo_norm = -std::log(channel.sigma_odd);
    auto log_emit_even = [&](double x) {
        double z = (x - channel.mean_even) / channel.sigma_even;
        return le_norm - 0.5 * z * z;
    };
    auto log_emit_odd = [&](double x) {
        double z = (x - channel.mean_odd) / channel.sigma_odd;
        return lo_norm - 0.5 * z * z;
    };

    DigitalParity out;
    out.values.assign(n, 0);
    out.moving_average_n = moving_average_n;
    out.mask_windows = mask_windows;

    std::vector<double> score_even, score_odd;
    std::vector<uint8_t> back_even, back_odd; // 1 = previous state differs

    size_t i = 0;
    while (i < n) {
        if (masked[i]) { ++i; continue; }
        size_t seg_end = i;
        while (seg_end < n && !masked[seg_end]) ++seg_end;
        const size_t len = seg_end - i;
        score_even.assign(len, 0.0);
        score_odd.assign(len, 0.0);
        back_even.assign(len, 0);
        back_odd.assign(len, 0);
        score_even[0] = log_emit_even(averaged[i]);
        score_odd[0] = log_emit_odd(averaged[i]);
        for (size_t k = 1; k < len; ++k) {
            double x = averaged[i + k];
            double from_even_stay = score_even[k - 1] + log_stay;
            double from_odd_switch = score_odd[k - 1] + log_switch;
            if (from_even_stay >= from_odd_switch) {
                score_even[k] = from_even_stay;
            } else {
                score_even[k] = from_odd_switch;
                back_even[k] = 1;
            }
            score_even[k] += log_emit_even(x);

            double from_odd_stay = score_odd[k - 1] + log_stay;
            double from_even_switch = score_even[k - 1] + log_switch;
            if (from_odd_stay >= from_even_switch) {
                score_odd[k] = from_odd_stay;
            } else {
                score_odd[k] = from_even_switch;
                back_odd[k] = 1;
            }
            score_odd[k] += log_emit_odd(x);
        }
        bool even = score_even[len - 1] >= score_odd[len - 1];
        for (size_t k = len; k-- > 0;) {
            out.values[i + k] = even ? 1 : -1;
            uint8_t flip = even ? back_even[k] : back_odd[k];
            if (flip) even = !even;
        }
        i = seg_end;
    }
    return out;
}

/// Threshold decode against the mean of the unmasked averaged data; used to
/// bootstrap switching statistics before a full HMM pass.
inline DigitalParity threshold_decode(const std::vector<double>& averaged,
                                      const MaskWindows& mask_windows, int moving_average_n = 1) {
    const size_t n = averaged.size();
    auto masked = detail::mask_flags(n, mask_windows);
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!masked[i]) { sum += averaged[i]; ++count; }
    }
    if (count == 0) throw std::runtime_error("threshold_decode: no unmasked data");
    const double mean = sum / static_cast<double>(count);
    DigitalParity out;
    out.values.assign(n, 0);
    out.moving_average_n = moving_average_n;
    out.mask_windows = mask_windows;
    for (size_t i = 0; i < n; ++i)
        if (!masked[i]) out.values[i] = averaged[i] >= mean ? 1 : -1;
    return out;
}

/// Shot indices i where the digital value changes between i and i+1, both
/// unmasked; switches never span a mask boundary.
inline std::vector<size_t> detect_switches(const DigitalParity& digital) {
    std::vector<size_t> out;
    const auto& v = digital.values;
    for (size_t i = 0; i + 1 < v.size(); ++i)
        if (v[i] != 0 && v[i + 1] != 0 && v[i] != v[i + 1]) out.push_back(i);
    return out;
}

struct PsdFit {
    double gamma_p = 0.0;   // 1/s
    double fidelity = 0.0;  // F
    double dt_rep = 0.0;
    double gamma_ci95 = 0.0;
    Periodogram spectrum;   // record-averaged
    CurveFit raw;
};

/// Averages per-record periodograms of +/-1 digital records and fits the
/// two-state switching spectrum
///   S_p(f) = 4 F^2 Gamma_p / ((2 Gamma_p)^2 + (2 pi f)^2) + (1 - F^2) dt
/// on log-amplitude residuals over linear frequency, DC bin excluded.
inline PsdFit psd_gamma(const std::vector<std::vector<double>>& records, double dt_rep) {
    if (records.empty()) throw std::invalid_argument("psd_gamma: need at least one record");
    if (dt_rep <= 0.0) throw std::invalid_argument("psd_gamma: dt_rep must be > 0");
    const size_t len = records.front().size();
    for (const auto& r : records)
        if (r.size() != len) throw std::invalid_argument("psd_gamma: records must share a length");

    Periodogram mean_psd;
    for (const auto& r : records) {
        Periodogram p = periodogram(r, dt_rep);
        if (mean_psd.psd.empty()) {
            mean_psd = p;
        } else {
            for (size_t k = 0; k < p.psd.size(); ++k) mean_psd.psd[k] += p.psd[k];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(records.size());
    for (auto& v : mean_psd.psd) v *= inv_n;

    const size_t nbin = mean_psd.psd.size();
    double floor_est = 0.0;
    {
        std::vector<double> upper(mean_psd.psd.begin() + nbin / 2, mean_psd.psd.end());
        std::nth_element(upper.begin(), upper.begin() + upper.size() / 2, upper.end());
        floor_est = std::max(upper[upper.size() / 2], 1e-300);
    }
    double f2 = std::clamp(1.0 - floor_est / dt_rep, 1e-4, 1.0 - 1e-4);
    double s0 = 0.0;
    const size_t head = std::min<size_t>(3, nbin);
    for (size_t k = 0; k < head; ++k) s0 += mean_psd.psd[k];
    s0 = std::max(s0 / static_cast<double>(head), 1e-300);
    double gamma0 = std::clamp(f2 / s0, mean_psd.freq.front() * 1e-2, mean_psd.freq.back() * 1e2);

    // theta = (ln Gamma, logit F) keeps both parameters in range
    auto model = [&](double lg, double tf, double f) {
        double g = std::exp(lg);
        double fid = 1.0 / (1.0 + std::exp(-tf));
        double lor = 4.0 * fid * fid * g / (4.0 * g * g + 4.0 * constants::pi * constants::pi * f * f);
        return lor + (1.0 - fid * fid) * dt_rep;
    };
    auto residual = [&](const std::vector<double>& th) {
        std::vector<double> r(nbin);
        for (size_t k = 0; k < nbin; ++k) {
            double m = std::max(model(th[0], th[1], mean_psd.freq[k]), 1e-300);
            r[k] = std::log(m) - std::log(std::max(mean_psd.psd[k], 1e-300));
        }
        return r;
    };
    double t0 = std::log(f2 / (1.0 - f2)) * 0.5; // logit(F) from F^2 estimate
    CurveFit fit = levenberg_marquardt(residual, {std::log(gamma0), t0});

    PsdFit out;
    out.dt_rep = dt_rep;
    out.spectrum = std::move(mean_psd);
    out.gamma_p = std::exp(fit.params[0]);
    out.fidelity = 1.0 / (1.0 + std::exp(-fit.params[1]));
    double sigma_ln_gamma = fit.sigma[0];
    out.gamma_ci95 = 1.959963984540054 * out.gamma_p * sigma_ln_gamma;
    out.raw = fit;

    if (!fit.converged || !std::isfinite(out.gamma_p))
        throw std::runtime_error("psd_gamma: fit non-convergence");
    if (sigma_ln_gamma > 2.0 || out.fidelity < 0.02)
        throw std::runtime_error("psd_gamma: no resolvable Lorentzian knee in the spectrum");
    return out;
}

struct DecodeParams {
    int moving_average = 40;
    int window = 40; // coincidence window, carried with the decode defaults
    int envelope_window = 100;
    double envelope_threshold_fraction = 0.5;
    double gamma_p_prior = 0.0; // <= 0: bootstrap from a threshold pass
    int t1_baseline_averages = 10;
};

/// Full single-qubit chain: envelope masking, moving average, HMM decode.
/// When no Gamma_p prior is given, a threshold pass estimates one.
inline DigitalParity decode_qubit(const std::vector<double>& samples, const ReadoutChannel& channel,
                                  const DecodeParams& params, double dt_rep) {
    MaskWindows mask;
    if (params.envelope_threshold_fraction > 0.0 &&
        samples.size() >= static_cast<size_t>(params.envelope_window)) {
        mask = envelope_mask(samples, channel, params.envelope_window,
                             params.envelope_threshold_fraction);
    }
    std::vector<double> avg = moving_average(samples, params.moving_average);
    double prior = params.gamma_p_prior;
    if (prior <= 0.0) {
        DigitalParity rough = threshold_decode(avg, mask, params.moving_average);
        size_t switches = detect_switches(rough).size();
        size_t unmasked = 0;
        for (auto v : rough.values) unmasked += (v != 0);
        double span = static_cast<double>(unmasked) * dt_rep;
        prior = std::max((static_cast<double>(switches) + 1.0) / std::max(span, dt_rep), 1e-6);
    }
    return hmm_decode(avg, channel, prior, dt_rep, mask, params.moving_average);
}

} // namespace qpsim

#endif
