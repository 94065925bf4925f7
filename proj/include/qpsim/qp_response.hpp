#ifndef QPSIM_QP_RESPONSE_HPP
#define QPSIM_QP_RESPONSE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpsim/constants.hpp"
#include "qpsim/fit.hpp"
#include "qpsim/phonon_mc.hpp"

namespace qpsim {

struct RelaxationObservation {
    double delay_after_pulse = 0.0; // s
    double t1_fitted = 0.0;         // s
    double t1_ci_low = 0.0;
    double t1_ci_high = 0.0;
    double delta_gamma1 = 0.0;      // 1/s
    double delta_xqp = 0.0;
};

/// Delta Gamma_1 = 1/T1 - 1/T1_baseline. Negative values are legitimate
/// baseline fluctuations.
inline double delta_gamma1(double t1, double t1_baseline) {
    if (t1 <= 0.0 || t1_baseline <= 0.0)
        throw std::invalid_argument("delta_gamma1: T1 values must be > 0");
    return 1.0 / t1 - 1.0 / t1_baseline;
}

/// Reduced QP density change: pi * dGamma1 / sqrt(2 * Delta_Al * omega01 / hbar).
inline double xqp_from_gamma(double dgamma1, double gap_delta_al, double f01) {
    if (gap_delta_al <= 0.0) throw std::invalid_argument("xqp_from_gamma: Delta_Al must be > 0");
    if (f01 <= 0.0) throw std::invalid_argument("xqp_from_gamma: f01 must be > 0");
    double omega01 = 2.0 * constants::pi * f01;
    return constants::pi * dgamma1 / std::sqrt(2.0 * gap_delta_al * omega01 / constants::hbar);
}

struct RateSeries {
    std::vector<double> time;   // bin centers, s
    std::vector<double> value;  // 1/s
};

/// Bins a qubit's hit timestamps and scales the hit rate by the responsivity
/// (dGamma1 per unit hit rate).
inline RateSeries gamma_from_hits(const HitSeries& hits, const std::string& qubit,
                                  double responsivity, double bin) {
    if (bin <= 0.0) throw std::invalid_argument("gamma_from_hits: bin must be > 0");
    const std::vector<double>& times = hits.times_for(qubit);
    RateSeries out;
    double t_max = 0.0;
    for (const auto& v : hits.hit_times)
        for (double t : v) t_max = std::max(t_max, t);
    size_t n_bins = static_cast<size_t>(std::floor(t_max / bin)) + 1;
    out.time.resize(n_bins);
    out.value.assign(n_bins, 0.0);
    for (size_t i = 0; i < n_bins; ++i) out.time[i] = (static_cast<double>(i) + 0.5) * bin;
    for (double t : times) {
        size_t i = std::min(static_cast<size_t>(t / bin), n_bins - 1);
        out.value[i] += 1.0;
    }
    for (auto& v : out.value) v = responsivity * v / bin;
    return out;
}

struct T1Fit {
    double t1 = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double t1_ci_low = 0.0;
    double t1_ci_high = 0.0;
    CurveFit raw;
};

/// Inversion-recovery fit: population(t) = A exp(-t/T1) + B.
inline T1Fit fit_t1(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 5) throw std::invalid_argument("fit_t1: need at least 5 samples");
    double t_min_pos = 0.0, t_max = 0.0, y_min = samples[0].second, y_max = samples[0].second;
    for (const auto& [t, y] : samples) {
        if (t < 0.0) throw std::invalid_argument("fit_t1: negative wait time");
        if (t > 0.0 && (t_min_pos == 0.0 || t < t_min_pos)) t_min_pos = t;
        t_max = std::max(t_max, t);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    }
    if (t_min_pos > 0.0 && t_max < 10.0 * t_min_pos)
        throw std::invalid_argument("fit_t1: wait times must span at least one decade");
    if (y_max - y_min < 1e-12)
        throw std::runtime_error("fit_t1: degenerate data (constant signal)");

    // initial guess from a log-linear pass over the upper part of the decay
    double b0 = y_min;
    double a0 = samples.front().second - b0;
    if (a0 == 0.0) a0 = y_max - y_min;
    double t1_0 = std::max(t_max / 3.0, t_min_pos);
    {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (const auto& [t, y] : samples) {
            double z = (y - b0) / a0;
            if (z > 0.05) {
                double ly = std::log(z);
                sx += t; sy += ly; sxx += t * t; sxy += t * ly;
                ++n;
            }
        }
        double den = n * sxx - sx * sx;
        if (n >= 2 && std::fabs(den) > 0.0) {
            double slope = (n * sxy - sx * sy) / den;
            if (slope < 0.0) t1_0 = -1.0 / slope;
        }
    }

    auto residual = [&](const std::vector<double>& p) {
        std::vector<double> r(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) {
            double model = p[0] * std::exp(-samples[i].first / p[1]) + p[2];
            r[i] = model - samples[i].second;
        }
        return r;
    };
    CurveFit fit = levenberg_marquardt(residual, {a0, t1_0, b0});
    if (!fit.converged || !std::isfinite(fit.params[1]) || fit.params[1] <= 0.0) {
        throw std::runtime_error("fit_t1: non-convergence (residual norm " +
                                 std::to_string(fit.residual_norm) + ")");
    }
    T1Fit out;
    out.amplitude = fit.params[0];
    out.t1 = fit.params[1];
    out.offset = fit.params[2];
    double hw = fit.ci95_halfwidth(1);
    out.t1_ci_low = out.t1 - hw;
    out.t1_ci_high = out.t1 + hw;
    out.raw = std::move(fit);
    return out;
}

} // namespace qpsim

#endif
