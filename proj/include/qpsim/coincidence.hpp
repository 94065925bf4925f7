#ifndef QPSIM_COINCIDENCE_HPP
#define QPSIM_COINCIDENCE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpsim/fit.hpp"
#include "qpsim/parity_decode.hpp"

namespace qpsim {

struct CoincidenceSet {
    // order: A, B, C, AB, BC, AC, ABC
    std::array<long, 7> counts{};
    std::array<double, 7> exposure{};  // unmasked duration tau_i, s
    std::array<double, 7> rate_obs{};  // N_i / tau_i
    std::array<double, 7> rate_err{};  // sqrt(N_i) / tau_i
    double window_dt = 0.0;            // window * dt_rep, s
    int window = 0;
};

namespace detail {

// Greedy left-to-right matching of switch indices within the window; each
// switch is consumed by at most one coincidence of a given type. Two-pointer
// greedy yields the maximum matching for this threshold compatibility.
inline long match_pairs(const std::vector<size_t>& a, const std::vector<size_t>& b, int window) {
    long n = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        long d = static_cast<long>(a[i]) - static_cast<long>(b[j]);
        if (std::labs(d) < window) {
            ++n;
            ++i;
            ++j;
        } else if (d < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    return n;
}

inline long match_triples(const std::vector<size_t>& a, const std::vector<size_t>& b,
                          const std::vector<size_t>& c, int window) {
    long n = 0;
    size_t i = 0, j = 0, k = 0;
    while (i < a.size() && j < b.size() && k < c.size()) {
        long va = static_cast<long>(a[i]), vb = static_cast<long>(b[j]), vc = static_cast<long>(c[k]);
        long lo = std::min({va, vb, vc});
        long hi = std::max({va, vb, vc});
        if (hi - lo < window) {
            ++n;
            ++i;
            ++j;
            ++k;
        } else if (va == lo) {
            ++i;
        } else if (vb == lo) {
            ++j;
        } else {
            ++k;
        }
    }
    return n;
}

} // namespace detail

/// Windowed coincidence identification over three digital parity traces.
/// Every triple is also counted in the three pair channels; exposures count
/// shots where all constituent qubits are unmasked.
inline CoincidenceSet find_coincidences(const std::array<DigitalParity, 3>& digitals, int window,
                                        double dt_rep) {
    if (window < 1) throw std::invalid_argument("find_coincidences: window must be >= 1");
    if (dt_rep <= 0.0) throw std::invalid_argument("find_coincidences: dt_rep must be > 0");
    const size_t n = digitals[0].size();
    for (const auto& d : digitals)
        if (d.size() != n) throw std::invalid_argument("find_coincidences: length mismatch");

    std::array<std::vector<size_t>, 3> switches;
    for (int q = 0; q < 3; ++q) switches[q] = detect_switches(digitals[q]);

    CoincidenceSet out;
    out.window = window;
    out.window_dt = static_cast<double>(window) * dt_rep;

    std::array<long, 3> single_shots{};
    long ab = 0, bc = 0, ac = 0, abc = 0;
    for (size_t i = 0; i < n; ++i) {
        bool ua = digitals[0].values[i] != 0;
        bool ub = digitals[1].values[i] != 0;
        bool uc = digitals[2].values[i] != 0;
        single_shots[0] += ua;
        single_shots[1] += ub;
        single_shots[2] += uc;
        ab += (ua && ub);
        bc += (ub && uc);
        ac += (ua && uc);
        abc += (ua && ub && uc);
    }
    for (int q = 0; q < 3; ++q) {
        out.counts[q] = static_cast<long>(switches[q].size());
        out.exposure[q] = static_cast<double>(single_shots[q]) * dt_rep;
    }
    out.counts[3] = detail::match_pairs(switches[0], switches[1], window);
    out.counts[4] = detail::match_pairs(switches[1], switches[2], window);
    out.counts[5] = detail::match_pairs(switches[0], switches[2], window);
    out.counts[6] = detail::match_triples(switches[0], switches[1], switches[2], window);
    out.exposure[3] = static_cast<double>(ab) * dt_rep;
    out.exposure[4] = static_cast<double>(bc) * dt_rep;
    out.exposure[5] = static_cast<double>(ac) * dt_rep;
    out.exposure[6] = static_cast<double>(abc) * dt_rep;

    for (int i = 0; i < 7; ++i) {
        if (out.exposure[i] > 0.0) {
            out.rate_obs[i] = static_cast<double>(out.counts[i]) / out.exposure[i];
            out.rate_err[i] = std::sqrt(static_cast<double>(out.counts[i])) / out.exposure[i];
        }
    }
    return out;
}

struct BackgroundRates {
    // order: AB, BC, AC, ABC
    std::array<double, 4> rate{};
    std::array<double, 4> err{};
};

/// Random-coincidence background from the observed singles:
/// pairs r_i r_j dt, triple r_A r_B r_C dt^2; fractional errors in quadrature.
inline BackgroundRates background_rates(const std::array<double, 3>& singles,
                                        const std::array<double, 3>& singles_err,
                                        double window_dt) {
    if (window_dt <= 0.0) throw std::invalid_argument("background_rates: window dt must be > 0");
    BackgroundRates out;
    auto frac = [&](int q) {
        return singles[q] > 0.0 ? singles_err[q] / singles[q] : 0.0;
    };
    const std::array<std::pair<int, int>, 3> pairs = {{{0, 1}, {1, 2}, {0, 2}}};
    for (int i = 0; i < 3; ++i) {
        auto [a, b] = pairs[i];
        out.rate[i] = singles[a] * singles[b] * window_dt;
        out.err[i] = out.rate[i] * std::sqrt(frac(a) * frac(a) + frac(b) * frac(b));
    }
    out.rate[3] = singles[0] * singles[1] * singles[2] * window_dt * window_dt;
    out.err[3] = out.rate[3] * std::sqrt(frac(0) * frac(0) + frac(1) * frac(1) + frac(2) * frac(2));
    return out;
}

struct DeconvolvedRates {
    std::array<double, 7> rate{};
    std::array<double, 7> err{};
    std::array<double, 7> residual{};
    double window_dt = 0.0;
    int iterations = 0;
};

namespace detail {

// Observation model: probability of observing each switching pattern in a
// window, in terms of the exclusive per-event probabilities. A poisoning
// event flips each coupled qubit with probability 1/2, so singles detect at
// 1/2, pairs at 1/4, triples at 1/8; accidental products add to the pairs
// and the triple.
inline std::array<double, 7> observation_model(const std::array<double, 7>& p) {
    const double pa = p[0], pb = p[1], pc = p[2];
    const double pab = p[3], pbc = p[4], pac = p[5], pabc = p[6];
    return {
        0.5 * (pabc + pab + pac + pa),
        0.5 * (pabc + pab + pbc + pb),
        0.5 * (pabc + pac + pbc + pc),
        0.25 * (pabc + pab + pa * pb),
        0.25 * (pabc + pbc + pb * pc),
        0.25 * (pabc + pac + pa * pc),
        0.125 * (pabc + pa * pb * pc + pab * pc + pa * pbc + pac * pb),
    };
}

inline std::array<double, 7> newton_solve(const std::array<double, 7>& p_obs, int max_iter,
                                          double tol, int* iterations_out) {
    // start from the observed probabilities scaled by the detection factors
    std::array<double, 7> p;
    const std::array<double, 7> detect = {2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 8.0};
    for (int i = 0; i < 7; ++i) p[i] = p_obs[i] * detect[i];

    auto resid = [&](const std::array<double, 7>& x) {
        auto f = observation_model(x);
        std::array<double, 7> r;
        for (int i = 0; i < 7; ++i) r[i] = f[i] - p_obs[i];
        return r;
    };
    auto max_abs = [](const std::array<double, 7>& r) {
        double m = 0.0;
        for (double v : r) m = std::max(m, std::fabs(v));
        return m;
    };
    auto norm2 = [](const std::array<double, 7>& r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    };

    std::array<double, 7> r = resid(p);
    int it = 0;
    for (; it < max_iter && max_abs(r) > tol; ++it) {
        // numerically differenced Jacobian
        std::vector<double> jac(49);
        for (int j = 0; j < 7; ++j) {
            double h = 1e-8 * std::max(1.0, std::fabs(p[j]));
            auto pp = p, pm = p;
            pp[j] += h;
            pm[j] -= h;
            auto rp = resid(pp), rm = resid(pm);
            for (int i = 0; i < 7; ++i) jac[i * 7 + j] = (rp[i] - rm[i]) / (2.0 * h);
        }
        std::vector<double> rhs(7);
        for (int i = 0; i < 7; ++i) rhs[i] = -r[i];
        std::vector<double> step = solve_linear(jac, rhs);
        double alpha = 1.0;
        double base = norm2(r);
        std::array<double, 7> trial;
        while (true) {
            for (int i = 0; i < 7; ++i) trial[i] = p[i] + alpha * step[i];
            auto rt = resid(trial);
            if (norm2(rt) < base || alpha < 1e-6) {
                p = trial;
                r = rt;
                break;
            }
            alpha *= 0.5;
        }
    }
    if (iterations_out) *iterations_out = it;
    if (max_abs(r) > tol) {
        throw std::runtime_error("deconvolve: Newton did not converge; final residual " +
                                 std::to_string(max_abs(r)));
    }
    return p;
}

} // namespace detail

/// Solves the seven-component observation system for the exclusive poisoning
/// probabilities and propagates Poisson errors through the solution by
/// numerical differentiation. Negative solutions are reported as-is.
inline DeconvolvedRates deconvolve(const std::array<double, 7>& rate_obs,
                                   const std::array<double, 7>& rate_err, double window_dt) {
    if (window_dt <= 0.0) throw std::invalid_argument("deconvolve: window dt must be > 0");
    std::array<double, 7> p_obs;
    for (int i = 0; i < 7; ++i) {
        p_obs[i] = rate_obs[i] * window_dt;
        if (p_obs[i] >= 1.0)
            throw std::invalid_argument(std::string("deconvolve: observed probability for ") +
                                        kEventName[i] + " is >= 1");
        if (p_obs[i] < 0.0)
            throw std::invalid_argument(std::string("deconvolve: negative observed rate for ") +
                                        kEventName[i]);
    }

    constexpr double tol = 1e-12;
    DeconvolvedRates out;
    out.window_dt = window_dt;
    std::array<double, 7> p = detail::newton_solve(p_obs, 100, tol, &out.iterations);
    auto f = detail::observation_model(p);
    for (int i = 0; i < 7; ++i) {
        out.rate[i] = p[i] / window_dt;
        out.residual[i] = f[i] - p_obs[i];
    }

    // d p_k / d p_obs_j via re-solving with perturbed observations
    std::array<std::array<double, 7>, 7> dpdobs{};
    for (int j = 0; j < 7; ++j) {
        double h = 1e-6;
        auto op = p_obs, om = p_obs;
        op[j] += h;
        om[j] = std::max(om[j] - h, 0.0);
        double span = op[j] - om[j];
        auto pp = detail::newton_solve(op, 100, tol, nullptr);
        auto pm = detail::newton_solve(om, 100, tol, nullptr);
        for (int k = 0; k < 7; ++k) dpdobs[k][j] = (pp[k] - pm[k]) / span;
    }
    for (int k = 0; k < 7; ++k) {
        double var = 0.0;
        for (int j = 0; j < 7; ++j) {
            double contrib = dpdobs[k][j] * rate_err[j] * window_dt;
            var += contrib * contrib;
        }
        out.err[k] = std::sqrt(var) / window_dt;
    }
    return out;
}

inline DeconvolvedRates deconvolve(const CoincidenceSet& observed) {
    return deconvolve(observed.rate_obs, observed.rate_err, observed.window_dt);
}

struct FaultToleranceReport {
    std::array<double, 3> pair_rate{};        // AB, BC, AC
    std::array<double, 3> pair_error_prob{};  // rate * cycle
    double worst_pair_rate = 0.0;
    double worst_error_prob = 0.0;
    double threshold = 1e-8;
    double surface_code_cycle = 1e-6;
    bool below_threshold = true;
};

/// Two-fold correlated error probability per surface-code cycle, compared to
/// the 1e-8 fault-tolerance requirement.
inline FaultToleranceReport rate_summary(const DeconvolvedRates& decon,
                                         double surface_code_cycle = 1e-6) {
    FaultToleranceReport out;
    out.surface_code_cycle = surface_code_cycle;
    for (int i = 0; i < 3; ++i) {
        out.pair_rate[i] = decon.rate[3 + i];
        out.pair_error_prob[i] = decon.rate[3 + i] * surface_code_cycle;
    }
    out.worst_pair_rate = std::max({out.pair_rate[0], out.pair_rate[1], out.pair_rate[2]});
    out.worst_error_prob = out.worst_pair_rate * surface_code_cycle;
    out.below_threshold = out.worst_error_prob < out.threshold;
    return out;
}

} // namespace qpsim

#endif
