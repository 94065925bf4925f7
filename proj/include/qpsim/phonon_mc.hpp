#ifndef QPSIM_PHONON_MC_HPP
#define QPSIM_PHONON_MC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpsim/chip_model.hpp"
#include "qpsim/rng.hpp"

namespace qpsim {

struct Phonon {
    double x = 0.0, y = 0.0, z = 0.0;
    double dx = 0.0, dy = 0.0, dz = -1.0;
    bool alive = true;
    double birth_time = 0.0;
};

struct InjectionPulse {
    std::string injector_label;
    double amplitude_vb = 1e-3; // V
    double duration = 10e-6;    // s
    double start_time = 0.0;    // s
};

struct PhononEnsemble {
    std::vector<Phonon> phonons;
    bool subgap_warning = false;
};

struct HitSeries {
    std::vector<std::string> qubit_labels;
    std::vector<std::vector<double>> hit_times; // per qubit, sorted
    long launched = 0;
    long island_absorbed = 0;
    long escaped = 0;
    long surviving = 0;

    long total_hits() const {
        long n = 0;
        for (const auto& v : hit_times) n += static_cast<long>(v.size());
        return n;
    }

    const std::vector<double>& times_for(const std::string& label) const {
        for (size_t i = 0; i < qubit_labels.size(); ++i)
            if (qubit_labels[i] == label) return hit_times[i];
        throw std::invalid_argument("HitSeries: unknown qubit label '" + label + "'");
    }
};

/// Populates an ensemble at the injector site. Pulses below the pair-breaking
/// threshold 2*Delta_Al/e emit nothing (up to the configured relaxation
/// oscillation leakage) and set the sub-gap warning instead of failing.
inline PhononEnsemble launch(const InjectionPulse& pulse, const TransportParams& params,
                             const ChipGeometry& geometry, uint64_t seed) {
    if (pulse.duration < 0.0) throw std::invalid_argument("launch: pulse duration must be >= 0");
    if (pulse.amplitude_vb < 0.0) throw std::invalid_argument("launch: pulse amplitude must be >= 0");
    const InjectorSite* site = geometry.find_injector(pulse.injector_label);
    if (!site) throw std::invalid_argument("launch: unknown injector '" + pulse.injector_label + "'");

    PhononEnsemble out;
    double count = params.phonons_per_second_of_pulse * pulse.duration;
    if (pulse.amplitude_vb <= params.pairbreaking_threshold_v()) {
        out.subgap_warning = true;
        count *= params.subgap_leakage_fraction;
    }
    const long n = static_cast<long>(std::llround(count));
    out.phonons.reserve(static_cast<size_t>(n));
    Rng rng(seed);
    for (long i = 0; i < n; ++i) {
        Phonon p;
        p.x = site->x;
        p.y = site->y;
        p.z = geometry.thickness; // junctions sit on the device layer
        // isotropic, folded into the downward hemisphere
        double cz = 2.0 * rng.uniform() - 1.0;
        double phi = 2.0 * constants::pi * rng.uniform();
        double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
        p.dx = sz * std::cos(phi);
        p.dy = sz * std::sin(phi);
        p.dz = -std::fabs(cz);
        p.birth_time = pulse.start_time + pulse.duration * rng.uniform();
        out.phonons.push_back(p);
    }
    return out;
}

namespace detail {

// cosine-law (Lambert) direction about the inward normal axis.
// axis: 0 -> +x, 1 -> -x, 2 -> +y, 3 -> -y, 4 -> +z, 5 -> -z
inline void diffuse_direction(Rng& rng, int axis, double& dx, double& dy, double& dz) {
    double u1 = std::max(rng.uniform(), 1e-16);
    double u2 = rng.uniform();
    double n = std::sqrt(u1);               // component along the normal
    double t = std::sqrt(1.0 - u1);
    double phi = 2.0 * constants::pi * u2;
    double a = t * std::cos(phi), b = t * std::sin(phi);
    switch (axis) {
        case 0: dx = n;  dy = a; dz = b; break;
        case 1: dx = -n; dy = a; dz = b; break;
        case 2: dy = n;  dx = a; dz = b; break;
        case 3: dy = -n; dx = a; dz = b; break;
        case 4: dz = n;  dx = a; dy = b; break;
        default: dz = -n; dx = a; dy = b; break;
    }
}

struct QubitTarget {
    double x, y, r2;
    size_t index;
};

inline std::vector<QubitTarget> qubit_targets(const ChipGeometry& g) {
    std::vector<QubitTarget> t;
    t.reserve(g.qubit_sites.size());
    for (size_t i = 0; i < g.qubit_sites.size(); ++i) {
        const auto& q = g.qubit_sites[i];
        t.push_back({q.x, q.y, q.junction_footprint_area / constants::pi, i});
    }
    return t;
}

} // namespace detail

/// Ballistic flight at c_s between surface encounters; diffuse scattering off
/// all surfaces, with island absorption on the back side, pair-breaking hits
/// inside junction footprints on the device layer, and escape at perimeter
/// anchors. Per-phonon random streams derive from (seed, phonon index).
inline HitSeries transport(const PhononEnsemble& ensemble, const TransportParams& params,
                           const ChipGeometry& geometry, double horizon, uint64_t seed) {
    if (horizon <= 0.0) throw std::invalid_argument("transport: horizon must be > 0");
    const double L = geometry.side_length;
    const double d = geometry.thickness;
    const double cs = params.sound_speed_cs;
    const auto targets = detail::qubit_targets(geometry);

    HitSeries out;
    out.qubit_labels.reserve(geometry.qubit_sites.size());
    for (const auto& q : geometry.qubit_sites) out.qubit_labels.push_back(q.label);
    out.hit_times.assign(geometry.qubit_sites.size(), {});
    out.launched = static_cast<long>(ensemble.phonons.size());

    for (size_t pi = 0; pi < ensemble.phonons.size(); ++pi) {
        Phonon p = ensemble.phonons[pi];
        if (!p.alive) continue;
        Rng rng = Rng::substream(seed, pi);
        double t = p.birth_time;
        bool done = false;
        while (!done) {
            // fold outward components when sitting exactly on an edge or corner
            if ((p.x <= 0.0 && p.dx < 0.0) || (p.x >= L && p.dx > 0.0)) p.dx = -p.dx;
            if ((p.y <= 0.0 && p.dy < 0.0) || (p.y >= L && p.dy > 0.0)) p.dy = -p.dy;
            if ((p.z <= 0.0 && p.dz < 0.0) || (p.z >= d && p.dz > 0.0)) p.dz = -p.dz;
            // time to each bounding plane
            double best = std::numeric_limits<double>::infinity();
            int plane = -1; // 0:x=0 1:x=L 2:y=0 3:y=L 4:z=0 5:z=d
            auto consider = [&](double dist, double vel, int id) {
                if (vel == 0.0) return;
                double dt = dist / vel;
                if (dt > 0.0 && dt < best) { best = dt; plane = id; }
            };
            consider(-p.x, p.dx, 0);
            consider(L - p.x, p.dx, 1);
            consider(-p.y, p.dy, 2);
            consider(L - p.y, p.dy, 3);
            consider(-p.z, p.dz, 4);
            consider(d - p.z, p.dz, 5);
            if (plane < 0) { ++out.surviving; break; } // degenerate direction

            double dt_fly = best / cs;
            if (t + dt_fly >= horizon) {
                ++out.surviving;
                break;
            }
            t += dt_fly;
            p.x += p.dx * best;
            p.y += p.dy * best;
            p.z += p.dz * best;
            // clamp onto the plane to avoid drift
            switch (plane) {
                case 0: p.x = 0.0; break;
                case 1: p.x = L; break;
                case 2: p.y = 0.0; break;
                case 3: p.y = L; break;
                case 4: p.z = 0.0; break;
                case 5: p.z = d; break;
            }
            p.x = std::clamp(p.x, 0.0, L);
            p.y = std::clamp(p.y, 0.0, L);
            p.z = std::clamp(p.z, 0.0, d);

            switch (plane) {
                case 4: { // back side: island lattice
                    if (geometry.islands_enabled && island_at(geometry, p.x, p.y) &&
                        rng.bernoulli(params.island_absorb_prob)) {
                        ++out.island_absorbed;
                        done = true;
                    } else {
                        detail::diffuse_direction(rng, 4, p.dx, p.dy, p.dz);
                    }
                    break;
                }
                case 5: { // device layer: junction footprints
                    bool removed = false;
                    for (const auto& q : targets) {
                        double ddx = p.x - q.x, ddy = p.y - q.y;
                        if (ddx * ddx + ddy * ddy <= q.r2) {
                            if (rng.bernoulli(params.qubit_pairbreak_prob)) {
                                out.hit_times[q.index].push_back(t);
                                removed = true;
                            }
                            break; // footprints do not overlap
                        }
                    }
                    if (removed) {
                        done = true;
                    } else {
                        detail::diffuse_direction(rng, 5, p.dx, p.dy, p.dz);
                    }
                    break;
                }
                default: { // side wall: anchors or reflection
                    bool anchored = false;
                    for (const auto& a : geometry.anchor_points) {
                        double ddx = p.x - a.x, ddy = p.y - a.y;
                        if (ddx * ddx + ddy * ddy <= a.capture_radius * a.capture_radius) {
                            anchored = true;
                            break;
                        }
                    }
                    if (anchored && rng.bernoulli(params.anchor_escape_prob)) {
                        ++out.escaped;
                        done = true;
                    } else {
                        detail::diffuse_direction(rng, plane, p.dx, p.dy, p.dz);
                    }
                    break;
                }
            }
        }
    }
    for (auto& v : out.hit_times) std::sort(v.begin(), v.end());
    return out;
}

struct CalibrationOptions {
    std::string injector_label; // default: first injector in the geometry
    double pulse_duration = 10e-6;
    double amplitude_vb = 1e-3;
    double horizon = 300e-6;
    long n_phonons = 20000;
    uint64_t seed = 1;
    int max_bisections = 24;
    double ratio_tolerance = 0.10; // relative
};

/// Bisects island_absorb_prob until delivered pair-breaking hits with islands
/// on vs. off differ by target_flux_ratio. Uses common random numbers so the
/// delivered ratio is monotone in the absorption probability.
inline TransportParams calibrate_downconversion(const TransportParams& params,
                                                const ChipGeometry& geometry,
                                                double target_flux_ratio,
                                                const CalibrationOptions& opt = {}) {
    if (!geometry.islands_enabled) return params; // nothing to calibrate against
    if (target_flux_ratio <= 1.0)
        throw std::invalid_argument("calibrate_downconversion: target ratio must exceed 1");
    if (geometry.injector_sites.empty())
        throw std::invalid_argument("calibrate_downconversion: geometry has no injector");

    InjectionPulse pulse;
    pulse.injector_label =
        opt.injector_label.empty() ? geometry.injector_sites.front().label : opt.injector_label;
    pulse.amplitude_vb = opt.amplitude_vb;
    pulse.duration = opt.pulse_duration;

    TransportParams run = params;
    run.phonons_per_second_of_pulse =
        static_cast<double>(opt.n_phonons) / std::max(pulse.duration, 1e-30);

    PhononEnsemble ensemble = launch(pulse, run, geometry, opt.seed);

    ChipGeometry off = geometry;
    off.islands_enabled = false;
    const long hits_off = transport(ensemble, run, off, opt.horizon, opt.seed).total_hits();
    if (hits_off <= 0)
        throw std::runtime_error("calibrate_downconversion: no delivered hits with islands off; "
                                 "increase n_phonons or footprint areas");

    auto ratio_at = [&](double q) {
        TransportParams trial = run;
        trial.island_absorb_prob = q;
        long hits_on = transport(ensemble, trial, geometry, opt.horizon, opt.seed).total_hits();
        if (hits_on == 0) return std::numeric_limits<double>::infinity();
        return static_cast<double>(hits_off) / static_cast<double>(hits_on);
    };

    if (ratio_at(1.0) < target_flux_ratio)
        throw std::runtime_error("calibrate_downconversion: target ratio not bracketed by "
                                 "island_absorb_prob in [0, 1]");

    double lo = 0.0, hi = 1.0, mid = 0.5;
    for (int i = 0; i < opt.max_bisections; ++i) {
        mid = 0.5 * (lo + hi);
        double r = ratio_at(mid);
        if (std::fabs(r - target_flux_ratio) <= opt.ratio_tolerance * target_flux_ratio) break;
        if (r < target_flux_ratio) lo = mid; else hi = mid;
    }
    TransportParams result = params;
    result.island_absorb_prob = mid;
    return result;
}

} // namespace qpsim

#endif
