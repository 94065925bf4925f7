#ifndef QPSIM_PARITY_SYNTH_HPP
#define QPSIM_PARITY_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpsim/constants.hpp"
#include "qpsim/rng.hpp"

namespace qpsim {

// Exclusive event classes over three qubits, in table order.
enum class EventType : int { A = 0, B, C, AB, BC, AC, ABC };

inline constexpr std::array<uint8_t, 7> kEventMask = {1, 2, 4, 3, 6, 5, 7};
inline constexpr std::array<const char*, 7> kEventName = {"A", "B", "C", "AB", "BC", "AC", "ABC"};

inline int event_index_from_name(const std::string& name) {
    for (int i = 0; i < 7; ++i)
        if (name == kEventName[i]) return i;
    throw std::invalid_argument("unknown event type '" + name + "'");
}

struct EventRates {
    // order: A, B, C, AB, BC, AC, ABC
    std::array<double, 7> r{};

    void validate() const {
        for (int i = 0; i < 7; ++i)
            if (r[i] < 0.0)
                throw std::invalid_argument(std::string("rate ") + kEventName[i] + " must be >= 0");
    }
    double total() const {
        double s = 0.0;
        for (double v : r) s += v;
        return s;
    }
};

struct PoisonEvent {
    double time = 0.0;
    uint8_t type_mask = 0;  // qubit set the event couples to
    uint8_t flips_mask = 0; // qubits whose parity actually flipped
    bool from_pulse = false;

    std::string type_name() const {
        if (from_pulse) return "pulse";
        for (int i = 0; i < 7; ++i)
            if (kEventMask[i] == type_mask) return kEventName[i];
        return "?";
    }
};

struct ReadoutChannel {
    double mean_even = 1.0;
    double mean_odd = -1.0;
    double sigma_even = 0.25;
    double sigma_odd = 0.25;
    double fidelity_max = 0.9; // F of the parity-mapping sequence

    void validate(const std::string& label) const {
        if (sigma_even <= 0.0 || sigma_odd <= 0.0)
            throw std::invalid_argument("readout '" + label + "': sigmas must be > 0");
        if (fidelity_max < 0.0 || fidelity_max > 1.0)
            throw std::invalid_argument("readout '" + label + "': fidelity_max must be in [0, 1]");
    }
    double separation() const { return mean_even - mean_odd; }
    double midpoint() const { return 0.5 * (mean_even + mean_odd); }
};

struct ReadoutModel {
    std::array<ReadoutChannel, 3> channel{};
    std::array<std::string, 3> labels = {"A", "B", "C"};
};

struct ChargeNoiseModel {
    double diffusion_sigma = 0.0;      // e per sqrt(s)
    double jump_rate = 0.0;            // 1/s
    double jump_size_min = 0.1;        // e
    double degeneracy_halfwidth = 0.05; // e
    double initial_offset = 0.0;       // e, common starting n_g

    void validate() const {
        if (diffusion_sigma < 0.0) throw std::invalid_argument("charge.diffusion_sigma must be >= 0");
        if (jump_rate < 0.0) throw std::invalid_argument("charge.jump_rate must be >= 0");
        if (jump_size_min < 0.0) throw std::invalid_argument("charge.jump_size_min must be >= 0");
        if (degeneracy_halfwidth < 0.0)
            throw std::invalid_argument("charge.degeneracy_halfwidth must be >= 0");
    }
};

/// Parity-mapping fidelity at offset charge n_g: the dispersion phase scales
/// with cos(2 pi n_g) and the fidelity collapses to zero inside the band
/// around the charge degeneracy points n_g = 0.25 (mod 0.5).
inline double mapping_fidelity(double n_g, double fidelity_max, double degeneracy_halfwidth) {
    double cell = n_g - std::floor(n_g / 0.5) * 0.5; // [0, 0.5)
    double dist = std::fabs(cell - 0.25);
    if (dist < degeneracy_halfwidth) return 0.0;
    double phase = 0.5 * constants::pi * std::cos(2.0 * constants::pi * n_g);
    return fidelity_max * std::fabs(std::sin(phase));
}

struct ParityTrace {
    double dt_rep = 10e-3;
    std::array<std::string, 3> labels = {"A", "B", "C"};
    std::array<std::vector<double>, 3> samples;
    std::array<std::vector<int8_t>, 3> truth_parity; // +1 even, -1 odd at each shot
    std::vector<PoisonEvent> truth_events;

    size_t n_shots() const { return samples[0].size(); }
    double shot_time(size_t k) const { return static_cast<double>(k) * dt_rep; }
};

/// Seven independent Poisson processes; each event flips each qubit of its
/// set with probability 1/2, independently. Returned sorted by time.
inline std::vector<PoisonEvent> generate_events(const EventRates& rates, double duration,
                                                uint64_t seed) {
    if (duration <= 0.0) throw std::invalid_argument("generate_events: duration must be > 0");
    rates.validate();
    std::vector<PoisonEvent> events;
    for (int i = 0; i < 7; ++i) {
        if (rates.r[i] <= 0.0) continue;
        Rng rng = Rng::substream(seed, static_cast<uint64_t>(i));
        double t = 0.0;
        while (true) {
            t += rng.exponential(rates.r[i]);
            if (t >= duration) break;
            PoisonEvent ev;
            ev.time = t;
            ev.type_mask = kEventMask[i];
            for (int q = 0; q < 3; ++q)
                if ((ev.type_mask >> q) & 1)
                    if (rng.bernoulli(0.5)) ev.flips_mask |= (1u << q);
            events.push_back(ev);
        }
    }
    std::sort(events.begin(), events.end(),
              [](const PoisonEvent& a, const PoisonEvent& b) { return a.time < b.time; });
    return events;
}

namespace detail {

inline ParityTrace trace_from_events(std::vector<PoisonEvent> events, const ReadoutModel& readout,
                                     const ChargeNoiseModel& charge, double dt_rep,
                                     double duration, uint64_t seed) {
    if (dt_rep <= 0.0) throw std::invalid_argument("synthesize_trace: dt_rep must be > 0");
    charge.validate();
    for (int q = 0; q < 3; ++q) readout.channel[q].validate(readout.labels[q]);
    std::sort(events.begin(), events.end(),
              [](const PoisonEvent& a, const PoisonEvent& b) { return a.time < b.time; });

    ParityTrace trace;
    trace.dt_rep = dt_rep;
    trace.labels = readout.labels;
    const size_t n = static_cast<size_t>(std::llround(duration / dt_rep));
    for (int q = 0; q < 3; ++q) {
        trace.samples[q].resize(n);
        trace.truth_parity[q].resize(n);
    }

    std::array<Rng, 3> charge_rng = {Rng::substream(seed, 101), Rng::substream(seed, 102),
                                     Rng::substream(seed, 103)};
    std::array<Rng, 3> sample_rng = {Rng::substream(seed, 201), Rng::substream(seed, 202),
                                     Rng::substream(seed, 203)};

    std::array<double, 3> n_g = {charge.initial_offset, charge.initial_offset,
                                 charge.initial_offset};
    std::array<int, 3> parity = {1, 1, 1};
    size_t ev = 0;
    const double jump_p = charge.jump_rate * dt_rep;
    const double diff_step = charge.diffusion_sigma * std::sqrt(dt_rep);

    for (size_t k = 0; k < n; ++k) {
        double t_shot = static_cast<double>(k) * dt_rep;
        while (ev < events.size() && events[ev].time <= t_shot) {
            for (int q = 0; q < 3; ++q)
                if ((events[ev].flips_mask >> q) & 1) parity[q] = -parity[q];
            ++ev;
        }
        for (int q = 0; q < 3; ++q) {
            if (k > 0) {
                if (diff_step > 0.0) n_g[q] += charge_rng[q].normal(0.0, diff_step);
                if (jump_p > 0.0 && charge_rng[q].bernoulli(jump_p)) {
                    double size = charge_rng[q].uniform(charge.jump_size_min, 0.5);
                    n_g[q] += charge_rng[q].bernoulli(0.5) ? size : -size;
                }
            }
            const ReadoutChannel& ch = readout.channel[q];
            double f_eff = mapping_fidelity(n_g[q], ch.fidelity_max, charge.degeneracy_halfwidth);
            // correct assignment with probability (1 + F_eff)/2 so that the
            // mean mapped signal is F_eff times the parity amplitude
            int state = sample_rng[q].bernoulli(0.5 * (1.0 + f_eff)) ? parity[q] : -parity[q];
            double mean = state > 0 ? ch.mean_even : ch.mean_odd;
            double sigma = state > 0 ? ch.sigma_even : ch.sigma_odd;
            trace.samples[q][k] = sample_rng[q].normal(mean, sigma);
            trace.truth_parity[q][k] = static_cast<int8_t>(parity[q]);
        }
    }
    trace.truth_events = std::move(events);
    return trace;
}

} // namespace detail

/// Raw analog parity-readout record for a background poisoning event stream.
inline ParityTrace synthesize_trace(const std::vector<PoisonEvent>& events,
                                    const ReadoutModel& readout, const ChargeNoiseModel& charge,
                                    double dt_rep, double duration, uint64_t seed) {
    return detail::trace_from_events(events, readout, charge, dt_rep, duration, seed);
}

struct PulsedInjection {
    double rate = 20.0;          // Hz
    double amplitude_vb = 1e-3;  // V
    double pulse_duration = 0.0; // s, the dose knob T
    // per-qubit dose-response time constant T0: P(T) = (1 - exp(-T/T0))/2
    std::array<double, 3> t0 = {10e-6, 10e-6, 10e-6};
};

inline double pulse_switch_probability(double pulse_duration, double t0) {
    if (pulse_duration <= 0.0) return 0.0;
    return 0.5 * (1.0 - std::exp(-pulse_duration / t0));
}

/// Periodic phonon injection: at each pulse every qubit flips with the
/// dose-response probability; background events are superposed.
inline ParityTrace synthesize_pulsed(const EventRates& background, const PulsedInjection& injector,
                                     const ReadoutModel& readout, const ChargeNoiseModel& charge,
                                     double dt_rep, double duration, uint64_t seed) {
    if (injector.rate * duration < 1.0)
        throw std::invalid_argument("synthesize_pulsed: need at least one pulse in the record");
    std::vector<PoisonEvent> events = generate_events(background, duration, seed);
    Rng rng = Rng::substream(seed, 42);
    std::array<double, 3> p{};
    for (int q = 0; q < 3; ++q)
        p[q] = pulse_switch_probability(injector.pulse_duration, injector.t0[q]);
    const double period = 1.0 / injector.rate;
    for (double t = 0.5 * period; t < duration; t += period) {
        PoisonEvent ev;
        ev.time = t;
        ev.type_mask = 7;
        ev.from_pulse = true;
        for (int q = 0; q < 3; ++q)
            if (rng.bernoulli(p[q])) ev.flips_mask |= (1u << q);
        events.push_back(ev);
    }
    return detail::trace_from_events(std::move(events), readout, charge, dt_rep, duration, seed);
}

} // namespace qpsim

#endif
