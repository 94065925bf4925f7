#ifndef QPSIM_CHIP_MODEL_HPP
#define QPSIM_CHIP_MODEL_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpsim/constants.hpp"

namespace qpsim {

struct AnchorPoint {
    double x = 0.0;
    double y = 0.0;
    double capture_radius = 0.5e-3;
};

struct QubitSite {
    std::string label;
    double x = 0.0;
    double y = 0.0;
    double junction_footprint_area = 100e-12; // m^2
};

struct InjectorSite {
    std::string label;
    double x = 0.0;
    double y = 0.0;
};

/// Chip footprint spans [0, side_length] x [0, side_length]; the device layer
/// sits at z = thickness, the (optionally diced) back side at z = 0.
struct ChipGeometry {
    double side_length = 8.0e-3;
    double thickness = 0.525e-3;
    std::vector<QubitSite> qubit_sites;
    std::vector<InjectorSite> injector_sites;
    double island_pitch = 250e-6;
    double island_size = 200e-6;
    bool islands_enabled = false;
    std::vector<AnchorPoint> anchor_points;

    bool contains(double x, double y) const {
        return x >= 0.0 && x <= side_length && y >= 0.0 && y <= side_length;
    }

    const QubitSite* find_qubit(const std::string& label) const {
        for (const auto& q : qubit_sites)
            if (q.label == label) return &q;
        return nullptr;
    }

    const InjectorSite* find_injector(const std::string& label) const {
        for (const auto& i : injector_sites)
            if (i.label == label) return &i;
        return nullptr;
    }

    void validate() const {
        if (side_length <= 0.0) throw std::invalid_argument("chip.side_length must be > 0");
        if (thickness <= 0.0) throw std::invalid_argument("chip.thickness must be > 0");
        if (island_size >= island_pitch)
            throw std::invalid_argument("chip.island_size must be < chip.island_pitch");
        std::map<std::string, int> seen;
        for (const auto& q : qubit_sites) {
            if (!strictly_inside(q.x, q.y))
                throw std::invalid_argument("qubit '" + q.label + "': site outside chip");
            if (q.junction_footprint_area <= 0.0)
                throw std::invalid_argument("qubit '" + q.label + "': junction_footprint_area must be > 0");
            if (++seen[q.label] > 1)
                throw std::invalid_argument("qubit label '" + q.label + "' is not unique");
        }
        for (const auto& i : injector_sites) {
            if (!strictly_inside(i.x, i.y))
                throw std::invalid_argument("injector '" + i.label + "': site outside chip");
        }
        for (const auto& a : anchor_points) {
            if (a.capture_radius < 0.0)
                throw std::invalid_argument("anchor capture_radius must be >= 0");
        }
    }

    // four corner anchors: the chip is glued to its enclosure at the corners
    static std::vector<AnchorPoint> corner_anchors(double side, double radius) {
        return {{0.0, 0.0, radius},
                {side, 0.0, radius},
                {0.0, side, radius},
                {side, side, radius}};
    }

private:
    bool strictly_inside(double x, double y) const {
        return x > 0.0 && x < side_length && y > 0.0 && y < side_length;
    }
};

struct QubitParams {
    double f01 = 4.84e9;                 // Hz
    double f_ro = 6.2e9;                 // Hz
    double charge_dispersion_2df = 3e6;  // Hz, peak-to-peak
    double t1_baseline_mean = 20e-6;     // s
    double t1_baseline_sigma = 2e-6;     // s
    double ej_over_ec = 25.0;
    double gap_delta_al = constants::default_gap_al; // J

    void validate(const std::string& label) const {
        if (f01 <= 0.0) throw std::invalid_argument("qubit '" + label + "': f01 must be > 0");
        if (f_ro <= 0.0) throw std::invalid_argument("qubit '" + label + "': f_ro must be > 0");
        if (charge_dispersion_2df <= 0.0)
            throw std::invalid_argument("qubit '" + label + "': charge_dispersion_2df must be > 0");
        if (t1_baseline_mean <= 0.0)
            throw std::invalid_argument("qubit '" + label + "': t1_baseline_mean must be > 0");
        if (ej_over_ec < 10.0 || ej_over_ec > 100.0)
            throw std::invalid_argument("qubit '" + label + "': ej_over_ec must be in [10, 100]");
        if (gap_delta_al <= 0.0)
            throw std::invalid_argument("qubit '" + label + "': gap_delta_al must be > 0");
    }
};

struct TransportParams {
    double sound_speed_cs = 6.0e3;          // m/s
    double island_absorb_prob = 0.13;       // per back-side bounce onto an island
    double anchor_escape_prob = 0.35;       // per side-wall encounter inside an anchor
    double qubit_pairbreak_prob = 1.0;      // per top-side bounce inside a junction footprint
    double phonons_per_second_of_pulse = 1e8;
    double injector_gap_delta_al = constants::default_gap_al; // J
    double subgap_leakage_fraction = 0.0;   // relaxation-oscillation leakage below 2*Delta/e

    double pairbreaking_threshold_v() const {
        return 2.0 * injector_gap_delta_al / constants::electron_charge;
    }

    void validate() const {
        if (sound_speed_cs <= 0.0) throw std::invalid_argument("transport.sound_speed_cs must be > 0");
        auto prob = [](double v, const char* name) {
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument(std::string("transport.") + name + " must be in [0, 1]");
        };
        prob(island_absorb_prob, "island_absorb_prob");
        prob(anchor_escape_prob, "anchor_escape_prob");
        prob(qubit_pairbreak_prob, "qubit_pairbreak_prob");
        prob(subgap_leakage_fraction, "subgap_leakage_fraction");
        if (phonons_per_second_of_pulse < 0.0)
            throw std::invalid_argument("transport.phonons_per_second_of_pulse must be >= 0");
    }
};

/// True iff (x, y) lies on a back-side island of the dicing lattice. Islands
/// of size island_size are centered in cells of pitch island_pitch, separated
/// by saw cuts of width pitch - size.
inline bool island_at(const ChipGeometry& g, double x, double y) {
    if (!g.contains(x, y)) throw std::invalid_argument("island_at: point outside chip footprint");
    if (!g.islands_enabled) return false;
    auto on_axis = [&](double v) {
        double cell = v - std::floor(v / g.island_pitch) * g.island_pitch;
        return std::fabs(cell - 0.5 * g.island_pitch) <= 0.5 * g.island_size;
    };
    return on_axis(x) && on_axis(y);
}

} // namespace qpsim

#endif
