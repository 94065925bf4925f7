#ifndef QPSIM_CONFIG_HPP
#define QPSIM_CONFIG_HPP

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpsim/chip_model.hpp"
#include "qpsim/parity_decode.hpp"
#include "qpsim/parity_synth.hpp"

namespace qpsim {

struct ResponseParams {
    double responsivity = 4.0e4; // dGamma1 (1/s) per unit delivered hit rate (1/s)
    // optional photon-assisted poisoning peak, additive dGamma1(V_b)
    std::vector<std::pair<double, double>> photon_peak_curve;

    double photon_peak(double vb) const {
        if (photon_peak_curve.empty()) return 0.0;
        if (vb <= photon_peak_curve.front().first) return photon_peak_curve.front().second;
        for (size_t i = 1; i < photon_peak_curve.size(); ++i) {
            if (vb <= photon_peak_curve[i].first) {
                auto [x0, y0] = photon_peak_curve[i - 1];
                auto [x1, y1] = photon_peak_curve[i];
                double w = (vb - x0) / (x1 - x0);
                return y0 + w * (y1 - y0);
            }
        }
        return photon_peak_curve.back().second;
    }
};

struct SimulationConfig {
    ChipGeometry geometry;
    std::map<std::string, QubitParams> qubit_params;
    TransportParams transport;
    ReadoutModel readout;
    ChargeNoiseModel charge;
    DecodeParams decode;
    ResponseParams response;
    double dt_rep = 10e-3;
};

/// Non-Cu chip layout: inter-qubit spacings 5.3 / 4.5 / 2.0 mm, one perimeter
/// injector 5-6 mm from the qubits, corner anchors.
inline SimulationConfig default_simulation_config() {
    SimulationConfig cfg;
    cfg.geometry.qubit_sites = {
        {"A", 1.2e-3, 3.0e-3, 100e-12},
        {"B", 6.5e-3, 3.0e-3, 100e-12},
        {"C", 2.317e-3, 1.341e-3, 100e-12},
    };
    cfg.geometry.injector_sites = {{"J1", 3.3e-3, 7.5e-3}};
    cfg.geometry.anchor_points = ChipGeometry::corner_anchors(cfg.geometry.side_length, 0.5e-3);

    QubitParams qa;
    qa.f01 = 4.6555e9; qa.f_ro = 6.0431e9; qa.charge_dispersion_2df = 3.743e6;
    qa.t1_baseline_mean = 34e-6; qa.t1_baseline_sigma = 10e-6; qa.ej_over_ec = 24.0;
    QubitParams qb;
    qb.f01 = 4.7363e9; qb.f_ro = 6.1506e9; qb.charge_dispersion_2df = 3.201e6;
    qb.t1_baseline_mean = 20e-6; qb.t1_baseline_sigma = 2e-6; qb.ej_over_ec = 26.0;
    QubitParams qc;
    qc.f01 = 4.8408e9; qc.f_ro = 6.229e9; qc.charge_dispersion_2df = 4.631e6;
    qc.t1_baseline_mean = 16e-6; qc.t1_baseline_sigma = 2e-6; qc.ej_over_ec = 25.0;
    cfg.qubit_params = {{"A", qa}, {"B", qb}, {"C", qc}};

    cfg.readout.labels = {"A", "B", "C"};
    for (auto& ch : cfg.readout.channel) ch = ReadoutChannel{};
    return cfg;
}

namespace detail {

inline double get_num(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw std::invalid_argument(std::string("config: field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline bool get_bool(const nlohmann::json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean())
        throw std::invalid_argument(std::string("config: field '") + key + "' must be a boolean");
    return j.at(key).get<bool>();
}

inline ReadoutChannel parse_readout(const nlohmann::json& j, const ReadoutChannel& fallback) {
    ReadoutChannel ch = fallback;
    ch.mean_even = get_num(j, "mean_even", ch.mean_even);
    ch.mean_odd = get_num(j, "mean_odd", ch.mean_odd);
    ch.sigma_even = get_num(j, "sigma_even", ch.sigma_even);
    ch.sigma_odd = get_num(j, "sigma_odd", ch.sigma_odd);
    ch.fidelity_max = get_num(j, "fidelity_max", ch.fidelity_max);
    return ch;
}

} // namespace detail

inline SimulationConfig load_simulation_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true); // allow comments
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: parse failure in '" + path + "': " + e.what());
    }

    SimulationConfig cfg = default_simulation_config();
    using detail::get_bool;
    using detail::get_num;

    if (j.contains("chip")) {
        const auto& c = j["chip"];
        cfg.geometry.side_length = get_num(c, "side_length_m", cfg.geometry.side_length);
        cfg.geometry.thickness = get_num(c, "thickness_m", cfg.geometry.thickness);
        cfg.geometry.island_pitch = get_num(c, "island_pitch_m", cfg.geometry.island_pitch);
        cfg.geometry.island_size = get_num(c, "island_size_m", cfg.geometry.island_size);
        cfg.geometry.islands_enabled = get_bool(c, "islands_enabled", cfg.geometry.islands_enabled);
        double anchor_radius = get_num(c, "anchor_capture_radius_m", 0.5e-3);
        cfg.geometry.anchor_points =
            ChipGeometry::corner_anchors(cfg.geometry.side_length, anchor_radius);
        if (c.contains("anchors")) {
            cfg.geometry.anchor_points.clear();
            for (const auto& a : c["anchors"]) {
                cfg.geometry.anchor_points.push_back(
                    {get_num(a, "x_m", 0.0), get_num(a, "y_m", 0.0),
                     get_num(a, "capture_radius_m", anchor_radius)});
            }
        }
    }

    if (j.contains("qubits")) {
        cfg.geometry.qubit_sites.clear();
        cfg.qubit_params.clear();
        size_t idx = 0;
        for (const auto& q : j["qubits"]) {
            if (!q.contains("label"))
                throw std::invalid_argument("config: qubit entry missing 'label'");
            QubitSite site;
            site.label = q["label"].get<std::string>();
            site.x = get_num(q, "x_m", 0.0);
            site.y = get_num(q, "y_m", 0.0);
            site.junction_footprint_area = get_num(q, "junction_footprint_area_m2", 100e-12);
            cfg.geometry.qubit_sites.push_back(site);

            QubitParams p;
            p.f01 = get_num(q, "f01_hz", p.f01);
            p.f_ro = get_num(q, "f_ro_hz", p.f_ro);
            p.charge_dispersion_2df = get_num(q, "charge_dispersion_2df_hz", p.charge_dispersion_2df);
            p.t1_baseline_mean = get_num(q, "t1_baseline_mean_s", p.t1_baseline_mean);
            p.t1_baseline_sigma = get_num(q, "t1_baseline_sigma_s", p.t1_baseline_sigma);
            p.ej_over_ec = get_num(q, "ej_over_ec", p.ej_over_ec);
            p.gap_delta_al =
                get_num(q, "gap_delta_al_ev", constants::default_gap_al_ev) * constants::electron_charge;
            cfg.qubit_params[site.label] = p;

            if (idx < 3) {
                cfg.readout.labels[idx] = site.label;
                if (q.contains("readout"))
                    cfg.readout.channel[idx] = detail::parse_readout(q["readout"], ReadoutChannel{});
            }
            ++idx;
        }
    }

    if (j.contains("injectors")) {
        cfg.geometry.injector_sites.clear();
        for (const auto& inj : j["injectors"]) {
            if (!inj.contains("label"))
                throw std::invalid_argument("config: injector entry missing 'label'");
            cfg.geometry.injector_sites.push_back(
                {inj["label"].get<std::string>(), get_num(inj, "x_m", 0.0), get_num(inj, "y_m", 0.0)});
        }
    }

    if (j.contains("transport")) {
        const auto& t = j["transport"];
        cfg.transport.sound_speed_cs = get_num(t, "sound_speed_m_per_s", cfg.transport.sound_speed_cs);
        cfg.transport.island_absorb_prob =
            get_num(t, "island_absorb_prob", cfg.transport.island_absorb_prob);
        cfg.transport.anchor_escape_prob =
            get_num(t, "anchor_escape_prob", cfg.transport.anchor_escape_prob);
        cfg.transport.qubit_pairbreak_prob =
            get_num(t, "qubit_pairbreak_prob", cfg.transport.qubit_pairbreak_prob);
        cfg.transport.phonons_per_second_of_pulse =
            get_num(t, "phonons_per_second_of_pulse", cfg.transport.phonons_per_second_of_pulse);
        cfg.transport.injector_gap_delta_al =
            get_num(t, "injector_gap_delta_al_ev", constants::default_gap_al_ev) *
            constants::electron_charge;
        cfg.transport.subgap_leakage_fraction =
            get_num(t, "subgap_leakage_fraction", cfg.transport.subgap_leakage_fraction);
    }

    if (j.contains("charge_noise")) {
        const auto& c = j["charge_noise"];
        cfg.charge.diffusion_sigma = get_num(c, "diffusion_sigma_e_per_sqrt_s", cfg.charge.diffusion_sigma);
        cfg.charge.jump_rate = get_num(c, "jump_rate_per_s", cfg.charge.jump_rate);
        cfg.charge.jump_size_min = get_num(c, "jump_size_min_e", cfg.charge.jump_size_min);
        cfg.charge.degeneracy_halfwidth =
            get_num(c, "degeneracy_halfwidth_e", cfg.charge.degeneracy_halfwidth);
        cfg.charge.initial_offset = get_num(c, "initial_offset_e", cfg.charge.initial_offset);
    }

    if (j.contains("decode")) {
        const auto& d = j["decode"];
        cfg.decode.moving_average = static_cast<int>(get_num(d, "moving_average", cfg.decode.moving_average));
        cfg.decode.window = static_cast<int>(get_num(d, "window", cfg.decode.window));
        cfg.decode.envelope_window =
            static_cast<int>(get_num(d, "envelope_window", cfg.decode.envelope_window));
        cfg.decode.envelope_threshold_fraction =
            get_num(d, "envelope_threshold_fraction", cfg.decode.envelope_threshold_fraction);
        cfg.decode.gamma_p_prior = get_num(d, "gamma_p_prior_per_s", cfg.decode.gamma_p_prior);
        cfg.decode.t1_baseline_averages =
            static_cast<int>(get_num(d, "t1_baseline_averages", cfg.decode.t1_baseline_averages));
    }

    if (j.contains("response")) {
        const auto& r = j["response"];
        cfg.response.responsivity =
            get_num(r, "responsivity_dgamma1_per_hit_rate", cfg.response.responsivity);
        if (r.contains("photon_peak_curve")) {
            cfg.response.photon_peak_curve.clear();
            for (const auto& pt : r["photon_peak_curve"])
                cfg.response.photon_peak_curve.emplace_back(pt.at(0).get<double>(),
                                                            pt.at(1).get<double>());
        }
    }

    cfg.dt_rep = get_num(j, "dt_rep_s", cfg.dt_rep);

    // validate everything up front so errors carry field names
    cfg.geometry.validate();
    cfg.transport.validate();
    cfg.charge.validate();
    for (const auto& [label, p] : cfg.qubit_params) p.validate(label);
    for (int q = 0; q < 3 && q < static_cast<int>(cfg.geometry.qubit_sites.size()); ++q)
        cfg.readout.channel[q].validate(cfg.readout.labels[q]);
    if (cfg.dt_rep <= 0.0) throw std::invalid_argument("config: dt_rep_s must be > 0");
    return cfg;
}

/// The module-level contract: geometry, per-qubit parameters, transport.
inline std::tuple<ChipGeometry, std::map<std::string, QubitParams>, TransportParams>
load_config(const std::string& path) {
    SimulationConfig cfg = load_simulation_config(path);
    return {cfg.geometry, cfg.qubit_params, cfg.transport};
}

} // namespace qpsim

#endif
