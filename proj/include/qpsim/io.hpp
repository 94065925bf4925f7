#ifndef QPSIM_IO_HPP
#define QPSIM_IO_HPP

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpsim/charge_tomo.hpp"
#include "qpsim/coincidence.hpp"
#include "qpsim/csv.hpp"
#include "qpsim/parity_decode.hpp"
#include "qpsim/parity_synth.hpp"
#include "qpsim/phonon_mc.hpp"
#include "qpsim/qp_response.hpp"

namespace qpsim {

inline void write_hit_series_csv(const std::string& path, const HitSeries& hits,
                                 const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"qubit_label", "hit_time_s"});
    for (size_t q = 0; q < hits.qubit_labels.size(); ++q)
        for (double t : hits.hit_times[q]) w.row({hits.qubit_labels[q], format_double(t)});
}

inline void write_tallies_text(const std::string& path, const HitSeries& hits) {
    std::ofstream out(path);
    out << "launched " << hits.launched << "\n"
        << "hits " << hits.total_hits() << "\n"
        << "island_absorbed " << hits.island_absorbed << "\n"
        << "escaped " << hits.escaped << "\n"
        << "surviving " << hits.surviving << "\n";
    for (size_t q = 0; q < hits.qubit_labels.size(); ++q)
        out << "hits_" << hits.qubit_labels[q] << " " << hits.hit_times[q].size() << "\n";
}

inline void write_rate_series_csv(const std::string& path, const RateSeries& s,
                                  const std::vector<double>& dxqp,
                                  const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"time_s", "dgamma1_per_s", "dxqp"});
    for (size_t i = 0; i < s.time.size(); ++i)
        w.row({format_double(s.time[i]), format_double(s.value[i]),
               format_double(i < dxqp.size() ? dxqp[i] : 0.0)});
}

inline void write_trace_csv(const std::string& path, const ParityTrace& trace,
                            const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"shot_index", "time_s", "q" + trace.labels[0] + "_signal",
           "q" + trace.labels[1] + "_signal", "q" + trace.labels[2] + "_signal"});
    for (size_t k = 0; k < trace.n_shots(); ++k) {
        w.row({std::to_string(k), format_double(trace.shot_time(k)),
               format_double(trace.samples[0][k]), format_double(trace.samples[1][k]),
               format_double(trace.samples[2][k])});
    }
}

inline void write_truth_csv(const std::string& path, const ParityTrace& trace,
                            const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"event_time_s", "type", "flips"});
    for (const auto& ev : trace.truth_events) {
        std::string flips;
        for (int q = 0; q < 3; ++q)
            if ((ev.flips_mask >> q) & 1) flips += trace.labels[q];
        w.row({format_double(ev.time), ev.type_name(), flips});
    }
}

struct LoadedTrace {
    double dt_rep = 0.0;
    std::array<std::string, 3> labels;
    std::array<std::vector<double>, 3> samples;
};

inline LoadedTrace read_trace_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 5) throw std::runtime_error("trace csv: expected 5 columns in '" + path + "'");
    LoadedTrace out;
    for (int q = 0; q < 3; ++q) {
        std::string col = t.header[2 + q];
        if (col.size() > 8 && col.substr(0, 1) == "q" && col.substr(col.size() - 7) == "_signal")
            out.labels[q] = col.substr(1, col.size() - 8);
        else
            out.labels[q] = col;
    }
    int time_col = t.column("time_s");
    for (size_t r = 0; r < t.rows.size(); ++r)
        for (int q = 0; q < 3; ++q) out.samples[q].push_back(t.number(r, 2 + q));
    if (t.rows.size() >= 2)
        out.dt_rep = t.number(1, time_col) - t.number(0, time_col);
    return out;
}

inline void write_digital_csv(const std::string& path, const DigitalParity& digital,
                              const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"shot_index", "value"});
    for (size_t i = 0; i < digital.values.size(); ++i) {
        w.row({std::to_string(i),
               digital.values[i] == 0 ? "NaN" : std::to_string(static_cast<int>(digital.values[i]))});
    }
}

inline void write_psd_csv(const std::string& path, const Periodogram& p,
                          const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"freq_hz", "psd"});
    for (size_t i = 0; i < p.freq.size(); ++i)
        w.row({format_double(p.freq[i]), format_double(p.psd[i])});
}

/// Report mirroring the observed / background / extracted table layout.
inline void write_rates_report_csv(const std::string& path, const CoincidenceSet& obs,
                                   const BackgroundRates& bg, const DeconvolvedRates& decon,
                                   const std::array<std::string, 3>& labels,
                                   const std::string& provenance = "") {
    CsvWriter w(path);
    if (!provenance.empty()) w.comment(provenance);
    w.row({"qubits", "n_events", "tau_s", "r_obs_per_s", "r_obs_err_per_s", "r_background_per_s",
           "r_background_err_per_s", "r_extracted_per_s", "r_extracted_err_per_s"});
    const std::array<std::string, 7> names = {
        labels[0], labels[1], labels[2], labels[0] + "&" + labels[1], labels[1] + "&" + labels[2],
        labels[0] + "&" + labels[2], labels[0] + "&" + labels[1] + "&" + labels[2]};
    for (int i = 0; i < 7; ++i) {
        std::string bg_rate = i >= 3 ? format_double(bg.rate[i - 3]) : "";
        std::string bg_err = i >= 3 ? format_double(bg.err[i - 3]) : "";
        w.row({names[i], std::to_string(obs.counts[i]), format_double(obs.exposure[i]),
               format_double(obs.rate_obs[i]), format_double(obs.rate_err[i]), bg_rate, bg_err,
               format_double(decon.rate[i]), format_double(decon.err[i])});
    }
}

struct ObservedRatesFile {
    std::array<double, 7> rate{};
    std::array<double, 7> err{};
};

/// Bypass-mode input: an observed-rates table with columns
/// type,r_obs_per_s,r_err_per_s and types A,B,C,AB,BC,AC,ABC.
inline ObservedRatesFile read_observed_rates_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int type_col = t.column("type");
    int rate_col = t.column("r_obs_per_s");
    int err_col = -1;
    try {
        err_col = t.column("r_err_per_s");
    } catch (const std::runtime_error&) {
    }
    ObservedRatesFile out;
    std::array<bool, 7> seen{};
    for (size_t r = 0; r < t.rows.size(); ++r) {
        int idx = event_index_from_name(t.rows[r].at(static_cast<size_t>(type_col)));
        out.rate[idx] = t.number(r, rate_col);
        if (err_col >= 0) out.err[idx] = t.number(r, err_col);
        seen[idx] = true;
    }
    for (int i = 0; i < 7; ++i)
        if (!seen[i])
            throw std::runtime_error(std::string("observed rates file missing type ") + kEventName[i]);
    return out;
}

struct RunManifest {
    std::string command;
    std::string config_path;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version = "qpsim 1.0.0";
    double wall_seconds = 0.0;
};

inline void write_manifest(const std::string& dir, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config_path;
    j["seed"] = m.seed;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["tool_version"] = m.tool_version;
    j["wall_seconds"] = m.wall_seconds;
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    out << j.dump(2) << "\n";
}

inline std::string provenance_line(const RunManifest& m) {
    return m.tool_version + " " + m.command + " seed=" + std::to_string(m.seed) +
           (m.config_path.empty() ? "" : " config=" + m.config_path);
}

} // namespace qpsim

#endif
