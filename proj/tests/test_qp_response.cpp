#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qpsim/config.hpp"
#include "qpsim/qp_response.hpp"
#include "qpsim/rng.hpp"

#include "helpers.hpp"

using namespace qpsim;

TEST_CASE("delta_gamma1 arithmetic and sign convention", "[qp]") {
    REQUIRE(delta_gamma1(20e-6, 20e-6) == 0.0);
    REQUIRE(delta_gamma1(10e-6, 20e-6) == Catch::Approx(5.0e4).epsilon(1e-12));
    REQUIRE(delta_gamma1(40e-6, 20e-6) == Catch::Approx(-2.5e4).epsilon(1e-12));
    REQUIRE_THROWS_AS(delta_gamma1(0.0, 20e-6), std::invalid_argument);
    REQUIRE_THROWS_AS(delta_gamma1(10e-6, -1.0), std::invalid_argument);
}

TEST_CASE("xqp_from_gamma closed form", "[qp]") {
    REQUIRE(xqp_from_gamma(0.0, constants::default_gap_al, 4.84e9) == 0.0);

    // hand evaluation: 2 * (180 ueV) * (2 pi * 4.84 GHz) / hbar = 1.66327e22,
    // sqrt = 1.28968e11, so pi * 1e4 / sqrt = 2.43595e-7
    double x = xqp_from_gamma(1e4, constants::default_gap_al, 4.84e9);
    REQUIRE(x == Catch::Approx(2.43595e-7).epsilon(1e-4));

    // homogeneity
    double g = 7.3e3;
    REQUIRE(xqp_from_gamma(2.0 * g, constants::default_gap_al, 4.84e9) ==
            Catch::Approx(2.0 * xqp_from_gamma(g, constants::default_gap_al, 4.84e9))
                .epsilon(1e-12));
    // negative dGamma1 passes through linearly
    REQUIRE(xqp_from_gamma(-g, constants::default_gap_al, 4.84e9) ==
            Catch::Approx(-xqp_from_gamma(g, constants::default_gap_al, 4.84e9)).epsilon(1e-12));

    REQUIRE_THROWS_AS(xqp_from_gamma(1.0, 0.0, 4.84e9), std::invalid_argument);
    REQUIRE_THROWS_AS(xqp_from_gamma(1.0, constants::default_gap_al, -1.0), std::invalid_argument);
}

TEST_CASE("gamma_from_hits bins and scales", "[qp]") {
    HitSeries hits;
    hits.qubit_labels = {"A", "B"};
    hits.hit_times = {{}, {}};
    auto zero = gamma_from_hits(hits, "A", 2.0, 1e-6);
    for (double v : zero.value) REQUIRE(v == 0.0);

    hits.hit_times[0] = {0.5e-6, 0.6e-6, 2.5e-6};
    hits.hit_times[1] = {9.9e-6};
    auto series = gamma_from_hits(hits, "A", 2.0, 1e-6);
    REQUIRE(series.time.size() == 10); // extends to the latest hit anywhere
    REQUIRE(series.value[0] == Catch::Approx(2.0 * 2.0 / 1e-6));
    REQUIRE(series.value[2] == Catch::Approx(2.0 * 1.0 / 1e-6));
    REQUIRE(series.value[1] == 0.0);

    // responsivity linearity
    auto series3 = gamma_from_hits(hits, "A", 6.0, 1e-6);
    for (size_t i = 0; i < series.value.size(); ++i)
        REQUIRE(series3.value[i] == Catch::Approx(3.0 * series.value[i]).margin(1e-18));

    REQUIRE_THROWS_AS(gamma_from_hits(hits, "Z", 1.0, 1e-6), std::invalid_argument);
    REQUIRE_THROWS_AS(gamma_from_hits(hits, "A", 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("poisoning onset is delayed past the pulse and decays exponentially", "[qp]") {
    SimulationConfig cfg = default_simulation_config();
    for (auto& q : cfg.geometry.qubit_sites) q.junction_footprint_area = 9e-8;
    cfg.transport.qubit_pairbreak_prob = 0.5;
    cfg.transport.anchor_escape_prob = 0.15;
    InjectionPulse pulse{"J1", 1e-3, 10e-6, 0.0};
    cfg.transport.phonons_per_second_of_pulse = 40000 / pulse.duration;
    auto ens = launch(pulse, cfg.transport, cfg.geometry, 99);
    auto hits = transport(ens, cfg.transport, cfg.geometry, 400e-6, 100);

    auto series = gamma_from_hits(hits, "B", cfg.response.responsivity, 4e-6);
    size_t ipk = 0;
    for (size_t i = 1; i < series.value.size(); ++i)
        if (series.value[i] > series.value[ipk]) ipk = i;
    double peak_delay = series.time[ipk] - pulse.duration;
    REQUIRE(peak_delay > 3e-6);
    REQUIRE(peak_delay < 40e-6);
    // flux well after the peak is much lower than the peak
    size_t late = std::min(series.value.size() - 1, ipk + 35); // +140 us
    REQUIRE(series.value[late] < 0.25 * series.value[ipk]);
}

TEST_CASE("fit_t1 recovers exact exponentials to high precision", "[qp]") {
    const double t1 = 20e-6;
    std::vector<std::pair<double, double>> samples;
    for (int i = 0; i < 30; ++i) {
        double t = 0.4e-6 * (i + 1) + ((i % 3) * 1.7e-6);
        samples.emplace_back(t, std::exp(-t / t1));
    }
    auto fit = fit_t1(samples);
    REQUIRE(fit.t1 == Catch::Approx(t1).epsilon(1e-9));
    REQUIRE(fit.amplitude == Catch::Approx(1.0).epsilon(1e-9));
    REQUIRE(fit.offset == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(fit.t1_ci_low <= fit.t1);
    REQUIRE(fit.t1 <= fit.t1_ci_high);
}

TEST_CASE("fit_t1 confidence intervals cover the truth", "[qp]") {
    // seeded self-consistency: the 95% CI contains the true T1 in >= 90% of
    // noisy refits
    const double t1 = 20e-6, a = 0.9, b = 0.05, noise = 0.02;
    int covered = 0;
    const int trials = 500;
    Rng rng(2718);
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<std::pair<double, double>> samples;
        for (int i = 0; i < 50; ++i) {
            double t = 2.0e-6 * i + 0.5e-6;
            samples.emplace_back(t, a * std::exp(-t / t1) + b + rng.normal(0.0, noise));
        }
        auto fit = fit_t1(samples);
        if (fit.t1_ci_low <= t1 && t1 <= fit.t1_ci_high) ++covered;
    }
    REQUIRE(covered >= static_cast<int>(0.90 * trials));
}

TEST_CASE("fit_t1 input validation", "[qp]") {
    std::vector<std::pair<double, double>> few = {{1e-6, 0.9}, {2e-6, 0.8}, {4e-6, 0.7},
                                                  {8e-6, 0.6}};
    REQUIRE_THROWS_AS(fit_t1(few), std::invalid_argument);

    std::vector<std::pair<double, double>> narrow;
    for (int i = 0; i < 10; ++i) narrow.emplace_back(10e-6 + i * 1e-7, 0.5 - i * 0.01);
    REQUIRE_THROWS_AS(fit_t1(narrow), std::invalid_argument);

    std::vector<std::pair<double, double>> flat;
    for (int i = 0; i < 10; ++i) flat.emplace_back(1e-6 * std::pow(1.8, i), 0.42);
    REQUIRE_THROWS_WITH(fit_t1(flat), Catch::Matchers::ContainsSubstring("degenerate"));
}

TEST_CASE("relaxation observation invariants", "[qp]") {
    // assembling an observation keeps dGamma1/dxqp consistent with the fits
    const double t1 = 12e-6, baseline = 20e-6;
    RelaxationObservation obs;
    obs.delay_after_pulse = 30e-6;
    obs.t1_fitted = t1;
    obs.delta_gamma1 = delta_gamma1(t1, baseline);
    obs.delta_xqp = xqp_from_gamma(obs.delta_gamma1, constants::default_gap_al, 4.84e9);
    REQUIRE(obs.delta_gamma1 == Catch::Approx(1.0 / t1 - 1.0 / baseline));
    REQUIRE(obs.delta_xqp / obs.delta_gamma1 ==
            Catch::Approx(xqp_from_gamma(1.0, constants::default_gap_al, 4.84e9)).epsilon(1e-12));
}
