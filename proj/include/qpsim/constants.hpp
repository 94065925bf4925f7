#ifndef QPSIM_CONSTANTS_HPP
#define QPSIM_CONSTANTS_HPP

namespace qpsim {
namespace constants {

// CODATA 2018 / exact SI values
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double electron_charge = 1.602176634e-19; // C
inline constexpr double pi = 3.14159265358979323846;

// Superconducting gap of thin-film Al, in J
inline constexpr double default_gap_al_ev = 180e-6;
inline constexpr double default_gap_al = default_gap_al_ev * electron_charge;

} // namespace constants
} // namespace qpsim

#endif
