#ifndef IONCHAIN_CONSTANTS_HPP
#define IONCHAIN_CONSTANTS_HPP

namespace ionchain::constants {

// CODATA 2018. All internal arithmetic is SI (m, kg, s, C, rad/s).
inline constexpr double kElementaryCharge = 1.602176634e-19;   // C (exact)
inline constexpr double kAtomicMassUnit   = 1.66053906660e-27; // kg
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Euler-Mascheroni constant, 15 digits.
inline constexpr double kEulerGamma = 0.577215664901533;

// Unit conversions used at the I/O boundary.
inline constexpr double kMicron = 1e-6;  // m
inline constexpr double kKilo = 1e3;

}  // namespace ionchain::constants

#endif
