#ifndef IONCHAIN_DUBIN_HPP
#define IONCHAIN_DUBIN_HPP

#include <cstdint>

#include "ionchain/units.hpp"

namespace ionchain {

// Parameters of the parabolic local-density law for an N-ion chain:
// 1/a(z) = (3N / 4L) * (1 - (z - z0)^2 / L^2).
struct DensityModelParams {
    long n_ions = 0;
    Length half_length;   // L
    double center_m = 0.0;  // z0
};

// One adjacent-pair spacing, located at the pair midpoint relative to the
// chain center. Units are meters for measured chains; the equilibrium solver
// produces the same structure in units of the length scale l.
struct SpacingSample {
    double position_m = 0.0;
    double spacing_m = 0.0;
};

// Real-valued ion-number estimate together with its nearest integer.
struct NEstimate {
    double n_real = 0.0;
    long n_int = 0;
};

// ln N + ln 6 + gamma_e - 13/5. Positive for all N >= 2.
double chain_log_factor(double n_ions);

// Local inter-ion spacing a(z) of the parabolic density law. Throws
// DomainError when |z - z0| >= L, where the density vanishes.
double local_spacing(double z_m, const DensityModelParams& params);

// Half-length L = l (3N)^(1/3) (ln N + ln 6 + gamma_e - 13/5)^(1/3), N >= 2.
Length half_length(long n_ions, const Length& l);

// Smallest inter-ion distance a0 = 4 l (3N)^(-2/3) (...)^(1/3).
// Identical to 4 * half_length(N, l) / (3N).
Length min_spacing_dubin(long n_ions, const Length& l);

// Empirical molecular-dynamics law a0 = 2.018 l N^(-0.559).
Length min_spacing_james(long n_ions, const Length& l);

inline constexpr double kJamesPrefactor = 2.018;
inline constexpr double kJamesExponent = 0.559;

// Inverts min_spacing_dubin for N by bracketing bisection on ln N over
// [2, 1e7], to 1e-10 relative. Throws DomainError when a0 exceeds the
// two-ion spacing or falls below the N = 1e7 spacing.
NEstimate estimate_n_dubin(const Length& a0, const Length& l);

// Closed-form inversion of the James law: N = (2.018 l / a0)^(1/0.559).
NEstimate estimate_n_james(const Length& a0, const Length& l);

// Log-derivative d ln N / d ln a0 along each law, used for first-order
// uncertainty propagation. The Dubin one depends on N; the James one is the
// constant -1/0.559. d ln N / d ln l is the negative of each.
double dln_n_dln_a0_dubin(double n_real);
inline constexpr double kDlnNDlnA0James = -1.0 / kJamesExponent;

// Axial frequency from a measured half-length: inverts half_length for the
// length scale l, then l for omega_z. Round-trips with half_length and
// length_scale to better than 1e-9 relative.
Frequency axial_freq_from_length(const Length& half_length_measured, long n_ions,
                                 const IonSpecies& species);

// Relative spread of adjacent spacings across the central n_central ions,
// (2 N_a / 3N)^2. Requires 2 <= n_central <= n_ions.
double homogeneity_dispersion(long n_central, long n_ions);

// Largest N_a whose dispersion stays within max_dispersion:
// floor((3N/2) sqrt(max_dispersion)). Requires 0 < max_dispersion < (2/3)^2.
// May return 0 for very tight targets; the caller decides how to proceed.
long central_count_for_dispersion(long n_ions, double max_dispersion);

}  // namespace ionchain

#endif
