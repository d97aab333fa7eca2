#ifndef IONCHAIN_UNITS_HPP
#define IONCHAIN_UNITS_HPP

#include <string>

#include "ionchain/constants.hpp"

namespace ionchain {

// Trapped particle species. Mass is stored in amu and converted to SI on
// demand through the single constant in constants.hpp, so amu -> kg -> amu
// round-trips exactly up to floating rounding.
struct IonSpecies {
    std::string name;
    double mass_amu = 0.0;
    int charge_e = 0;  // integer multiple of the elementary charge

    double mass_kg() const { return mass_amu * constants::kAtomicMassUnit; }
    double charge_coulomb() const { return charge_e * constants::kElementaryCharge; }
};

// Validates mass > 0 and charge != 0.
IonSpecies make_species(std::string name, double mass_amu, int charge_e);

// Angular frequency with a one-standard-deviation uncertainty, both in rad/s.
// Construction from an ordinary frequency multiplies by 2*pi exactly once;
// accessors divide it back out. Factories require value > 0 (sigma >= 0).
struct Frequency {
    double rad_per_s = 0.0;
    double sigma_rad_per_s = 0.0;

    static Frequency from_angular(double rad_per_s, double sigma = 0.0);
    static Frequency from_hz(double hz, double sigma_hz = 0.0);
    static Frequency from_khz(double khz, double sigma_khz = 0.0);

    double hz() const { return rad_per_s / constants::kTwoPi; }
    double khz() const { return hz() / constants::kKilo; }
    double sigma_hz() const { return sigma_rad_per_s / constants::kTwoPi; }
    double sigma_khz() const { return sigma_hz() / constants::kKilo; }
    double relative_sigma() const { return sigma_rad_per_s / rad_per_s; }
};

// Length in meters with a one-standard-deviation uncertainty.
struct Length {
    double meters = 0.0;
    double sigma_m = 0.0;

    static Length from_m(double meters, double sigma = 0.0);
    static Length from_um(double um, double sigma_um = 0.0);

    double um() const { return meters / constants::kMicron; }
    double sigma_um() const { return sigma_m / constants::kMicron; }
    double relative_sigma() const { return sigma_m / meters; }
};

// Two-body equilibrium length scale l = (Q^2 / (4 pi eps0 m w^2))^(1/3).
// Relative uncertainty is propagated as (2/3) of the frequency's.
// Throws DomainError for a non-positive frequency.
Length length_scale(const IonSpecies& species, const Frequency& omega_z);

// Inverse of length_scale: the axial frequency whose two-body length scale
// equals l. sigma propagated as (3/2) of l's relative uncertainty.
Frequency axial_frequency_from_scale(const IonSpecies& species, const Length& l);

}  // namespace ionchain

#endif
