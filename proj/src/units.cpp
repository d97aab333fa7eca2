#include "ionchain/units.hpp"

#include <cmath>

#include "ionchain/errors.hpp"

namespace ionchain {

IonSpecies make_species(std::string name, double mass_amu, int charge_e) {
    if (!(mass_amu > 0.0) || !std::isfinite(mass_amu))
        throw DomainError("species '" + name + "': mass must be positive");
    if (charge_e == 0)
        throw DomainError("species '" + name + "': charge must be nonzero");
    return IonSpecies{std::move(name), mass_amu, charge_e};
}

namespace {

void check_positive(double value, double sigma, const char* what) {
    if (!std::isfinite(value) || value <= 0.0)
        throw DomainError(std::string(what) + " must be positive and finite");
    if (!std::isfinite(sigma) || sigma < 0.0)
        throw DomainError(std::string(what) + " sigma must be non-negative");
}

}  // namespace

Frequency Frequency::from_angular(double rad_per_s, double sigma) {
    check_positive(rad_per_s, sigma, "frequency");
    return Frequency{rad_per_s, sigma};
}

Frequency Frequency::from_hz(double hz, double sigma_hz) {
    check_positive(hz, sigma_hz, "frequency");
    return Frequency{hz * constants::kTwoPi, sigma_hz * constants::kTwoPi};
}

Frequency Frequency::from_khz(double khz, double sigma_khz) {
    return from_hz(khz * constants::kKilo, sigma_khz * constants::kKilo);
}

Length Length::from_m(double meters, double sigma) {
    if (!std::isfinite(meters))
        throw DomainError("length must be finite");
    if (!std::isfinite(sigma) || sigma < 0.0)
        throw DomainError("length sigma must be non-negative");
    return Length{meters, sigma};
}

Length Length::from_um(double um, double sigma_um) {
    return from_m(um * constants::kMicron, sigma_um * constants::kMicron);
}

Length length_scale(const IonSpecies& species, const Frequency& omega_z) {
    if (!(omega_z.rad_per_s > 0.0))
        throw DomainError("length_scale: axial frequency must be positive");
    const double q = species.charge_coulomb();
    const double m = species.mass_kg();
    const double w2 = omega_z.rad_per_s * omega_z.rad_per_s;
    const double l = std::cbrt(q * q / (4.0 * constants::kPi * constants::kVacuumPermittivity * m * w2));
    const double sigma = l * (2.0 / 3.0) * omega_z.relative_sigma();
    return Length{l, sigma};
}

Frequency axial_frequency_from_scale(const IonSpecies& species, const Length& l) {
    if (!(l.meters > 0.0))
        throw DomainError("axial_frequency_from_scale: length scale must be positive");
    const double q = species.charge_coulomb();
    const double m = species.mass_kg();
    const double l3 = l.meters * l.meters * l.meters;
    const double w = std::sqrt(q * q / (4.0 * constants::kPi * constants::kVacuumPermittivity * m * l3));
    const double sigma = w * 1.5 * l.relative_sigma();
    return Frequency{w, sigma};
}

}  // namespace ionchain
