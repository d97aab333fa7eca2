#ifndef IONCHAIN_ESTIMATION_HPP
#define IONCHAIN_ESTIMATION_HPP

#include <optional>
#include <span>
#include <string>

#include "ionchain/dubin.hpp"
#include "ionchain/units.hpp"

namespace ionchain {

// Trap bookkeeping: secular frequencies and the rf calibration line
// omega_x / 2pi = slope_khz * V_rf / 2000 kHz.
struct TrapModel {
    std::optional<Frequency> omega_z;
    std::optional<Frequency> omega_x;
    double v_rf = 0.0;
    double v_dc = 2000.0;
    double rf_slope_khz_per_2000v = 157.0;
    double rf_slope_sigma_khz = 1.0;
};

struct CentralSpacing {
    Length mean;    // sigma carries the standard error of the mean
    Length stderr;
};

// Mean and standard error over the n_central - 1 spacings nearest the chain
// center. Sample positions must already be center-relative (subtract the
// fitted z0 first for measured chains).
CentralSpacing average_central_spacing(std::span<const SpacingSample> samples, long n_central);

// Picks the number of central ions to average: the largest N_a whose
// empirical spacing spread stays at or below the dispersion target while
// still tracking the quadratic dispersion floor (x1.5 safety) expected for a
// chain of n_ions_guess. Falls back to min(4, available) when nothing
// qualifies.
long choose_n_central(std::span<const SpacingSample> samples, double dispersion_target,
                      long n_ions_guess);

enum class UncertaintySource { axial_frequency, spacing_statistics, magnification };

const char* to_string(UncertaintySource source);

struct LawEstimate {
    double n_real = 0.0;
    long n_int = 0;
    double n_sigma = 0.0;
};

// Ion-number estimate with the full first-order uncertainty budget.
// Relative components combine in quadrature; dominant is the largest.
struct EstimateReport {
    static constexpr int kSchemaVersion = 1;

    Length a0_mean;
    Length a0_stderr;
    long n_central_used = 0;

    LawEstimate dubin;
    LawEstimate james;

    double rel_sigma_axial = 0.0;
    double rel_sigma_spacing = 0.0;
    double rel_sigma_magnification = 0.0;
    double rel_sigma_total = 0.0;
    UncertaintySource dominant = UncertaintySource::axial_frequency;

    // Inputs echoed for provenance.
    IonSpecies species;
    Frequency omega_z;
    double magnification_rel_sigma = 0.0;

    std::string to_json() const;  // schema-versioned, all inputs echoed
};

// Runs both estimators on the measured central spacing and propagates the
// uncertainty from (sigma_omega_z, sigma_a0, sigma_magnification) through the
// analytic log-derivatives of each law. magnification_rel_sigma is the
// relative calibration uncertainty (0 when a0 is not image-derived);
// n_central_used is echoed into the report (0 = direct a0 input).
EstimateReport estimate_report(const Length& a0_mean, const IonSpecies& species,
                               const Frequency& omega_z, double magnification_rel_sigma = 0.0,
                               long n_central_used = 0);

// omega_r^2 = omega_x^2 - omega_z^2 / 2, with first-order uncertainty.
// An unset omega_z leaves omega_r = omega_x. Throws DomainError when the
// radial relation has no real solution.
Frequency radial_frequency(const TrapModel& trap);

struct RfFrequencyResult {
    Frequency omega_x;       // zero-valued when degenerate
    bool degenerate = false; // v_rf == 0
};

// Radial frequency from the rf calibration line; the slope uncertainty
// scales proportionally. v_rf = 0 is returned flagged, not an error.
RfFrequencyResult omega_x_from_vrf(double v_rf, const TrapModel& trap);

}  // namespace ionchain

#endif
