#include "ionchain/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "ionchain/errors.hpp"

namespace ionchain {

namespace {

// Spacings sorted by distance from the (already subtracted) chain center.
std::vector<double> central_spacings(std::span<const SpacingSample> samples, long count) {
    std::vector<SpacingSample> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end(), [](const SpacingSample& a, const SpacingSample& b) {
        return std::abs(a.position_m) < std::abs(b.position_m);
    });
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) out.push_back(sorted[static_cast<std::size_t>(i)].spacing_m);
    return out;
}

double relative_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1)) / mean;
}

// Relative standard deviation the parabolic density law implies across a
// central window whose edge-to-center dispersion is delta_a/a:
// std(x^2) over x ~ U[-1,1] is sqrt(4/45) of the range.
constexpr double kParabolicStdOfRange = 0.2981423969999720;  // 2/(3 sqrt(5))

}  // namespace

CentralSpacing average_central_spacing(std::span<const SpacingSample> samples, long n_central) {
    if (n_central < 2)
        throw DomainError("average_central_spacing: need at least 2 central ions");
    const long n_spacings = n_central - 1;
    if (static_cast<std::size_t>(n_spacings) > samples.size())
        throw DomainError("average_central_spacing: fewer spacings than requested");

    const std::vector<double> central = central_spacings(samples, n_spacings);
    const double mean = std::accumulate(central.begin(), central.end(), 0.0) /
                        static_cast<double>(central.size());
    double stderr_m = 0.0;
    const auto [lo, hi] = std::minmax_element(central.begin(), central.end());
    if (central.size() >= 2 && *lo != *hi) {
        double ss = 0.0;
        for (const double v : central) ss += (v - mean) * (v - mean);
        stderr_m = std::sqrt(ss / static_cast<double>(central.size() - 1) /
                             static_cast<double>(central.size()));
    }
    return CentralSpacing{Length{mean, stderr_m}, Length{stderr_m, 0.0}};
}

long choose_n_central(std::span<const SpacingSample> samples, double dispersion_target,
                      long n_ions_guess) {
    const long available = static_cast<long>(samples.size()) + 1;
    const long fallback = std::min<long>(4, available);
    if (available < 3 || n_ions_guess < 2 || !(dispersion_target > 0.0)) return fallback;

    // The target caps the window through the dispersion law itself; the
    // empirical variance check then finds the largest window whose measured
    // spread still tracks the model floor (x1.5 safety).
    long cap = std::min(available, n_ions_guess);
    constexpr double kMaxDispersion = (2.0 / 3.0) * (2.0 / 3.0);
    if (dispersion_target < kMaxDispersion)
        cap = std::min(cap, central_count_for_dispersion(n_ions_guess, dispersion_target));

    const std::vector<double> ordered = central_spacings(samples, available - 1);
    for (long n_a = cap; n_a >= 3; --n_a) {
        const std::vector<double> window(ordered.begin(), ordered.begin() + (n_a - 1));
        const double spread = relative_std(window);
        const double floor_std =
            kParabolicStdOfRange * homogeneity_dispersion(n_a, n_ions_guess);
        if (spread <= 1.5 * floor_std) return n_a;
    }
    return fallback;
}

const char* to_string(UncertaintySource source) {
    switch (source) {
        case UncertaintySource::axial_frequency: return "axial_frequency";
        case UncertaintySource::spacing_statistics: return "spacing_statistics";
        case UncertaintySource::magnification: return "magnification";
    }
    return "unknown";
}

EstimateReport estimate_report(const Length& a0_mean, const IonSpecies& species,
                               const Frequency& omega_z, double magnification_rel_sigma,
                               long n_central_used) {
    if (!(a0_mean.meters > 0.0))
        throw DomainError("estimate_report: central spacing must be positive");
    if (magnification_rel_sigma < 0.0)
        throw DomainError("estimate_report: magnification sigma must be non-negative");

    const Length l = length_scale(species, omega_z);
    const NEstimate dubin = estimate_n_dubin(a0_mean, l);
    const NEstimate james = estimate_n_james(a0_mean, l);

    const double rel_a0 = a0_mean.meters > 0.0 ? a0_mean.sigma_m / a0_mean.meters : 0.0;
    const double rel_l = l.relative_sigma();  // (2/3) of the frequency's

    EstimateReport report;
    report.a0_mean = a0_mean;
    report.a0_stderr = Length{a0_mean.sigma_m, 0.0};
    report.n_central_used = n_central_used;
    report.species = species;
    report.omega_z = omega_z;
    report.magnification_rel_sigma = magnification_rel_sigma;

    const double slope_dubin = std::abs(dln_n_dln_a0_dubin(dubin.n_real));
    const double slope_james = std::abs(kDlnNDlnA0James);

    report.rel_sigma_axial = slope_dubin * rel_l;
    report.rel_sigma_spacing = slope_dubin * rel_a0;
    report.rel_sigma_magnification = slope_dubin * magnification_rel_sigma;
    report.rel_sigma_total = std::sqrt(report.rel_sigma_axial * report.rel_sigma_axial +
                                       report.rel_sigma_spacing * report.rel_sigma_spacing +
                                       report.rel_sigma_magnification * report.rel_sigma_magnification);

    report.dominant = UncertaintySource::axial_frequency;
    if (report.rel_sigma_spacing > report.rel_sigma_axial &&
        report.rel_sigma_spacing >= report.rel_sigma_magnification)
        report.dominant = UncertaintySource::spacing_statistics;
    else if (report.rel_sigma_magnification > report.rel_sigma_axial &&
             report.rel_sigma_magnification > report.rel_sigma_spacing)
        report.dominant = UncertaintySource::magnification;

    report.dubin = LawEstimate{dubin.n_real, dubin.n_int, dubin.n_real * report.rel_sigma_total};
    const double james_rel = slope_james * std::sqrt(rel_l * rel_l + rel_a0 * rel_a0 +
                                                     magnification_rel_sigma * magnification_rel_sigma);
    report.james = LawEstimate{james.n_real, james.n_int, james.n_real * james_rel};
    return report;
}

std::string EstimateReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["a0_mean_um"] = a0_mean.um();
    j["a0_stderr_um"] = a0_stderr.um();
    j["n_central_used"] = n_central_used;
    j["dubin"] = {{"n_real", dubin.n_real}, {"n", dubin.n_int}, {"n_sigma", dubin.n_sigma}};
    j["james"] = {{"n_real", james.n_real}, {"n", james.n_int}, {"n_sigma", james.n_sigma}};
    j["uncertainty_rel"] = {{"axial_frequency", rel_sigma_axial},
                            {"spacing_statistics", rel_sigma_spacing},
                            {"magnification", rel_sigma_magnification},
                            {"total", rel_sigma_total}};
    j["dominant_uncertainty"] = to_string(dominant);
    j["inputs"] = {{"species", {{"name", species.name},
                                {"mass_amu", species.mass_amu},
                                {"charge_e", species.charge_e}}},
                   {"omega_z_khz", omega_z.khz()},
                   {"omega_z_sigma_khz", omega_z.sigma_khz()},
                   {"a0_um", a0_mean.um()},
                   {"a0_sigma_um", a0_mean.sigma_um()},
                   {"magnification_rel_sigma", magnification_rel_sigma}};
    return j.dump(2);
}

Frequency radial_frequency(const TrapModel& trap) {
    if (!trap.omega_x)
        throw DomainError("radial_frequency: omega_x is not set");
    const Frequency& wx = *trap.omega_x;
    if (!trap.omega_z) return wx;

    const Frequency& wz = *trap.omega_z;
    const double wr2 = wx.rad_per_s * wx.rad_per_s - 0.5 * wz.rad_per_s * wz.rad_per_s;
    if (!(wr2 > 0.0))
        throw DomainError("radial_frequency: omega_x^2 must exceed omega_z^2 / 2");
    const double wr = std::sqrt(wr2);
    const double dx = wx.rad_per_s / wr * wx.sigma_rad_per_s;
    const double dz = 0.5 * wz.rad_per_s / wr * wz.sigma_rad_per_s;
    return Frequency{wr, std::sqrt(dx * dx + dz * dz)};
}

RfFrequencyResult omega_x_from_vrf(double v_rf, const TrapModel& trap) {
    if (v_rf < 0.0)
        throw DomainError("omega_x_from_vrf: rf amplitude must be non-negative");
    if (v_rf == 0.0) return RfFrequencyResult{Frequency{0.0, 0.0}, true};
    const double scale = v_rf / 2000.0;
    return RfFrequencyResult{
        Frequency::from_khz(trap.rf_slope_khz_per_2000v * scale, trap.rf_slope_sigma_khz * scale),
        false};
}

}  // namespace ionchain
