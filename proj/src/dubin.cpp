#include "ionchain/dubin.hpp"

#include <cmath>
#include <string>

#include "ionchain/constants.hpp"
#include "ionchain/errors.hpp"

namespace ionchain {

namespace {

constexpr double kLog6 = 1.79175946922805500;  // ln 6

void require_n_ions(long n_ions) {
    if (n_ions < 2)
        throw DomainError("chain laws require at least 2 ions, got " +
                          std::to_string(n_ions));
}

void require_scale(const Length& l, const char* what) {
    if (!(l.meters > 0.0))
        throw DomainError(std::string(what) + ": length scale must be positive");
}

double dubin_spacing_over_l(double n) {
    return 4.0 * std::pow(3.0 * n, -2.0 / 3.0) * std::cbrt(chain_log_factor(n));
}

}  // namespace

double chain_log_factor(double n_ions) {
    return std::log(n_ions) + kLog6 + constants::kEulerGamma - 13.0 / 5.0;
}

double local_spacing(double z_m, const DensityModelParams& params) {
    require_n_ions(params.n_ions);
    const double big_l = params.half_length.meters;
    if (!(big_l > 0.0))
        throw DomainError("local_spacing: half-length must be positive");
    const double t = (z_m - params.center_m) / big_l;
    if (std::abs(t) >= 1.0)
        throw DomainError("local_spacing: position outside the chain (density vanishes at |z - z0| >= L)");
    const double a_center = 4.0 * big_l / (3.0 * static_cast<double>(params.n_ions));
    return a_center / (1.0 - t * t);
}

Length half_length(long n_ions, const Length& l) {
    require_n_ions(n_ions);
    require_scale(l, "half_length");
    const double n = static_cast<double>(n_ions);
    const double value = l.meters * std::cbrt(3.0 * n) * std::cbrt(chain_log_factor(n));
    return Length{value, value * l.relative_sigma()};
}

Length min_spacing_dubin(long n_ions, const Length& l) {
    require_n_ions(n_ions);
    require_scale(l, "min_spacing_dubin");
    const double value = l.meters * dubin_spacing_over_l(static_cast<double>(n_ions));
    return Length{value, value * l.relative_sigma()};
}

Length min_spacing_james(long n_ions, const Length& l) {
    require_n_ions(n_ions);
    require_scale(l, "min_spacing_james");
    const double value =
        kJamesPrefactor * l.meters * std::pow(static_cast<double>(n_ions), -kJamesExponent);
    return Length{value, value * l.relative_sigma()};
}

NEstimate estimate_n_dubin(const Length& a0, const Length& l) {
    require_scale(l, "estimate_n_dubin");
    if (!(a0.meters > 0.0))
        throw DomainError("estimate_n_dubin: spacing must be positive");

    const double target = a0.meters / l.meters;
    const double at_two = dubin_spacing_over_l(2.0);
    if (target > at_two)
        throw DomainError(
            "estimate_n_dubin: spacing " + std::to_string(a0.um()) +
            " um exceeds the two-ion spacing for this trap; no chain of N >= 2 "
            "ions has so large a minimum spacing");
    if (target == at_two) return NEstimate{2.0, 2};

    // a0(N) has a shallow stationary point near N ~ 2.08 and is strictly
    // decreasing beyond it; a single sign change is guaranteed on [2, 1e7]
    // once a0 < a0(2). Bisect on ln N.
    double lo = std::log(2.0);
    double hi = std::log(1e7);
    if (dubin_spacing_over_l(std::exp(hi)) > target)
        throw DomainError("estimate_n_dubin: spacing below the N = 1e7 value; not bracketable");
    for (int iter = 0; iter < 200 && (hi - lo) > 1e-12; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (dubin_spacing_over_l(std::exp(mid)) > target)
            lo = mid;
        else
            hi = mid;
    }
    const double n_real = std::exp(0.5 * (lo + hi));
    return NEstimate{n_real, std::lround(n_real)};
}

NEstimate estimate_n_james(const Length& a0, const Length& l) {
    require_scale(l, "estimate_n_james");
    if (!(a0.meters > 0.0))
        throw DomainError("estimate_n_james: spacing must be positive");
    const double n_real =
        std::pow(kJamesPrefactor * l.meters / a0.meters, 1.0 / kJamesExponent);
    return NEstimate{n_real, std::lround(n_real)};
}

double dln_n_dln_a0_dubin(double n_real) {
    return 1.0 / (-2.0 / 3.0 + 1.0 / (3.0 * chain_log_factor(n_real)));
}

Frequency axial_freq_from_length(const Length& half_length_measured, long n_ions,
                                 const IonSpecies& species) {
    require_n_ions(n_ions);
    if (!(half_length_measured.meters > 0.0))
        throw DomainError("axial_freq_from_length: half-length must be positive");
    const double n = static_cast<double>(n_ions);
    const double factor = std::cbrt(3.0 * n) * std::cbrt(chain_log_factor(n));
    const Length l{half_length_measured.meters / factor,
                   half_length_measured.sigma_m / factor};
    return axial_frequency_from_scale(species, l);
}

double homogeneity_dispersion(long n_central, long n_ions) {
    if (n_central < 2)
        throw DomainError("homogeneity_dispersion: need at least 2 central ions");
    if (n_central > n_ions)
        throw DomainError("homogeneity_dispersion: central count exceeds chain size");
    const double r = 2.0 * static_cast<double>(n_central) / (3.0 * static_cast<double>(n_ions));
    return r * r;
}

long central_count_for_dispersion(long n_ions, double max_dispersion) {
    require_n_ions(n_ions);
    constexpr double kUpper = (2.0 / 3.0) * (2.0 / 3.0);
    if (!(max_dispersion > 0.0) || !(max_dispersion < kUpper))
        throw DomainError("central_count_for_dispersion: dispersion must lie in (0, 4/9)");
    const double na = 1.5 * static_cast<double>(n_ions) * std::sqrt(max_dispersion);
    return static_cast<long>(std::floor(na));
}

}  // namespace ionchain
