#include "ionchain/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ionchain/errors.hpp"
#include "levmar.hpp"

namespace ionchain {

namespace {

constexpr double kFwhmToSigma = 2.354820045030949;  // 2 sqrt(2 ln 2)
constexpr double kMinWidthPx = 0.5;

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Exact Poisson sampling: Knuth's product method, chunked so the running
// product never underflows for large means.
long poisson_sample(double mean, std::mt19937_64& rng) {
    long total = 0;
    while (mean > 30.0) {
        mean -= 30.0;
        const double limit = std::exp(-30.0);
        double p = uniform01(rng);
        long k = 0;
        while (p > limit) {
            p *= uniform01(rng);
            ++k;
        }
        total += k;
    }
    if (mean > 0.0) {
        const double limit = std::exp(-mean);
        double p = uniform01(rng);
        long k = 0;
        while (p > limit) {
            p *= uniform01(rng);
            ++k;
        }
        total += k;
    }
    return total;
}

double gauss(double x, double amplitude, double center, double width) {
    const double t = (x - center) / width;
    return amplitude * std::exp(-0.5 * t * t);
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const auto mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    double m = values[mid];
    if (values.size() % 2 == 0) {
        const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lo);
    }
    return m;
}

double median_width(const PeakSet& set) {
    std::vector<double> widths;
    widths.reserve(set.peaks.size());
    for (const auto& p : set.peaks) widths.push_back(p.width_px);
    return median_of(std::move(widths));
}

// Object-space position of a peak center in the global coordinate frame.
double peak_position_m(const FluorescenceProfile& profile, double center_px,
                       double magnification) {
    return profile.frame_offset_m + center_px * profile.pixel_size_m / magnification;
}

}  // namespace

void validate_profile(const FluorescenceProfile& profile) {
    if (profile.intensities.size() > static_cast<std::size_t>(kSensorWidthPx))
        throw DomainError("profile wider than the " + std::to_string(kSensorWidthPx) +
                          "-pixel sensor");
    if (!(profile.pixel_size_m > 0.0))
        throw DomainError("profile pixel size must be positive");
    for (const double v : profile.intensities)
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("profile intensities must be finite and non-negative");
}

void validate_peakset(const PeakSet& set) {
    for (const auto& p : set.peaks)
        if (!(p.width_px > 0.0) || !std::isfinite(p.center_px) || !std::isfinite(p.amplitude))
            throw DomainError("peak set: widths must be positive and parameters finite");
    for (std::size_t i = 1; i < set.peaks.size(); ++i)
        if (!(set.peaks[i].center_px > set.peaks[i - 1].center_px))
            throw DomainError("peak set: centers must be strictly increasing");
    if (set.peaks.size() >= 2) {
        const double mw = median_width(set);
        for (std::size_t i = 1; i < set.peaks.size(); ++i)
            if (set.peaks[i].center_px - set.peaks[i - 1].center_px <= 3.0 * mw)
                throw DomainError("peak set: adjacent peaks closer than 3x the median width are unresolved");
    }
}

SyntheticFrame generate_synthetic_frame(std::span<const double> ion_positions_m,
                                        double magnification, double pixel_size_m,
                                        double psf_sigma_m, double amplitude,
                                        std::uint64_t noise_seed, NoiseModel noise_model,
                                        double frame_offset_m, double background,
                                        int n_pixels) {
    if (!(magnification > 0.0) || !(pixel_size_m > 0.0))
        throw DomainError("generate_synthetic_frame: magnification and pixel size must be positive");
    if (!(psf_sigma_m > 0.0))
        throw DomainError("generate_synthetic_frame: PSF sigma must be positive");
    if (amplitude < 0.0 || background < 0.0)
        throw DomainError("generate_synthetic_frame: amplitude and background must be non-negative");
    if (n_pixels < 1 || n_pixels > kSensorWidthPx)
        throw DomainError("generate_synthetic_frame: pixel count outside the sensor");
    if (!std::is_sorted(ion_positions_m.begin(), ion_positions_m.end()))
        throw DomainError("generate_synthetic_frame: ion positions must be sorted");

    const double sigma_px = magnification * psf_sigma_m / pixel_size_m;
    SyntheticFrame frame;
    frame.profile.pixel_size_m = pixel_size_m;
    frame.profile.frame_offset_m = frame_offset_m;
    frame.profile.intensities.assign(static_cast<std::size_t>(n_pixels), background);

    for (std::size_t i = 0; i < ion_positions_m.size(); ++i) {
        const double c = magnification * (ion_positions_m[i] - frame_offset_m) / pixel_size_m;
        if (c < 0.0 || c > static_cast<double>(n_pixels - 1))
            frame.clipped_ions.push_back(i);
        const long lo = std::max<long>(0, std::lround(std::floor(c - 10.0 * sigma_px)));
        const long hi = std::min<long>(n_pixels - 1, std::lround(std::ceil(c + 10.0 * sigma_px)));
        for (long p = lo; p <= hi; ++p)
            frame.profile.intensities[static_cast<std::size_t>(p)] +=
                gauss(static_cast<double>(p), amplitude, c, sigma_px);
    }

    if (noise_model == NoiseModel::poisson) {
        std::mt19937_64 rng(noise_seed);
        for (double& v : frame.profile.intensities)
            v = static_cast<double>(poisson_sample(v, rng));
    }
    return frame;
}

PeakSet detect_peaks(const FluorescenceProfile& profile, double min_prominence) {
    validate_profile(profile);
    const auto& y = profile.intensities;
    if (y.empty())
        throw DomainError("detect_peaks: empty profile");

    const double baseline = *std::min_element(y.begin(), y.end());
    const auto n = static_cast<long>(y.size());

    // Plateau-aware local maxima.
    std::vector<long> candidates;
    long i = 1;
    while (i < n - 1) {
        if (y[static_cast<std::size_t>(i)] > y[static_cast<std::size_t>(i - 1)]) {
            long j = i;
            while (j < n - 1 && y[static_cast<std::size_t>(j + 1)] == y[static_cast<std::size_t>(i)]) ++j;
            if (j < n - 1 && y[static_cast<std::size_t>(j + 1)] < y[static_cast<std::size_t>(i)])
                candidates.push_back((i + j) / 2);
            i = j + 1;
        } else {
            ++i;
        }
    }

    PeakSet out;
    out.baseline = baseline;
    for (const long p : candidates) {
        const double h = y[static_cast<std::size_t>(p)];
        // Prominence: drop to the highest saddle separating this maximum from
        // higher ground on either side.
        double left_min = h, right_min = h;
        for (long q = p - 1; q >= 0; --q) {
            const double v = y[static_cast<std::size_t>(q)];
            if (v > h) break;
            left_min = std::min(left_min, v);
        }
        for (long q = p + 1; q < n; ++q) {
            const double v = y[static_cast<std::size_t>(q)];
            if (v > h) break;
            right_min = std::min(right_min, v);
        }
        const double prominence = h - std::max(left_min, right_min);
        if (prominence < min_prominence) continue;

        // Width seed from half-maximum crossings (capped at the neighbors).
        const double level = baseline + 0.5 * (h - baseline);
        double x_left = std::numeric_limits<double>::quiet_NaN();
        double x_right = std::numeric_limits<double>::quiet_NaN();
        for (long q = p + 1; q < n; ++q) {
            const double v = y[static_cast<std::size_t>(q)];
            if (v < level) {
                const double prev = y[static_cast<std::size_t>(q - 1)];
                x_right = static_cast<double>(q - 1) + (prev - level) / (prev - v);
                break;
            }
            if (v > h) break;
        }
        for (long q = p - 1; q >= 0; --q) {
            const double v = y[static_cast<std::size_t>(q)];
            if (v < level) {
                const double next = y[static_cast<std::size_t>(q + 1)];
                x_left = static_cast<double>(q + 1) - (next - level) / (next - v);
                break;
            }
            if (v > h) break;
        }
        double width;
        if (std::isfinite(x_left) && std::isfinite(x_right))
            width = (x_right - x_left) / kFwhmToSigma;
        else if (std::isfinite(x_right))
            width = 2.0 * (x_right - static_cast<double>(p)) / kFwhmToSigma;
        else if (std::isfinite(x_left))
            width = 2.0 * (static_cast<double>(p) - x_left) / kFwhmToSigma;
        else
            width = 2.0;
        width = std::max(width, kMinWidthPx);

        // Sub-pixel center seed from the 3-point parabola through the apex.
        double center = static_cast<double>(p);
        if (p > 0 && p < n - 1) {
            const double ym = y[static_cast<std::size_t>(p - 1)];
            const double y0 = y[static_cast<std::size_t>(p)];
            const double yp = y[static_cast<std::size_t>(p + 1)];
            const double denom = ym - 2.0 * y0 + yp;
            if (denom < 0.0) center += 0.5 * (ym - yp) / denom;
        }

        out.peaks.push_back(Peak{center, 0.0, width, h - baseline});
    }
    if (!out.peaks.empty()) validate_peakset(out);
    return out;
}

namespace {

// Residuals and Jacobian for a sum of Gaussians plus constant baseline over
// pixel range [lo, hi). Parameter layout: [b, (A, c, w) per peak].
void multigauss_eval(const std::vector<double>& y, long lo, long hi,
                     const Eigen::VectorXd& theta, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    const auto n_peaks = static_cast<long>((theta.size() - 1) / 3);
    const long m = hi - lo;
    r.resize(m);
    jac.setZero(m, theta.size());
    for (long row = 0; row < m; ++row) {
        const double x = static_cast<double>(lo + row);
        double model = theta[0];
        jac(row, 0) = 1.0;
        for (long k = 0; k < n_peaks; ++k) {
            const double a = theta[1 + 3 * k];
            const double c = theta[2 + 3 * k];
            const double w = theta[3 + 3 * k];
            const double t = (x - c) / w;
            const double e = std::exp(-0.5 * t * t);
            model += a * e;
            jac(row, 1 + 3 * k) = e;
            jac(row, 2 + 3 * k) = a * e * t / w;
            jac(row, 3 + 3 * k) = a * e * t * t / w;
        }
        r[row] = model - y[static_cast<std::size_t>(lo + row)];
    }
}

}  // namespace

PeakSet fit_multigaussian(const FluorescenceProfile& profile, const PeakSet& init) {
    validate_profile(profile);
    if (init.empty())
        throw DomainError("fit_multigaussian: empty initial peak set");
    const auto& y = profile.intensities;
    const auto n = static_cast<long>(y.size());
    for (std::size_t k = 0; k < init.peaks.size(); ++k)
        if (init.peaks[k].center_px < 0.0 || init.peaks[k].center_px > static_cast<double>(n - 1))
            throw FitError("fit_multigaussian: initial peak outside the profile", static_cast<int>(k));

    std::vector<Peak> peaks = init.peaks;
    const auto n_peaks = static_cast<long>(peaks.size());

    // Joint baseline estimate from samples away from every peak.
    std::vector<double> quiet;
    for (long p = 0; p < n; ++p) {
        bool clear = true;
        for (const auto& pk : peaks)
            if (std::abs(static_cast<double>(p) - pk.center_px) <= 4.0 * pk.width_px) {
                clear = false;
                break;
            }
        if (clear) quiet.push_back(y[static_cast<std::size_t>(p)]);
    }
    double baseline = quiet.empty() ? *std::min_element(y.begin(), y.end()) : median_of(std::move(quiet));

    // Windowed per-peak refinement, two sweeps. Each peak is fitted against
    // the profile minus the baseline and the current model of its neighbors.
    for (int sweep = 0; sweep < 2; ++sweep) {
        for (long k = 0; k < n_peaks; ++k) {
            auto& pk = peaks[static_cast<std::size_t>(k)];
            const long lo = std::max<long>(0, std::lround(pk.center_px - 4.0 * pk.width_px));
            const long hi = std::min<long>(n, std::lround(pk.center_px + 4.0 * pk.width_px) + 1);
            if (hi - lo < 4) throw FitError("fit_multigaussian: window too narrow", static_cast<int>(k));

            std::vector<double> local(y.begin() + lo, y.begin() + hi);
            for (long row = 0; row < hi - lo; ++row) {
                double others = baseline;
                for (long j = 0; j < n_peaks; ++j) {
                    if (j == k) continue;
                    const auto& other = peaks[static_cast<std::size_t>(j)];
                    others += gauss(static_cast<double>(lo + row), other.amplitude,
                                    other.center_px, other.width_px);
                }
                local[static_cast<std::size_t>(row)] -= others;
            }

            Eigen::VectorXd theta(3);
            theta << pk.amplitude, pk.center_px, pk.width_px;
            const auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
                const long m = hi - lo;
                r.resize(m);
                jac.resize(m, 3);
                for (long row = 0; row < m; ++row) {
                    const double x = static_cast<double>(lo + row);
                    const double t = (x - th[1]) / th[2];
                    const double e = std::exp(-0.5 * t * t);
                    r[row] = th[0] * e - local[static_cast<std::size_t>(row)];
                    jac(row, 0) = e;
                    jac(row, 1) = th[0] * e * t / th[2];
                    jac(row, 2) = th[0] * e * t * t / th[2];
                }
            };
            const auto fit = detail::levenberg_marquardt(eval, theta);
            const double a = fit.theta[0], c = fit.theta[1], w = std::abs(fit.theta[2]);
            if (!std::isfinite(a) || !std::isfinite(c) || !std::isfinite(w) ||
                c < static_cast<double>(lo) - 2.0 || c > static_cast<double>(hi) + 1.0)
                throw FitError("fit_multigaussian: per-peak refinement diverged", static_cast<int>(k));
            pk.amplitude = a;
            pk.center_px = c;
            pk.width_px = w;
        }
    }

    // Joint polish over the whole profile.
    Eigen::VectorXd theta(1 + 3 * n_peaks);
    theta[0] = baseline;
    for (long k = 0; k < n_peaks; ++k) {
        theta[1 + 3 * k] = peaks[static_cast<std::size_t>(k)].amplitude;
        theta[2 + 3 * k] = peaks[static_cast<std::size_t>(k)].center_px;
        theta[3 + 3 * k] = peaks[static_cast<std::size_t>(k)].width_px;
    }
    const auto eval_all = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        multigauss_eval(y, 0, n, th, r, jac);
    };
    const auto fit = detail::levenberg_marquardt(eval_all, theta);

    PeakSet out;
    out.baseline = fit.theta[0];
    out.residual_norm = std::sqrt(fit.rss);
    for (long k = 0; k < n_peaks; ++k) {
        Peak pk;
        pk.amplitude = fit.theta[1 + 3 * k];
        pk.center_px = fit.theta[2 + 3 * k];
        pk.width_px = std::abs(fit.theta[3 + 3 * k]);
        if (!std::isfinite(pk.center_px) || !std::isfinite(pk.amplitude) || !std::isfinite(pk.width_px))
            throw FitError("fit_multigaussian: joint polish diverged", static_cast<int>(k));
        if (pk.width_px < kMinWidthPx)
            throw FitError("fit_multigaussian: width collapsed below " +
                           std::to_string(kMinWidthPx) + " px", static_cast<int>(k));
        out.peaks.push_back(pk);
    }

    // Center uncertainties from the fit covariance.
    const long m = n;
    const long n_params = 1 + 3 * n_peaks;
    if (m > n_params) {
        const double variance = fit.rss / static_cast<double>(m - n_params);
        const Eigen::MatrixXd cov =
            variance * fit.jtj.ldlt().solve(Eigen::MatrixXd::Identity(n_params, n_params));
        for (long k = 0; k < n_peaks; ++k) {
            const double v = cov(2 + 3 * k, 2 + 3 * k);
            out.peaks[static_cast<std::size_t>(k)].center_sigma_px = v > 0.0 ? std::sqrt(v) : 0.0;
        }
    }

    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const Peak& a, const Peak& b) { return a.center_px < b.center_px; });
    validate_peakset(out);
    return out;
}

StitchResult stitch_frames(std::span<const FramePeaks> frames, double magnification) {
    if (frames.empty())
        throw DomainError("stitch_frames: no frames");
    if (!(magnification > 0.0))
        throw DomainError("stitch_frames: magnification must be positive");
    for (std::size_t f = 1; f < frames.size(); ++f)
        if (!(frames[f].profile.frame_offset_m > frames[f - 1].profile.frame_offset_m))
            throw DomainError("stitch_frames: frames must be ordered by nominal offset");

    StitchResult result;
    std::vector<double> global;
    for (const auto& pk : frames[0].peaks.peaks)
        global.push_back(peak_position_m(frames[0].profile, pk.center_px, magnification));
    std::sort(global.begin(), global.end());
    result.fitted_offsets_m.push_back(frames[0].profile.frame_offset_m);

    double correction = 0.0;  // cumulative offset correction vs nominal
    for (std::size_t f = 1; f < frames.size(); ++f) {
        const auto frame_a = static_cast<int>(f - 1);
        const auto frame_b = static_cast<int>(f);
        std::vector<double> incoming;
        for (const auto& pk : frames[f].peaks.peaks)
            incoming.push_back(peak_position_m(frames[f].profile, pk.center_px, magnification) +
                               correction);
        std::sort(incoming.begin(), incoming.end());
        if (incoming.size() < 2)
            throw StitchError("stitch_frames: frame " + std::to_string(f) + " has fewer than 2 peaks",
                              frame_a, frame_b);

        // Correspondence gate: half the local median spacing.
        std::vector<double> gaps;
        for (std::size_t i = 1; i < incoming.size(); ++i)
            gaps.push_back(incoming[i] - incoming[i - 1]);
        const double spacing = median_of(std::move(gaps));
        const double gate = 0.5 * spacing;

        // Coarse registration within the gate. The gate is the trust region
        // for the stage: shifts beyond half a spacing alias onto the
        // neighboring lattice site and cannot be resolved from the overlap.
        // Trying every observed in-gate shift keeps the matching centered
        // even when the stage error approaches the gate.
        std::vector<double> candidates{0.0};
        for (const double t : incoming)
            for (const double g : global)
                if (std::abs(g - t) < gate) candidates.push_back(g - t);
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                     [&](double a, double b) { return b - a < 0.02 * gate; }),
                         candidates.end());

        std::vector<std::pair<std::size_t, std::size_t>> matches;  // (global idx, incoming idx)
        std::size_t best_matches = 0;
        double best_rss = 0.0;
        bool saw_ambiguity = false;
        for (const double shift : candidates) {
            std::vector<std::pair<std::size_t, std::size_t>> trial;
            std::vector<int> claimed(global.size(), -1);
            bool valid = true;
            double rss = 0.0;
            for (std::size_t i = 0; i < incoming.size() && valid; ++i) {
                const double t = incoming[i] + shift;
                std::size_t hits = 0, best = 0;
                for (std::size_t g = 0; g < global.size(); ++g) {
                    if (std::abs(global[g] - t) < gate) {
                        ++hits;
                        best = g;
                    }
                }
                if (hits > 1 || (hits == 1 && claimed[best] >= 0)) {
                    valid = false;
                    saw_ambiguity = true;
                } else if (hits == 1) {
                    claimed[best] = static_cast<int>(i);
                    trial.emplace_back(best, i);
                    const double r = global[best] - t;
                    rss += r * r;
                }
            }
            if (!valid) continue;
            if (trial.size() > best_matches ||
                (trial.size() == best_matches && trial.size() > 0 && rss < best_rss)) {
                best_matches = trial.size();
                best_rss = rss;
                matches = std::move(trial);
            }
        }
        if (matches.size() < 2) {
            if (saw_ambiguity)
                throw StitchError("stitch_frames: ambiguous correspondence between frames " +
                                      std::to_string(f - 1) + " and " + std::to_string(f),
                                  frame_a, frame_b);
            throw StitchError("stitch_frames: frames " + std::to_string(f - 1) + " and " +
                                  std::to_string(f) + " share fewer than 2 ions",
                              frame_a, frame_b);
        }

        // Rigid per-translation offset: least squares of the matched
        // mismatches reduces to their mean.
        double increment = 0.0;
        for (const auto& [g, i] : matches) increment += global[g] - incoming[i];
        increment /= static_cast<double>(matches.size());
        correction += increment;
        result.fitted_offsets_m.push_back(frames[f].profile.frame_offset_m + correction);
        result.redundancy_counts.push_back(static_cast<int>(matches.size()));
        if (std::abs(increment) > 3.0 * kStageToleranceM)
            result.offset_warning_frames.push_back(frame_b);

        // Merge duplicates by averaging; append the rest.
        std::vector<bool> used(incoming.size(), false);
        for (const auto& [g, i] : matches) {
            global[g] = 0.5 * (global[g] + incoming[i] + increment);
            used[i] = true;
        }
        for (std::size_t i = 0; i < incoming.size(); ++i)
            if (!used[i]) global.push_back(incoming[i] + increment);
        std::sort(global.begin(), global.end());
    }

    result.global_positions_m = std::move(global);
    result.total_count = static_cast<long>(result.global_positions_m.size());
    return result;
}

MagnificationFit calibrate_magnification(std::span<const double> stage_positions_m,
                                         std::span<const double> image_positions_px,
                                         double pixel_size_m) {
    if (stage_positions_m.size() != image_positions_px.size())
        throw DomainError("calibrate_magnification: mismatched sample counts");
    const auto n = static_cast<long>(stage_positions_m.size());
    if (n < 3)
        throw DomainError("calibrate_magnification: need at least 3 samples");
    if (!(pixel_size_m > 0.0))
        throw DomainError("calibrate_magnification: pixel size must be positive");

    const double mean_x = std::accumulate(stage_positions_m.begin(), stage_positions_m.end(), 0.0) /
                          static_cast<double>(n);
    const double mean_y = std::accumulate(image_positions_px.begin(), image_positions_px.end(), 0.0) /
                          static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (long i = 0; i < n; ++i) {
        const double dx = stage_positions_m[static_cast<std::size_t>(i)] - mean_x;
        sxx += dx * dx;
        sxy += dx * (image_positions_px[static_cast<std::size_t>(i)] - mean_y);
    }
    if (!(sxx > 0.0))
        throw DomainError("calibrate_magnification: stage positions are degenerate (rank-deficient)");

    const double slope = sxy / sxx;  // px per object-space meter
    const double intercept = mean_y - slope * mean_x;
    MagnificationFit fit;
    fit.magnification = slope * pixel_size_m;
    fit.intercept_px = intercept;
    if (!(fit.magnification > 0.0))
        throw DomainError("calibrate_magnification: non-positive magnification");

    double rss = 0.0;
    fit.residuals_px.resize(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double r = image_positions_px[static_cast<std::size_t>(i)] -
                         (intercept + slope * stage_positions_m[static_cast<std::size_t>(i)]);
        fit.residuals_px[static_cast<std::size_t>(i)] = r;
        rss += r * r;
    }
    if (n > 2) {
        const double slope_var = rss / static_cast<double>(n - 2) / sxx;
        fit.sigma = std::sqrt(slope_var) * pixel_size_m;
    }
    return fit;
}

DensityFit fit_density_profile(std::span<const SpacingSample> samples, long n_ions) {
    if (samples.size() < 3)
        throw FitError("fit_density_profile: need at least 3 spacing samples");
    if (n_ions < 2)
        throw DomainError("fit_density_profile: need at least 2 ions");
    for (const auto& s : samples)
        if (!(s.spacing_m > 0.0))
            throw DomainError("fit_density_profile: spacings must be positive");

    const auto m = static_cast<long>(samples.size());
    const double n = static_cast<double>(n_ions);

    // Warm start: unconstrained quadratic regression of 1/a on z.
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (const auto& s : samples) {
        const Eigen::Vector3d row(1.0, s.position_m, s.position_m * s.position_m);
        ata += row * row.transpose();
        atb += row * (1.0 / s.spacing_m);
    }
    const Eigen::Vector3d coef = ata.ldlt().solve(atb);
    const double gamma = coef[2];
    if (!(gamma < 0.0))
        throw FitError("fit_density_profile: no downward-parabola trend in 1/a");
    const double inv_l = std::cbrt(-4.0 * gamma / (3.0 * n));
    const double l0 = 1.0 / inv_l;
    const double z00 = -coef[1] / (2.0 * gamma);

    const auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double z0 = th[0], big_l = th[1];
        r.resize(m);
        jac.resize(m, 2);
        for (long i = 0; i < m; ++i) {
            const auto& s = samples[static_cast<std::size_t>(i)];
            const double d = s.position_m - z0;
            const double l2 = big_l * big_l;
            const double model = (3.0 * n / (4.0 * big_l)) * (1.0 - d * d / l2);
            r[i] = model - 1.0 / s.spacing_m;
            jac(i, 0) = 1.5 * n * d / (l2 * big_l);
            jac(i, 1) = 0.75 * n * (-1.0 / l2 + 3.0 * d * d / (l2 * l2));
        }
    };
    Eigen::VectorXd theta(2);
    theta << z00, l0;
    const auto fit = detail::levenberg_marquardt(eval, theta);
    const double z0 = fit.theta[0];
    const double big_l = std::abs(fit.theta[1]);
    if (!std::isfinite(z0) || !(big_l > 0.0) || !std::isfinite(big_l))
        throw FitError("fit_density_profile: fit diverged");
    for (const auto& s : samples)
        if (std::abs(s.position_m - z0) >= big_l)
            throw FitError("fit_density_profile: sample outside the fitted chain |z - z0| < L");

    double sigma_l = 0.0;
    if (m > 2) {
        const double variance = fit.rss / static_cast<double>(m - 2);
        const Eigen::MatrixXd cov = variance * fit.jtj.ldlt().solve(Eigen::MatrixXd::Identity(2, 2));
        if (cov(1, 1) > 0.0) sigma_l = std::sqrt(cov(1, 1));
    }

    DensityFit out;
    out.params = DensityModelParams{n_ions, Length{big_l, sigma_l}, z0};
    out.rss = fit.rss;
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    eval(fit.theta, r, jac);
    out.residuals.assign(r.data(), r.data() + r.size());
    return out;
}

}  // namespace ionchain
