#ifndef IONCHAIN_PROFILE_HPP
#define IONCHAIN_PROFILE_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ionchain/dubin.hpp"

namespace ionchain {

inline constexpr int kSensorWidthPx = 1024;

// Per-translation mechanical tolerance of the imaging stage.
inline constexpr double kStageToleranceM = 5e-6;

// Vertically binned fluorescence profile of one camera frame.
// Pixel p images the object-space coordinate
//   z = frame_offset_m + p * pixel_size_m / magnification,
// i.e. frame_offset_m is the object coordinate seen at pixel 0.
struct FluorescenceProfile {
    std::vector<double> intensities;
    double pixel_size_m = 13e-6;
    double frame_offset_m = 0.0;
};

// Throws DomainError if the profile violates its invariants (width, finite
// non-negative intensities).
void validate_profile(const FluorescenceProfile& profile);

struct Peak {
    double center_px = 0.0;
    double center_sigma_px = 0.0;
    double width_px = 0.0;   // Gaussian sigma
    double amplitude = 0.0;
};

// Strictly increasing centers; adjacent separation must exceed 3x the median
// width for the peaks to count as resolved.
struct PeakSet {
    std::vector<Peak> peaks;
    double baseline = 0.0;
    double residual_norm = 0.0;

    std::size_t size() const { return peaks.size(); }
    bool empty() const { return peaks.empty(); }
};

void validate_peakset(const PeakSet& set);

enum class NoiseModel { none, poisson };

struct SyntheticFrame {
    FluorescenceProfile profile;
    std::vector<std::size_t> clipped_ions;  // indices whose image center is off-sensor
};

// Renders ions at the given object-space positions into a binned profile:
// one Gaussian per ion of the given amplitude, sigma = psf_sigma in object
// space, plus a constant background, with optional seeded shot noise.
// Deterministic for a given seed. Ions mapped off the sensor are reported in
// clipped_ions, not an error.
SyntheticFrame generate_synthetic_frame(std::span<const double> ion_positions_m,
                                        double magnification, double pixel_size_m,
                                        double psf_sigma_m, double amplitude,
                                        std::uint64_t noise_seed, NoiseModel noise_model,
                                        double frame_offset_m = 0.0,
                                        double background = 0.0,
                                        int n_pixels = kSensorWidthPx);

// Local maxima with prominence above the threshold. Width seeds come from
// half-maximum crossings. An empty result is not an error.
PeakSet detect_peaks(const FluorescenceProfile& profile, double min_prominence);

// Nonlinear least squares of a constant baseline plus one Gaussian per peak:
// two windowed per-peak sweeps followed by a joint polish. Center
// uncertainties come from the fit covariance. Throws FitError on divergence
// or a collapsed width (< 0.5 px), identifying the offending peak.
PeakSet fit_multigaussian(const FluorescenceProfile& profile, const PeakSet& init);

struct FramePeaks {
    FluorescenceProfile profile;
    PeakSet peaks;
};

struct StitchResult {
    std::vector<double> global_positions_m;  // one entry per distinct ion, sorted
    std::vector<double> fitted_offsets_m;    // resolved offset per frame
    std::vector<int> redundancy_counts;      // shared ions per overlap (size frames-1)
    long total_count = 0;
    std::vector<int> offset_warning_frames;  // per-translation deviation > 3x stage tolerance
};

// Folds translated frames into one global position list. Frames must be
// ordered by nominal offset and adjacent frames must share at least two
// ions. Per-overlap rigid offsets minimize the squared mismatch of shared
// peaks; correspondence is nearest-neighbor inside a gate of half the local
// median spacing; duplicates merge by averaging. Ambiguous correspondence
// raises StitchError naming the frames.
StitchResult stitch_frames(std::span<const FramePeaks> frames, double magnification);

struct MagnificationFit {
    double magnification = 0.0;
    double sigma = 0.0;
    double intercept_px = 0.0;
    std::vector<double> residuals_px;
};

// Ordinary least squares of image position (px) against stage position (m);
// magnification = slope * pixel_size. Requires >= 3 distinct samples.
MagnificationFit calibrate_magnification(std::span<const double> stage_positions_m,
                                         std::span<const double> image_positions_px,
                                         double pixel_size_m);

struct DensityFit {
    DensityModelParams params;  // n_ions fixed by the caller; fitted L, z0
    double rss = 0.0;           // residual sum of squares on 1/a
    std::vector<double> residuals;
};

// Least squares of 1/a(z) against the parabolic density law with N fixed,
// free parameters (z0, L). Quadratic-regression warm start, then
// Levenberg-Marquardt. Throws FitError when no downward parabola fits or a
// sample ends up outside |z - z0| < L.
DensityFit fit_density_profile(std::span<const SpacingSample> samples, long n_ions);

}  // namespace ionchain

#endif
