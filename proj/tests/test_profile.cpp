#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ionchain/equilibrium.hpp"
#include "ionchain/errors.hpp"
#include "ionchain/profile.hpp"
#include "ionchain/units.hpp"

using namespace ionchain;

namespace {

constexpr double kMag = 11.58;
constexpr double kPixel = 13e-6;
constexpr double kPsf = 2.0e-6;  // object-space sigma ~ 1.78 px on the sensor

// Evenly spaced ion positions centered in a frame starting at offset 0.
std::vector<double> even_positions(int count, double spacing_m, int n_pixels = kSensorWidthPx) {
    const double span_m = n_pixels * kPixel / kMag;
    const double start = 0.5 * (span_m - (count - 1) * spacing_m);
    std::vector<double> out;
    for (int i = 0; i < count; ++i) out.push_back(start + i * spacing_m);
    return out;
}

double object_to_px(double z_m, double offset_m = 0.0) {
    return kMag * (z_m - offset_m) / kPixel;
}

}  // namespace

TEST_CASE("profile validation") {
    FluorescenceProfile p{std::vector<double>(2048, 0.0), kPixel, 0.0};
    CHECK_THROWS_AS(validate_profile(p), DomainError);  // wider than the sensor
    p.intensities.assign(128, 1.0);
    CHECK_NOTHROW(validate_profile(p));
    p.intensities[5] = -1.0;
    CHECK_THROWS_AS(validate_profile(p), DomainError);
}

TEST_CASE("synthetic frame generator") {
    SUBCASE("single ion at the frame center peaks at the center pixel") {
        const double center_m = 512 * kPixel / kMag;
        const auto frame = generate_synthetic_frame(std::vector<double>{center_m}, kMag, kPixel,
                                                    kPsf, 100.0, 0, NoiseModel::none);
        const auto& y = frame.profile.intensities;
        const auto argmax = std::max_element(y.begin(), y.end()) - y.begin();
        CHECK(argmax == 512);
        CHECK(frame.clipped_ions.empty());
    }
    SUBCASE("two ions 24.1 um apart map to ~21.5 px separation") {
        auto ions = even_positions(2, 24.1e-6);
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 0,
                                                    NoiseModel::none);
        const PeakSet fitted = fit_multigaussian(frame.profile, detect_peaks(frame.profile, 20.0));
        REQUIRE(fitted.size() == 2);
        CHECK(fitted.peaks[1].center_px - fitted.peaks[0].center_px ==
              doctest::Approx(24.1e-6 * kMag / kPixel).epsilon(1e-4));
        CHECK(fitted.peaks[1].center_px - fitted.peaks[0].center_px ==
              doctest::Approx(21.468).epsilon(1e-3));
    }
    SUBCASE("seed is ignored without noise") {
        auto ions = even_positions(5, 30e-6);
        const auto a = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 1, NoiseModel::none);
        const auto b = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 2, NoiseModel::none);
        CHECK(a.profile.intensities == b.profile.intensities);
    }
    SUBCASE("poisson noise is deterministic per seed") {
        auto ions = even_positions(5, 30e-6);
        const auto a = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 7, NoiseModel::poisson);
        const auto b = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 7, NoiseModel::poisson);
        const auto c = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 8, NoiseModel::poisson);
        CHECK(a.profile.intensities == b.profile.intensities);
        CHECK(a.profile.intensities != c.profile.intensities);
    }
    SUBCASE("off-sensor ions are reported, not fatal") {
        const std::vector<double> ions{-50e-6, 100e-6, 2000e-6};
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 100.0, 0,
                                                    NoiseModel::none);
        CHECK(frame.clipped_ions == std::vector<std::size_t>{0, 2});
    }
    SUBCASE("input checks") {
        const std::vector<double> unsorted{2e-4, 1e-4};
        CHECK_THROWS_AS(generate_synthetic_frame(unsorted, kMag, kPixel, kPsf, 100.0, 0,
                                                 NoiseModel::none),
                        DomainError);
        const std::vector<double> one{1e-4};
        CHECK_THROWS_AS(generate_synthetic_frame(one, -1.0, kPixel, kPsf, 100.0, 0,
                                                 NoiseModel::none),
                        DomainError);
    }
}

TEST_CASE("peak detection") {
    SUBCASE("flat profile yields nothing") {
        const FluorescenceProfile flat{std::vector<double>(256, 3.0), kPixel, 0.0};
        CHECK(detect_peaks(flat, 0.5).empty());
    }
    SUBCASE("finds exactly the generated peaks") {
        auto ions = even_positions(10, 28e-6);
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 150.0, 0,
                                                    NoiseModel::none);
        const PeakSet found = detect_peaks(frame.profile, 30.0);
        CHECK(found.size() == 10);
    }
    SUBCASE("prominence above the global maximum suppresses everything") {
        auto ions = even_positions(10, 28e-6);
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 150.0, 0,
                                                    NoiseModel::none);
        const double top =
            *std::max_element(frame.profile.intensities.begin(), frame.profile.intensities.end());
        CHECK(detect_peaks(frame.profile, top * 1.01).empty());
    }
    SUBCASE("empty profile is rejected") {
        CHECK_THROWS_AS(detect_peaks(FluorescenceProfile{{}, kPixel, 0.0}, 1.0), DomainError);
    }
    SUBCASE("width seeds approximate the true sigma") {
        auto ions = even_positions(3, 40e-6);
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 150.0, 0,
                                                    NoiseModel::none);
        const double sigma_px = kMag * kPsf / kPixel;
        for (const auto& pk : detect_peaks(frame.profile, 30.0).peaks)
            CHECK(pk.width_px == doctest::Approx(sigma_px).epsilon(0.15));
    }
}

TEST_CASE("multi-gaussian fit") {
    SUBCASE("noiseless frames recover centers to < 0.01 px") {
        auto ions = even_positions(12, 26e-6);
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 200.0, 0,
                                                    NoiseModel::none, 0.0, 5.0);
        const PeakSet fitted = fit_multigaussian(frame.profile, detect_peaks(frame.profile, 40.0));
        REQUIRE(fitted.size() == ions.size());
        for (std::size_t i = 0; i < ions.size(); ++i)
            CHECK(std::abs(fitted.peaks[i].center_px - object_to_px(ions[i])) < 0.01);
        CHECK(fitted.baseline == doctest::Approx(5.0).epsilon(1e-3));
    }
    SUBCASE("single gaussian with known parameters is recovered exactly") {
        FluorescenceProfile profile{std::vector<double>(200, 0.0), kPixel, 0.0};
        const double a = 120.0, c = 84.37, w = 2.4, b = 7.0;
        for (int p = 0; p < 200; ++p) {
            const double t = (p - c) / w;
            profile.intensities[static_cast<std::size_t>(p)] = b + a * std::exp(-0.5 * t * t);
        }
        const PeakSet fitted = fit_multigaussian(profile, detect_peaks(profile, 30.0));
        REQUIRE(fitted.size() == 1);
        CHECK(fitted.peaks[0].center_px == doctest::Approx(c).epsilon(1e-9));
        CHECK(fitted.peaks[0].width_px == doctest::Approx(w).epsilon(1e-7));
        CHECK(fitted.peaks[0].amplitude == doctest::Approx(a).epsilon(1e-7));
        CHECK(fitted.baseline == doctest::Approx(b).epsilon(1e-6));
        CHECK(fitted.residual_norm < 1e-6);
    }
    SUBCASE("poisson noise at amplitude 200: centers within 0.1 px rms") {
        auto ions = even_positions(10, 28e-6);
        std::vector<double> sq_errors;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 200.0, seed,
                                                        NoiseModel::poisson, 0.0, 2.0);
            const PeakSet fitted =
                fit_multigaussian(frame.profile, detect_peaks(frame.profile, 60.0));
            REQUIRE(fitted.size() == ions.size());
            for (std::size_t i = 0; i < ions.size(); ++i) {
                const double err = fitted.peaks[i].center_px - object_to_px(ions[i]);
                sq_errors.push_back(err * err);
                CHECK(fitted.peaks[i].center_sigma_px > 0.0);
            }
        }
        const double rms = std::sqrt(std::accumulate(sq_errors.begin(), sq_errors.end(), 0.0) /
                                     static_cast<double>(sq_errors.size()));
        CHECK(rms < 0.1);
    }
    SUBCASE("invariant under intensity rescaling") {
        auto ions = even_positions(6, 30e-6);
        const auto frame = generate_synthetic_frame(ions, kMag, kPixel, kPsf, 150.0, 0,
                                                    NoiseModel::none, 0.0, 4.0);
        FluorescenceProfile scaled = frame.profile;
        for (double& v : scaled.intensities) v *= 37.5;
        const PeakSet base = fit_multigaussian(frame.profile, detect_peaks(frame.profile, 30.0));
        const PeakSet big = fit_multigaussian(scaled, detect_peaks(scaled, 30.0 * 37.5));
        REQUIRE(base.size() == big.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(big.peaks[i].center_px == doctest::Approx(base.peaks[i].center_px).epsilon(1e-8));
            CHECK(big.peaks[i].width_px == doctest::Approx(base.peaks[i].width_px).epsilon(1e-6));
            CHECK(big.peaks[i].amplitude ==
                  doctest::Approx(base.peaks[i].amplitude * 37.5).epsilon(1e-6));
        }
    }
    SUBCASE("a delta spike collapses the width and is reported") {
        FluorescenceProfile spike{std::vector<double>(64, 0.0), kPixel, 0.0};
        spike.intensities[32] = 500.0;
        const PeakSet init = detect_peaks(spike, 100.0);
        REQUIRE(init.size() == 1);
        CHECK_THROWS_AS(fit_multigaussian(spike, init), FitError);
    }
    SUBCASE("empty init is rejected") {
        const FluorescenceProfile flat{std::vector<double>(64, 1.0), kPixel, 0.0};
        CHECK_THROWS_AS(fit_multigaussian(flat, PeakSet{}), DomainError);
    }
}

namespace {

// Renders ions into overlapping frames with per-translation stage errors and
// runs detection + fitting; profiles carry the nominal offsets, as stage
// readings would.
std::vector<FramePeaks> build_frames(const std::vector<double>& ions_m,
                                     const std::vector<double>& nominal_m,
                                     const std::vector<double>& true_m, double amplitude,
                                     NoiseModel noise, std::uint64_t seed) {
    std::vector<FramePeaks> frames;
    for (std::size_t f = 0; f < nominal_m.size(); ++f) {
        auto frame = generate_synthetic_frame(ions_m, kMag, kPixel, kPsf, amplitude, seed + f,
                                              noise, true_m[f], 2.0);
        frame.profile.frame_offset_m = nominal_m[f];
        const double lo =
            *std::min_element(frame.profile.intensities.begin(), frame.profile.intensities.end());
        const double hi =
            *std::max_element(frame.profile.intensities.begin(), frame.profile.intensities.end());
        const PeakSet fitted =
            fit_multigaussian(frame.profile, detect_peaks(frame.profile, 0.25 * (hi - lo)));
        frames.push_back(FramePeaks{std::move(frame.profile), fitted});
    }
    return frames;
}

}  // namespace

TEST_CASE("frame stitching") {
    SUBCASE("single frame is an identity stitch") {
        auto ions = even_positions(8, 30e-6);
        const auto frames = build_frames(ions, {0.0}, {0.0}, 150.0, NoiseModel::none, 0);
        const StitchResult result = stitch_frames(frames, kMag);
        CHECK(result.total_count == 8);
        CHECK(result.redundancy_counts.empty());
        CHECK(result.fitted_offsets_m == std::vector<double>{0.0});
        for (std::size_t i = 0; i < ions.size(); ++i)
            CHECK(std::abs(result.global_positions_m[i] - ions[i]) < 0.02e-6);
    }
    SUBCASE("two jittered frames merge their shared ions") {
        // 30 ions, 30 um apart; second frame translated by 600 um nominal
        // with a 4 um stage error.
        std::vector<double> ions;
        for (int i = 0; i < 30; ++i) ions.push_back(i * 30e-6);
        const std::vector<double> nominal{-130e-6, 470e-6};
        const std::vector<double> truth{-130e-6, 474e-6};
        const auto frames = build_frames(ions, nominal, truth, 150.0, NoiseModel::none, 0);
        const std::size_t in_first = frames[0].peaks.size();
        const std::size_t in_second = frames[1].peaks.size();
        CHECK(in_first + in_second > 30);  // the overlap is seen twice

        const StitchResult result = stitch_frames(frames, kMag);
        CHECK(result.total_count == 30);
        REQUIRE(result.redundancy_counts.size() == 1);
        CHECK(result.redundancy_counts[0] ==
              static_cast<int>(in_first + in_second - 30));
        CHECK(result.offset_warning_frames.empty());
        // The fitted offset recovers the true translation, not the nominal.
        CHECK(result.fitted_offsets_m[1] == doctest::Approx(474e-6).epsilon(1e-3));
        for (int i = 0; i < 30; ++i)
            CHECK(std::abs(result.global_positions_m[static_cast<std::size_t>(i)] - ions[i]) <
                  0.05e-6);
    }
    SUBCASE("offsets are translation equivariant") {
        std::vector<double> ions;
        for (int i = 0; i < 20; ++i) ions.push_back(i * 32e-6);
        const std::vector<double> nominal{-200e-6, 300e-6};
        const std::vector<double> truth{-200e-6, 303e-6};
        const auto frames = build_frames(ions, nominal, truth, 150.0, NoiseModel::none, 0);
        const StitchResult base = stitch_frames(frames, kMag);

        const double shift = 123e-6;
        std::vector<double> ions_shift;
        for (double z : ions) ions_shift.push_back(z + shift);
        std::vector<double> nominal_shift, truth_shift;
        for (double o : nominal) nominal_shift.push_back(o + shift);
        for (double o : truth) truth_shift.push_back(o + shift);
        const auto frames_shift =
            build_frames(ions_shift, nominal_shift, truth_shift, 150.0, NoiseModel::none, 0);
        const StitchResult moved = stitch_frames(frames_shift, kMag);

        REQUIRE(moved.total_count == base.total_count);
        for (std::size_t i = 0; i < base.global_positions_m.size(); ++i)
            CHECK(moved.global_positions_m[i] - base.global_positions_m[i] ==
                  doctest::Approx(shift).epsilon(1e-9));
    }
    SUBCASE("a 20 um stage error raises the warning flag") {
        // Spacing wide enough (48 um, gate 24 um) that a 20 um error is
        // still registered unambiguously, just flagged as out of tolerance.
        std::vector<double> ions;
        for (int i = 0; i < 20; ++i) ions.push_back(i * 48e-6);
        const std::vector<double> nominal{-120e-6, 380e-6};
        const std::vector<double> truth{-120e-6, 400e-6};  // 20 um off nominal
        const auto frames = build_frames(ions, nominal, truth, 150.0, NoiseModel::none, 0);
        const StitchResult result = stitch_frames(frames, kMag);
        CHECK(result.total_count == 20);
        CHECK(result.offset_warning_frames == std::vector<int>{1});
        CHECK(result.fitted_offsets_m[1] == doctest::Approx(400e-6).epsilon(1e-3));
    }
    SUBCASE("ambiguous correspondence is a stitch error naming the frames") {
        // Hand-built peak sets: the second frame's middle peak lands between
        // two first-frame ions, both inside the gate.
        const auto px = [](double um) { return object_to_px(um * 1e-6); };
        PeakSet first;
        for (double um : {0.0, 90.0, 101.0, 190.0, 280.0})
            first.peaks.push_back(Peak{px(um), 0.0, 1.5, 100.0});
        PeakSet second;
        for (double um : {95.5, 190.0, 280.0, 370.0})
            second.peaks.push_back(Peak{px(um), 0.0, 1.5, 100.0});
        FluorescenceProfile pa{std::vector<double>(1024, 0.0), kPixel, 0.0};
        FluorescenceProfile pb{std::vector<double>(1024, 0.0), kPixel, 1e-9};
        std::vector<FramePeaks> frames{FramePeaks{pa, first}, FramePeaks{pb, second}};
        CHECK_THROWS_AS(stitch_frames(frames, kMag), StitchError);
        try {
            stitch_frames(frames, kMag);
        } catch (const StitchError& e) {
            CHECK(e.frame_a() == 0);
            CHECK(e.frame_b() == 1);
        }
    }
    SUBCASE("frames must overlap on at least two ions") {
        auto ions = even_positions(4, 200e-6);
        PeakSet only;
        only.peaks.push_back(Peak{100.0, 0.0, 1.5, 50.0});
        only.peaks.push_back(Peak{400.0, 0.0, 1.5, 50.0});
        FluorescenceProfile pa{std::vector<double>(1024, 0.0), kPixel, 0.0};
        FluorescenceProfile pb{std::vector<double>(1024, 0.0), kPixel, 5e-3};  // far away
        std::vector<FramePeaks> frames{FramePeaks{pa, only}, FramePeaks{pb, only}};
        CHECK_THROWS_AS(stitch_frames(frames, kMag), StitchError);
    }
}

TEST_CASE("noiseless synthetic round trip recovers positions and count") {
    // positions -> frames -> peaks -> stitch -> positions, < 0.15 px in
    // object space and the exact count.
    const ChainConfiguration cfg = solve_equilibrium(40);
    const double l_m = 120e-6;
    std::vector<double> ions;
    for (double u : cfg.positions) ions.push_back(u * l_m);

    const double span = kSensorWidthPx * kPixel / kMag;
    const double start = -0.5 * (1.0 * 700e-6 + span);
    const std::vector<double> nominal{start, start + 700e-6};
    const std::vector<double> truth{start, start + 703.2e-6};
    const auto frames = build_frames(ions, nominal, truth, 200.0, NoiseModel::none, 3);
    const StitchResult result = stitch_frames(frames, kMag);
    REQUIRE(result.total_count == 40);
    const double tol_m = 0.15 * kPixel / kMag;
    for (std::size_t i = 0; i < ions.size(); ++i)
        CHECK(std::abs(result.global_positions_m[i] - ions[i]) < tol_m);
}

TEST_CASE("magnification calibration") {
    const double slope_px_per_m = kMag / kPixel;
    SUBCASE("exact affine data recovers the slope to 1e-9") {
        std::vector<double> stage, image;
        for (int i = 0; i < 9; ++i) {
            stage.push_back(i * 125e-6);
            image.push_back(77.7 + slope_px_per_m * stage.back());
        }
        const MagnificationFit fit = calibrate_magnification(stage, image, kPixel);
        CHECK(fit.magnification == doctest::Approx(11.58).epsilon(1e-9));
        CHECK(fit.sigma < 1e-9);
        for (double r : fit.residuals_px) CHECK(std::abs(r) < 1e-6);
        CHECK(fit.intercept_px == doctest::Approx(77.7).epsilon(1e-9));
    }
    SUBCASE("intercept does not bias the slope") {
        std::vector<double> stage, image;
        for (int i = 0; i < 5; ++i) {
            stage.push_back(i * 125e-6);
            image.push_back(-500.0 + slope_px_per_m * stage.back());
        }
        CHECK(calibrate_magnification(stage, image, kPixel).magnification ==
              doctest::Approx(11.58).epsilon(1e-9));
    }
    SUBCASE("uniform +-0.5 px jitter stays within the regression sigma") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> jitter(-0.5, 0.5);
        std::vector<double> stage, image;
        for (int i = 0; i < 9; ++i) {
            stage.push_back(i * 125e-6);
            image.push_back(10.0 + slope_px_per_m * stage.back() + jitter(rng));
        }
        const MagnificationFit fit = calibrate_magnification(stage, image, kPixel);
        CHECK(std::abs(fit.magnification - 11.58) < fit.sigma);
    }
    SUBCASE("fewer than three samples is an error") {
        const std::vector<double> stage{0.0, 1e-4}, image{0.0, 89.0};
        CHECK_THROWS_AS(calibrate_magnification(stage, image, kPixel), DomainError);
    }
    SUBCASE("degenerate stage positions are rejected") {
        const std::vector<double> stage{1e-4, 1e-4, 1e-4}, image{1.0, 2.0, 3.0};
        CHECK_THROWS_AS(calibrate_magnification(stage, image, kPixel), DomainError);
    }
}

TEST_CASE("density profile fit") {
    SUBCASE("exact parabolic samples recover z0 and L to 1e-9") {
        const DensityModelParams truth{155, Length::from_um(2830.0), 42e-6};
        std::vector<SpacingSample> samples;
        for (double t = -0.9; t <= 0.9; t += 0.05) {
            const double z = truth.center_m + t * truth.half_length.meters;
            samples.push_back(SpacingSample{z, local_spacing(z, truth)});
        }
        const DensityFit fit = fit_density_profile(samples, 155);
        CHECK(fit.params.half_length.meters ==
              doctest::Approx(truth.half_length.meters).epsilon(1e-9));
        CHECK(fit.params.center_m == doctest::Approx(truth.center_m).epsilon(1e-6));
        CHECK(fit.rss < 1e-12);
    }
    SUBCASE("three exact samples fit with zero residual") {
        const DensityModelParams truth{155, Length::from_um(2830.0), 0.0};
        std::vector<SpacingSample> samples;
        for (double t : {-0.5, 0.1, 0.6}) {
            const double z = t * truth.half_length.meters;
            samples.push_back(SpacingSample{z, local_spacing(z, truth)});
        }
        const DensityFit fit = fit_density_profile(samples, 155);
        CHECK(fit.rss < 1e-12);
        CHECK(fit.params.half_length.meters ==
              doctest::Approx(truth.half_length.meters).epsilon(1e-7));
    }
    SUBCASE("oracle spacings fit to a length beyond the physical extent") {
        const ChainConfiguration cfg = solve_equilibrium(155);
        const double l_m = 216.23e-6;
        const auto samples = spacings_with_midpoints(cfg, l_m);
        const DensityFit fit = fit_density_profile(samples, 155);
        const double extent = (cfg.positions.back() - cfg.positions.front()) * l_m;
        CHECK(2.0 * fit.params.half_length.meters > extent);
        MESSAGE("fitted 2L exceeds the chain extent by ",
                100.0 * (2.0 * fit.params.half_length.meters - extent) / extent, "%");
        CHECK(std::abs(fit.params.center_m) < 1e-6);

        // Residuals of the law against the exact chain: flat near the
        // center, systematically growing toward the ends.
        const std::size_t m = fit.residuals.size();
        double inner = 0.0, outer = 0.0;
        std::size_t n_inner = 0, n_outer = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double frac = std::abs(samples[i].position_m) /
                                (0.5 * extent);
            if (frac < 0.3) {
                inner += std::abs(fit.residuals[i]);
                ++n_inner;
            } else if (frac > 0.85) {
                outer += std::abs(fit.residuals[i]);
                ++n_outer;
            }
        }
        REQUIRE(n_inner > 0);
        REQUIRE(n_outer > 0);
        CHECK(outer / static_cast<double>(n_outer) > 5.0 * inner / static_cast<double>(n_inner));
    }
    SUBCASE("too few samples") {
        std::vector<SpacingSample> samples{{0.0, 25e-6}, {25e-6, 25.1e-6}};
        CHECK_THROWS_AS(fit_density_profile(samples, 155), FitError);
    }
    SUBCASE("rising spacing trend has no parabola") {
        std::vector<SpacingSample> samples;
        for (int i = 0; i < 10; ++i)
            samples.push_back(SpacingSample{i * 25e-6, 25e-6 / (1.0 + 0.01 * i * i)});
        CHECK_THROWS_AS(fit_density_profile(samples, 155), FitError);
    }
}
