// Command-line front end for the ion-chain number diagnostic: equilibrium
// simulation, spacing-based ion-number estimation, fluorescence-profile
// analysis, magnification calibration, and chain-stability checks.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ionchain/dubin.hpp"
#include "ionchain/equilibrium.hpp"
#include "ionchain/errors.hpp"
#include "ionchain/estimation.hpp"
#include "ionchain/io.hpp"
#include "ionchain/profile.hpp"
#include "ionchain/species_registry.hpp"
#include "ionchain/units.hpp"
#include "ionchain/version.hpp"

namespace {

using nlohmann::json;
using namespace ionchain;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDomain = 2;
constexpr int kExitNumerical = 3;

struct CommonOptions {
    std::string species = "Ca40";
    std::string species_file;
    double fz_khz = 0.0;
    double fz_err_khz = 0.0;
};

void add_species_options(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--species", opts.species, "Species name from the registry")
        ->capture_default_str();
    cmd->add_option("--species-file", opts.species_file,
                    "Extra species registry file (default: $IONCHAIN_SPECIES_PATH)");
}

void add_frequency_options(CLI::App* cmd, CommonOptions& opts, bool required = true) {
    auto* fz = cmd->add_option("--fz-khz", opts.fz_khz, "Axial frequency omega_z/2pi in kHz");
    if (required) fz->required();
    cmd->add_option("--fz-err-khz", opts.fz_err_khz, "1-sigma uncertainty of --fz-khz")
        ->capture_default_str();
}

SpeciesRegistry load_registry(const CommonOptions& opts) {
    SpeciesRegistry registry;
    std::string path = opts.species_file;
    if (path.empty()) {
        if (const char* env = std::getenv("IONCHAIN_SPECIES_PATH")) path = env;
    }
    if (!path.empty()) registry.load_file(path);
    return registry;
}

json config_base(const std::string& command) {
    json j;
    j["tool_version"] = kVersion;
    j["command"] = command;
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

json frequency_json(const Frequency& f) {
    return json{{"khz", f.khz()}, {"sigma_khz", f.sigma_khz()}, {"rad_per_s", f.rad_per_s}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    CommonOptions common;
    long n_ions = 0;
    std::string n_range;  // "A:B" batch sweep
    std::string out_dir = ".";
    int jobs = 0;
    double fx_khz = 0.0;  // optional radial frequency for the stability margin
};

struct SweepRow {
    long n;
    double a0_numeric_l, a0_dubin_l, rel_err, half_extent_l, l_dubin_l, rho_crit;
};

SweepRow sweep_point(long n) {
    const ChainConfiguration cfg = solve_equilibrium(n);
    const Length unit{1.0, 0.0};
    SweepRow row{};
    row.n = n;
    row.a0_numeric_l = min_spacing_numeric(cfg);
    row.a0_dubin_l = min_spacing_dubin(n, unit).meters;
    row.rel_err = (row.a0_numeric_l - row.a0_dubin_l) / row.a0_dubin_l;
    row.half_extent_l = 0.5 * (cfg.positions.back() - cfg.positions.front());
    row.l_dubin_l = half_length(n, unit).meters;
    row.rho_crit = zigzag_critical_ratio(n).critical_ratio;
    return row;
}

int run_simulate(const SimulateArgs& args) {
    const SpeciesRegistry registry = load_registry(args.common);
    const IonSpecies species = registry.get(args.common.species);
    const Frequency fz = Frequency::from_khz(args.common.fz_khz, args.common.fz_err_khz);
    const Length l = length_scale(species, fz);
    std::filesystem::create_directories(args.out_dir);
    const auto out = std::filesystem::path(args.out_dir);

    if (!args.n_range.empty()) {
        long lo = 0, hi = 0;
        try {
            const auto colon = args.n_range.find(':');
            if (colon == std::string::npos) throw std::invalid_argument("no colon");
            lo = std::stol(args.n_range.substr(0, colon));
            hi = std::stol(args.n_range.substr(colon + 1));
        } catch (const std::exception&) {
            std::cerr << "usage: --n-range expects A:B with integer bounds\n";
            return kExitUsage;
        }
        if (lo < 2 || hi < lo) {
            std::cerr << "usage: --n-range bounds must satisfy 2 <= A <= B\n";
            return kExitUsage;
        }

        // Independent solves; run them on a bounded worker pool.
        const long count = hi - lo + 1;
        std::vector<SweepRow> results(static_cast<std::size_t>(count));
        std::atomic<long> next{0};
        unsigned workers = args.jobs > 0 ? static_cast<unsigned>(args.jobs)
                                         : std::max(1u, std::thread::hardware_concurrency());
        workers = std::min<unsigned>(workers, static_cast<unsigned>(count));
        std::vector<std::thread> pool;
        std::atomic<bool> failed{false};
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                    try {
                        results[static_cast<std::size_t>(i)] = sweep_point(lo + i);
                    } catch (...) {
                        failed.store(true);
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failed.load())
            throw NumericalError("simulate: a sweep job failed to converge");
        std::vector<std::vector<double>> rows;
        for (const SweepRow& r : results)
            rows.push_back({static_cast<double>(r.n), r.a0_numeric_l, r.a0_dubin_l, r.rel_err,
                            r.half_extent_l, r.l_dubin_l, r.rho_crit});
        write_csv((out / "sweep.csv").string(),
                  "n,a0_numeric_l,a0_dubin_l,a0_rel_err,half_extent_l,L_dubin_l,rho_crit", rows);
        std::cout << "wrote " << (out / "sweep.csv").string() << " (" << rows.size() << " rows)\n";
        return kExitOk;
    }

    if (args.n_ions < 1)
        throw DomainError("simulate: --n must be at least 1");
    const ChainConfiguration cfg = solve_equilibrium(args.n_ions);

    std::vector<std::vector<double>> pos_rows;
    for (std::size_t i = 0; i < cfg.positions.size(); ++i)
        pos_rows.push_back({static_cast<double>(i), cfg.positions[i], cfg.positions[i] * l.um()});
    write_csv((out / "positions.csv").string(), "index,position_l,position_um", pos_rows);

    std::vector<std::vector<double>> spacing_rows;
    if (cfg.n_ions() >= 2)
        for (const auto& s : spacings_with_midpoints(cfg, l.meters))
            spacing_rows.push_back({s.position_m / constants::kMicron, s.spacing_m / constants::kMicron});
    write_csv((out / "spacings.csv").string(), "midpoint_um,spacing_um", spacing_rows);

    json summary = config_base("simulate");
    summary["config"] = {{"n", args.n_ions},
                         {"species", species.name},
                         {"fz_khz", args.common.fz_khz},
                         {"fz_err_khz", args.common.fz_err_khz},
                         {"out_dir", args.out_dir}};
    summary["input_checksums"] = json::object();
    summary["length_scale_um"] = l.um();
    summary["converged_grad_norm"] = cfg.converged_grad_norm;
    summary["half_extent_um"] =
        0.5 * (cfg.positions.back() - cfg.positions.front()) * l.um();
    if (cfg.n_ions() >= 2) {
        const double a0_num = min_spacing_numeric(cfg) * l.meters;
        const Length a0_dubin = min_spacing_dubin(args.n_ions, l);
        const Length a0_james = min_spacing_james(args.n_ions, l);
        const Length l_dubin = half_length(args.n_ions, l);
        const StabilityResult stability = zigzag_critical_ratio(args.n_ions);
        summary["a0_numeric_um"] = a0_num / constants::kMicron;
        summary["a0_dubin_um"] = a0_dubin.um();
        summary["a0_james_um"] = a0_james.um();
        summary["a0_rel_err_numeric_vs_dubin"] = (a0_num - a0_dubin.meters) / a0_dubin.meters;
        summary["L_dubin_um"] = l_dubin.um();
        summary["critical_ratio"] = stability.critical_ratio;
        if (args.fx_khz > 0.0) {
            TrapModel trap;
            trap.omega_z = fz;
            trap.omega_x = Frequency::from_khz(args.fx_khz);
            const Frequency fr = radial_frequency(trap);
            const double rho = std::pow(fz.rad_per_s / fr.rad_per_s, 2);
            summary["rho"] = rho;
            summary["stability_margin"] = stability.critical_ratio / rho;
        }
    }
    write_json_file((out / "summary.json").string(), summary);
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    CommonOptions common;
    double a0_um = 0.0;
    double a0_err_um = 0.0;
    double mag_err_rel = 0.0;
    std::string law = "both";
    std::string out_file = "report.json";
};

void print_estimate_table(const EstimateReport& report, const std::string& law) {
    std::printf("a0 = %.4f +/- %.4f um   (N_a = %ld)\n", report.a0_mean.um(),
                report.a0_stderr.um(), report.n_central_used);
    if (law != "james")
        std::printf("Dubin:  N = %ld   (N_real = %.3f +/- %.2f)\n", report.dubin.n_int,
                    report.dubin.n_real, report.dubin.n_sigma);
    if (law != "dubin")
        std::printf("James:  N = %ld   (N_real = %.3f +/- %.2f)\n", report.james.n_int,
                    report.james.n_real, report.james.n_sigma);
    std::printf("sigma_N/N = %.2f%%  [axial %.2f%%, spacing %.2f%%, magnification %.2f%%]\n",
                100.0 * report.rel_sigma_total, 100.0 * report.rel_sigma_axial,
                100.0 * report.rel_sigma_spacing, 100.0 * report.rel_sigma_magnification);
    std::printf("dominant uncertainty: %s\n", to_string(report.dominant));
}

int run_estimate(const EstimateArgs& args) {
    const SpeciesRegistry registry = load_registry(args.common);
    const IonSpecies species = registry.get(args.common.species);
    const Frequency fz = Frequency::from_khz(args.common.fz_khz, args.common.fz_err_khz);
    const Length a0 = Length::from_um(args.a0_um, args.a0_err_um);

    const EstimateReport report = estimate_report(a0, species, fz, args.mag_err_rel);
    print_estimate_table(report, args.law);

    json j = json::parse(report.to_json());
    j.update(config_base("estimate"));
    j["config"] = {{"a0_um", args.a0_um},     {"a0_err_um", args.a0_err_um},
                   {"species", species.name}, {"fz_khz", args.common.fz_khz},
                   {"fz_err_khz", args.common.fz_err_khz}, {"mag_err_rel", args.mag_err_rel},
                   {"law", args.law}};
    j["input_checksums"] = json::object();
    write_json_file(args.out_file, j);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    CommonOptions common;
    std::string manifest;
    std::string out_dir = ".";
    double min_prominence = -1.0;  // <0: auto
    double dispersion_target = 0.02;
    double mag_err_rel = 0.0;
};

int run_analyze(const AnalyzeArgs& args) {
    const SpeciesRegistry registry = load_registry(args.common);
    const IonSpecies species = registry.get(args.common.species);
    const Frequency fz = Frequency::from_khz(args.common.fz_khz, args.common.fz_err_khz);
    std::filesystem::create_directories(args.out_dir);
    const auto out = std::filesystem::path(args.out_dir);

    const FrameManifest manifest = read_frame_manifest(args.manifest);
    json checksums;
    checksums[std::filesystem::path(args.manifest).filename().string()] =
        file_checksum_hex(args.manifest);

    // Stage 1-2: load each frame, detect and fit its peaks.
    std::vector<FramePeaks> frames;
    for (std::size_t i = 0; i < manifest.frame_paths.size(); ++i) {
        const std::string& path = manifest.frame_paths[i];
        try {
            FluorescenceProfile profile =
                read_frame_csv(path, manifest.pixel_size_um, manifest.nominal_offsets_um[i]);
            double prominence = args.min_prominence;
            if (prominence < 0.0) {
                const auto [lo, hi] =
                    std::minmax_element(profile.intensities.begin(), profile.intensities.end());
                prominence = 0.25 * (*hi - *lo);
            }
            const PeakSet init = detect_peaks(profile, prominence);
            if (init.empty())
                throw NumericalError("no peaks above prominence " + std::to_string(prominence));
            const PeakSet fitted = fit_multigaussian(profile, init);
            frames.push_back(FramePeaks{std::move(profile), fitted});
            checksums[std::filesystem::path(path).filename().string()] = file_checksum_hex(path);
        } catch (const std::exception& e) {
            throw NumericalError("analyze stage detect/fit, frame " + std::to_string(i) + " (" +
                                 path + "): " + e.what());
        }
    }

    json peaks_json = config_base("analyze");
    peaks_json["frames"] = json::array();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        json entry;
        entry["frame"] = i;
        entry["nominal_offset_um"] = manifest.nominal_offsets_um[i];
        entry["baseline"] = frames[i].peaks.baseline;
        entry["residual_norm"] = frames[i].peaks.residual_norm;
        entry["peaks"] = json::array();
        for (const Peak& p : frames[i].peaks.peaks)
            entry["peaks"].push_back({{"center_px", p.center_px},
                                      {"center_sigma_px", p.center_sigma_px},
                                      {"width_px", p.width_px},
                                      {"amplitude", p.amplitude}});
        peaks_json["frames"].push_back(std::move(entry));
    }
    peaks_json["input_checksums"] = checksums;

    // Stage 3: stitch.
    StitchResult stitch;
    try {
        stitch = stitch_frames(frames, manifest.magnification);
    } catch (const StitchError& e) {
        throw StitchError("analyze stage stitch: " + std::string(e.what()), e.frame_a(), e.frame_b());
    }

    json stitch_json = config_base("analyze");
    stitch_json["total_count"] = stitch.total_count;
    stitch_json["redundancy_counts"] = stitch.redundancy_counts;
    stitch_json["offset_warning_frames"] = stitch.offset_warning_frames;
    stitch_json["fitted_offsets_um"] = json::array();
    for (std::size_t i = 0; i < stitch.fitted_offsets_m.size(); ++i)
        stitch_json["fitted_offsets_um"].push_back(
            {{"frame", i},
             {"nominal_um", manifest.nominal_offsets_um[i]},
             {"fitted_um", stitch.fitted_offsets_m[i] / constants::kMicron}});
    stitch_json["input_checksums"] = checksums;

    // Stage 4: spacings and the density-profile fit (fixes the chain center).
    if (stitch.total_count < 4)
        throw NumericalError("analyze stage spacings: need at least 4 ions, found " +
                             std::to_string(stitch.total_count));
    std::vector<SpacingSample> samples;
    for (std::size_t i = 1; i < stitch.global_positions_m.size(); ++i)
        samples.push_back(SpacingSample{
            0.5 * (stitch.global_positions_m[i] + stitch.global_positions_m[i - 1]),
            stitch.global_positions_m[i] - stitch.global_positions_m[i - 1]});

    DensityFit density;
    try {
        density = fit_density_profile(samples, stitch.total_count);
    } catch (const std::exception& e) {
        throw NumericalError("analyze stage density-fit: " + std::string(e.what()));
    }
    for (auto& s : samples) s.position_m -= density.params.center_m;  // recenter on fitted z0

    std::vector<std::vector<double>> spacing_rows;
    for (const auto& s : samples)
        spacing_rows.push_back({s.position_m / constants::kMicron, s.spacing_m / constants::kMicron});
    write_csv((out / "spacings.csv").string(), "midpoint_um,spacing_um", spacing_rows);

    // Stage 5: central average; N_a from a first-pass guess, iterated once.
    auto ordered = samples;
    std::sort(ordered.begin(), ordered.end(), [](const SpacingSample& a, const SpacingSample& b) {
        return std::abs(a.position_m) < std::abs(b.position_m);
    });
    const Length l = length_scale(species, fz);
    const long n_guess0 =
        estimate_n_dubin(Length{ordered.front().spacing_m, 0.0}, l).n_int;
    long n_central = choose_n_central(samples, args.dispersion_target, n_guess0);
    CentralSpacing central = average_central_spacing(samples, n_central);
    const long n_guess1 = estimate_n_dubin(central.mean, l).n_int;
    if (n_guess1 != n_guess0) {
        n_central = choose_n_central(samples, args.dispersion_target, n_guess1);
        central = average_central_spacing(samples, n_central);
    }

    // Stage 6: estimate report.
    EstimateReport report;
    try {
        report = estimate_report(central.mean, species, fz, args.mag_err_rel, n_central);
    } catch (const std::exception& e) {
        throw NumericalError("analyze stage estimate: " + std::string(e.what()));
    }

    stitch_json["config"] = {{"manifest", args.manifest},
                             {"species", species.name},
                             {"fz_khz", args.common.fz_khz},
                             {"fz_err_khz", args.common.fz_err_khz},
                             {"min_prominence", args.min_prominence},
                             {"dispersion_target", args.dispersion_target},
                             {"mag_err_rel", args.mag_err_rel},
                             {"out_dir", args.out_dir}};
    peaks_json["config"] = stitch_json["config"];
    write_json_file((out / "peaks.json").string(), peaks_json);
    write_json_file((out / "stitch.json").string(), stitch_json);

    json report_json = json::parse(report.to_json());
    report_json.update(config_base("analyze"));
    report_json["config"] = stitch_json["config"];
    report_json["input_checksums"] = checksums;
    report_json["density_fit"] = {{"fitted_2L_um", 2.0 * density.params.half_length.um()},
                                  {"center_um", density.params.center_m / constants::kMicron},
                                  {"rss", density.rss}};
    report_json["stitched_count"] = stitch.total_count;
    write_json_file((out / "report.json").string(), report_json);

    // Fig.-2-style data: measured a(z) plus the fitted model curve.
    std::vector<std::vector<double>> curve_rows;
    for (const auto& s : samples)
        curve_rows.push_back(
            {0.0, s.position_m / constants::kMicron, s.spacing_m / constants::kMicron});
    const DensityModelParams centered{density.params.n_ions, density.params.half_length, 0.0};
    const double big_l = density.params.half_length.meters;
    for (int i = 0; i < 512; ++i) {
        const double z = -big_l + (2.0 * big_l) * (i + 0.5) / 512.0;
        curve_rows.push_back(
            {1.0, z / constants::kMicron, local_spacing(z, centered) / constants::kMicron});
    }
    write_csv((out / "density_curve.csv").string(), "series,z_um,a_um", curve_rows);

    std::printf("stitched %ld ions across %zu frames (redundancy:", stitch.total_count,
                frames.size());
    for (int c : stitch.redundancy_counts) std::printf(" %d", c);
    std::printf(")\n");
    print_estimate_table(report, "both");
    std::printf("fitted 2L = %.1f um (chain extent %.1f um)\n",
                2.0 * density.params.half_length.um(),
                (stitch.global_positions_m.back() - stitch.global_positions_m.front()) /
                    constants::kMicron);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
    std::string pairs_csv;
    double pixel_size_um = 13.0;
    std::string out_file = "magnification.json";
};

int run_calibrate(const CalibrateArgs& args) {
    const auto rows = read_csv(args.pairs_csv);
    std::vector<double> stage_m, image_px;
    for (const auto& row : rows) {
        if (row.size() != 2)
            throw DomainError("calibrate: expected (stage_um, image_px) rows");
        stage_m.push_back(row[0] * constants::kMicron);
        image_px.push_back(row[1]);
    }
    const MagnificationFit fit =
        calibrate_magnification(stage_m, image_px, args.pixel_size_um * constants::kMicron);

    json j = config_base("calibrate");
    j["config"] = {{"pairs", args.pairs_csv}, {"pixel_size_um", args.pixel_size_um}};
    j["input_checksums"] = {{std::filesystem::path(args.pairs_csv).filename().string(),
                             file_checksum_hex(args.pairs_csv)}};
    j["magnification"] = fit.magnification;
    j["sigma"] = fit.sigma;
    j["intercept_px"] = fit.intercept_px;
    j["residuals_px"] = fit.residuals_px;
    write_json_file(args.out_file, j);
    std::printf("magnification = %.6f +/- %.6f (%zu samples)\n", fit.magnification, fit.sigma,
                stage_m.size());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// stability

struct StabilityArgs {
    CommonOptions common;
    long n_ions = 0;
    double fx_khz = 0.0;
    double fx_err_khz = 0.0;
    double v_rf = 0.0;
    double slope_khz = 157.0;
    double slope_err_khz = 1.0;
};

int run_stability(const StabilityArgs& args) {
    const Frequency fz = Frequency::from_khz(args.common.fz_khz, args.common.fz_err_khz);
    TrapModel trap;
    trap.omega_z = fz;
    trap.rf_slope_khz_per_2000v = args.slope_khz;
    trap.rf_slope_sigma_khz = args.slope_err_khz;
    if (args.fx_khz > 0.0) {
        trap.omega_x = Frequency::from_khz(args.fx_khz, args.fx_err_khz);
    } else if (args.v_rf > 0.0) {
        trap.v_rf = args.v_rf;
        const RfFrequencyResult rf = omega_x_from_vrf(args.v_rf, trap);
        if (rf.degenerate)
            throw DomainError("stability: rf amplitude is zero (degenerate)");
        trap.omega_x = rf.omega_x;
    } else {
        throw DomainError("stability: provide --fx-khz or --vrf");
    }

    const Frequency fr = radial_frequency(trap);
    const double rho = (fz.rad_per_s * fz.rad_per_s) / (fr.rad_per_s * fr.rad_per_s);
    const StabilityResult crit = zigzag_critical_ratio(args.n_ions);
    const bool stable = rho < crit.critical_ratio;
    std::printf("omega_r/2pi = %.4f kHz\n", fr.khz());
    std::printf("rho = omega_z^2/omega_r^2 = %.6e\n", rho);
    std::printf("rho_crit(N=%ld) = %.6e\n", args.n_ions, crit.critical_ratio);
    std::printf("margin rho_crit/rho = %.3f -> %s\n", crit.critical_ratio / rho,
                stable ? "stable linear chain" : "zigzag unstable");
    return stable ? kExitOk : kExitDomain;
}

// ---------------------------------------------------------------------------
// synth-frames

struct SynthArgs {
    CommonOptions common;
    long n_ions = 155;
    int n_frames = 5;
    double step_um = 1000.0;
    double magnification = 11.58;
    double pixel_size_um = 13.0;
    double psf_um = 2.0;
    double amplitude = 300.0;
    double background = 2.0;
    std::string noise = "poisson";
    std::uint64_t seed = 1;
    double jitter_um = 5.0;
    double frame_start_um = std::numeric_limits<double>::quiet_NaN();  // NaN: center-biased
    std::string out_dir = "synthetic";
};

int run_synth(const SynthArgs& args) {
    const SpeciesRegistry registry = load_registry(args.common);
    const IonSpecies species = registry.get(args.common.species);
    const Frequency fz = Frequency::from_khz(args.common.fz_khz, args.common.fz_err_khz);
    const Length l = length_scale(species, fz);
    if (args.n_frames < 1) throw DomainError("synth-frames: need at least one frame");

    const ChainConfiguration cfg = solve_equilibrium(args.n_ions);
    std::vector<double> positions_m;
    for (const double u : cfg.positions) positions_m.push_back(u * l.meters);

    const double sensor_object_um =
        kSensorWidthPx * args.pixel_size_um / args.magnification;
    double start_um = args.frame_start_um;
    if (std::isnan(start_um))  // center-biased: frame span centered on the chain
        start_um = -0.5 * (static_cast<double>(args.n_frames - 1) * args.step_um + sensor_object_um);

    NoiseModel noise = NoiseModel::none;
    if (args.noise == "poisson")
        noise = NoiseModel::poisson;
    else if (args.noise != "none")
        throw DomainError("synth-frames: --noise must be 'none' or 'poisson'");

    std::filesystem::create_directories(args.out_dir);
    const auto out = std::filesystem::path(args.out_dir);

    // Stage translations walk with a fresh uniform error per step.
    std::mt19937_64 rng(args.seed);
    const auto jitter = [&]() {
        return args.jitter_um * (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0);
    };

    std::ofstream manifest(out / "manifest.txt");
    manifest << "# synthetic fluorescence frames (" << args.n_ions << " ions, seed " << args.seed
             << ")\n";
    manifest << "pixel_size_um " << format_double(args.pixel_size_um) << "\n";
    manifest << "magnification " << format_double(args.magnification) << "\n";

    json truth = config_base("synth-frames");
    truth["config"] = {{"n", args.n_ions},
                       {"species", species.name},
                       {"fz_khz", args.common.fz_khz},
                       {"frames", args.n_frames},
                       {"step_um", args.step_um},
                       {"magnification", args.magnification},
                       {"pixel_size_um", args.pixel_size_um},
                       {"psf_um", args.psf_um},
                       {"amplitude", args.amplitude},
                       {"background", args.background},
                       {"noise", args.noise},
                       {"seed", args.seed},
                       {"jitter_um", args.jitter_um},
                       {"frame_start_um", start_um},
                       {"out_dir", args.out_dir}};
    truth["input_checksums"] = json::object();
    truth["length_scale_um"] = l.um();
    truth["true_positions_um"] = json::array();
    for (const double p : positions_m) truth["true_positions_um"].push_back(p / constants::kMicron);
    truth["nominal_offsets_um"] = json::array();
    truth["true_offsets_um"] = json::array();

    double walk_um = 0.0;  // cumulative stage error
    for (int f = 0; f < args.n_frames; ++f) {
        const double nominal_um = start_um + f * args.step_um;
        if (f > 0) walk_um += jitter();
        const double true_um = nominal_um + walk_um;
        const SyntheticFrame frame = generate_synthetic_frame(
            positions_m, args.magnification, args.pixel_size_um * constants::kMicron,
            args.psf_um * constants::kMicron, args.amplitude, args.seed + 1000 + f, noise,
            true_um * constants::kMicron, args.background);

        const std::string name = "frame" + std::to_string(f) + ".csv";
        std::vector<std::vector<double>> rows;
        for (std::size_t p = 0; p < frame.profile.intensities.size(); ++p)
            rows.push_back({static_cast<double>(p), frame.profile.intensities[p]});
        write_csv((out / name).string(), "pixel_index,intensity", rows);
        manifest << "frame " << name << " " << format_double(nominal_um) << "\n";
        truth["nominal_offsets_um"].push_back(nominal_um);
        truth["true_offsets_um"].push_back(true_um);
    }
    manifest.close();
    write_json_file((out / "truth.json").string(), truth);
    std::cout << "wrote " << args.n_frames << " frames + manifest to " << args.out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ion-chain number diagnostic"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Solve equilibrium positions and compare to the chain laws");
    c_sim->add_option("--n", sim.n_ions, "Number of ions");
    c_sim->add_option("--n-range", sim.n_range, "Batch sweep A:B (writes sweep.csv)");
    c_sim->add_option("--jobs", sim.jobs, "Parallel jobs for sweeps (default: hardware threads)");
    c_sim->add_option("--fx-khz", sim.fx_khz,
                      "Radial omega_x/2pi in kHz (adds the stability margin to the summary)");
    add_species_options(c_sim, sim.common);
    add_frequency_options(c_sim, sim.common);
    c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Ion number from a measured central spacing");
    c_est->add_option("--a0", est.a0_um, "Central spacing in um")->required();
    c_est->add_option("--a0-err", est.a0_err_um, "1-sigma of --a0 in um")->capture_default_str();
    c_est->add_option("--mag-err-rel", est.mag_err_rel, "Relative magnification uncertainty")
        ->capture_default_str();
    c_est->add_option("--law", est.law, "dubin | james | both")
        ->check(CLI::IsMember({"dubin", "james", "both"}))
        ->capture_default_str();
    c_est->add_option("-o,--out", est.out_file, "Report JSON path")->capture_default_str();
    add_species_options(c_est, est.common);
    add_frequency_options(c_est, est.common);

    AnalyzeArgs ana;
    auto* c_ana = app.add_subcommand("analyze", "Full pipeline: frames -> peaks -> stitch -> estimate");
    c_ana->add_option("--manifest", ana.manifest, "Frame manifest file")->required();
    c_ana->add_option("--out-dir", ana.out_dir, "Output directory")->capture_default_str();
    c_ana->add_option("--min-prominence", ana.min_prominence,
                      "Peak prominence threshold (default: 0.25 x intensity range)");
    c_ana->add_option("--dispersion-target", ana.dispersion_target,
                      "Acceptable central spacing dispersion")->capture_default_str();
    c_ana->add_option("--mag-err-rel", ana.mag_err_rel, "Relative magnification uncertainty")
        ->capture_default_str();
    add_species_options(c_ana, ana.common);
    add_frequency_options(c_ana, ana.common);

    CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate", "Magnification from stage/image position pairs");
    c_cal->add_option("--pairs", cal.pairs_csv, "CSV of (stage_um, image_px)")->required();
    c_cal->add_option("--pixel-size-um", cal.pixel_size_um, "Sensor pixel size")
        ->capture_default_str();
    c_cal->add_option("-o,--out", cal.out_file, "Output JSON path")->capture_default_str();

    StabilityArgs stab;
    auto* c_stab = app.add_subcommand("stability", "Linear-chain zigzag stability check");
    c_stab->add_option("--n", stab.n_ions, "Number of ions")->required();
    c_stab->add_option("--fx-khz", stab.fx_khz, "Radial omega_x/2pi in kHz");
    c_stab->add_option("--fx-err-khz", stab.fx_err_khz, "1-sigma of --fx-khz");
    c_stab->add_option("--vrf", stab.v_rf, "Rf amplitude in volts (uses the calibration line)");
    c_stab->add_option("--slope-khz", stab.slope_khz, "Calibration slope at 2000 V")
        ->capture_default_str();
    c_stab->add_option("--slope-err-khz", stab.slope_err_khz, "1-sigma of the slope")
        ->capture_default_str();
    add_species_options(c_stab, stab.common);
    add_frequency_options(c_stab, stab.common);

    SynthArgs syn;
    auto* c_syn = app.add_subcommand("synth-frames", "Generate a synthetic translated-frame dataset");
    c_syn->add_option("--n", syn.n_ions, "Number of ions")->capture_default_str();
    c_syn->add_option("--frames", syn.n_frames, "Number of frames")->capture_default_str();
    c_syn->add_option("--step-um", syn.step_um, "Nominal translation step")->capture_default_str();
    c_syn->add_option("--mag", syn.magnification, "Optical magnification")->capture_default_str();
    c_syn->add_option("--pixel-size-um", syn.pixel_size_um, "Sensor pixel size")
        ->capture_default_str();
    c_syn->add_option("--psf-um", syn.psf_um, "Object-space PSF sigma")->capture_default_str();
    c_syn->add_option("--amplitude", syn.amplitude, "Peak amplitude in counts")
        ->capture_default_str();
    c_syn->add_option("--background", syn.background, "Background level in counts")
        ->capture_default_str();
    c_syn->add_option("--noise", syn.noise, "none | poisson")->capture_default_str();
    c_syn->add_option("--seed", syn.seed, "Random seed")->capture_default_str();
    c_syn->add_option("--jitter-um", syn.jitter_um, "Per-translation stage error bound")
        ->capture_default_str();
    c_syn->add_option("--frame-start-um", syn.frame_start_um,
                      "First frame offset (default: center-biased framing)");
    c_syn->add_option("--out-dir", syn.out_dir, "Output directory")->capture_default_str();
    add_species_options(c_syn, syn.common);
    add_frequency_options(c_syn, syn.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (c_sim->parsed()) return run_simulate(sim);
        if (c_est->parsed()) return run_estimate(est);
        if (c_ana->parsed()) return run_analyze(ana);
        if (c_cal->parsed()) return run_calibrate(cal);
        if (c_stab->parsed()) return run_stability(stab);
        if (c_syn->parsed()) return run_synth(syn);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
