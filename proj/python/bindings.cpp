#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ionchain/dubin.hpp"
#include "ionchain/equilibrium.hpp"
#include "ionchain/errors.hpp"
#include "ionchain/estimation.hpp"
#include "ionchain/profile.hpp"
#include "ionchain/species_registry.hpp"
#include "ionchain/units.hpp"
#include "ionchain/version.hpp"

namespace py = pybind11;
using namespace ionchain;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Ion-chain number diagnostic: chain laws, equilibrium solver, "
              "fluorescence-profile pipeline, and uncertainty-budgeted estimates";
    m.attr("__version__") = kVersion;

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalErrorBase", PyExc_RuntimeError);

    // units_core ------------------------------------------------------------
    py::class_<IonSpecies>(m, "IonSpecies")
        .def(py::init(&make_species), py::arg("name"), py::arg("mass_amu"), py::arg("charge_e"))
        .def_readonly("name", &IonSpecies::name)
        .def_readonly("mass_amu", &IonSpecies::mass_amu)
        .def_readonly("charge_e", &IonSpecies::charge_e)
        .def_property_readonly("mass_kg", &IonSpecies::mass_kg)
        .def("__repr__", [](const IonSpecies& s) {
            return "IonSpecies(" + s.name + ", " + std::to_string(s.mass_amu) + " amu, " +
                   std::to_string(s.charge_e) + "e)";
        });

    py::class_<Frequency>(m, "Frequency")
        .def_static("from_khz", &Frequency::from_khz, py::arg("khz"), py::arg("sigma_khz") = 0.0)
        .def_static("from_hz", &Frequency::from_hz, py::arg("hz"), py::arg("sigma_hz") = 0.0)
        .def_static("from_angular", &Frequency::from_angular, py::arg("rad_per_s"),
                    py::arg("sigma") = 0.0)
        .def_readonly("rad_per_s", &Frequency::rad_per_s)
        .def_readonly("sigma_rad_per_s", &Frequency::sigma_rad_per_s)
        .def_property_readonly("khz", &Frequency::khz)
        .def_property_readonly("sigma_khz", &Frequency::sigma_khz);

    py::class_<Length>(m, "Length")
        .def_static("from_um", &Length::from_um, py::arg("um"), py::arg("sigma_um") = 0.0)
        .def_static("from_m", &Length::from_m, py::arg("meters"), py::arg("sigma") = 0.0)
        .def_readonly("meters", &Length::meters)
        .def_readonly("sigma_m", &Length::sigma_m)
        .def_property_readonly("um", &Length::um)
        .def_property_readonly("sigma_um", &Length::sigma_um);

    py::class_<SpeciesRegistry>(m, "SpeciesRegistry")
        .def(py::init<>())
        .def("load_file", &SpeciesRegistry::load_file)
        .def("get", &SpeciesRegistry::get, py::return_value_policy::copy)
        .def("contains", &SpeciesRegistry::contains)
        .def("names", &SpeciesRegistry::names);

    m.def("length_scale", &length_scale, py::arg("species"), py::arg("omega_z"));
    m.def("axial_frequency_from_scale", &axial_frequency_from_scale, py::arg("species"),
          py::arg("l"));

    // dubin_model -----------------------------------------------------------
    py::class_<DensityModelParams>(m, "DensityModelParams")
        .def(py::init([](long n, const Length& half_len, double center_m) {
                 return DensityModelParams{n, half_len, center_m};
             }),
             py::arg("n_ions"), py::arg("half_length"), py::arg("center_m") = 0.0)
        .def_readonly("n_ions", &DensityModelParams::n_ions)
        .def_readonly("half_length", &DensityModelParams::half_length)
        .def_readonly("center_m", &DensityModelParams::center_m);

    py::class_<SpacingSample>(m, "SpacingSample")
        .def(py::init([](double pos, double spacing) { return SpacingSample{pos, spacing}; }),
             py::arg("position_m"), py::arg("spacing_m"))
        .def_readonly("position_m", &SpacingSample::position_m)
        .def_readonly("spacing_m", &SpacingSample::spacing_m);

    py::class_<NEstimate>(m, "NEstimate")
        .def_readonly("n_real", &NEstimate::n_real)
        .def_readonly("n_int", &NEstimate::n_int);

    m.def("local_spacing", &local_spacing, py::arg("z_m"), py::arg("params"));
    m.def("half_length", &half_length, py::arg("n_ions"), py::arg("l"));
    m.def("min_spacing_dubin", &min_spacing_dubin, py::arg("n_ions"), py::arg("l"));
    m.def("min_spacing_james", &min_spacing_james, py::arg("n_ions"), py::arg("l"));
    m.def("estimate_n_dubin", &estimate_n_dubin, py::arg("a0"), py::arg("l"));
    m.def("estimate_n_james", &estimate_n_james, py::arg("a0"), py::arg("l"));
    m.def("axial_freq_from_length", &axial_freq_from_length, py::arg("half_length_measured"),
          py::arg("n_ions"), py::arg("species"));
    m.def("homogeneity_dispersion", &homogeneity_dispersion, py::arg("n_central"),
          py::arg("n_ions"));
    m.def("central_count_for_dispersion", &central_count_for_dispersion, py::arg("n_ions"),
          py::arg("max_dispersion"));

    // equilibrium_oracle ------------------------------------------------------
    py::class_<ChainConfiguration>(m, "ChainConfiguration")
        .def_readonly("positions", &ChainConfiguration::positions)
        .def_readonly("converged_grad_norm", &ChainConfiguration::converged_grad_norm)
        .def_property_readonly("n_ions", &ChainConfiguration::n_ions);

    py::class_<StabilityResult>(m, "StabilityResult")
        .def_readonly("critical_ratio", &StabilityResult::critical_ratio)
        .def_readonly("n_ions", &StabilityResult::n_ions);

    m.def("chain_energy",
          [](const std::vector<double>& u) { return chain_energy(u); }, py::arg("positions"));
    m.def("chain_gradient",
          [](const std::vector<double>& u) {
              const auto g = chain_gradient(u);
              return std::vector<double>(g.data(), g.data() + g.size());
          },
          py::arg("positions"));
    m.def("solve_equilibrium",
          [](long n_ions) { return solve_equilibrium(n_ions); }, py::arg("n_ions"));
    m.def("min_spacing_numeric", &min_spacing_numeric, py::arg("config"));
    m.def("spacings_with_midpoints", &spacings_with_midpoints, py::arg("config"),
          py::arg("scale") = 1.0);
    m.def("zigzag_critical_ratio", &zigzag_critical_ratio, py::arg("n_ions"));

    // profile_pipeline --------------------------------------------------------
    py::enum_<NoiseModel>(m, "NoiseModel")
        .value("none", NoiseModel::none)
        .value("poisson", NoiseModel::poisson);

    py::class_<FluorescenceProfile>(m, "FluorescenceProfile")
        .def(py::init([](std::vector<double> intensities, double pixel_size_m,
                         double frame_offset_m) {
                 FluorescenceProfile p{std::move(intensities), pixel_size_m, frame_offset_m};
                 validate_profile(p);
                 return p;
             }),
             py::arg("intensities"), py::arg("pixel_size_m") = 13e-6,
             py::arg("frame_offset_m") = 0.0)
        .def_readonly("intensities", &FluorescenceProfile::intensities)
        .def_readonly("pixel_size_m", &FluorescenceProfile::pixel_size_m)
        .def_readonly("frame_offset_m", &FluorescenceProfile::frame_offset_m);

    py::class_<Peak>(m, "Peak")
        .def_readonly("center_px", &Peak::center_px)
        .def_readonly("center_sigma_px", &Peak::center_sigma_px)
        .def_readonly("width_px", &Peak::width_px)
        .def_readonly("amplitude", &Peak::amplitude);

    py::class_<PeakSet>(m, "PeakSet")
        .def_readonly("peaks", &PeakSet::peaks)
        .def_readonly("baseline", &PeakSet::baseline)
        .def_readonly("residual_norm", &PeakSet::residual_norm)
        .def("__len__", &PeakSet::size);

    py::class_<SyntheticFrame>(m, "SyntheticFrame")
        .def_readonly("profile", &SyntheticFrame::profile)
        .def_readonly("clipped_ions", &SyntheticFrame::clipped_ions);

    py::class_<FramePeaks>(m, "FramePeaks")
        .def(py::init([](FluorescenceProfile profile, PeakSet peaks) {
                 return FramePeaks{std::move(profile), std::move(peaks)};
             }),
             py::arg("profile"), py::arg("peaks"))
        .def_readonly("profile", &FramePeaks::profile)
        .def_readonly("peaks", &FramePeaks::peaks);

    py::class_<StitchResult>(m, "StitchResult")
        .def_readonly("global_positions_m", &StitchResult::global_positions_m)
        .def_readonly("fitted_offsets_m", &StitchResult::fitted_offsets_m)
        .def_readonly("redundancy_counts", &StitchResult::redundancy_counts)
        .def_readonly("total_count", &StitchResult::total_count)
        .def_readonly("offset_warning_frames", &StitchResult::offset_warning_frames);

    py::class_<MagnificationFit>(m, "MagnificationFit")
        .def_readonly("magnification", &MagnificationFit::magnification)
        .def_readonly("sigma", &MagnificationFit::sigma)
        .def_readonly("intercept_px", &MagnificationFit::intercept_px)
        .def_readonly("residuals_px", &MagnificationFit::residuals_px);

    py::class_<DensityFit>(m, "DensityFit")
        .def_readonly("params", &DensityFit::params)
        .def_readonly("rss", &DensityFit::rss)
        .def_readonly("residuals", &DensityFit::residuals);

    m.def("generate_synthetic_frame",
          [](const std::vector<double>& positions_m, double magnification, double pixel_size_m,
             double psf_sigma_m, double amplitude, std::uint64_t seed, NoiseModel noise,
             double frame_offset_m, double background, int n_pixels) {
              return generate_synthetic_frame(positions_m, magnification, pixel_size_m,
                                              psf_sigma_m, amplitude, seed, noise, frame_offset_m,
                                              background, n_pixels);
          },
          py::arg("ion_positions_m"), py::arg("magnification"), py::arg("pixel_size_m"),
          py::arg("psf_sigma_m"), py::arg("amplitude"), py::arg("noise_seed") = 0,
          py::arg("noise_model") = NoiseModel::none, py::arg("frame_offset_m") = 0.0,
          py::arg("background") = 0.0, py::arg("n_pixels") = kSensorWidthPx);
    m.def("detect_peaks", &detect_peaks, py::arg("profile"), py::arg("min_prominence"));
    m.def("fit_multigaussian", &fit_multigaussian, py::arg("profile"), py::arg("init"));
    m.def("stitch_frames",
          [](const std::vector<FramePeaks>& frames, double magnification) {
              return stitch_frames(frames, magnification);
          },
          py::arg("frames"), py::arg("magnification"));
    m.def("calibrate_magnification",
          [](const std::vector<double>& stage_m, const std::vector<double>& image_px,
             double pixel_size_m) {
              return calibrate_magnification(stage_m, image_px, pixel_size_m);
          },
          py::arg("stage_positions_m"), py::arg("image_positions_px"), py::arg("pixel_size_m"));
    m.def("fit_density_profile",
          [](const std::vector<SpacingSample>& samples, long n_ions) {
              return fit_density_profile(samples, n_ions);
          },
          py::arg("samples"), py::arg("n_ions"));

    // estimation ----------------------------------------------------------------
    py::class_<TrapModel>(m, "TrapModel")
        .def(py::init([](std::optional<Frequency> omega_z, std::optional<Frequency> omega_x,
                         double v_rf, double v_dc, double slope_khz, double slope_sigma_khz) {
                 return TrapModel{omega_z, omega_x, v_rf, v_dc, slope_khz, slope_sigma_khz};
             }),
             py::arg("omega_z") = std::nullopt, py::arg("omega_x") = std::nullopt,
             py::arg("v_rf") = 0.0, py::arg("v_dc") = 2000.0,
             py::arg("rf_slope_khz_per_2000v") = 157.0, py::arg("rf_slope_sigma_khz") = 1.0)
        .def_readonly("omega_z", &TrapModel::omega_z)
        .def_readonly("omega_x", &TrapModel::omega_x)
        .def_readonly("v_rf", &TrapModel::v_rf)
        .def_readonly("v_dc", &TrapModel::v_dc);

    py::class_<CentralSpacing>(m, "CentralSpacing")
        .def_readonly("mean", &CentralSpacing::mean)
        .def_readonly("stderr", &CentralSpacing::stderr);

    py::enum_<UncertaintySource>(m, "UncertaintySource")
        .value("axial_frequency", UncertaintySource::axial_frequency)
        .value("spacing_statistics", UncertaintySource::spacing_statistics)
        .value("magnification", UncertaintySource::magnification);

    py::class_<LawEstimate>(m, "LawEstimate")
        .def_readonly("n_real", &LawEstimate::n_real)
        .def_readonly("n_int", &LawEstimate::n_int)
        .def_readonly("n_sigma", &LawEstimate::n_sigma);

    py::class_<EstimateReport>(m, "EstimateReport")
        .def_readonly("a0_mean", &EstimateReport::a0_mean)
        .def_readonly("a0_stderr", &EstimateReport::a0_stderr)
        .def_readonly("n_central_used", &EstimateReport::n_central_used)
        .def_readonly("dubin", &EstimateReport::dubin)
        .def_readonly("james", &EstimateReport::james)
        .def_readonly("rel_sigma_axial", &EstimateReport::rel_sigma_axial)
        .def_readonly("rel_sigma_spacing", &EstimateReport::rel_sigma_spacing)
        .def_readonly("rel_sigma_magnification", &EstimateReport::rel_sigma_magnification)
        .def_readonly("rel_sigma_total", &EstimateReport::rel_sigma_total)
        .def_readonly("dominant", &EstimateReport::dominant)
        .def("to_json", &EstimateReport::to_json);

    m.def("average_central_spacing",
          [](const std::vector<SpacingSample>& samples, long n_central) {
              return average_central_spacing(samples, n_central);
          },
          py::arg("samples"), py::arg("n_central"));
    m.def("choose_n_central",
          [](const std::vector<SpacingSample>& samples, double target, long n_guess) {
              return choose_n_central(samples, target, n_guess);
          },
          py::arg("samples"), py::arg("dispersion_target"), py::arg("n_ions_guess"));
    m.def("estimate_report", &estimate_report, py::arg("a0_mean"), py::arg("species"),
          py::arg("omega_z"), py::arg("magnification_rel_sigma") = 0.0,
          py::arg("n_central_used") = 0);

    py::class_<RfFrequencyResult>(m, "RfFrequencyResult")
        .def_readonly("omega_x", &RfFrequencyResult::omega_x)
        .def_readonly("degenerate", &RfFrequencyResult::degenerate);

    m.def("radial_frequency", &radial_frequency, py::arg("trap"));
    m.def("omega_x_from_vrf", &omega_x_from_vrf, py::arg("v_rf"), py::arg("trap"));
}
