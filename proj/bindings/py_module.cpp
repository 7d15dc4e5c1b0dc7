#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ionsense/atom_light.hpp"
#include "ionsense/errors.hpp"
#include "ionsense/estimator.hpp"
#include "ionsense/force_pipeline.hpp"
#include "ionsense/image_sim.hpp"
#include "ionsense/ionf_io.hpp"
#include "ionsense/optics_model.hpp"
#include "ionsense/phys_core.hpp"
#include "ionsense/quantum_limits.hpp"
#include "ionsense/reports.hpp"
#include "ionsense/reproduce.hpp"
#include "ionsense/run_config.hpp"

namespace py = pybind11;
using namespace ionsense;

namespace {

py::array_t<double> frame_to_array(const Frame& f) {
    py::array_t<double> a({f.height, f.width});
    auto r = a.mutable_unchecked<2>();
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) r(y, x) = f.at(x, y);
    return a;
}

Frame array_to_frame(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw InvalidInput("frame array must be 2-dimensional");
    Frame f;
    f.height = static_cast<int>(a.shape(0));
    f.width = static_cast<int>(a.shape(1));
    f.pixels.resize(static_cast<std::size_t>(f.width) * f.height);
    auto r = a.unchecked<2>();
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) f.at(x, y) = r(y, x);
    return f;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "single-ion imaging force sensor: simulation and estimation core";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<IonSpecies>(m, "IonSpecies")
        .def(py::init<>())
        .def_readwrite("mass_amu", &IonSpecies::mass_amu)
        .def("mass_kg", &IonSpecies::mass_kg)
        .def_static("yb174", &IonSpecies::yb174);

    py::class_<TrapConfig>(m, "TrapConfig")
        .def(py::init<>())
        .def_readwrite("secular_freq_hz", &TrapConfig::secular_freq_hz)
        .def_readwrite("axis_ambiguous", &TrapConfig::axis_ambiguous);

    py::class_<SpringConstants>(m, "SpringConstants")
        .def(py::init<>())
        .def_readwrite("k_zn_per_nm", &SpringConstants::k_zn_per_nm)
        .def_readonly("strong_axis", &SpringConstants::strong_axis)
        .def_readonly("weak_axes_bracketed", &SpringConstants::weak_axes_bracketed)
        .def_readonly("weak_bracket_zn_per_nm", &SpringConstants::weak_bracket_zn_per_nm)
        .def("bracket", &SpringConstants::bracket);

    m.def("spring_constants", &spring_constants);
    m.def("spring_constant_zn_per_nm", &spring_constant_zn_per_nm);
    m.def("hooke_force_zn", &hooke_force_zn);
    m.def("hooke_displacement_nm", &hooke_displacement_nm);
    m.def("two_ion_separation_um", &two_ion_separation_um);
    m.def("infer_spring_constant", [](double force_zn, double displacement_nm, const IonSpecies& ion) {
        const InferredSpring s = infer_spring_constant(force_zn, displacement_nm, ion);
        return py::make_tuple(s.k_zn_per_nm, s.frequency_hz);
    });

    py::class_<LaserConfig>(m, "LaserConfig")
        .def(py::init<>())
        .def_readwrite("wavelength_nm", &LaserConfig::wavelength_nm)
        .def_readwrite("detuning_hz", &LaserConfig::detuning_hz)
        .def_readwrite("linewidth_hz", &LaserConfig::linewidth_hz)
        .def_readwrite("saturation", &LaserConfig::saturation);

    py::class_<DetectionChain>(m, "DetectionChain")
        .def(py::init<>())
        .def_readwrite("collection_efficiency", &DetectionChain::collection_efficiency)
        .def_readwrite("camera_qe", &DetectionChain::camera_qe)
        .def_readwrite("optics_transmission", &DetectionChain::optics_transmission)
        .def_readwrite("splitter_fraction", &DetectionChain::splitter_fraction)
        .def("total", &DetectionChain::total);

    m.def("scattering_rate", &scattering_rate);
    m.def("scattering_rate_limit", &scattering_rate_limit);
    m.def("light_pressure_force_zn", &light_pressure_force_zn);
    m.def("light_pressure_force_limit_zn", &light_pressure_force_limit_zn);
    m.def("saturation_for_rate", &saturation_for_rate);
    m.def("saturation_for_force", &saturation_for_force);
    m.def("detected_photon_number", &detected_photon_number);

    py::class_<OpticsConfig>(m, "OpticsConfig")
        .def(py::init<>())
        .def_readwrite("wavelength_nm", &OpticsConfig::wavelength_nm)
        .def_readwrite("numerical_aperture", &OpticsConfig::numerical_aperture)
        .def_readwrite("magnification", &OpticsConfig::magnification)
        .def_readwrite("defocus_offset_nm", &OpticsConfig::defocus_offset_nm);

    py::class_<BeamGeometry>(m, "BeamGeometry")
        .def(py::init<>())
        .def_readonly("waist_w0_nm", &BeamGeometry::waist_w0_nm)
        .def_readonly("fwhm_nm", &BeamGeometry::fwhm_nm)
        .def_readonly("rayleigh_range_nm", &BeamGeometry::rayleigh_range_nm)
        .def("sigma_psf_nm", &BeamGeometry::sigma_psf_nm);

    m.def("beam_geometry", &beam_geometry);
    m.def("spot_width_at", &spot_width_at);
    m.def("width_slope_at", &width_slope_at);
    m.def("magnification_from_two_ions", &magnification_from_two_ions);

    py::class_<CameraConfig>(m, "CameraConfig")
        .def(py::init<>())
        .def_readwrite("pixel_pitch_image_um", &CameraConfig::pixel_pitch_image_um)
        .def_readwrite("roi_width", &CameraConfig::roi_width)
        .def_readwrite("roi_height", &CameraConfig::roi_height)
        .def_readwrite("exposure_s", &CameraConfig::exposure_s)
        .def_readwrite("background_rate", &CameraConfig::background_rate)
        .def("object_pixel_nm", &CameraConfig::object_pixel_nm);

    py::class_<Scene>(m, "Scene")
        .def(py::init<>())
        .def_static("make", &Scene::make)
        .def_readwrite("ion_position_nm", &Scene::ion_position_nm)
        .def_readwrite("expected_photons", &Scene::expected_photons)
        .def_readwrite("optics", &Scene::optics)
        .def_readwrite("geometry", &Scene::geometry);

    m.def("render_frame",
          [](const Scene& scene, const CameraConfig& camera, std::uint64_t seed,
             std::uint64_t frame_index) {
              return frame_to_array(render_frame(scene, camera, seed, frame_index));
          },
          py::arg("scene"), py::arg("camera"), py::arg("seed"), py::arg("frame_index") = 0);
    m.def("expected_image", [](const Scene& scene, const CameraConfig& camera) {
        const ExpectedImage e = expected_image(scene, camera);
        py::array_t<double> a({e.height, e.width});
        auto r = a.mutable_unchecked<2>();
        for (int y = 0; y < e.height; ++y)
            for (int x = 0; x < e.width; ++x)
                r(y, x) = e.values[static_cast<std::size_t>(y) * e.width + x];
        return a;
    });

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("weighted", &FitConfig::weighted)
        .def_readwrite("weight_floor", &FitConfig::weight_floor)
        .def_readwrite("fit_rotation", &FitConfig::fit_rotation)
        .def_readwrite("parameter_tolerance", &FitConfig::parameter_tolerance)
        .def_readwrite("max_iterations", &FitConfig::max_iterations);

    py::class_<GaussFit2D>(m, "GaussFit2D")
        .def_readonly("flux", &GaussFit2D::flux)
        .def_readonly("offset", &GaussFit2D::offset)
        .def_readonly("cx_px", &GaussFit2D::cx_px)
        .def_readonly("cy_px", &GaussFit2D::cy_px)
        .def_readonly("sigma_x_px", &GaussFit2D::sigma_x_px)
        .def_readonly("sigma_y_px", &GaussFit2D::sigma_y_px)
        .def_readonly("theta_rad", &GaussFit2D::theta_rad)
        .def_readonly("cx_nm", &GaussFit2D::cx_nm)
        .def_readonly("cy_nm", &GaussFit2D::cy_nm)
        .def_readonly("sigma_x_nm", &GaussFit2D::sigma_x_nm)
        .def_readonly("sigma_y_nm", &GaussFit2D::sigma_y_nm)
        .def_readonly("cx_error_nm", &GaussFit2D::cx_error_nm)
        .def_readonly("cy_error_nm", &GaussFit2D::cy_error_nm)
        .def_readonly("sigma_x_error_nm", &GaussFit2D::sigma_x_error_nm)
        .def_readonly("sigma_y_error_nm", &GaussFit2D::sigma_y_error_nm)
        .def_readonly("reduced_chi2", &GaussFit2D::reduced_chi2)
        .def_readonly("iterations", &GaussFit2D::iterations)
        .def_readonly("converged", &GaussFit2D::converged)
        .def("width_w_nm", &GaussFit2D::width_w_nm)
        .def("width_w_error_nm", &GaussFit2D::width_w_error_nm);

    m.def("fit_gaussian_2d",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& image,
             double object_pixel_nm, const FitConfig& config) {
              Frame f = array_to_frame(image);
              f.meta.object_pixel_nm = object_pixel_nm;
              return fit_gaussian_2d(f, config);
          },
          py::arg("image"), py::arg("object_pixel_nm") = 0.0, py::arg("config") = FitConfig{});

    py::class_<DriftModel>(m, "DriftModel")
        .def(py::init<>())
        .def_readwrite("linear_nm_per_hour", &DriftModel::linear_nm_per_hour)
        .def_readwrite("random_walk_nm_per_sqrt_hour", &DriftModel::random_walk_nm_per_sqrt_hour)
        .def_readwrite("seed", &DriftModel::seed);

    py::class_<ChopSchedule>(m, "ChopSchedule")
        .def(py::init<>())
        .def_readwrite("integration_time_s", &ChopSchedule::integration_time_s)
        .def_readwrite("n_cycles", &ChopSchedule::n_cycles)
        .def_readwrite("applied_displacement_nm", &ChopSchedule::applied_displacement_nm);

    py::class_<FrameSeries>(m, "FrameSeries")
        .def_readonly("master_seed", &FrameSeries::master_seed)
        .def_readonly("noiseless", &FrameSeries::noiseless)
        .def("__len__", [](const FrameSeries& s) { return s.frames.size(); })
        .def("frame", [](const FrameSeries& s, std::size_t i) {
            if (i >= s.frames.size()) throw py::index_error();
            return frame_to_array(s.frames[i]);
        });

    m.def("simulate_chopped_series", &simulate_chopped_series, py::arg("base"), py::arg("camera"),
          py::arg("drift"), py::arg("schedule"), py::arg("seed"), py::arg("threads") = 1,
          py::arg("noiseless") = false);
    m.def("write_series", &write_series, py::arg("dir"), py::arg("series"),
          py::arg("extra_json") = std::string());
    m.def("read_series", &read_series);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("ion", &RunConfig::ion)
        .def_readwrite("trap", &RunConfig::trap)
        .def_readwrite("laser", &RunConfig::laser)
        .def_readwrite("detection", &RunConfig::detection)
        .def_readwrite("optics", &RunConfig::optics)
        .def_readwrite("camera", &RunConfig::camera)
        .def_readwrite("drift", &RunConfig::drift)
        .def_readwrite("chop", &RunConfig::chop)
        .def("expected_photons", &RunConfig::expected_photons)
        .def("scene", &RunConfig::scene);

    m.def("parse_run_config", &parse_run_config);
    m.def("load_run_config", &load_run_config);
    m.def("run_config_to_json", &run_config_to_json);

    m.def("analyze_series_json",
          [](const FrameSeries& series, const SpringConstants& springs, const FitConfig& fit,
             int threads) {
              AnalysisOptions options;
              options.fit = fit;
              options.threads = threads;
              if (series.base_scene.optics.defocus_offset_nm != 0.0) {
                  DefocusCalibration calib;
                  calib.waist_w0_nm = series.base_scene.geometry.waist_w0_nm;
                  calib.rayleigh_range_nm = series.base_scene.geometry.rayleigh_range_nm;
                  calib.operating_offset_nm = series.base_scene.optics.defocus_offset_nm;
                  options.defocus = calib;
              }
              return analysis_report_to_json(analyze_series(series, springs, options));
          },
          py::arg("series"), py::arg("springs"), py::arg("fit") = FitConfig{},
          py::arg("threads") = 1);

    m.def("reproduction_case_names", &reproduction_case_names);
    m.def("run_reproduction_json", [](const std::string& case_name, const RunConfig& config) {
        return repro_table_to_json(run_reproduction(case_name, config));
    });
    m.def("run_reproduction_table", [](const std::string& case_name, const RunConfig& config) {
        return format_repro_table(run_reproduction(case_name, config));
    });

    py::class_<CentroidLimit>(m, "CentroidLimit")
        .def_readonly("working_nm", &CentroidLimit::working_nm)
        .def_readonly("cramer_rao_nm", &CentroidLimit::cramer_rao_nm)
        .def_readonly("n_photons", &CentroidLimit::n_photons);

    m.def("centroid_limit", &centroid_limit);
    m.def("width_relative_limit", &width_relative_limit);
    m.def("focus_limit", [](const OpticsConfig& optics, double n_photons) {
        const FocusLimitSet f = focus_limit(optics, n_photons);
        return py::make_tuple(f.direct_formula_nm, f.stated_formula_nm, f.slope_chain_nm);
    });
}
