#include "ionsense/run_config.hpp"

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "ionsense/errors.hpp"

namespace ionsense {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
    throw InvalidInput("config error at " + path + ": " + why);
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& known) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) fail(path + "/" + key, "unknown field");
    }
}

double get_number_or(const json& j, const std::string& path, const std::string& key, double dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number()) fail(path + "/" + key, "expected a number");
    return v.get<double>();
}

int get_int_or(const json& j, const std::string& path, const std::string& key, int dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
    return v.get<int>();
}

bool get_bool_or(const json& j, const std::string& path, const std::string& key, bool dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_boolean()) fail(path + "/" + key, "expected a boolean");
    return v.get<bool>();
}

std::array<double, 3> get_vec3(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) fail(path + "/" + key, "missing required 3-vector");
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 3) fail(path + "/" + key, "expected an array of 3 numbers");
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
        if (!v[i].is_number()) fail(path + "/" + key, "expected an array of 3 numbers");
        out[i] = v[i].get<double>();
    }
    return out;
}

std::array<double, 3> get_vec3_or(const json& j, const std::string& path, const std::string& key,
                                  const std::array<double, 3>& dflt) {
    if (!j.contains(key)) return dflt;
    return get_vec3(j, path, key);
}

std::pair<double, double> get_pair(const json& j, const std::string& path, const std::string& key,
                                   std::pair<double, double> dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        fail(path + "/" + key, "expected an array of 2 numbers");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

void parse_ion(const json& j, IonSpecies& ion) {
    require_object(j, "/ion");
    reject_unknown(j, "/ion", {"mass_amu"});
    ion.mass_amu = get_number_or(j, "/ion", "mass_amu", ion.mass_amu);
    if (!(ion.mass_amu > 0.0)) fail("/ion/mass_amu", "must be > 0");
}

void parse_trap(const json& j, TrapConfig& trap) {
    require_object(j, "/trap");
    reject_unknown(j, "/trap", {"secular_freq_hz", "axis_ambiguous"});
    trap.secular_freq_hz = get_vec3_or(j, "/trap", "secular_freq_hz", trap.secular_freq_hz);
    trap.axis_ambiguous = get_bool_or(j, "/trap", "axis_ambiguous", trap.axis_ambiguous);
    for (int i = 0; i < 3; ++i) {
        if (!(trap.secular_freq_hz[i] > 0.0)) fail("/trap/secular_freq_hz", "frequencies must be > 0");
    }
}

void parse_laser(const json& j, LaserConfig& laser) {
    require_object(j, "/laser");
    reject_unknown(j, "/laser", {"wavelength_nm", "detuning_hz", "linewidth_hz", "saturation"});
    laser.wavelength_nm = get_number_or(j, "/laser", "wavelength_nm", laser.wavelength_nm);
    laser.detuning_hz = get_number_or(j, "/laser", "detuning_hz", laser.detuning_hz);
    laser.linewidth_hz = get_number_or(j, "/laser", "linewidth_hz", laser.linewidth_hz);
    laser.saturation = get_number_or(j, "/laser", "saturation", laser.saturation);
    if (!(laser.wavelength_nm > 0.0)) fail("/laser/wavelength_nm", "must be > 0");
    if (!(laser.linewidth_hz > 0.0)) fail("/laser/linewidth_hz", "must be > 0");
    if (!(laser.saturation >= 0.0)) fail("/laser/saturation", "must be >= 0");
}

void parse_detection(const json& j, DetectionChain& chain) {
    require_object(j, "/detection");
    reject_unknown(j, "/detection",
                   {"collection_efficiency", "camera_qe", "optics_transmission", "splitter_fraction"});
    chain.collection_efficiency =
        get_number_or(j, "/detection", "collection_efficiency", chain.collection_efficiency);
    chain.camera_qe = get_number_or(j, "/detection", "camera_qe", chain.camera_qe);
    chain.optics_transmission =
        get_number_or(j, "/detection", "optics_transmission", chain.optics_transmission);
    chain.splitter_fraction = get_number_or(j, "/detection", "splitter_fraction", chain.splitter_fraction);
    try {
        chain.validate();
    } catch (const Error& e) {
        fail("/detection", e.what());
    }
}

void parse_optics(const json& j, OpticsConfig& optics) {
    require_object(j, "/optics");
    reject_unknown(j, "/optics",
                   {"wavelength_nm", "numerical_aperture", "magnification", "defocus_offset_nm"});
    optics.wavelength_nm = get_number_or(j, "/optics", "wavelength_nm", optics.wavelength_nm);
    optics.numerical_aperture =
        get_number_or(j, "/optics", "numerical_aperture", optics.numerical_aperture);
    optics.magnification = get_number_or(j, "/optics", "magnification", optics.magnification);
    optics.defocus_offset_nm = get_number_or(j, "/optics", "defocus_offset_nm", optics.defocus_offset_nm);
    try {
        optics.validate();
    } catch (const Error& e) {
        fail("/optics", e.what());
    }
}

void parse_camera(const json& j, CameraConfig& camera) {
    require_object(j, "/camera");
    reject_unknown(j, "/camera",
                   {"pixel_pitch_image_um", "roi_width", "roi_height", "exposure_s",
                    "background_rate", "em_gain_model"});
    camera.pixel_pitch_image_um =
        get_number_or(j, "/camera", "pixel_pitch_image_um", camera.pixel_pitch_image_um);
    camera.roi_width = get_int_or(j, "/camera", "roi_width", camera.roi_width);
    camera.roi_height = get_int_or(j, "/camera", "roi_height", camera.roi_height);
    camera.exposure_s = get_number_or(j, "/camera", "exposure_s", camera.exposure_s);
    camera.background_rate = get_number_or(j, "/camera", "background_rate", camera.background_rate);
    if (j.contains("em_gain_model")) {
        const json& v = j.at("em_gain_model");
        if (!v.is_string()) fail("/camera/em_gain_model", "expected a string");
        const std::string name = v.get<std::string>();
        if (name == "none") {
            camera.em_gain_model = EmGainModel::none;
        } else if (name == "multiplicative_excess") {
            camera.em_gain_model = EmGainModel::multiplicative_excess;
        } else {
            fail("/camera/em_gain_model", "must be \"none\" or \"multiplicative_excess\"");
        }
    }
    try {
        camera.validate();
    } catch (const Error& e) {
        fail("/camera", e.what());
    }
}

void parse_drift(const json& j, DriftModel& drift) {
    require_object(j, "/drift");
    reject_unknown(j, "/drift", {"linear_nm_per_hour", "random_walk_nm_per_sqrt_hour"});
    drift.linear_nm_per_hour =
        get_vec3_or(j, "/drift", "linear_nm_per_hour", drift.linear_nm_per_hour);
    drift.random_walk_nm_per_sqrt_hour =
        get_vec3_or(j, "/drift", "random_walk_nm_per_sqrt_hour", drift.random_walk_nm_per_sqrt_hour);
    for (double r : drift.random_walk_nm_per_sqrt_hour) {
        if (!(r >= 0.0)) fail("/drift/random_walk_nm_per_sqrt_hour", "must be >= 0");
    }
}

void parse_chop(const json& j, ChopSchedule& chop) {
    require_object(j, "/chop");
    reject_unknown(j, "/chop", {"integration_time_s", "n_cycles", "applied_displacement_nm"});
    chop.integration_time_s = get_number_or(j, "/chop", "integration_time_s", chop.integration_time_s);
    chop.n_cycles = get_int_or(j, "/chop", "n_cycles", chop.n_cycles);
    chop.applied_displacement_nm =
        get_vec3_or(j, "/chop", "applied_displacement_nm", chop.applied_displacement_nm);
    try {
        chop.validate();
    } catch (const Error& e) {
        fail("/chop", e.what());
    }
}

void parse_analysis(const json& j, AnalysisConfig& analysis) {
    require_object(j, "/analysis");
    reject_unknown(j, "/analysis", {"weighted_fit", "fit_rotation"});
    analysis.weighted_fit = get_bool_or(j, "/analysis", "weighted_fit", analysis.weighted_fit);
    analysis.fit_rotation = get_bool_or(j, "/analysis", "fit_rotation", analysis.fit_rotation);
}

void parse_reference(const json& j, ReferenceValues& r) {
    require_object(j, "/reference");
    reject_unknown(j, "/reference",
                   {"spring_k_zn_per_nm", "spring_k_err_zn_per_nm", "sigma_fit_nm",
                    "sigma_drift_fit_nm", "sigma_interp_nm", "position_precision_nm",
                    "sensitivity_x", "sensitivity_x_err", "sensitivity_y", "sensitivity_y_err",
                    "sensitivity_z", "sensitivity_z_err", "detected_photons", "integration_time_s",
                    "two_ion_freq_hz", "two_ion_separation_px", "two_ion_separation_chip_um",
                    "two_ion_separation_um", "magnification", "magnification_err", "beam_w0_nm",
                    "beam_fwhm_nm", "beam_rayleigh_nm", "patch_numerical_aperture",
                    "attack_rate_nm_per_sqrt_hz", "limit_sensitivity_x", "limit_sensitivity_weak",
                    "limit_ratio_x", "limit_ratio_weak", "limit_ratio_z", "max_light_force_zn",
                    "drifted_freq_hz",
                    "focus_z_single_shot_nm", "focus_attack_nm_per_sqrt_hz", "limit_sensitivity_z",
                    "width_rel_inverse_one_second"});
    const std::string p = "/reference";
    r.spring_k_zn_per_nm = get_vec3_or(j, p, "spring_k_zn_per_nm", r.spring_k_zn_per_nm);
    r.spring_k_err_zn_per_nm = get_vec3_or(j, p, "spring_k_err_zn_per_nm", r.spring_k_err_zn_per_nm);
    r.sigma_fit_nm = get_vec3_or(j, p, "sigma_fit_nm", r.sigma_fit_nm);
    r.sigma_drift_fit_nm = get_vec3_or(j, p, "sigma_drift_fit_nm", r.sigma_drift_fit_nm);
    r.sigma_interp_nm = get_vec3_or(j, p, "sigma_interp_nm", r.sigma_interp_nm);
    r.position_precision_nm = get_vec3_or(j, p, "position_precision_nm", r.position_precision_nm);
    r.sensitivity_x = get_number_or(j, p, "sensitivity_x", r.sensitivity_x);
    r.sensitivity_x_err = get_number_or(j, p, "sensitivity_x_err", r.sensitivity_x_err);
    r.sensitivity_y = get_pair(j, p, "sensitivity_y", r.sensitivity_y);
    r.sensitivity_y_err = get_number_or(j, p, "sensitivity_y_err", r.sensitivity_y_err);
    r.sensitivity_z = get_pair(j, p, "sensitivity_z", r.sensitivity_z);
    r.sensitivity_z_err = get_number_or(j, p, "sensitivity_z_err", r.sensitivity_z_err);
    r.detected_photons = get_number_or(j, p, "detected_photons", r.detected_photons);
    r.integration_time_s = get_number_or(j, p, "integration_time_s", r.integration_time_s);
    r.two_ion_freq_hz = get_number_or(j, p, "two_ion_freq_hz", r.two_ion_freq_hz);
    r.two_ion_separation_px = get_number_or(j, p, "two_ion_separation_px", r.two_ion_separation_px);
    r.two_ion_separation_chip_um =
        get_number_or(j, p, "two_ion_separation_chip_um", r.two_ion_separation_chip_um);
    r.two_ion_separation_um = get_number_or(j, p, "two_ion_separation_um", r.two_ion_separation_um);
    r.magnification = get_number_or(j, p, "magnification", r.magnification);
    r.magnification_err = get_number_or(j, p, "magnification_err", r.magnification_err);
    r.beam_w0_nm = get_number_or(j, p, "beam_w0_nm", r.beam_w0_nm);
    r.beam_fwhm_nm = get_number_or(j, p, "beam_fwhm_nm", r.beam_fwhm_nm);
    r.beam_rayleigh_nm = get_number_or(j, p, "beam_rayleigh_nm", r.beam_rayleigh_nm);
    r.patch_numerical_aperture =
        get_number_or(j, p, "patch_numerical_aperture", r.patch_numerical_aperture);
    r.attack_rate_nm_per_sqrt_hz =
        get_number_or(j, p, "attack_rate_nm_per_sqrt_hz", r.attack_rate_nm_per_sqrt_hz);
    r.limit_sensitivity_x = get_number_or(j, p, "limit_sensitivity_x", r.limit_sensitivity_x);
    r.limit_sensitivity_weak = get_pair(j, p, "limit_sensitivity_weak", r.limit_sensitivity_weak);
    r.limit_ratio_x = get_number_or(j, p, "limit_ratio_x", r.limit_ratio_x);
    r.limit_ratio_weak = get_number_or(j, p, "limit_ratio_weak", r.limit_ratio_weak);
    r.limit_ratio_z = get_number_or(j, p, "limit_ratio_z", r.limit_ratio_z);
    r.max_light_force_zn = get_number_or(j, p, "max_light_force_zn", r.max_light_force_zn);
    r.drifted_freq_hz = get_number_or(j, p, "drifted_freq_hz", r.drifted_freq_hz);
    r.focus_z_single_shot_nm = get_number_or(j, p, "focus_z_single_shot_nm", r.focus_z_single_shot_nm);
    r.focus_attack_nm_per_sqrt_hz =
        get_number_or(j, p, "focus_attack_nm_per_sqrt_hz", r.focus_attack_nm_per_sqrt_hz);
    r.limit_sensitivity_z = get_pair(j, p, "limit_sensitivity_z", r.limit_sensitivity_z);
    r.width_rel_inverse_one_second =
        get_number_or(j, p, "width_rel_inverse_one_second", r.width_rel_inverse_one_second);
}

} // namespace

double RunConfig::expected_photons() const {
    return detected_photon_number(scattering_rate(laser), detection, camera.exposure_s);
}

Scene RunConfig::scene() const {
    Scene s = Scene::make(optics, expected_photons());
    return s;
}

void RunConfig::validate() const {
    trap.validate();
    laser.validate();
    detection.validate();
    optics.validate();
    camera.validate();
    chop.validate();
    if (!(ion.mass_amu > 0.0)) throw InvalidInput("ion mass must be > 0 u");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
    }
    require_object(j, "/");
    reject_unknown(j, "", {"ion", "trap", "laser", "detection", "optics", "camera", "drift", "chop",
                           "analysis", "reference"});

    RunConfig cfg;
    if (j.contains("ion")) parse_ion(j.at("ion"), cfg.ion);
    if (j.contains("trap")) parse_trap(j.at("trap"), cfg.trap);
    if (j.contains("laser")) parse_laser(j.at("laser"), cfg.laser);
    if (j.contains("detection")) parse_detection(j.at("detection"), cfg.detection);
    if (j.contains("optics")) parse_optics(j.at("optics"), cfg.optics);
    if (j.contains("camera")) parse_camera(j.at("camera"), cfg.camera);
    if (j.contains("drift")) parse_drift(j.at("drift"), cfg.drift);
    if (j.contains("chop")) parse_chop(j.at("chop"), cfg.chop);
    if (j.contains("analysis")) parse_analysis(j.at("analysis"), cfg.analysis);
    if (j.contains("reference")) parse_reference(j.at("reference"), cfg.reference);
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    try {
        return parse_run_config(text);
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["ion"] = {{"mass_amu", c.ion.mass_amu}};
    j["trap"] = {{"secular_freq_hz", c.trap.secular_freq_hz}, {"axis_ambiguous", c.trap.axis_ambiguous}};
    j["laser"] = {{"wavelength_nm", c.laser.wavelength_nm},
                  {"detuning_hz", c.laser.detuning_hz},
                  {"linewidth_hz", c.laser.linewidth_hz},
                  {"saturation", c.laser.saturation}};
    j["detection"] = {{"collection_efficiency", c.detection.collection_efficiency},
                      {"camera_qe", c.detection.camera_qe},
                      {"optics_transmission", c.detection.optics_transmission},
                      {"splitter_fraction", c.detection.splitter_fraction}};
    j["optics"] = {{"wavelength_nm", c.optics.wavelength_nm},
                   {"numerical_aperture", c.optics.numerical_aperture},
                   {"magnification", c.optics.magnification},
                   {"defocus_offset_nm", c.optics.defocus_offset_nm}};
    j["camera"] = {{"pixel_pitch_image_um", c.camera.pixel_pitch_image_um},
                   {"roi_width", c.camera.roi_width},
                   {"roi_height", c.camera.roi_height},
                   {"exposure_s", c.camera.exposure_s},
                   {"background_rate", c.camera.background_rate},
                   {"em_gain_model",
                    c.camera.em_gain_model == EmGainModel::none ? "none" : "multiplicative_excess"}};
    j["drift"] = {{"linear_nm_per_hour", c.drift.linear_nm_per_hour},
                  {"random_walk_nm_per_sqrt_hour", c.drift.random_walk_nm_per_sqrt_hour}};
    j["chop"] = {{"integration_time_s", c.chop.integration_time_s},
                 {"n_cycles", c.chop.n_cycles},
                 {"applied_displacement_nm", c.chop.applied_displacement_nm}};
    j["analysis"] = {{"weighted_fit", c.analysis.weighted_fit},
                     {"fit_rotation", c.analysis.fit_rotation}};
    const ReferenceValues& r = c.reference;
    j["reference"] = {{"spring_k_zn_per_nm", r.spring_k_zn_per_nm},
                      {"spring_k_err_zn_per_nm", r.spring_k_err_zn_per_nm},
                      {"sigma_fit_nm", r.sigma_fit_nm},
                      {"sigma_drift_fit_nm", r.sigma_drift_fit_nm},
                      {"sigma_interp_nm", r.sigma_interp_nm},
                      {"position_precision_nm", r.position_precision_nm},
                      {"sensitivity_x", r.sensitivity_x},
                      {"sensitivity_x_err", r.sensitivity_x_err},
                      {"sensitivity_y", {r.sensitivity_y.first, r.sensitivity_y.second}},
                      {"sensitivity_y_err", r.sensitivity_y_err},
                      {"sensitivity_z", {r.sensitivity_z.first, r.sensitivity_z.second}},
                      {"sensitivity_z_err", r.sensitivity_z_err},
                      {"detected_photons", r.detected_photons},
                      {"integration_time_s", r.integration_time_s},
                      {"two_ion_freq_hz", r.two_ion_freq_hz},
                      {"two_ion_separation_px", r.two_ion_separation_px},
                      {"two_ion_separation_chip_um", r.two_ion_separation_chip_um},
                      {"two_ion_separation_um", r.two_ion_separation_um},
                      {"magnification", r.magnification},
                      {"magnification_err", r.magnification_err},
                      {"beam_w0_nm", r.beam_w0_nm},
                      {"beam_fwhm_nm", r.beam_fwhm_nm},
                      {"beam_rayleigh_nm", r.beam_rayleigh_nm},
                      {"patch_numerical_aperture", r.patch_numerical_aperture},
                      {"attack_rate_nm_per_sqrt_hz", r.attack_rate_nm_per_sqrt_hz},
                      {"limit_sensitivity_x", r.limit_sensitivity_x},
                      {"limit_sensitivity_weak",
                       {r.limit_sensitivity_weak.first, r.limit_sensitivity_weak.second}},
                      {"limit_ratio_x", r.limit_ratio_x},
                      {"limit_ratio_weak", r.limit_ratio_weak},
                      {"limit_ratio_z", r.limit_ratio_z},
                      {"max_light_force_zn", r.max_light_force_zn},
                      {"drifted_freq_hz", r.drifted_freq_hz},
                      {"focus_z_single_shot_nm", r.focus_z_single_shot_nm},
                      {"focus_attack_nm_per_sqrt_hz", r.focus_attack_nm_per_sqrt_hz},
                      {"limit_sensitivity_z",
                       {r.limit_sensitivity_z.first, r.limit_sensitivity_z.second}},
                      {"width_rel_inverse_one_second", r.width_rel_inverse_one_second}};
    return j.dump(2);
}

} // namespace ionsense
