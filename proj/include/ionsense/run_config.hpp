#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>

#include "ionsense/atom_light.hpp"
#include "ionsense/image_sim.hpp"
#include "ionsense/optics_model.hpp"
#include "ionsense/phys_core.hpp"

namespace ionsense {

struct AnalysisConfig {
    bool weighted_fit = false;
    bool fit_rotation = false;
};

/// Published values of the reference apparatus, used by the reproduction
/// cases as comparison targets. They live in the configuration profile, not
/// in code.
struct ReferenceValues {
    std::array<double, 3> spring_k_zn_per_nm{29.22, 7.29, 7.83}; // (x, y, z)
    std::array<double, 3> spring_k_err_zn_per_nm{0.04, 0.02, 0.02};
    std::array<double, 3> sigma_fit_nm{1.1, 1.1, 14.3};
    std::array<double, 3> sigma_drift_fit_nm{1.1, 1.0, 14.3};
    std::array<double, 3> sigma_interp_nm{2.4, 9.9, 12.7};
    std::array<double, 3> position_precision_nm{2.8, 10.0, 24.0};
    double sensitivity_x = 372.0; // zN / sqrt(Hz)
    double sensitivity_x_err = 9.0;
    std::pair<double, double> sensitivity_y{335.0, 359.0};
    double sensitivity_y_err = 14.0;
    std::pair<double, double> sensitivity_z{779.0, 836.0};
    double sensitivity_z_err = 42.0;
    double detected_photons = 2.4e6;
    double integration_time_s = 20.0;
    double two_ion_freq_hz = 643.0e3;
    double two_ion_separation_px = 114.0;
    double two_ion_separation_chip_um = 1824.5;
    double two_ion_separation_um = 4.6;
    double magnification = 395.9;
    double magnification_err = 0.6;
    double beam_w0_nm = 184.0;
    double beam_fwhm_nm = 216.0;
    double beam_rayleigh_nm = 287.0;
    double patch_numerical_aperture = 0.32;
    double attack_rate_nm_per_sqrt_hz = 0.53;
    double limit_sensitivity_x = 15.50;
    std::pair<double, double> limit_sensitivity_weak{3.866, 4.154};
    double limit_ratio_x = 24.0;
    double limit_ratio_weak = 87.0;
    double limit_ratio_z = 21.0;
    double max_light_force_zn = 95.0;
    double drifted_freq_hz = 635.0e3;
    double focus_z_single_shot_nm = 1.16;
    double focus_attack_nm_per_sqrt_hz = 5.2;
    std::pair<double, double> limit_sensitivity_z{38.0, 40.8};
    double width_rel_inverse_one_second = 340.0; // scatter quoted as 1/this
};

/// Complete description of one simulated experiment. Parsed strictly from
/// JSON: unknown keys and malformed values are rejected with the offending
/// field named.
struct RunConfig {
    IonSpecies ion;
    TrapConfig trap;
    LaserConfig laser;
    DetectionChain detection;
    OpticsConfig optics;
    CameraConfig camera;
    DriftModel drift;
    ChopSchedule chop;
    AnalysisConfig analysis;
    ReferenceValues reference;

    /// Detected photons per exposure implied by laser, chain and exposure.
    double expected_photons() const;

    /// Scene for the drift-free, force-free apparatus.
    Scene scene() const;

    void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

} // namespace ionsense
