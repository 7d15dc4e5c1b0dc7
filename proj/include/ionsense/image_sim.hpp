#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ionsense/optics_model.hpp"

namespace ionsense {

enum class EmGainModel {
    none,                 // pure shot noise, variance = mean
    multiplicative_excess // EM register excess noise, variance = 2 * mean
};

/// Detector geometry and noise model. ROI pixels are square with pitch
/// `pixel_pitch_image_um` on the chip; divide by the magnification for the
/// object-space pixel scale.
struct CameraConfig {
    double pixel_pitch_image_um = 16.0;
    int roi_width = 32;
    int roi_height = 32;
    double exposure_s = 20.0;
    double background_rate = 0.0; // photons / pixel / s, flat
    EmGainModel em_gain_model = EmGainModel::none;

    double object_pixel_nm(double magnification) const;
    void validate() const;
};

enum class ChopState { force_off, force_on };

struct FrameMetadata {
    double timestamp_s = 0;       // frame-center time within the series
    double exposure_s = 0;
    double object_pixel_nm = 0;   // object-space pixel scale used to render
    ChopState chop = ChopState::force_off;
    std::uint64_t master_seed = 0;
    std::uint64_t frame_index = 0;
    bool truncation_warning = false; // PSF support clipped by the ROI
    bool saturated = false;          // a pixel hit the storage ceiling
    std::string provenance;          // free-form generator note
};

/// One exposure. Pixel values are photoelectron counts, stored row-major
/// (index = y * width + x); integer-valued after sampling, real-valued for
/// noiseless expectations. Serialization clamps to unsigned 32-bit.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;
    FrameMetadata meta;

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// What the camera looks at: an ion at `ion_position_nm` (object space,
/// z along the optical axis relative to focus) scattering
/// `expected_photons` detected photons per exposure, imaged through
/// `optics` with PSF `geometry`. The rendered spot sigma follows the
/// defocus z = optics.defocus_offset_nm + ion z.
struct Scene {
    std::array<double, 3> ion_position_nm{0, 0, 0};
    double expected_photons = 0;
    OpticsConfig optics;
    BeamGeometry geometry;

    static Scene make(const OpticsConfig& optics, double expected_photons);
    void validate() const;
};

struct ExpectedImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;       // expected counts per pixel, incl. background
    double contained_fraction = 1.0;  // share of the PSF inside the ROI
    bool truncation_warning = false;  // contained_fraction < 0.99
};

/// Noiseless expected image: background plus the pixel-integrated Gaussian
/// spot (exact erf antiderivative per axis). The sum over pixels minus
/// background equals expected_photons * contained_fraction identically.
ExpectedImage expected_image(const Scene& scene, const CameraConfig& camera);

/// Draws one noisy frame from the expected image. Deterministic in
/// (seed, frame_index): rendering the same pair twice is bit-identical
/// regardless of call order or threading.
Frame render_frame(const Scene& scene, const CameraConfig& camera,
                   std::uint64_t seed, std::uint64_t frame_index = 0);

/// Noiseless variant of render_frame (expectation copied into a Frame).
Frame render_expected_frame(const Scene& scene, const CameraConfig& camera);

/// Slow apparatus drift of the ion equilibrium position: a deterministic
/// linear ramp plus a Gaussian random walk, both from t = 0, per axis.
struct DriftModel {
    std::array<double, 3> linear_nm_per_hour{0, 0, 0};
    std::array<double, 3> random_walk_nm_per_sqrt_hour{0, 0, 0};
    std::uint64_t seed = 0;
};

/// Drift offsets at the given times (s, strictly increasing, >= 0). The
/// random walk accumulates variance rate^2 * dt across intervals starting
/// at t = 0, independently per axis.
std::vector<std::array<double, 3>> simulate_drift(const DriftModel& drift, std::span<const double> times_s);

/// Force-chopped acquisition: alternating OFF / ON frames, one of each per
/// cycle plus a closing OFF frame, so every ON exposure is flanked by OFF
/// drift references.
struct ChopSchedule {
    double integration_time_s = 20.0;
    int n_cycles = 12;
    std::array<double, 3> applied_displacement_nm{0, 0, 0}; // added while ON

    void validate() const;
};

struct FrameSeries {
    std::vector<Frame> frames;
    ChopSchedule schedule;
    CameraConfig camera;
    Scene base_scene;        // drift- and force-free scene
    DriftModel drift;
    std::uint64_t master_seed = 0;
    bool noiseless = false;
};

/// Simulates the full chopped series (2 * n_cycles + 1 frames). Drift is
/// sampled at frame centers; the applied displacement is added during ON
/// frames. `noiseless` renders expectations instead of sampling, and
/// `threads` parallelizes rendering without changing any pixel.
FrameSeries simulate_chopped_series(const Scene& base, const CameraConfig& camera,
                                    const DriftModel& drift, const ChopSchedule& schedule,
                                    std::uint64_t seed, int threads = 1, bool noiseless = false);

} // namespace ionsense
