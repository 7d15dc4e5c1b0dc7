#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "ionsense/force_pipeline.hpp"
#include "ionsense/image_sim.hpp"
#include "ionsense/optics_model.hpp"
#include "ionsense/phys_core.hpp"

namespace ionsense {

/// Shot-noise-limited centroid precision for N detected photons.
/// Two conventions are carried side by side:
///   working:    delta_x = w0 / sqrt(N)        (spot 1/e^2 radius)
///   cramer_rao: delta_x = (w0/2) / sqrt(N)    (Gaussian sigma; the bound)
/// cramer_rao is exactly half of working.
struct CentroidLimit {
    double working_nm = 0;
    double cramer_rao_nm = 0;
    double n_photons = 0;
};

CentroidLimit centroid_limit(const BeamGeometry& geom, double n_photons);

/// Shot-noise limit on the relative spot-width estimate, 1/sqrt(2N).
double width_relative_limit(double n_photons);

/// Published variants of the axial (focus) single-shot limit. They disagree
/// by fixed factors, so all three are reported side by side, labeled by the
/// formula they come from.
struct FocusLimitSet {
    double direct_formula_nm = 0; // 2 lambda / (pi NA^2 sqrt(N)) = 2 z_R / sqrt(N)
    double stated_formula_nm = 0; // 2 lambda / (NA sqrt(N)); exceeds the first by pi NA
    double slope_chain_nm = 0;    // width noise via the steepest slope: z_R / sqrt(N)
    double n_photons = 0;
};

FocusLimitSet focus_limit(const OpticsConfig& optics, double n_photons);

/// Quantum-limited force sensitivities: position limit converted to an
/// attack rate delta_x / sqrt(T) and multiplied by the spring constants.
struct LimitReport {
    CentroidLimit centroid;
    double integration_time_s = 0;
    double attack_rate_nm_per_sqrt_hz = 0; // working convention
    std::array<AxisSensitivity, 3> limit_sensitivity; // zN/sqrt(Hz), bracketed weak axes
    std::array<double, 3> ratio_vs_measured{0, 0, 0}; // measured / limit, 0 when unknown
};

/// Measured sensitivities to compare against (bracket midpoints for weak axes).
struct MeasuredSensitivities {
    std::array<double, 3> s_zn_per_sqrt_hz{0, 0, 0};
};

LimitReport limit_sensitivities(const SpringConstants& springs, const CentroidLimit& limit,
                                double integration_time_s,
                                const std::optional<MeasuredSensitivities>& measured = {});

/// Monte-Carlo check of the localization precision actually reached by the
/// full render-and-fit chain, with bootstrap error bars on each scatter.
struct OracleResult {
    double centroid_std_nm = 0;     // pooled x/y
    double centroid_std_err_nm = 0;
    double width_rel_std = 0;       // per-axis relative sigma scatter, pooled
    double width_rel_std_err = 0;
    double z_std_nm = 0;            // NaN when the scene is at focus
    double z_std_err_nm = 0;
    int trials = 0;
    int fit_failures = 0;
};

/// Renders `trials` independent frames of the scene and refits each one.
/// Requires trials >= 100; more than 1% fit failures marks the oracle
/// unreliable (DataError). The scene's defocus (if any) enables the z leg,
/// inverted through the ideal width-defocus response.
OracleResult monte_carlo_localization(const Scene& scene, const CameraConfig& camera,
                                      int trials, std::uint64_t seed,
                                      const FitConfig& fit = {}, int threads = 1);

} // namespace ionsense
