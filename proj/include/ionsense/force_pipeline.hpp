#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ionsense/estimator.hpp"
#include "ionsense/image_sim.hpp"
#include "ionsense/optics_model.hpp"
#include "ionsense/phys_core.hpp"

namespace ionsense {

/// One fitted frame reduced to a 3D position with per-axis fit errors.
/// Axes without a measurement (e.g. z when the system is not defocused)
/// carry NaN and propagate to NaN results for that axis only.
struct DisplacementSample {
    double time_s = 0;
    std::array<double, 3> position_nm{0, 0, 0};
    std::array<double, 3> sigma_fit_nm{0, 0, 0};
    ChopState chop = ChopState::force_off;
};

/// Converts series fit entries to displacement samples. x/y come from the
/// fitted centroid; z is recovered from the fitted spot width through the
/// defocus calibration when one is supplied (positions are reported
/// relative to the calibration's operating offset).
std::vector<DisplacementSample> displacement_samples(std::span<const SeriesFitEntry> entries,
                                                     const std::optional<DefocusCalibration>& calib);

/// Drift-corrected ON-OFF differentials. For every ON frame the OFF
/// equilibrium position is linearly interpolated between the flanking OFF
/// frames; sigma components follow the standard error budget:
///   sigma_ion^2 = sigma_fit^2 + sigma_driftfit^2 + sigma_interp^2.
struct DriftCorrection {
    std::vector<DisplacementSample> differentials; // ON minus interpolated OFF
    std::array<double, 3> mean_differential_nm{0, 0, 0};
    std::array<double, 3> differential_scatter_nm{0, 0, 0}; // empirical std over ONs
    std::array<double, 3> sigma_fit_nm{0, 0, 0};            // RMS ON-frame fit error
    std::array<double, 3> sigma_drift_fit_nm{0, 0, 0};      // OFF fit error propagated through interpolation
    std::array<double, 3> sigma_interp_nm{0, 0, 0};         // drift-interpolation error estimate
    std::size_t n_on = 0;
    std::size_t n_off = 0;
};

/// Requires at least 3 OFF samples (interior drift curvature is otherwise
/// unconstrained) and at least 1 ON sample with OFF samples on both sides.
/// The interpolation error is estimated from how far each interior OFF
/// point sits from the line through its OFF neighbours, halved and averaged.
DriftCorrection drift_correct(std::span<const DisplacementSample> samples);

/// Per-axis position error budget, all nm.
struct ErrorBudget {
    std::array<double, 3> sigma_fit_nm{0, 0, 0};
    std::array<double, 3> sigma_drift_fit_nm{0, 0, 0};
    std::array<double, 3> sigma_interp_nm{0, 0, 0};
    std::array<double, 3> sigma_ion_nm{0, 0, 0}; // quadrature sum

    static ErrorBudget combine(const std::array<double, 3>& fit,
                               const std::array<double, 3>& drift_fit,
                               const std::array<double, 3>& interp);
};

ErrorBudget error_budget(const DriftCorrection& correction);

/// Force along one axis from a displacement, F = k x. The statistical error
/// is the per-measurement bar k * sigma; weak axes additionally carry the
/// principal-axis systematic bracket evaluated at the same displacement.
struct ForceEstimate {
    int axis = 0;
    double force_zn = 0;
    double stat_error_zn = 0;
    std::optional<std::pair<double, double>> systematic_bracket_zn;
};

ForceEstimate force_from_displacement(double displacement_nm, double sigma_nm,
                                      const SpringConstants& springs, int axis);

/// Force sensitivity S = k sigma_ion sqrt(T) in zN/sqrt(Hz); bracketed on
/// ambiguous weak axes.
struct AxisSensitivity {
    double value_zn_per_sqrt_hz = 0; // at the axis' nominal spring constant
    double lo = 0, hi = 0;           // systematic bracket (equal when unambiguous)
    bool bracketed = false;
};

struct SensitivityReport {
    std::array<AxisSensitivity, 3> axes{};
    double integration_time_s = 0;
};

SensitivityReport sensitivity(const ErrorBudget& budget, const SpringConstants& springs,
                              double integration_time_s);

/// Full analysis of a chopped series: fit, drift-correct, budget, force.
struct AxisResult {
    double mean_differential_nm = 0;
    double sigma_ion_nm = 0;
    ForceEstimate force;            // from the mean differential
    AxisSensitivity sensitivity;
    double applied_displacement_nm = 0; // truth when the series records it
};

struct AnalysisReport {
    std::array<AxisResult, 3> axes{};
    ErrorBudget budget;
    DriftCorrection correction;
    SpringConstants springs;
    std::size_t n_frames = 0;
    std::size_t n_fit_failures = 0;
    std::vector<std::string> fit_errors;
};

struct AnalysisOptions {
    FitConfig fit;
    int threads = 1;
    std::optional<DefocusCalibration> defocus; // enables the z axis
};

AnalysisReport analyze_series(const FrameSeries& series, const SpringConstants& springs,
                              const AnalysisOptions& options = {});

} // namespace ionsense
