#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionsense/image_sim.hpp"
#include "ionsense/phys_core.hpp"

namespace ionsense {

/// Starting point for the nonlinear fit, from background-subtracted image
/// moments. The offset estimate is the median of the frame's border pixels.
struct FitInit {
    double flux = 0; // integrated counts above offset
    double cx_px = 0;
    double cy_px = 0;
    double sigma_x_px = 0;
    double sigma_y_px = 0;
    double offset = 0;
};

/// Moment-based initialization. Throws DataError("no signal") when the
/// frame carries no counts above the border offset (all-zero or uniform
/// frames cannot seed a spot fit).
FitInit moments_init(const Frame& frame);

struct FitConfig {
    bool weighted = false;     // inverse-variance weights w = 1 / max(model, weight_floor)
    double weight_floor = 1.0; // counts; keeps empty pixels from dominating
    bool fit_rotation = false; // add a rotation angle (numerically integrated model)
    double parameter_tolerance = 1e-8;
    int max_iterations = 200;
    bool verify_jacobian = false; // finite-difference check of the analytic Jacobian
};

/// Pixel-integrated 2D Gaussian fit result. Pixel-space parameters come
/// straight from the optimizer; nm-space values use the frame's object
/// pixel scale with the centroid referenced to the ROI center.
struct GaussFit2D {
    double flux = 0;   // integrated counts above offset
    double offset = 0; // flat background per pixel
    double cx_px = 0, cy_px = 0;
    double sigma_x_px = 0, sigma_y_px = 0;
    double theta_rad = 0; // 0 unless rotation was fitted

    double object_pixel_nm = 0;            // scale used for the nm values
    double cx_nm = 0, cy_nm = 0;           // relative to ROI center
    double sigma_x_nm = 0, sigma_y_nm = 0;
    double cx_error_nm = 0, cy_error_nm = 0;
    double sigma_x_error_nm = 0, sigma_y_error_nm = 0;

    Eigen::MatrixXd covariance; // parameter order: flux, cx, cy, sx, sy, offset[, theta]
    double reduced_chi2 = 0;
    double residual_norm = 0;         // unweighted ||data - model|| at the optimum
    double initial_residual_norm = 0; // same norm at the start point
    int iterations = 0;
    bool converged = false;

    /// Mean 1/e^2 spot radius 2 * (sigma_x + sigma_y) / 2 in nm, and its
    /// 1-sigma error from the fit covariance.
    double width_w_nm() const { return sigma_x_nm + sigma_y_nm; }
    double width_w_error_nm() const;
};

/// Levenberg-Marquardt fit of offset + flux * Gx(i) * Gy(j), where Gx/Gy are
/// exact pixel integrals of unit Gaussians (erf antiderivative). With
/// rotation enabled the non-separable pixel integral is evaluated by
/// fixed-order Gauss-Legendre quadrature. Non-convergence is reported via
/// `converged`, not an exception; degenerate inputs throw FitError.
GaussFit2D fit_gaussian_2d(const Frame& frame, const FitInit& init, const FitConfig& config = {});

/// Convenience overload: moments_init then fit.
GaussFit2D fit_gaussian_2d(const Frame& frame, const FitConfig& config = {});

struct SeriesFitEntry {
    std::size_t frame_index = 0;
    double timestamp_s = 0;
    ChopState chop = ChopState::force_off;
    std::optional<GaussFit2D> fit; // empty on failure
    std::string error;             // failure description when empty
};

/// Fits every frame of a series (threaded over frames). Per-frame failures
/// become error entries; the remaining frames are still fitted.
std::vector<SeriesFitEntry> fit_series(const FrameSeries& series, const FitConfig& config = {},
                                       int threads = 1);

/// Transverse magnification from a two-ion calibration image: the known
/// equilibrium separation at shared-mode frequency nu maps the measured
/// chip-space separation (pixels * pitch) onto an absolute object length.
double magnification_from_two_ions(double separation_px, double pixel_pitch_image_um,
                                   double frequency_hz, const IonSpecies& ion);

} // namespace ionsense
