#pragma once

#include <span>

namespace ionsense {

/// Diffraction-limited imaging system, Gaussian-beam model of the point
/// spread function. All transverse and axial lengths are object-space nm.
struct OpticsConfig {
    double wavelength_nm = 369.5;
    double numerical_aperture = 0.64;
    double magnification = 395.9;   // transverse; axial goes as the square
    double defocus_offset_nm = 0.0; // deliberate operating offset from focus

    void validate() const;
};

/// Gaussian-beam PSF parameters derived from wavelength and NA:
///   w0 = lambda / (pi NA),  FWHM = w0 sqrt(2 ln 2),  z_R = pi w0^2 / lambda.
struct BeamGeometry {
    double waist_w0_nm = 0;       // 1/e^2 intensity radius at focus
    double fwhm_nm = 0;           // transverse intensity FWHM at focus
    double rayleigh_range_nm = 0; // z_R

    /// Gaussian sigma of the focal spot, w0 / 2.
    double sigma_psf_nm() const { return waist_w0_nm / 2.0; }
};

BeamGeometry beam_geometry(const OpticsConfig& optics);

/// Spot radius at defocus z: w(z) = w0 sqrt(1 + (z/z_R)^2).
double spot_width_at(double z_nm, const BeamGeometry& geom);

/// dw/dz at defocus z; equals NA/sqrt(2) at z = z_R for an ideal beam.
double width_slope_at(double z_nm, const BeamGeometry& geom);

/// Width-vs-defocus response of the real imaging system, measured by
/// refocusing on a scanned camera stage. Camera translation divided by the
/// axial magnification M^2 gives object-space defocus.
struct DefocusCalibration {
    double waist_w0_nm = 0;         // effective in-focus spot radius
    double rayleigh_range_nm = 0;   // effective z_R
    double operating_offset_nm = 0; // deliberate defocus of the working point
    double waist_error_nm = 0;      // 1-sigma fit uncertainties
    double rayleigh_error_nm = 0;
    double residual_norm = 0;

    BeamGeometry geometry() const;
    void validate() const;
};

/// One point of a through-focus scan: camera-stage translation (image-space
/// nm) against the fitted transverse spot radius (object-space nm).
struct DefocusScanPoint {
    double camera_translation_nm = 0;
    double fitted_width_nm = 0;
};

/// Fits w(z) = w0 sqrt(1 + ((z - z0)/z_R)^2) to a through-focus scan after
/// converting stage translation to object defocus via M^2. Needs at least
/// four points; a scan spanning less than one fitted z_R is rejected as
/// ill-conditioned.
DefocusCalibration calibrate_defocus(std::span<const DefocusScanPoint> scan, double magnification);

struct ZEstimate {
    double z_nm = 0;       // defocus on the operating branch (sign of the offset)
    double z_error_nm = 0; // propagated through the local slope
    bool ill_conditioned = false;
};

/// Inverts a measured spot radius into a defocus position,
///   z = z_R sqrt((w/w0)^2 - 1),
/// on the branch selected by the calibration's operating offset. Widths more
/// than 3 error bars below w0 are out of model; solutions near focus (where
/// the slope vanishes) are flagged ill-conditioned and carry an error bar
/// evaluated at a floor defocus of 0.05 z_R.
ZEstimate width_to_z(double measured_width_nm, double width_error_nm, const DefocusCalibration& calib);

} // namespace ionsense
