#include "ionsense/optics_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ionsense/errors.hpp"
#include "ionsense/least_squares.hpp"
#include "ionsense/phys_core.hpp"

namespace ionsense {

void OpticsConfig::validate() const {
    if (!(wavelength_nm > 0.0)) throw InvalidInput("imaging wavelength must be > 0 nm");
    if (!(numerical_aperture > 0.0) || !(numerical_aperture < 1.0)) {
        throw InvalidInput("numerical aperture must be in (0, 1)");
    }
    if (!(magnification > 0.0)) throw InvalidInput("magnification must be > 0");
    if (!std::isfinite(defocus_offset_nm)) throw InvalidInput("defocus offset must be finite");
}

BeamGeometry beam_geometry(const OpticsConfig& optics) {
    optics.validate();
    BeamGeometry g;
    g.waist_w0_nm = optics.wavelength_nm / (constants::pi * optics.numerical_aperture);
    g.fwhm_nm = g.waist_w0_nm * std::sqrt(2.0 * std::log(2.0));
    g.rayleigh_range_nm = constants::pi * g.waist_w0_nm * g.waist_w0_nm / optics.wavelength_nm;
    return g;
}

double spot_width_at(double z_nm, const BeamGeometry& geom) {
    if (!(geom.waist_w0_nm > 0.0) || !(geom.rayleigh_range_nm > 0.0)) {
        throw InvalidInput("beam geometry must have positive waist and Rayleigh range");
    }
    const double zr = z_nm / geom.rayleigh_range_nm;
    return geom.waist_w0_nm * std::sqrt(1.0 + zr * zr);
}

double width_slope_at(double z_nm, const BeamGeometry& geom) {
    // dw/dz = w0^2 z / (z_R^2 w(z))
    const double w = spot_width_at(z_nm, geom);
    const double zr2 = geom.rayleigh_range_nm * geom.rayleigh_range_nm;
    return geom.waist_w0_nm * geom.waist_w0_nm * z_nm / (zr2 * w);
}

BeamGeometry DefocusCalibration::geometry() const {
    BeamGeometry g;
    g.waist_w0_nm = waist_w0_nm;
    g.fwhm_nm = waist_w0_nm * std::sqrt(2.0 * std::log(2.0));
    g.rayleigh_range_nm = rayleigh_range_nm;
    return g;
}

void DefocusCalibration::validate() const {
    if (!(waist_w0_nm > 0.0)) throw InvalidInput("calibration waist must be > 0 nm");
    if (!(rayleigh_range_nm > 0.0)) throw InvalidInput("calibration Rayleigh range must be > 0 nm");
    if (!std::isfinite(operating_offset_nm)) throw InvalidInput("operating offset must be finite");
}

namespace {

// w(z; w0, z0, zR) fitted to a through-focus scan in object coordinates.
class DefocusProblem final : public LeastSquaresProblem {
public:
    DefocusProblem(const std::vector<double>& z, const std::vector<double>& w) : z_(z), w_(w) {}

    int residual_count() const override { return static_cast<int>(z_.size()); }
    int parameter_count() const override { return 3; } // w0, z0, zR

    void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const override {
        const double w0 = p[0], z0 = p[1], zr = p[2];
        for (int i = 0; i < residual_count(); ++i) {
            if (w0 <= 0.0 || zr <= 0.0) {
                r[i] = std::numeric_limits<double>::infinity();
                if (jac) jac->row(i).setZero();
                continue;
            }
            const double u = (z_[i] - z0) / zr;
            const double root = std::sqrt(1.0 + u * u);
            const double model = w0 * root;
            r[i] = w_[i] - model;
            if (jac) {
                (*jac)(i, 0) = root;
                (*jac)(i, 1) = -w0 * u / (root * zr); // d model / d z0
                (*jac)(i, 2) = -w0 * u * u / (root * zr);
            }
        }
    }

private:
    const std::vector<double>& z_;
    const std::vector<double>& w_;
};

} // namespace

DefocusCalibration calibrate_defocus(std::span<const DefocusScanPoint> scan, double magnification) {
    if (scan.size() < 4) throw InvalidInput("defocus calibration needs at least 4 scan points");
    if (!(magnification > 0.0)) throw InvalidInput("magnification must be > 0");

    // camera translation maps to object defocus through the axial
    // magnification M^2
    const double axial = magnification * magnification;
    std::vector<double> z(scan.size()), w(scan.size());
    double wmin = scan[0].fitted_width_nm;
    std::size_t imin = 0;
    for (std::size_t i = 0; i < scan.size(); ++i) {
        z[i] = scan[i].camera_translation_nm / axial;
        w[i] = scan[i].fitted_width_nm;
        if (!(w[i] > 0.0)) throw InvalidInput("scan widths must be > 0 nm");
        if (w[i] < wmin) {
            wmin = w[i];
            imin = i;
        }
    }

    DefocusProblem problem(z, w);
    Eigen::VectorXd p0(3);
    p0[0] = wmin;
    p0[1] = z[imin];
    p0[2] = std::max(std::abs(z.back() - z.front()) / 4.0, 1.0);
    const LmResult res = levenberg_marquardt(problem, p0);
    if (!res.converged || !(res.params[0] > 0.0) || !(res.params[2] > 0.0)) {
        throw FitError("defocus calibration fit failed");
    }

    const double span = std::abs(z.back() - z.front());
    if (span < res.params[2]) {
        throw FitError("defocus calibration is ill-conditioned: scan spans less than one Rayleigh range");
    }

    DefocusCalibration out;
    out.waist_w0_nm = res.params[0];
    out.rayleigh_range_nm = res.params[2];
    out.operating_offset_nm = -res.params[1]; // fitted focus position; working point sits at -z0 from it
    out.waist_error_nm = std::sqrt(std::max(res.covariance(0, 0), 0.0));
    out.rayleigh_error_nm = std::sqrt(std::max(res.covariance(2, 2), 0.0));
    out.residual_norm = std::sqrt(res.chi2);
    return out;
}

ZEstimate width_to_z(double measured_width_nm, double width_error_nm, const DefocusCalibration& calib) {
    calib.validate();
    if (!(measured_width_nm > 0.0)) throw InvalidInput("measured width must be > 0 nm");
    if (!(width_error_nm >= 0.0)) throw InvalidInput("width error must be >= 0 nm");

    const double w0 = calib.waist_w0_nm;
    if (measured_width_nm < w0 - 3.0 * width_error_nm) {
        throw InvalidInput("measured width sits below the calibrated focal width: out of model");
    }

    const BeamGeometry geom = calib.geometry();
    const double ratio = measured_width_nm / w0;
    const double mag = calib.rayleigh_range_nm * std::sqrt(std::max(ratio * ratio - 1.0, 0.0));
    const double sign = calib.operating_offset_nm < 0.0 ? -1.0 : 1.0;

    ZEstimate out;
    out.z_nm = sign * mag;

    // error bar through the local slope, with a floor defocus keeping it
    // finite through focus
    const double z_floor = 0.05 * calib.rayleigh_range_nm;
    const double z_eff = std::max(mag, z_floor);
    out.z_error_nm = width_error_nm / width_slope_at(z_eff, geom);
    out.ill_conditioned = (mag < z_floor) || (std::abs(calib.operating_offset_nm) < z_floor);
    return out;
}

} // namespace ionsense
