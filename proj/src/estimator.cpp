#include "ionsense/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ionsense/errors.hpp"
#include "ionsense/least_squares.hpp"
#include "ionsense/parallel.hpp"

namespace ionsense {

namespace {

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (hi + v[n / 2 - 1]);
}

} // namespace

FitInit moments_init(const Frame& frame) {
    if (frame.width < 3 || frame.height < 3 ||
        frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
        throw InvalidInput("frame is too small or inconsistent for moment initialization");
    }

    std::vector<double> border;
    border.reserve(2 * (frame.width + frame.height));
    for (int x = 0; x < frame.width; ++x) {
        border.push_back(frame.at(x, 0));
        border.push_back(frame.at(x, frame.height - 1));
    }
    for (int y = 1; y + 1 < frame.height; ++y) {
        border.push_back(frame.at(0, y));
        border.push_back(frame.at(frame.width - 1, y));
    }
    const double offset = median(std::move(border));

    double flux = 0.0, sx = 0.0, sy = 0.0, peak = 0.0;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const double v = frame.at(x, y) - offset;
            peak = std::max(peak, v);
            if (v > 0.0) {
                flux += v;
                sx += v * x;
                sy += v * y;
            }
        }
    }
    if (!(flux > 0.0) || !(peak > 0.0)) {
        throw DataError("no signal above the border offset: cannot initialize a spot fit");
    }

    const double cx = sx / flux;
    const double cy = sy / flux;
    double vxx = 0.0, vyy = 0.0;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const double v = frame.at(x, y) - offset;
            if (v > 0.0) {
                vxx += v * (x - cx) * (x - cx);
                vyy += v * (y - cy) * (y - cy);
            }
        }
    }

    FitInit init;
    init.flux = flux;
    init.cx_px = cx;
    init.cy_px = cy;
    init.sigma_x_px = std::max(std::sqrt(vxx / flux), 0.5);
    init.sigma_y_px = std::max(std::sqrt(vyy / flux), 0.5);
    init.offset = offset;
    return init;
}

namespace {

// parameter order: flux, cx, cy, sx, sy, offset [, theta]
constexpr int P_FLUX = 0, P_CX = 1, P_CY = 2, P_SX = 3, P_SY = 4, P_OFF = 5, P_TH = 6;

struct AxisIntegrals {
    double value;  // integral of the unit Gaussian over the pixel
    double d_c;    // d value / d center
    double d_s;    // d value / d sigma
};

inline AxisIntegrals axis_integrals(double coord, double center, double sigma) {
    const double inv = 1.0 / (std::sqrt(2.0) * sigma);
    const double t_lo = (coord - 0.5 - center) * inv;
    const double t_hi = (coord + 0.5 - center) * inv;
    constexpr double inv_sqrt_pi = 0.5641895835477563;
    const double phi_lo = std::exp(-t_lo * t_lo) * inv_sqrt_pi;
    const double phi_hi = std::exp(-t_hi * t_hi) * inv_sqrt_pi;
    AxisIntegrals out;
    out.value = 0.5 * (std::erf(t_hi) - std::erf(t_lo));
    out.d_c = -(phi_hi - phi_lo) * inv;
    out.d_s = -(t_hi * phi_hi - t_lo * phi_lo) / sigma;
    return out;
}

// Separable pixel-integrated Gaussian (exact erf model, theta = 0).
class SpotProblem final : public LeastSquaresProblem {
public:
    SpotProblem(const Frame& frame, bool weighted, double floor)
        : frame_(frame), weighted_(weighted), floor_(floor) {}

    int residual_count() const override { return static_cast<int>(frame_.pixels.size()); }
    int parameter_count() const override { return 6; }

    void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const override {
        const double flux = p[P_FLUX], cx = p[P_CX], cy = p[P_CY];
        const double sx = p[P_SX], sy = p[P_SY], off = p[P_OFF];
        if (sx <= 1e-3 || sy <= 1e-3) {
            r.setConstant(std::numeric_limits<double>::infinity());
            if (jac) jac->setZero();
            return;
        }
        const int w = frame_.width, h = frame_.height;
        std::vector<AxisIntegrals> gx(w), gy(h);
        for (int i = 0; i < w; ++i) gx[i] = axis_integrals(i, cx, sx);
        for (int j = 0; j < h; ++j) gy[j] = axis_integrals(j, cy, sy);

        for (int j = 0; j < h; ++j) {
            for (int i = 0; i < w; ++i) {
                const int idx = j * w + i;
                const double model = off + flux * gx[i].value * gy[j].value;
                r[idx] = frame_.pixels[idx] - model;
                if (jac) {
                    (*jac)(idx, P_FLUX) = gx[i].value * gy[j].value;
                    (*jac)(idx, P_CX) = flux * gx[i].d_c * gy[j].value;
                    (*jac)(idx, P_CY) = flux * gx[i].value * gy[j].d_c;
                    (*jac)(idx, P_SX) = flux * gx[i].d_s * gy[j].value;
                    (*jac)(idx, P_SY) = flux * gx[i].value * gy[j].d_s;
                    (*jac)(idx, P_OFF) = 1.0;
                }
            }
        }
    }

    void weights(const Eigen::VectorXd& p, Eigen::VectorXd& w) const override {
        w.resize(residual_count());
        if (!weighted_) {
            w.setOnes();
            return;
        }
        // inverse-variance weights from the current model (Poisson variance
        // = mean), floored so empty pixels cannot dominate
        const double flux = p[P_FLUX], cx = p[P_CX], cy = p[P_CY];
        const double sx = std::max(p[P_SX], 1e-3), sy = std::max(p[P_SY], 1e-3);
        const double off = p[P_OFF];
        const int nw = frame_.width, nh = frame_.height;
        std::vector<double> gx(nw), gy(nh);
        for (int i = 0; i < nw; ++i) gx[i] = axis_integrals(i, cx, sx).value;
        for (int j = 0; j < nh; ++j) gy[j] = axis_integrals(j, cy, sy).value;
        for (int j = 0; j < nh; ++j) {
            for (int i = 0; i < nw; ++i) {
                const double model = off + flux * gx[i] * gy[j];
                w[j * nw + i] = 1.0 / std::max(model, floor_);
            }
        }
    }

private:
    const Frame& frame_;
    bool weighted_;
    double floor_;
};

// Rotated elliptical Gaussian integrated over pixels by fixed-order
// Gauss-Legendre quadrature (the rotated integral is not separable).
class RotatedSpotProblem final : public LeastSquaresProblem {
public:
    RotatedSpotProblem(const Frame& frame, bool weighted, double floor)
        : frame_(frame), weighted_(weighted), floor_(floor) {}

    int residual_count() const override { return static_cast<int>(frame_.pixels.size()); }
    int parameter_count() const override { return 7; }

    void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const override {
        const double sx = p[P_SX], sy = p[P_SY];
        if (sx <= 1e-3 || sy <= 1e-3) {
            r.setConstant(std::numeric_limits<double>::infinity());
            if (jac) jac->setZero();
            return;
        }
        const int w = frame_.width, h = frame_.height;
        for (int j = 0; j < h; ++j) {
            for (int i = 0; i < w; ++i) {
                const int idx = j * w + i;
                double model, grad[7];
                pixel_model(p, i, j, model, jac ? grad : nullptr);
                r[idx] = frame_.pixels[idx] - model;
                if (jac) {
                    for (int d = 0; d < 7; ++d) (*jac)(idx, d) = grad[d];
                }
            }
        }
    }

    void weights(const Eigen::VectorXd& p, Eigen::VectorXd& w) const override {
        w.resize(residual_count());
        if (!weighted_) {
            w.setOnes();
            return;
        }
        const int nw = frame_.width, nh = frame_.height;
        for (int j = 0; j < nh; ++j) {
            for (int i = 0; i < nw; ++i) {
                double model;
                pixel_model(p, i, j, model, nullptr);
                w[j * nw + i] = 1.0 / std::max(model, floor_);
            }
        }
    }

private:
    // 4-point Gauss-Legendre nodes/weights on [-1/2, 1/2]
    static constexpr double nodes_[4] = {-0.43056815579702629, -0.16999052179242816,
                                         0.16999052179242816, 0.43056815579702629};
    static constexpr double wts_[4] = {0.17392742256872692, 0.32607257743127305,
                                       0.32607257743127305, 0.17392742256872692};

    void pixel_model(const Eigen::VectorXd& p, int i, int j, double& model, double* grad) const {
        const double flux = p[P_FLUX], cx = p[P_CX], cy = p[P_CY];
        const double sx = p[P_SX], sy = p[P_SY], off = p[P_OFF], th = p[P_TH];
        const double c = std::cos(th), s = std::sin(th);
        const double norm = flux / (2.0 * constants_pi_ * sx * sy);

        double acc = 0.0;
        double g[7] = {0, 0, 0, 0, 0, 0, 0};
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                const double x = i + nodes_[a] - cx;
                const double y = j + nodes_[b] - cy;
                const double u = c * x + s * y;
                const double v = -s * x + c * y;
                const double q = (u * u) / (sx * sx) + (v * v) / (sy * sy);
                const double f = std::exp(-0.5 * q);
                const double wq = wts_[a] * wts_[b];
                acc += wq * f;
                if (grad) {
                    const double du_dcx = -c, dv_dcx = s;
                    const double du_dcy = -s, dv_dcy = -c;
                    const double dq_du = 2.0 * u / (sx * sx);
                    const double dq_dv = 2.0 * v / (sy * sy);
                    g[P_CX] += wq * f * (-0.5) * (dq_du * du_dcx + dq_dv * dv_dcx);
                    g[P_CY] += wq * f * (-0.5) * (dq_du * du_dcy + dq_dv * dv_dcy);
                    g[P_SX] += wq * f * (u * u) / (sx * sx * sx);
                    g[P_SY] += wq * f * (v * v) / (sy * sy * sy);
                    // du/dth = -s x + c y = v; dv/dth = -c x - s y = -u
                    g[P_TH] += wq * f * (-0.5) * (dq_du * v + dq_dv * (-u));
                }
            }
        }
        model = off + norm * acc;
        if (grad) {
            grad[P_FLUX] = acc / (2.0 * constants_pi_ * sx * sy);
            grad[P_CX] = norm * g[P_CX];
            grad[P_CY] = norm * g[P_CY];
            grad[P_SX] = norm * g[P_SX] - norm * acc / sx;
            grad[P_SY] = norm * g[P_SY] - norm * acc / sy;
            grad[P_OFF] = 1.0;
            grad[P_TH] = norm * g[P_TH];
        }
    }

    static constexpr double constants_pi_ = 3.14159265358979323846;

    const Frame& frame_;
    bool weighted_;
    double floor_;
};

} // namespace

double GaussFit2D::width_w_error_nm() const {
    // w = sigma_x_nm + sigma_y_nm; the covariance is in pixel units
    if (covariance.rows() < 5 || !(object_pixel_nm > 0.0)) return 0.0;
    const double var_px = covariance(P_SX, P_SX) + covariance(P_SY, P_SY) +
                          2.0 * covariance(P_SX, P_SY);
    if (!std::isfinite(var_px) || var_px <= 0.0) return 0.0;
    return std::sqrt(var_px) * object_pixel_nm;
}

GaussFit2D fit_gaussian_2d(const Frame& frame, const FitInit& init, const FitConfig& config) {
    if (frame.width < 3 || frame.height < 3 ||
        frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
        throw InvalidInput("frame is too small or inconsistent for a spot fit");
    }
    if (!(init.flux > 0.0) || !(init.sigma_x_px > 0.0) || !(init.sigma_y_px > 0.0)) {
        throw FitError("fit initialization is degenerate (non-positive flux or width)");
    }

    const int npar = config.fit_rotation ? 7 : 6;
    Eigen::VectorXd p0(npar);
    p0[P_FLUX] = init.flux;
    p0[P_CX] = init.cx_px;
    p0[P_CY] = init.cy_px;
    p0[P_SX] = init.sigma_x_px;
    p0[P_SY] = init.sigma_y_px;
    p0[P_OFF] = init.offset;
    if (config.fit_rotation) p0[P_TH] = 0.0;

    LmOptions opts;
    opts.parameter_tolerance = config.parameter_tolerance;
    opts.max_iterations = config.max_iterations;
    opts.verify_jacobian = config.verify_jacobian;

    LmResult res;
    if (config.fit_rotation) {
        RotatedSpotProblem problem(frame, config.weighted, config.weight_floor);
        res = levenberg_marquardt(problem, p0, opts);
    } else {
        SpotProblem problem(frame, config.weighted, config.weight_floor);
        res = levenberg_marquardt(problem, p0, opts);
    }

    GaussFit2D out;
    out.flux = res.params[P_FLUX];
    out.cx_px = res.params[P_CX];
    out.cy_px = res.params[P_CY];
    out.sigma_x_px = std::abs(res.params[P_SX]);
    out.sigma_y_px = std::abs(res.params[P_SY]);
    out.offset = res.params[P_OFF];
    out.theta_rad = config.fit_rotation ? res.params[P_TH] : 0.0;
    out.covariance = res.covariance;
    out.iterations = res.iterations;
    out.converged = res.converged;

    const int dof = static_cast<int>(frame.pixels.size()) - npar;
    out.reduced_chi2 = dof > 0 ? res.chi2 / dof : 0.0;

    // unweighted residual norms, comparable across configurations
    {
        Eigen::VectorXd r(static_cast<int>(frame.pixels.size()));
        if (config.fit_rotation) {
            RotatedSpotProblem problem(frame, false, config.weight_floor);
            problem.evaluate(res.params, r, nullptr);
            out.residual_norm = r.norm();
            Eigen::VectorXd r0(static_cast<int>(frame.pixels.size()));
            problem.evaluate(p0, r0, nullptr);
            out.initial_residual_norm = r0.norm();
        } else {
            SpotProblem problem(frame, false, config.weight_floor);
            problem.evaluate(res.params, r, nullptr);
            out.residual_norm = r.norm();
            Eigen::VectorXd r0(static_cast<int>(frame.pixels.size()));
            problem.evaluate(p0, r0, nullptr);
            out.initial_residual_norm = r0.norm();
        }
    }

    // object-space values, centroid relative to the ROI center
    const double scale = frame.meta.object_pixel_nm;
    out.object_pixel_nm = scale;
    if (scale > 0.0) {
        out.cx_nm = (out.cx_px - (frame.width - 1) / 2.0) * scale;
        out.cy_nm = (out.cy_px - (frame.height - 1) / 2.0) * scale;
        out.sigma_x_nm = out.sigma_x_px * scale;
        out.sigma_y_nm = out.sigma_y_px * scale;
        const auto cov_std = [&](int idx) {
            const double v = out.covariance(idx, idx);
            return std::isfinite(v) && v > 0.0 ? std::sqrt(v) * scale : 0.0;
        };
        out.cx_error_nm = cov_std(P_CX);
        out.cy_error_nm = cov_std(P_CY);
        out.sigma_x_error_nm = cov_std(P_SX);
        out.sigma_y_error_nm = cov_std(P_SY);
    }
    return out;
}

GaussFit2D fit_gaussian_2d(const Frame& frame, const FitConfig& config) {
    return fit_gaussian_2d(frame, moments_init(frame), config);
}

std::vector<SeriesFitEntry> fit_series(const FrameSeries& series, const FitConfig& config,
                                       int threads) {
    std::vector<SeriesFitEntry> entries(series.frames.size());
    parallel_for(series.frames.size(), threads, [&](std::size_t i) {
        SeriesFitEntry& e = entries[i];
        e.frame_index = i;
        e.timestamp_s = series.frames[i].meta.timestamp_s;
        e.chop = series.frames[i].meta.chop;
        try {
            GaussFit2D fit = fit_gaussian_2d(series.frames[i], config);
            if (!fit.converged) {
                e.error = "fit did not converge";
            } else {
                e.fit = std::move(fit);
            }
        } catch (const Error& err) {
            e.error = err.what();
        }
    });
    return entries;
}

double magnification_from_two_ions(double separation_px, double pixel_pitch_image_um,
                                   double frequency_hz, const IonSpecies& ion) {
    if (!(separation_px > 0.0)) throw InvalidInput("measured separation must be > 0 px");
    if (!(pixel_pitch_image_um > 0.0)) throw InvalidInput("pixel pitch must be > 0 um");
    const double chip_um = separation_px * pixel_pitch_image_um;
    const double object_um = two_ion_separation_um(ion, frequency_hz);
    return chip_um / object_um;
}

} // namespace ionsense
