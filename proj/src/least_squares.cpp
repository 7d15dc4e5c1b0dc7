#include "ionsense/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ionsense/errors.hpp"

namespace ionsense {

namespace {

double weighted_cost(const Eigen::VectorXd& r, const Eigen::VectorXd& w) {
    double c = 0.0;
    for (int i = 0; i < r.size(); ++i) c += w[i] * r[i] * r[i];
    return c;
}

bool all_finite(const Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

void check_jacobian(const LeastSquaresProblem& problem, const Eigen::VectorXd& p,
                    const Eigen::MatrixXd& analytic, double tol) {
    const int n = problem.residual_count();
    const int m = problem.parameter_count();
    Eigen::VectorXd rp(n), rm(n);
    for (int j = 0; j < m; ++j) {
        // absolute floor keeps the central difference above rounding noise
        // for parameters sitting at or near zero
        const double h = 1e-6 * std::abs(p[j]) + 1e-6;
        Eigen::VectorXd pp = p, pm = p;
        pp[j] += h;
        pm[j] -= h;
        problem.evaluate(pp, rp, nullptr);
        problem.evaluate(pm, rm, nullptr);
        // entries far below the column scale are finite-difference noise
        double col_scale = 1e-6;
        for (int i = 0; i < n; ++i) col_scale = std::max(col_scale, std::abs(analytic(i, j)));
        double max_rel = 0.0;
        for (int i = 0; i < n; ++i) {
            // residual = data - model, so d r / d p = -J
            const double fd = -(rp[i] - rm[i]) / (2.0 * h);
            const double an = analytic(i, j);
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-4 * col_scale});
            max_rel = std::max(max_rel, std::abs(fd - an) / scale);
        }
        if (max_rel > tol) {
            throw FitError("analytic Jacobian disagrees with finite differences on parameter " +
                           std::to_string(j) + " (rel " + std::to_string(max_rel) + ")");
        }
    }
}

} // namespace

LmResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd p,
                             const LmOptions& options) {
    const int n = problem.residual_count();
    const int m = problem.parameter_count();
    if (n < m) throw FitError("least squares needs at least as many residuals as parameters");

    Eigen::VectorXd r(n), w(n);
    Eigen::MatrixXd J(n, m);

    problem.evaluate(p, r, &J);
    if (!all_finite(r)) throw FitError("least squares start point is infeasible");
    if (options.verify_jacobian) check_jacobian(problem, p, J, options.jacobian_check_tol);
    problem.weights(p, w);

    double cost = weighted_cost(r, w);
    const double initial_cost = cost;

    double lambda = options.initial_lambda;
    bool converged = false;
    int iter = 0;

    Eigen::VectorXd r_try(n);

    for (; iter < options.max_iterations && !converged; ++iter) {
        const Eigen::MatrixXd JtW = J.transpose() * w.asDiagonal();
        const Eigen::MatrixXd H = JtW * J;
        const Eigen::VectorXd g = JtW * r;

        // damping floored at a fraction of the largest curvature so flat
        // directions (e.g. the rotation angle of a circular spot) stay damped
        double max_diag = 0.0;
        for (int d = 0; d < m; ++d) max_diag = std::max(max_diag, H(d, d));
        const double damp_floor = max_diag > 0.0 ? 1e-9 * max_diag : 1.0;

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd A = H;
            for (int d = 0; d < m; ++d) {
                const double diag = H(d, d);
                A(d, d) = diag + lambda * std::max(diag, damp_floor);
            }
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
            if (ldlt.info() != Eigen::Success) {
                lambda *= options.lambda_up;
                if (lambda > options.max_lambda) {
                    throw FitError("singular normal equations in least-squares step");
                }
                continue;
            }
            const Eigen::VectorXd step = ldlt.solve(g);
            if (!all_finite(step)) {
                lambda *= options.lambda_up;
                if (lambda > options.max_lambda) {
                    throw FitError("singular normal equations in least-squares step");
                }
                continue;
            }

            const Eigen::VectorXd p_try = p + step;
            problem.evaluate(p_try, r_try, nullptr);
            // judge the trial under the weights the step was derived from;
            // reweighting inside the comparison makes the target drift and the
            // iteration can jitter around the optimum forever
            double cost_try = std::numeric_limits<double>::infinity();
            if (all_finite(r_try)) {
                cost_try = weighted_cost(r_try, w);
            }

            if (cost_try < cost) {
                // converged when every parameter moved by < tol relative to itself
                converged = true;
                for (int d = 0; d < m; ++d) {
                    if (std::abs(step[d]) > options.parameter_tolerance *
                                                 (std::abs(p[d]) + options.parameter_tolerance)) {
                        converged = false;
                        break;
                    }
                }
                p = p_try;
                problem.evaluate(p, r, &J);
                problem.weights(p, w);
                cost = weighted_cost(r, w);
                lambda = std::max(lambda / options.lambda_down, 1e-12);
                accepted = true;
            } else {
                // a sub-tolerance step that cannot improve the cost means the
                // current point already is a numerical optimum
                bool tiny = true;
                for (int d = 0; d < m; ++d) {
                    if (std::abs(step[d]) > options.parameter_tolerance *
                                                (std::abs(p[d]) + options.parameter_tolerance)) {
                        tiny = false;
                        break;
                    }
                }
                if (tiny) {
                    accepted = true;
                    converged = true;
                    break;
                }
                lambda *= options.lambda_up;
                if (lambda > options.max_lambda) {
                    // cannot improve further; treat the current point as final
                    accepted = true;
                    converged = false;
                    iter = options.max_iterations;
                }
            }
        }
    }

    LmResult out;
    out.params = p;
    out.chi2 = cost;
    out.initial_chi2 = initial_cost;
    out.iterations = iter;
    out.converged = converged;

    // covariance = (J^T W J)^-1 * reduced chi^2 at the optimum
    const Eigen::MatrixXd H = J.transpose() * w.asDiagonal() * J;
    const int dof = n - m;
    const double scale = dof > 0 ? cost / dof : 1.0;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() == Eigen::Success) {
        out.covariance = ldlt.solve(Eigen::MatrixXd::Identity(m, m)) * scale;
    } else {
        out.covariance = Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

double LinearFit::band_halfwidth(double u, double z) const {
    const double var = intercept_error * intercept_error +
                       2.0 * u * slope_intercept_cov +
                       u * u * slope_error * slope_error;
    return z * std::sqrt(std::max(var, 0.0));
}

LinearFit linear_response_fit(std::span<const LinearPoint> points) {
    if (points.size() < 3) throw InvalidInput("linear response fit needs at least 3 points");

    bool weighted = true;
    for (const auto& pt : points) {
        if (!(pt.sigma > 0.0)) weighted = false;
    }

    double s = 0, su = 0, suu = 0, sy = 0, suy = 0;
    double umin = points[0].u, umax = points[0].u;
    for (const auto& pt : points) {
        const double w = weighted ? 1.0 / (pt.sigma * pt.sigma) : 1.0;
        s += w;
        su += w * pt.u;
        suu += w * pt.u * pt.u;
        sy += w * pt.y;
        suy += w * pt.u * pt.y;
        umin = std::min(umin, pt.u);
        umax = std::max(umax, pt.u);
    }
    if (umin == umax) throw FitError("linear response fit: degenerate abscissa (all points at one control value)");

    const double det = s * suu - su * su;
    if (!(det > 0.0) || !std::isfinite(det)) {
        throw FitError("linear response fit: singular normal equations");
    }

    LinearFit out;
    out.intercept = (suu * sy - su * suy) / det;
    out.slope = (s * suy - su * sy) / det;
    out.dof = static_cast<int>(points.size()) - 2;

    double chi2 = 0.0;
    for (const auto& pt : points) {
        const double r = pt.y - (out.intercept + out.slope * pt.u);
        const double w = weighted ? 1.0 / (pt.sigma * pt.sigma) : 1.0;
        chi2 += w * r * r;
    }
    out.chi2 = chi2;

    // unweighted fits scale the covariance by the residual variance
    const double scale = weighted ? 1.0 : (out.dof > 0 ? chi2 / out.dof : 1.0);
    out.intercept_error = std::sqrt(suu / det * scale);
    out.slope_error = std::sqrt(s / det * scale);
    out.slope_intercept_cov = -su / det * scale;
    return out;
}

} // namespace ionsense
