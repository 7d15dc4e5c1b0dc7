#pragma once

#include <span>

#include <Eigen/Dense>

namespace ionsense {

/// Nonlinear weighted least-squares problem: minimize sum_i w_i r_i(p)^2
/// with r_i = data_i - model_i(p). Weights may depend on the current
/// parameters (e.g. inverse-variance weights from the model itself).
class LeastSquaresProblem {
public:
    virtual ~LeastSquaresProblem() = default;

    virtual int residual_count() const = 0;
    virtual int parameter_count() const = 0;

    /// Fills residuals (data - model) and, when jacobian != nullptr, the
    /// model derivatives J_ij = d model_i / d p_j. A non-finite residual
    /// marks the point infeasible and the step is rejected.
    virtual void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd& residuals,
                          Eigen::MatrixXd* jacobian) const = 0;

    /// Per-residual weights at p; defaults to unweighted.
    virtual void weights([[maybe_unused]] const Eigen::VectorXd& p, Eigen::VectorXd& w) const {
        w.setOnes(residual_count());
    }
};

struct LmOptions {
    double parameter_tolerance = 1e-8; // relative step size declaring convergence
    int max_iterations = 200;
    double initial_lambda = 1e-3;
    double lambda_up = 10.0;   // on a rejected step
    double lambda_down = 3.0;  // on an accepted step
    double max_lambda = 1e14;
    bool verify_jacobian = false;       // central-difference check at the start point
    double jacobian_check_tol = 1e-4;   // relative mismatch allowed by the check
};

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance; // (J^T W J)^-1 scaled by reduced chi^2
    double chi2 = 0;            // weighted residual sum of squares at the optimum
    double initial_chi2 = 0;
    int iterations = 0;
    bool converged = false;
};

/// Damped least squares: solves (J^T W J + lambda diag(J^T W J)) dp = J^T W r,
/// accepting steps that lower the weighted cost. Converges when every
/// parameter moves by less than parameter_tolerance relative to its
/// magnitude; gives up (converged = false) after max_iterations. Throws
/// FitError when the normal equations are singular at the start point.
LmResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd p0,
                             const LmOptions& options = {});

/// Weighted linear regression y = intercept + slope * u.
struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double slope_error = 0;
    double intercept_error = 0;
    double slope_intercept_cov = 0;
    double chi2 = 0;
    int dof = 0;

    /// Half-width of the confidence band on the fitted line at abscissa u
    /// (z = 1.96 for a nominal 95% band).
    double band_halfwidth(double u, double z = 1.96) const;
};

struct LinearPoint {
    double u = 0;     // control variable
    double y = 0;     // response
    double sigma = 0; // 1-sigma response error; <= 0 means unweighted
};

/// Closed-form weighted straight-line fit. Needs >= 3 points and at least
/// two distinct abscissae.
LinearFit linear_response_fit(std::span<const LinearPoint> points);

} // namespace ionsense
