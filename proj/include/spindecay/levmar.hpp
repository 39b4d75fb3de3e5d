#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace spindecay {

/// Smooth one-parameter bound transforms mapping an unconstrained internal
/// coordinate x to the external parameter theta.
class BoundTransform {
public:
    static BoundTransform free();
    static BoundTransform lower(double lo);
    static BoundTransform upper(double hi);
    static BoundTransform box(double lo, double hi);

    double to_external(double x) const;
    /// d(theta)/dx, for the chain rule on Jacobians.
    double d_external(double x) const;
    /// Inverse map (clamps slightly inside the bounds first).
    double to_internal(double theta) const;

private:
    enum class Kind { Free, Lower, Upper, Box };
    BoundTransform(Kind k, double lo, double hi) : kind_(k), lo_(lo), hi_(hi) {}
    Kind kind_;
    double lo_;
    double hi_;
};

struct LevMarOptions {
    int max_iterations = 200;
    double gradient_tolerance = 1e-10;   // on max |J^T r| in internal coords
    double ftol = 1e-9;                  // relative chi2 decrease
    double xtol = 1e-14;                 // relative internal step size
    double lambda_init = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    double lambda_max = 1e14;
};

struct LevMarSummary {
    Eigen::VectorXd theta;      // external parameters at the optimum
    Eigen::MatrixXd jacobian;   // external-space weighted Jacobian at optimum
    double chi2 = 0.0;          // sum of squared (weighted) residuals
    bool converged = false;
    int iterations = 0;
    std::string reason;
};

/// Residual callback: fills r (and J = dr/dtheta in external coordinates
/// when J != nullptr) at the given external parameter vector.
using ResidualFn =
    std::function<void(const Eigen::VectorXd& theta, Eigen::VectorXd& r, Eigen::MatrixXd* J)>;

/// Dense Levenberg-Marquardt with Marquardt scaling (lambda * diag(JtJ)) and
/// smooth bound transforms.  Deterministic: no randomness, fixed pivoting.
LevMarSummary levmar_solve(const ResidualFn& fn, const Eigen::VectorXd& theta0,
                           const std::vector<BoundTransform>& bounds,
                           const LevMarOptions& opts = {});

struct CovarianceResult {
    Eigen::MatrixXd covariance;
    double condition;  // condition number of J^T J (external coords)
};

/// Covariance of the external parameters from the weighted Jacobian at the
/// optimum.  For unit-variance weighted residuals Cov = (J^T J)^-1; pass
/// scale = chi2/(n-p) to rescale when the weights are not 1/sigma^2.
CovarianceResult levmar_covariance(const Eigen::MatrixXd& jacobian, double scale = 1.0);

}  // namespace spindecay
