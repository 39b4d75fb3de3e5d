#include "spindecay/levmar.hpp"

#include <cmath>
#include <limits>

#include "spindecay/errors.hpp"

namespace spindecay {

namespace {

double softplus(double x) {
    // log(1 + e^x) without overflow.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inv(double y) {
    // Inverse of softplus for y > 0.
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

BoundTransform BoundTransform::free() {
    return {Kind::Free, 0.0, 0.0};
}
BoundTransform BoundTransform::lower(double lo) {
    return {Kind::Lower, lo, 0.0};
}
BoundTransform BoundTransform::upper(double hi) {
    return {Kind::Upper, 0.0, hi};
}
BoundTransform BoundTransform::box(double lo, double hi) {
    if (!(lo < hi)) throw ValidationError("bound transform: lo must be < hi");
    return {Kind::Box, lo, hi};
}

double BoundTransform::to_external(double x) const {
    switch (kind_) {
        case Kind::Free: return x;
        case Kind::Lower: return lo_ + softplus(x);
        case Kind::Upper: return hi_ - softplus(-x);
        case Kind::Box: return lo_ + (hi_ - lo_) * sigmoid(x);
    }
    return x;
}

double BoundTransform::d_external(double x) const {
    switch (kind_) {
        case Kind::Free: return 1.0;
        case Kind::Lower: return sigmoid(x);
        case Kind::Upper: return sigmoid(-x);
        case Kind::Box: {
            const double s = sigmoid(x);
            return (hi_ - lo_) * s * (1.0 - s);
        }
    }
    return 1.0;
}

double BoundTransform::to_internal(double theta) const {
    switch (kind_) {
        case Kind::Free: return theta;
        case Kind::Lower: return softplus_inv(std::max(theta - lo_, 1e-12));
        case Kind::Upper: return -softplus_inv(std::max(hi_ - theta, 1e-12));
        case Kind::Box: {
            const double w = hi_ - lo_;
            double p = (theta - lo_) / w;
            p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
            return std::log(p / (1.0 - p));
        }
    }
    return theta;
}

LevMarSummary levmar_solve(const ResidualFn& fn, const Eigen::VectorXd& theta0,
                           const std::vector<BoundTransform>& bounds,
                           const LevMarOptions& opts) {
    const auto p = static_cast<Eigen::Index>(theta0.size());
    if (static_cast<Eigen::Index>(bounds.size()) != p)
        throw ValidationError("levmar: bounds size must match parameter count");

    Eigen::VectorXd x(p);
    for (Eigen::Index i = 0; i < p; ++i) x[i] = bounds[i].to_internal(theta0[i]);

    auto externalize = [&](const Eigen::VectorXd& xi) {
        Eigen::VectorXd th(p);
        for (Eigen::Index i = 0; i < p; ++i) th[i] = bounds[i].to_external(xi[i]);
        return th;
    };

    Eigen::VectorXd theta = externalize(x);
    Eigen::VectorXd r;
    Eigen::MatrixXd jext;
    fn(theta, r, &jext);
    if (jext.cols() != p || jext.rows() != r.size())
        throw ValidationError("levmar: Jacobian shape mismatch");

    auto internal_jacobian = [&](const Eigen::VectorXd& xi) {
        Eigen::MatrixXd jint = jext;
        for (Eigen::Index i = 0; i < p; ++i) jint.col(i) *= bounds[i].d_external(xi[i]);
        return jint;
    };

    LevMarSummary out;
    double chi2 = r.squaredNorm();
    double lambda = opts.lambda_init;
    int iter = 0;
    int ftol_hits = 0;  // consecutive accepted steps with tiny chi2 decrease
    std::string reason;
    bool converged = false;

    while (iter < opts.max_iterations) {
        ++iter;
        const Eigen::MatrixXd jint = internal_jacobian(x);
        const Eigen::VectorXd g = jint.transpose() * r;
        if (g.cwiseAbs().maxCoeff() < opts.gradient_tolerance * std::max(1.0, chi2)) {
            converged = true;
            reason = "gradient tolerance";
            break;
        }
        Eigen::MatrixXd a = jint.transpose() * jint;
        Eigen::VectorXd diag = a.diagonal();
        const double dmax = diag.maxCoeff();
        for (Eigen::Index i = 0; i < p; ++i)
            diag[i] = std::max(diag[i], std::max(dmax, 1.0) * 1e-14);

        bool accepted = false;
        Eigen::VectorXd delta(p);
        while (!accepted) {
            Eigen::MatrixXd m = a;
            m.diagonal() += lambda * diag;
            delta = m.ldlt().solve(-g);
            if (delta.allFinite()) {
                const Eigen::VectorXd x_try = x + delta;
                const Eigen::VectorXd theta_try = externalize(x_try);
                Eigen::VectorXd r_try;
                fn(theta_try, r_try, nullptr);
                const double chi2_try = r_try.squaredNorm();
                if (std::isfinite(chi2_try) && chi2_try <= chi2) {
                    const double rel_dec = (chi2 - chi2_try) / std::max(chi2, 1e-300);
                    x = x_try;
                    theta = theta_try;
                    fn(theta, r, &jext);
                    chi2 = r.squaredNorm();
                    lambda = std::max(lambda * opts.lambda_down, 1e-14);
                    accepted = true;
                    ftol_hits = rel_dec < opts.ftol ? ftol_hits + 1 : 0;
                    if (chi2 < 1e-300) {
                        converged = true;
                        reason = "chi2 underflow";
                    } else if (ftol_hits >= 2) {
                        // Two consecutive negligible decreases: a single tiny
                        // accepted step right after heavy damping is not proof
                        // of convergence, but a sustained flat stretch is.
                        converged = true;
                        reason = "ftol";
                    } else if (delta.norm() < opts.xtol * (x.norm() + opts.xtol)) {
                        converged = true;
                        reason = "xtol";
                    }
                    break;
                }
            }
            lambda *= opts.lambda_up;
            if (lambda > opts.lambda_max) break;
        }
        if (converged) break;
        if (!accepted) {
            reason = "stalled (no improving step)";
            break;
        }
    }

    if (!converged && reason.empty()) reason = "max iterations";

    out.theta = theta;
    out.jacobian = jext;
    out.chi2 = chi2;
    out.converged = converged;
    out.iterations = iter;
    out.reason = reason;
    return out;
}

CovarianceResult levmar_covariance(const Eigen::MatrixXd& jacobian, double scale) {
    const Eigen::MatrixXd h = jacobian.transpose() * jacobian;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success)
        throw IllConditionedError("covariance: eigendecomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues();
    const double ev_max = ev.maxCoeff();
    const double ev_min = ev.minCoeff();
    double condition;
    if (!(ev_max > 0.0))
        condition = std::numeric_limits<double>::infinity();
    else if (ev_min <= 0.0)
        condition = std::numeric_limits<double>::infinity();
    else
        condition = ev_max / ev_min;
    // Pseudo-inverse with a floor so the covariance stays finite (and huge)
    // even when the Hessian is numerically singular.
    const double floor = std::max(ev_max, 1e-300) * 1e-250;
    Eigen::VectorXd inv_ev(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        inv_ev[i] = 1.0 / std::max(ev[i], floor);
    CovarianceResult out;
    out.covariance =
        scale * es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    out.condition = condition;
    return out;
}

}  // namespace spindecay
