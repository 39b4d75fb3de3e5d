#include "spindecay/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "spindecay/decay_model.hpp"
#include "spindecay/errors.hpp"
#include "spindecay/levmar.hpp"

namespace spindecay {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTauRatioFloor = 1.5;
constexpr double kConditionCeiling = 1e12;
constexpr std::size_t kMinPositiveBins = 50;
constexpr std::size_t kMinWindowPoints = 20;

BoundTransform make_transform(double lo, double hi) {
    const bool lo_f = std::isfinite(lo);
    const bool hi_f = std::isfinite(hi);
    if (lo_f && hi_f) return BoundTransform::box(lo, hi);
    if (lo_f) return BoundTransform::lower(lo);
    if (hi_f) return BoundTransform::upper(hi);
    return BoundTransform::free();
}

struct WindowedData {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> sw;  // sqrt(weight)
};

WindowedData apply_window(const CurveData& curve, const IrfModel& irf,
                          const FitConfig& cfg) {
    if (curve.t_ns.size() != curve.y.size())
        throw ValidationError("fit: curve t/y length mismatch");
    double lo = irf.t0_ns - 3.0 * irf.s_ns;
    double hi = kInf;
    if (cfg.window_ns) {
        lo = (*cfg.window_ns)[0];
        hi = (*cfg.window_ns)[1];
        if (!(lo < hi)) throw ValidationError("fit: window lo must be < hi");
    }
    WindowedData w;
    for (std::size_t i = 0; i < curve.t_ns.size(); ++i) {
        const double t = curve.t_ns[i];
        if (t < lo || t > hi) continue;
        const double y = curve.y[i];
        w.t.push_back(t);
        w.y.push_back(y);
        w.sw.push_back(cfg.weighting == FitWeighting::poisson
                           ? 1.0 / std::sqrt(std::max(y, 1.0))
                           : 1.0);
    }
    if (w.t.size() < kMinWindowPoints)
        throw ValidationError("fit: window leaves fewer than " +
                              std::to_string(kMinWindowPoints) + " points");
    return w;
}

double pre_rise_baseline(const CurveData& curve, const IrfModel& irf,
                         const WindowedData& w) {
    double sum = 0.0;
    std::size_t n = 0;
    const double cutoff = irf.t0_ns - 3.0 * irf.s_ns;
    for (std::size_t i = 0; i < curve.t_ns.size(); ++i) {
        if (curve.t_ns[i] < cutoff) {
            sum += curve.y[i];
            ++n;
        }
    }
    if (n > 0) return sum / static_cast<double>(n);
    return *std::min_element(w.y.begin(), w.y.end());
}

// Lifetime from a log-linear least-squares slope; falls back to `span` when
// the slope is flat or the segment degenerate.
double slope_lifetime(const std::vector<double>& t, const std::vector<double>& logy,
                      std::size_t lo, std::size_t hi, double span) {
    if (hi - lo < 3) return span;
    double tm = 0.0, lm = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        tm += t[i];
        lm += logy[i];
    }
    const double n = static_cast<double>(hi - lo);
    tm /= n;
    lm /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        sxx += (t[i] - tm) * (t[i] - tm);
        sxy += (t[i] - tm) * (logy[i] - lm);
    }
    if (!(sxx > 0.0)) return span;
    const double slope = sxy / sxx;
    if (!(slope < -1e-12)) return span;
    return std::min(std::max(-1.0 / slope, 1.1e-2), 0.9e5);
}

std::array<double, 5> suggest_biexp_initial(const CurveData& curve, const WindowedData& w,
                                            const IrfModel& irf) {
    const double c0 = pre_rise_baseline(curve, irf, w);
    const std::size_t pk = static_cast<std::size_t>(
        std::max_element(w.y.begin(), w.y.end()) - w.y.begin());
    const double ym = std::max(w.y[pk] - c0, 1e-9);
    const double span = std::max(w.t.back() - w.t[pk], 1.0);

    // Tail region: post-peak points clearly above the baseline.
    const double thresh = std::max(3.0 * std::sqrt(std::max(c0, 1.0)), 1e-9 * ym);
    std::vector<double> tt, ll;
    for (std::size_t i = pk; i < w.t.size(); ++i) {
        const double d = w.y[i] - c0;
        if (d > thresh) {
            tt.push_back(w.t[i]);
            ll.push_back(std::log(d));
        }
    }
    double tau_short, tau_long;
    if (tt.size() < 10) {
        tau_short = span / 10.0;
        tau_long = span / 2.0;
    } else {
        const std::size_t third = tt.size() / 3;
        tau_short = slope_lifetime(tt, ll, 0, third, span / 10.0);
        tau_long = slope_lifetime(tt, ll, tt.size() - third, tt.size(), span / 2.0);
    }
    if (tau_long < 1.5 * tau_short) tau_long = 3.0 * tau_short;
    return {0.5 * ym, 0.5 * ym, tau_long, tau_short, c0};
}

struct CoreFit {
    LevMarSummary summary;
    Eigen::MatrixXd covariance;
    double condition;
    double chi2_reduced;
};

CoreFit run_fit(const WindowedData& w, const ResidualFn& fn,
                const Eigen::VectorXd& theta0, const std::vector<BoundTransform>& bounds,
                const FitConfig& cfg, int n_params) {
    LevMarOptions opts;
    opts.max_iterations = cfg.max_iterations;
    opts.gradient_tolerance = cfg.gradient_tolerance;
    CoreFit out;
    out.summary = levmar_solve(fn, theta0, bounds, opts);
    const double dof =
        static_cast<double>(w.t.size()) - static_cast<double>(n_params);
    out.chi2_reduced = out.summary.chi2 / dof;
    const double scale =
        cfg.weighting == FitWeighting::poisson ? 1.0 : out.summary.chi2 / dof;
    const auto cv = levmar_covariance(out.summary.jacobian, scale);
    out.covariance = cv.covariance;
    out.condition = cv.condition;
    return out;
}

CurveData curve_from_histogram(const DecayHistogram& hist) {
    CurveData c;
    c.t_ns.reserve(hist.size());
    c.y.reserve(hist.size());
    std::size_t positive = 0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        c.t_ns.push_back(hist.bin_center_ns(i));
        const auto n = hist.counts()[i];
        c.y.push_back(static_cast<double>(n));
        if (n > 0) ++positive;
    }
    if (positive < kMinPositiveBins)
        throw ValidationError("fit: histogram has fewer than " +
                              std::to_string(kMinPositiveBins) + " bins with counts");
    return c;
}

}  // namespace

std::array<std::array<double, 2>, 5> FitConfig::default_bounds() {
    return {{{0.0, kInf}, {0.0, kInf}, {1e-2, 1e5}, {1e-2, 1e5}, {-kInf, kInf}}};
}

BiexpFitResult fit_biexp_curve(const CurveData& curve, const IrfModel& irf,
                               const FitConfig& cfg) {
    irf.validate();
    std::size_t positive = 0;
    for (double v : curve.y)
        if (v > 0.0) ++positive;
    if (positive < kMinPositiveBins)
        throw ValidationError("fit: curve has fewer than " +
                              std::to_string(kMinPositiveBins) + " positive points");

    const WindowedData w = apply_window(curve, irf, cfg);
    std::array<double, 5> init =
        cfg.initial_guess ? *cfg.initial_guess : suggest_biexp_initial(curve, w, irf);

    std::vector<BoundTransform> bounds;
    bounds.reserve(5);
    for (const auto& b : cfg.bounds) bounds.push_back(make_transform(b[0], b[1]));

    const auto fn = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r,
                        Eigen::MatrixXd* jac) {
        const BiexpParams p{th[0], th[1], th[2], th[3], th[4]};
        const auto n = static_cast<Eigen::Index>(w.t.size());
        r.resize(n);
        if (jac) jac->resize(n, 5);
        for (Eigen::Index i = 0; i < n; ++i) {
            double m;
            if (jac) {
                std::array<double, 5> g{};
                m = model_eval_grad(p, irf, w.t[i], g);
                for (int j = 0; j < 5; ++j) (*jac)(i, j) = g[j] * w.sw[i];
            } else {
                m = model_eval(p, irf, w.t[i]);
            }
            r[i] = (m - w.y[i]) * w.sw[i];
        }
    };

    Eigen::VectorXd theta0(5);
    for (int i = 0; i < 5; ++i) theta0[i] = init[i];
    const CoreFit fit = run_fit(w, fn, theta0, bounds, cfg, 5);

    BiexpFitResult res;
    res.a_long = fit.summary.theta[0];
    res.a_short = fit.summary.theta[1];
    res.tau1_ns = fit.summary.theta[2];
    res.tau2_ns = fit.summary.theta[3];
    res.c_offset = fit.summary.theta[4];
    res.irf = irf;
    res.chi2_reduced = fit.chi2_reduced;
    res.converged = fit.summary.converged;
    res.iterations = fit.summary.iterations;
    res.condition = fit.condition;

    // Canonical ordering: tau1 is the long component.
    std::array<int, 5> perm{0, 1, 2, 3, 4};
    if (res.tau1_ns < res.tau2_ns) {
        std::swap(res.a_long, res.a_short);
        std::swap(res.tau1_ns, res.tau2_ns);
        perm = {1, 0, 3, 2, 4};
    }
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            res.covariance[i][j] = fit.covariance(perm[i], perm[j]);

    if (res.tau1_ns < kTauRatioFloor * res.tau2_ns)
        throw IllConditionedError(
            "biexp fit degenerate: tau1/tau2 = " + std::to_string(res.tau1_ns / res.tau2_ns) +
            " < 1.5");
    if (!(res.condition < kConditionCeiling))
        throw IllConditionedError("biexp fit degenerate: normal-matrix condition " +
                                  std::to_string(res.condition) + " > 1e12");
    return res;
}

BiexpFitResult fit_biexp_irf(const DecayHistogram& hist, const IrfModel& irf,
                             const FitConfig& cfg) {
    return fit_biexp_curve(curve_from_histogram(hist), irf, cfg);
}

double MonoFitResult::tau_err_ns() const {
    return std::sqrt(std::max(covariance[1][1], 0.0));
}

MonoFitResult fit_mono_curve(const CurveData& curve, const IrfModel& irf,
                             const FitConfig& cfg) {
    irf.validate();
    const WindowedData w = apply_window(curve, irf, cfg);

    const double c0 = pre_rise_baseline(curve, irf, w);
    const std::size_t pk = static_cast<std::size_t>(
        std::max_element(w.y.begin(), w.y.end()) - w.y.begin());
    const double ym = std::max(w.y[pk] - c0, 1e-9);
    const double span = std::max(w.t.back() - w.t[pk], 1.0);
    const double thresh = std::max(3.0 * std::sqrt(std::max(c0, 1.0)), 1e-9 * ym);
    std::vector<double> tt, ll;
    for (std::size_t i = pk; i < w.t.size(); ++i) {
        const double d = w.y[i] - c0;
        if (d > thresh) {
            tt.push_back(w.t[i]);
            ll.push_back(std::log(d));
        }
    }
    const double tau0 = slope_lifetime(tt, ll, 0, tt.size(), span / 3.0);

    std::vector<BoundTransform> bounds{BoundTransform::lower(0.0),
                                       BoundTransform::box(1e-2, 1e5),
                                       BoundTransform::free()};

    const auto fn = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r,
                        Eigen::MatrixXd* jac) {
        const auto n = static_cast<Eigen::Index>(w.t.size());
        r.resize(n);
        if (jac) jac->resize(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            double m;
            if (jac) {
                const auto e = irf_exp_conv_grad(w.t[i], th[1], irf);
                m = th[0] * e.value + th[2];
                (*jac)(i, 0) = e.value * w.sw[i];
                (*jac)(i, 1) = th[0] * e.d_tau * w.sw[i];
                (*jac)(i, 2) = w.sw[i];
            } else {
                m = th[0] * irf_exp_conv(w.t[i], th[1], irf) + th[2];
            }
            r[i] = (m - w.y[i]) * w.sw[i];
        }
    };

    Eigen::VectorXd theta0(3);
    theta0 << ym, tau0, c0;
    const CoreFit fit = run_fit(w, fn, theta0, bounds, cfg, 3);

    MonoFitResult res;
    res.amplitude = fit.summary.theta[0];
    res.tau_ns = fit.summary.theta[1];
    res.c_offset = fit.summary.theta[2];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) res.covariance[i][j] = fit.covariance(i, j);
    res.chi2_reduced = fit.chi2_reduced;
    res.converged = fit.summary.converged;
    res.iterations = fit.summary.iterations;
    res.condition = fit.condition;
    if (!(res.condition < kConditionCeiling))
        throw IllConditionedError("mono fit degenerate: normal-matrix condition " +
                                  std::to_string(res.condition) + " > 1e12");
    return res;
}

MonoFitResult fit_mono_irf(const DecayHistogram& hist, const IrfModel& irf,
                           const FitConfig& cfg) {
    return fit_mono_curve(curve_from_histogram(hist), irf, cfg);
}

LongLifetime extract_long_lifetime(const BiexpFitResult& r) {
    if (!r.converged)
        throw NonConvergenceError("cannot extract lifetime: fit did not converge");
    return {r.tau1_ns, r.tau1_err_ns()};
}

IrfCalibration calibrate_irf(const DecayHistogram& prompt) {
    const std::size_t n = prompt.size();
    std::vector<double> t(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = prompt.bin_center_ns(i);
        y[i] = static_cast<double>(prompt.counts()[i]);
    }
    const double bin = prompt.bin_width_ns();

    // Baseline: mean of the lower half of the sorted counts.
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    double baseline = 0.0;
    const std::size_t half = std::max<std::size_t>(n / 2, 1);
    for (std::size_t i = 0; i < half; ++i) baseline += sorted[i];
    baseline /= static_cast<double>(half);

    const std::size_t pk =
        static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double peak = y[pk];
    if (peak - baseline < 10.0 * std::sqrt(baseline + 1.0))
        throw CalibrationError("no discernible pulse above the baseline");

    // Background-subtracted mass and its moments.
    double total = 0.0, mmax = 0.0, tbar = 0.0;
    std::vector<double> mass(n);
    for (std::size_t i = 0; i < n; ++i) {
        mass[i] = std::max(y[i] - baseline, 0.0);
        total += mass[i];
        mmax = std::max(mmax, mass[i]);
        tbar += mass[i] * t[i];
    }
    if (!(total > 0.0)) throw CalibrationError("no discernible pulse above the baseline");
    tbar /= total;

    if (mmax >= 0.9 * total) {
        // Essentially all the light in one bin: the width is unresolved.
        IrfCalibration cal;
        cal.irf = IrfModel{bin / std::sqrt(12.0), t[pk]};
        cal.amplitude = peak - baseline;
        cal.baseline = baseline;
        cal.s_err_ns = bin;
        cal.t0_err_ns = 0.5 * bin;
        cal.resolution_limited = true;
        return cal;
    }

    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += mass[i] * (t[i] - tbar) * (t[i] - tbar);
    var /= total;
    const double s0 = std::max(std::sqrt(var), bin / std::sqrt(12.0));

    std::vector<double> sw(n);
    for (std::size_t i = 0; i < n; ++i) sw[i] = 1.0 / std::sqrt(std::max(y[i], 1.0));

    // Gaussian + flat background, parameters (amp, t0, s, base).
    const auto fn = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r,
                        Eigen::MatrixXd* jac) {
        const double amp = th[0], t0 = th[1], s = th[2], base = th[3];
        r.resize(static_cast<Eigen::Index>(n));
        if (jac) jac->resize(static_cast<Eigen::Index>(n), 4);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = t[i] - t0;
            const double g = std::exp(-u * u / (2.0 * s * s));
            const double m = amp * g + base;
            if (jac) {
                (*jac)(i, 0) = g * sw[i];
                (*jac)(i, 1) = amp * g * u / (s * s) * sw[i];
                (*jac)(i, 2) = amp * g * u * u / (s * s * s) * sw[i];
                (*jac)(i, 3) = sw[i];
            }
            r[static_cast<Eigen::Index>(i)] = (m - y[i]) * sw[i];
        }
    };

    std::vector<BoundTransform> bounds{
        BoundTransform::lower(0.0), BoundTransform::free(),
        BoundTransform::lower(bin / 100.0), BoundTransform::free()};
    Eigen::VectorXd theta0(4);
    theta0 << peak - baseline, tbar, s0, baseline;

    LevMarOptions opts;
    const LevMarSummary sum = levmar_solve(fn, theta0, bounds, opts);
    if (!sum.converged)
        throw CalibrationError("IRF Gaussian fit did not converge: " + sum.reason);
    const auto cv = levmar_covariance(sum.jacobian, 1.0);

    IrfCalibration cal;
    cal.amplitude = sum.theta[0];
    cal.irf = IrfModel{sum.theta[2], sum.theta[1]};
    cal.baseline = sum.theta[3];
    cal.t0_err_ns = std::sqrt(std::max(cv.covariance(1, 1), 0.0));
    cal.s_err_ns = std::sqrt(std::max(cv.covariance(2, 2), 0.0));
    cal.chi2_reduced = sum.chi2 / (static_cast<double>(n) - 4.0);
    cal.resolution_limited = sum.theta[2] < 0.5 * bin;
    return cal;
}

}  // namespace spindecay
