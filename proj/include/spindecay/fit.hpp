#pragma once

#include <array>
#include <optional>
#include <vector>

#include "spindecay/types.hpp"

namespace spindecay {

enum class FitWeighting { poisson, uniform };

/// Fit controls.  Defaults: Poisson weights 1/max(y,1), fit window from
/// t0 - 3s to the end of the record, automatic initial guesses (baseline
/// from the pre-rise mean, lifetimes from log-linear slopes of the early
/// and late tail thirds, amplitudes split evenly from the peak).
struct FitConfig {
    int max_iterations = 1000;
    double gradient_tolerance = 1e-10;
    FitWeighting weighting = FitWeighting::poisson;
    /// Canonical order (a_long, a_short, tau1, tau2, c).
    std::optional<std::array<double, 5>> initial_guess;
    /// {lo, hi} in ns; either may be +/-inf.
    std::optional<std::array<double, 2>> window_ns;
    /// {lo, hi} per parameter; +/-inf for open ends.  Defaults:
    /// amplitudes >= 0, lifetimes in [1e-2, 1e5] ns, offset free.
    std::array<std::array<double, 2>, 5> bounds = default_bounds();

    static std::array<std::array<double, 2>, 5> default_bounds();
};

/// Double-valued decay curve (bin centers + values); the fitting backend for
/// both measured histograms and noiseless oracle curves.
struct CurveData {
    std::vector<double> t_ns;
    std::vector<double> y;
};

/// Biexponential reconvolution fit with fixed IRF.  Throws
/// IllConditionedError when the optimum has tau1/tau2 < 1.5 or the normal
/// matrix condition exceeds 1e12; returns converged=false (never throws) on
/// hitting the iteration limit.
BiexpFitResult fit_biexp_irf(const DecayHistogram& hist, const IrfModel& irf,
                             const FitConfig& cfg = {});
BiexpFitResult fit_biexp_curve(const CurveData& curve, const IrfModel& irf,
                               const FitConfig& cfg = {});

/// Single-exponential reconvolution fit (fallback for degenerate data).
struct MonoFitResult {
    double amplitude = 0.0;
    double tau_ns = 0.0;
    double c_offset = 0.0;
    std::array<std::array<double, 3>, 3> covariance{};
    double chi2_reduced = 0.0;
    bool converged = false;
    int iterations = 0;
    double condition = 0.0;

    double tau_err_ns() const;
};
MonoFitResult fit_mono_irf(const DecayHistogram& hist, const IrfModel& irf,
                           const FitConfig& cfg = {});
MonoFitResult fit_mono_curve(const CurveData& curve, const IrfModel& irf,
                             const FitConfig& cfg = {});

struct LongLifetime {
    double tau_ns;
    double err_ns;
};

/// Long component and its 1-sigma error from the covariance.  Throws
/// NonConvergenceError if the fit did not converge.
LongLifetime extract_long_lifetime(const BiexpFitResult& r);

/// Gaussian fit of a measured prompt (scatter) histogram.
struct IrfCalibration {
    IrfModel irf{};
    double amplitude = 0.0;
    double baseline = 0.0;
    double s_err_ns = 0.0;
    double t0_err_ns = 0.0;
    double chi2_reduced = 0.0;
    /// True when the pulse is too narrow to resolve (dominant single bin or
    /// fitted width below half a bin); s is then a bin-width-limited bound.
    bool resolution_limited = false;
};

/// Estimates (s, t0) from a prompt histogram.  Throws CalibrationError when
/// no pulse stands out of the baseline or the Gaussian fit fails.
IrfCalibration calibrate_irf(const DecayHistogram& prompt);

}  // namespace spindecay
