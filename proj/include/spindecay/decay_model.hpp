#pragma once

#include <array>

#include "spindecay/types.hpp"

namespace spindecay {

/// Scaled complementary error function exp(z^2) * erfc(z), finite for all
/// z >= 0 (direct evaluation up to z = 26, asymptotic series beyond).
double erfcx(double z);

/// Exponential decay exp(-t/tau) convolved with a normalized Gaussian IRF of
/// width s centered at t0:
///   E(t; tau) = 1/2 * exp(s^2/(2 tau^2) - (t - t0)/tau)
///             * erfc( (s/tau - (t - t0)/s) / sqrt(2) ).
/// Evaluated in a cancellation-free form that never overflows for valid
/// inputs (tau > 0, s > 0).
double irf_exp_conv(double t, double tau, const IrfModel& irf);

/// E and its analytic derivative with respect to tau.
struct ExpConv {
    double value;
    double d_tau;
};
ExpConv irf_exp_conv_grad(double t, double tau, const IrfModel& irf);

/// Biexponential reconvolution model parameters, canonical order
/// (a_long, a_short, tau1, tau2, c) with tau1 the long component.
struct BiexpParams {
    double a_long;
    double a_short;
    double tau1_ns;
    double tau2_ns;
    double c_offset;
};

/// m(t) = a_long * E(t; tau1) + a_short * E(t; tau2) + c.
/// Throws ValidationError for non-positive tau or s and on non-finite output.
double model_eval(const BiexpParams& p, const IrfModel& irf, double t);

/// Value plus gradient in the canonical parameter order.
double model_eval_grad(const BiexpParams& p, const IrfModel& irf, double t,
                       std::array<double, 5>& grad);

}  // namespace spindecay
