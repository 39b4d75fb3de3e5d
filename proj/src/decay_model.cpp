#include "spindecay/decay_model.hpp"

#include <cmath>
#include <numbers>

#include "spindecay/errors.hpp"

namespace spindecay {

namespace {
const double kSqrt2 = std::numbers::sqrt2;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

void check_positive_tau_s(double tau, const IrfModel& irf) {
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw ValidationError("decay model: tau must be positive and finite");
    if (!(irf.s_ns > 0.0) || !std::isfinite(irf.s_ns) || !std::isfinite(irf.t0_ns))
        throw ValidationError("decay model: IRF requires s > 0 and finite t0");
}
}  // namespace

double erfcx(double z) {
    if (z < 0.0) {
        // Only needed for completeness; grows like 2*exp(z^2).
        return 2.0 * std::exp(z * z) - erfcx(-z);
    }
    if (z <= 26.0) return std::exp(z * z) * std::erfc(z);
    // Asymptotic expansion 1/(z sqrt(pi)) * sum (-1)^k (2k-1)!! / (2 z^2)^k.
    const double inv2z2 = 1.0 / (2.0 * z * z);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 8; ++k) {
        term *= -static_cast<double>(2 * k - 1) * inv2z2;
        sum += term;
    }
    return sum / (z * std::sqrt(std::numbers::pi));
}

double irf_exp_conv(double t, double tau, const IrfModel& irf) {
    check_positive_tau_s(tau, irf);
    const double s = irf.s_ns;
    const double u = t - irf.t0_ns;
    const double z = (s / tau - u / s) / kSqrt2;
    double e;
    if (z > 0.0) {
        // a - z^2 = -u^2/(2 s^2) with a = s^2/(2 tau^2) - u/tau, so
        // E = 1/2 exp(-u^2/(2 s^2)) erfcx(z): both factors bounded.
        e = 0.5 * std::exp(-u * u / (2.0 * s * s)) * erfcx(z);
    } else {
        // z <= 0 implies u >= s^2/tau, so the exponent is <= -s^2/(2 tau^2).
        e = 0.5 * std::exp(s * s / (2.0 * tau * tau) - u / tau) * std::erfc(z);
    }
    if (!std::isfinite(e))
        throw ValidationError("decay model: non-finite convolution value");
    return e;
}

ExpConv irf_exp_conv_grad(double t, double tau, const IrfModel& irf) {
    const double e = irf_exp_conv(t, tau, irf);
    const double s = irf.s_ns;
    const double u = t - irf.t0_ns;
    const double gauss = std::exp(-u * u / (2.0 * s * s));
    // dE/dtau = (u/tau^2 - s^2/tau^3) E + s/(tau^2 sqrt(2 pi)) exp(-u^2/(2 s^2)).
    const double d = (u / (tau * tau) - s * s / (tau * tau * tau)) * e +
                     s * kInvSqrt2Pi / (tau * tau) * gauss;
    return {e, d};
}

double model_eval(const BiexpParams& p, const IrfModel& irf, double t) {
    const double m = p.a_long * irf_exp_conv(t, p.tau1_ns, irf) +
                     p.a_short * irf_exp_conv(t, p.tau2_ns, irf) + p.c_offset;
    if (!std::isfinite(m))
        throw ValidationError("decay model: non-finite model value");
    return m;
}

double model_eval_grad(const BiexpParams& p, const IrfModel& irf, double t,
                       std::array<double, 5>& grad) {
    const auto e1 = irf_exp_conv_grad(t, p.tau1_ns, irf);
    const auto e2 = irf_exp_conv_grad(t, p.tau2_ns, irf);
    grad[0] = e1.value;
    grad[1] = e2.value;
    grad[2] = p.a_long * e1.d_tau;
    grad[3] = p.a_short * e2.d_tau;
    grad[4] = 1.0;
    const double m = p.a_long * e1.value + p.a_short * e2.value + p.c_offset;
    if (!std::isfinite(m))
        throw ValidationError("decay model: non-finite model value");
    return m;
}

}  // namespace spindecay
