#include "spindecay/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spindecay/errors.hpp"
#include "spindecay/rng.hpp"

namespace spindecay {

namespace {

constexpr double kTauFloorNs = 0.1;
constexpr double kMaxStepFraction = 0.05;

struct SampledTaus {
    double up;
    double down;
};

// Truncated-normal lifetimes: redraw anything below the 0.1 ns floor.
SampledTaus sample_taus(const SpinModelParams& p, RandomStream& rng) {
    SampledTaus out{p.tau_up_mean_ns, p.tau_down_mean_ns};
    if (p.sigma_tau_ns > 0.0) {
        do {
            out.up = rng.normal(p.tau_up_mean_ns, p.sigma_tau_ns);
        } while (out.up < kTauFloorNs);
        do {
            out.down = rng.normal(p.tau_down_mean_ns, p.sigma_tau_ns);
        } while (out.down < kTauFloorNs);
    }
    return out;
}

// sin(x)/x with the small-x series so expected_decay is smooth through w=0.
double sinc(double x) {
    if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

struct StepContext {
    double dt;
    double horizon;
    std::size_t n_bins;
    double rate_up;
    double rate_down;
};

StepContext make_context(const SimRun& run, const SampledTaus& taus, double omega) {
    StepContext ctx{};
    ctx.horizon = resolve_horizon(run.params);
    ctx.dt = resolve_dt(run.params, taus.up, taus.down, omega);
    if (run.params.bin_width_ns < ctx.dt)
        throw ValidationError("bin_width_ns must be >= the integration step dt");
    // Thinning guard: p_up + p_down = 1, so the instantaneous rate never
    // exceeds 1/min(tau).  Reject steps that would decay >5% per step.
    const double max_fraction = ctx.dt / std::min(taus.up, taus.down);
    if (max_fraction > kMaxStepFraction)
        throw SimulationGuardError(
            "dt_ns too large: max per-step decay fraction " + std::to_string(max_fraction) +
            " exceeds the 5% thinning guard");
    ctx.n_bins = static_cast<std::size_t>(std::ceil(ctx.horizon / run.params.bin_width_ns));
    if (ctx.n_bins < 2)
        throw ValidationError("horizon/bin_width gives fewer than 2 bins");
    ctx.rate_up = 1.0 / taus.up;
    ctx.rate_down = 1.0 / taus.down;
    return ctx;
}

AcquisitionMeta make_meta(const SimRun& run, const SampledTaus& taus) {
    AcquisitionMeta meta;
    meta.field = run.geometry;
    meta.polarization = run.polarization;
    meta.seed = run.seed;
    meta.label = run.label;
    meta.sampled_tau_up_ns = taus.up;
    meta.sampled_tau_down_ns = taus.down;
    return meta;
}

}  // namespace

Occupancy occupancy(double phi0, double omega, double t) {
    const double c = std::cos(omega * t + phi0);
    const double p_up = c * c;
    return {p_up, 1.0 - p_up};
}

double larmor_frequency(const FieldGeometry& g, double gamma_rad_per_ns_gauss) {
    return gamma_rad_per_ns_gauss * transverse_field(g);
}

double resolve_dt(const SpinModelParams& p, double tau_up, double tau_down, double omega) {
    if (p.dt_ns > 0.0) return p.dt_ns;
    double dt = std::min(tau_up, tau_down) / 200.0;
    if (omega > 0.0) {
        const double period = 2.0 * std::numbers::pi / omega;
        dt = std::min(dt, period / 50.0);
    }
    // Snap down so dt divides the bin width exactly.  Emissions are
    // accumulated into the bin containing the step start, so a fractional
    // steps-per-bin ratio would alias whole steps across bin boundaries --
    // a periodic count bias far larger than Poisson noise.  Snapping only
    // shrinks dt, so the decay/precession resolution bounds still hold.
    const double steps_per_bin = std::ceil(p.bin_width_ns / dt - 1e-12);
    return p.bin_width_ns / steps_per_bin;
}

double resolve_horizon(const SpinModelParams& p) {
    if (p.horizon_ns > 0.0) return p.horizon_ns;
    return 10.0 * std::max(p.tau_up_mean_ns, p.tau_down_mean_ns);
}

DecayHistogram simulate_decay(const SimRun& run) {
    run.params.validate();
    run.geometry.validate();
    RandomStream rng(mix_seed(run.seed, {0x5349'4d00ULL}));
    const SampledTaus taus = sample_taus(run.params, rng);
    const double omega = larmor_frequency(run.geometry, run.params.gamma_rad_per_ns_gauss);
    const double phi0 = initial_phase(run.polarization);
    const StepContext ctx = make_context(run, taus, omega);

    std::vector<std::uint64_t> bins(ctx.n_bins, 0);
    std::uint64_t n = run.params.n0;
    for (std::uint64_t k = 0; n > 0; ++k) {
        const double t = static_cast<double>(k) * ctx.dt;
        if (t >= ctx.horizon) break;
        const auto occ = occupancy(phi0, omega, t);
        const double lambda =
            static_cast<double>(n) * (occ.p_up * ctx.rate_up + occ.p_down * ctx.rate_down) *
            ctx.dt;
        std::uint64_t d = rng.poisson(lambda);
        if (d > n) d = n;
        if (d > 0) {
            // The +1e-9 bin guard keeps boundary-aligned steps (dt divides
            // the bin width on the auto path) from landing one bin low when
            // k*dt rounds a few ulps under the boundary.
            std::size_t idx =
                static_cast<std::size_t>(t / run.params.bin_width_ns + 1e-9);
            if (idx >= ctx.n_bins) idx = ctx.n_bins - 1;
            bins[idx] += d;
            n -= d;
        }
    }
    return DecayHistogram(run.params.bin_width_ns, 0.0, std::move(bins),
                          make_meta(run, taus));
}

DecayHistogram simulate_with_irf(const SimRun& run, const IrfModel& irf) {
    run.params.validate();
    run.geometry.validate();
    irf.validate();
    if (irf.s_ns < run.params.bin_width_ns / 10.0)
        throw ValidationError("IRF width must be >= bin_width/10 for jitter sampling");
    RandomStream rng(mix_seed(run.seed, {0x5349'4d00ULL}));
    const SampledTaus taus = sample_taus(run.params, rng);
    const double omega = larmor_frequency(run.geometry, run.params.gamma_rad_per_ns_gauss);
    const double phi0 = initial_phase(run.polarization);
    const StepContext ctx = make_context(run, taus, omega);

    std::vector<std::uint64_t> bins(ctx.n_bins, 0);
    std::uint64_t n = run.params.n0;
    for (std::uint64_t k = 0; n > 0; ++k) {
        const double t = static_cast<double>(k) * ctx.dt;
        if (t >= ctx.horizon) break;
        const auto occ = occupancy(phi0, omega, t);
        const double lambda =
            static_cast<double>(n) * (occ.p_up * ctx.rate_up + occ.p_down * ctx.rate_down) *
            ctx.dt;
        std::uint64_t d = rng.poisson(lambda);
        if (d > n) d = n;
        n -= d;
        for (std::uint64_t e = 0; e < d; ++e) {
            const double td = t + irf.t0_ns + irf.s_ns * rng.normal();
            if (td < 0.0 || td >= ctx.horizon) continue;  // outside the record
            std::size_t idx = static_cast<std::size_t>(td / run.params.bin_width_ns);
            if (idx >= ctx.n_bins) idx = ctx.n_bins - 1;
            bins[idx] += 1;
        }
    }
    return DecayHistogram(run.params.bin_width_ns, 0.0, std::move(bins),
                          make_meta(run, taus));
}

double expected_decay(const SpinModelParams& p, const FieldGeometry& g, double phi0,
                      double t_ns) {
    p.validate();
    if (t_ns < 0.0) throw ValidationError("expected_decay: t must be >= 0");
    const double r_up = 1.0 / p.tau_up_mean_ns;
    const double r_dn = 1.0 / p.tau_down_mean_ns;
    const double w = larmor_frequency(g, p.gamma_rad_per_ns_gauss);
    // Integral of r(t') dt' over [0, t] using
    // sin(2(wt+phi0)) - sin(2 phi0) = 2 cos(wt + 2 phi0) sin(wt):
    // I = t*(r_up+r_dn)/2 + (r_up-r_dn)/2 * cos(wt + 2 phi0) * t * sinc(wt).
    const double integral =
        0.5 * t_ns * (r_up + r_dn) +
        0.5 * (r_up - r_dn) * std::cos(w * t_ns + 2.0 * phi0) * t_ns * sinc(w * t_ns);
    return static_cast<double>(p.n0) * std::exp(-integral);
}

std::vector<double> expected_emission(const SpinModelParams& p, const FieldGeometry& g,
                                      double phi0) {
    const double horizon = resolve_horizon(p);
    const auto n_bins = static_cast<std::size_t>(std::ceil(horizon / p.bin_width_ns));
    if (n_bins < 2) throw ValidationError("horizon/bin_width gives fewer than 2 bins");
    std::vector<double> out(n_bins);
    double prev = expected_decay(p, g, phi0, 0.0);
    for (std::size_t i = 0; i < n_bins; ++i) {
        const double t_hi = static_cast<double>(i + 1) * p.bin_width_ns;
        const double next = expected_decay(p, g, phi0, t_hi);
        out[i] = prev - next;
        prev = next;
    }
    return out;
}

}  // namespace spindecay
