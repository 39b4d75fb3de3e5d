#pragma once

#include <cstdint>
#include <vector>

#include "spindecay/types.hpp"

namespace spindecay {

/// One seeded acquisition: model + geometry + excitation helicity.
struct SimRun {
    SpinModelParams params{};
    FieldGeometry geometry{};
    Polarization polarization = Polarization::RCP;
    std::uint64_t seed = 1;
    std::string label;
};

struct Occupancy {
    double p_up;
    double p_down;
};

/// Coherent two-level occupancy at time t for Larmor frequency omega and
/// initial phase phi0:  p_up = cos^2(omega t + phi0), p_down = sin^2(...).
Occupancy occupancy(double phi0, double omega, double t);

/// omega = gamma * B_perp, rad/ns.
double larmor_frequency(const FieldGeometry& g, double gamma_rad_per_ns_gauss);

/// Step size actually used by the simulator: params.dt_ns if nonzero, else
/// min(tau)/200 capped at a 50th of the precession period 2*pi/omega and then
/// snapped down to the nearest exact divisor of bin_width (so every bin spans
/// a whole number of steps).  The tau values are the per-run sampled
/// lifetimes.
double resolve_dt(const SpinModelParams& p, double tau_up, double tau_down, double omega);

/// Horizon actually used: params.horizon_ns if nonzero, else 10 * max(mean tau).
double resolve_horizon(const SpinModelParams& p);

/// Discrete-step Monte Carlo decay.  Draws the run's lifetimes from
/// N(mean, sigma_tau) truncated at 0.1 ns, then thins the population with
/// per-step Poisson draws at the instantaneous rate
///   r(t) = p_up(t)/tau_up + p_down(t)/tau_down.
/// Emissions are binned at the step's start time.  Throws
/// SimulationGuardError when dt would make the max per-step decay fraction
/// exceed 5%.  Identical SimRun -> bit-identical histogram.
DecayHistogram simulate_decay(const SimRun& run);

/// Same dynamics, but each emission time is convolved with the instrument
/// response: t_detect = t + t0 + s * N(0,1).  Events landing outside
/// [0, horizon) are dropped.  Requires irf.s >= bin_width/10.
DecayHistogram simulate_with_irf(const SimRun& run, const IrfModel& irf);

/// Closed-form expected surviving population N(t) for the same dynamics with
/// sigma_tau treated as 0 (mean lifetimes):
///   N(t) = n0 * exp(-I(t)),
///   I(t) = (t/2)(r_up + r_dn) + (r_up - r_dn) * cos(w t + 2 phi0) * sin(w t) / (2 w),
/// with the smooth w -> 0 limit handled exactly.
double expected_decay(const SpinModelParams& p, const FieldGeometry& g, double phi0,
                      double t_ns);

/// Expected emission per histogram bin, N(t_i) - N(t_{i+1}), on the grid the
/// simulator would use (bin_width, horizon).  This is the noiseless "oracle"
/// curve sweeps and tests compare against.
std::vector<double> expected_emission(const SpinModelParams& p, const FieldGeometry& g,
                                      double phi0);

}  // namespace spindecay
