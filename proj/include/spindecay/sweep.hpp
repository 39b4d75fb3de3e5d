#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spindecay/types.hpp"

namespace spindecay {

/// Grid of sweep points: every combination of (phi, B, polarization).
/// theta and the chiral axis are fixed across the sweep.
struct SweepPlan {
    std::vector<double> b_values_gauss;   // default [60, 1020] G step 20
    std::vector<double> phi_values_deg;   // default [-40, 80] deg step 20
    double theta_deg = 45.0;
    std::array<double, 3> chiral_axis{};  // default tilt 45 deg, azimuth 200 deg
    std::vector<Polarization> polarizations{Polarization::RCP, Polarization::LCP};
    int runs_per_point = 8;
    std::uint64_t master_seed = 1;
    bool randomize_order = false;
    int parallelism = 0;  // 0 = hardware concurrency

    SweepPlan();
    void validate() const;
};

/// Inclusive numeric range helper, e.g. make_range(60, 1020, 20).
std::vector<double> make_range(double lo, double hi, double step);

struct ExecutionItem {
    std::size_t phi_idx;
    std::size_t b_idx;
    Polarization polarization;
};

/// Execution order for the sweep.  Identity order unless randomize_order is
/// set, in which case the field order is shuffled independently per azimuth
/// set with a permutation derived from (master_seed, set index) using integer
/// arithmetic only (stable across platforms).
std::vector<ExecutionItem> shuffle_plan(const SweepPlan& plan);

struct SweepPointRecord {
    double phi_deg = 0.0;
    double b_gauss = 0.0;
    Polarization polarization = Polarization::RCP;
    std::uint64_t seed = 0;  // point-level derived seed
    double tau_long_ns = 0.0;
    double tau_long_err_ns = 0.0;
    double chi2_reduced = 0.0;
    bool ok = false;
    /// Empty for a clean biexponential fit; "mono" when the degenerate-fit
    /// fallback was used; otherwise a failure tag
    /// (ill_conditioned / no_convergence / fit_error).
    std::string flag;
};

struct DeltaRecord {
    double phi_deg = 0.0;
    double b_gauss = 0.0;
    double dtau_ns = 0.0;
    double dtau_err_ns = 0.0;
};

enum class SweepMode { monte_carlo, oracle };

struct SweepResult {
    std::vector<double> b_values_gauss;
    std::vector<double> phi_values_deg;
    SweepMode mode = SweepMode::monte_carlo;
    std::uint64_t master_seed = 0;
    /// Sorted by (phi, B, polarization) regardless of execution order.
    std::vector<SweepPointRecord> points;
    /// Sorted by (phi, B); only points where both polarizations fitted.
    std::vector<DeltaRecord> deltas;
};

/// Runs the full sweep.  Monte Carlo mode pools runs_per_point simulated
/// histograms per point and fits them; oracle mode fits the analytic
/// expected_decay emission curve (sigma_tau treated as 0) with a near-delta
/// IRF.  Degenerate biexponential fits fall back to a single-exponential
/// model (recorded in the flag).  Per-point failures are flagged, never
/// fatal.  Bit-identical results for identical inputs, independent of
/// execution order and parallelism.
SweepResult run_sweep(const SweepPlan& plan, const SpinModelParams& params,
                      const IrfModel& irf, SweepMode mode = SweepMode::monte_carlo);

/// Delta tau = tau_RCP - tau_LCP at a grid point, with propagated error.
/// Throws MissingPolarizationError when either fit is missing/failed.
struct DeltaValue {
    double dtau_ns;
    double dtau_err_ns;
};
DeltaValue delta_lifetime(const SweepResult& result, double b_gauss, double phi_deg);

/// Field magnitude of the first local extremum of dtau(B) at the given
/// azimuth whose |dtau| exceeds twice its propagated error, refined by
/// quadratic interpolation through the three surrounding grid points.
/// Throws NoSignificantExtremumError when nothing clears the gate and
/// UnderDeterminedError with fewer than 5 field points.
double first_extremum(const SweepResult& result, double phi_deg);

struct CosineFit {
    double amplitude = 0.0;
    double phase_deg = 0.0;   // phi_c in a*cos(phi - phi_c) + b
    double offset = 0.0;
    double rms = 0.0;
    std::size_t n_points = 0;
};

/// Linear least-squares fit of dtau(phi) at fixed B to a*cos(phi-phi_c)+b.
/// Throws UnderDeterminedError with fewer than 4 azimuth points.
CosineFit cosine_fit(const SweepResult& result, double b_gauss);

}  // namespace spindecay
