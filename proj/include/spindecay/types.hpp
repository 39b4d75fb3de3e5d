#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spindecay/errors.hpp"

namespace spindecay {

enum class Polarization { LCP, RCP };

const char* to_string(Polarization p);
Polarization polarization_from_string(const std::string& s);

/// Helicity of the excitation pulse sets the initial spin phase:
/// RCP pumps the "up" branch (phi0 = 0), LCP the "down" branch (phi0 = pi/2).
double initial_phase(Polarization p);

/// External field orientation plus the fixed chiral transport axis of the
/// assembly.  Angles are lab-frame spherical coordinates in degrees; the
/// chiral axis is a unit vector in the same frame.
struct FieldGeometry {
    double magnitude_gauss = 0.0;
    double theta_deg = 45.0;
    double phi_deg = 0.0;
    std::array<double, 3> chiral_axis{0.0, 0.0, 1.0};

    /// Unit vector along the applied field, from (theta, phi).
    std::array<double, 3> field_direction() const;

    /// Throws ValidationError unless magnitude >= 0 and |chiral_axis| = 1
    /// within 1e-12.
    void validate() const;
};

/// Unit vector at polar tilt `tilt_deg` from z, azimuth `azimuth_deg`.
std::array<double, 3> axis_from_angles(double tilt_deg, double azimuth_deg);

/// Component of the field perpendicular to the chiral axis, in gauss:
/// B_perp = |B| * sqrt(1 - (n . Bhat)^2).  This is what drives precession.
double transverse_field(const FieldGeometry& g);

/// Model parameters for one simulated acquisition.  Times in ns, n0 in counts.
struct SpinModelParams {
    double tau_up_mean_ns = 20.0;
    double tau_down_mean_ns = 12.0;
    double sigma_tau_ns = 1.0;
    /// Effective gyromagnetic ratio, rad / (ns * gauss).
    double gamma_rad_per_ns_gauss = 1.2e-4;
    std::uint64_t n0 = 1'000'000;
    /// Integration step; 0 selects min(tau)/200 capped at a 50th of the
    /// precession period.
    double dt_ns = 0.0;
    /// Simulation horizon; 0 selects 10 * max(tau).
    double horizon_ns = 0.0;
    double bin_width_ns = 0.25;

    void validate() const;
};

/// Gaussian instrument response: width s (standard deviation) and delay t0.
struct IrfModel {
    double s_ns = 0.5;
    double t0_ns = 5.0;

    void validate() const;
};

/// Provenance attached to a histogram: geometry, excitation, seed, and the
/// lifetimes actually drawn for the run (NaN when not applicable).
struct AcquisitionMeta {
    FieldGeometry field{};
    Polarization polarization = Polarization::RCP;
    std::uint64_t seed = 0;
    std::string label;
    double sampled_tau_up_ns = std::numeric_limits<double>::quiet_NaN();
    double sampled_tau_down_ns = std::numeric_limits<double>::quiet_NaN();
};

/// TCSPC-style decay histogram on a uniform time grid.
class DecayHistogram {
public:
    DecayHistogram(double bin_width_ns, double t_start_ns,
                   std::vector<std::uint64_t> counts, AcquisitionMeta meta = {});

    double bin_width_ns() const { return bin_width_ns_; }
    double t_start_ns() const { return t_start_ns_; }
    std::size_t size() const { return counts_.size(); }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    const AcquisitionMeta& meta() const { return meta_; }
    AcquisitionMeta& meta() { return meta_; }

    /// Center of bin i.
    double bin_center_ns(std::size_t i) const {
        return t_start_ns_ + (static_cast<double>(i) + 0.5) * bin_width_ns_;
    }

    std::uint64_t total_counts() const;

private:
    double bin_width_ns_;
    double t_start_ns_;
    std::vector<std::uint64_t> counts_;
    AcquisitionMeta meta_;
};

/// Bin-wise sum of histograms on identical grids (used to pool repeat runs).
DecayHistogram sum_histograms(const std::vector<DecayHistogram>& runs);

/// 5x5 covariance in the canonical parameter order
/// (a_long, a_short, tau1, tau2, c).
using Cov5 = std::array<std::array<double, 5>, 5>;

/// Result of a biexponential reconvolution fit.  tau1 is always the long
/// component (canonical ordering is enforced by the fitter).
struct BiexpFitResult {
    double a_long = 0.0;
    double a_short = 0.0;
    double tau1_ns = 0.0;
    double tau2_ns = 0.0;
    double c_offset = 0.0;
    IrfModel irf{};
    Cov5 covariance{};
    double chi2_reduced = 0.0;
    bool converged = false;
    int iterations = 0;
    /// Condition number of the weighted normal matrix at the optimum.
    double condition = 0.0;

    double tau1_err_ns() const;
    double tau2_err_ns() const;
};

}  // namespace spindecay
