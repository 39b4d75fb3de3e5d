#include "spindecay/types.hpp"

#include <cmath>
#include <numbers>

namespace spindecay {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

const char* to_string(Polarization p) {
    return p == Polarization::RCP ? "RCP" : "LCP";
}

Polarization polarization_from_string(const std::string& s) {
    if (s == "RCP" || s == "rcp") return Polarization::RCP;
    if (s == "LCP" || s == "lcp") return Polarization::LCP;
    throw ValidationError("unknown polarization '" + s + "' (expected RCP or LCP)");
}

double initial_phase(Polarization p) {
    return p == Polarization::RCP ? 0.0 : std::numbers::pi / 2.0;
}

std::array<double, 3> FieldGeometry::field_direction() const {
    const double th = theta_deg * kDegToRad;
    const double ph = phi_deg * kDegToRad;
    return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

void FieldGeometry::validate() const {
    if (!(magnitude_gauss >= 0.0) || !std::isfinite(magnitude_gauss))
        throw ValidationError("field magnitude must be finite and >= 0 gauss");
    if (!std::isfinite(theta_deg) || !std::isfinite(phi_deg))
        throw ValidationError("field angles must be finite");
    const double n2 = chiral_axis[0] * chiral_axis[0] + chiral_axis[1] * chiral_axis[1] +
                      chiral_axis[2] * chiral_axis[2];
    if (!std::isfinite(n2) || std::abs(std::sqrt(n2) - 1.0) > 1e-12)
        throw ValidationError("chiral_axis must be a unit vector (|n| = 1 within 1e-12)");
}

std::array<double, 3> axis_from_angles(double tilt_deg, double azimuth_deg) {
    const double th = tilt_deg * kDegToRad;
    const double ph = azimuth_deg * kDegToRad;
    return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

double transverse_field(const FieldGeometry& g) {
    g.validate();
    const auto b = g.field_direction();
    const double dot = g.chiral_axis[0] * b[0] + g.chiral_axis[1] * b[1] +
                       g.chiral_axis[2] * b[2];
    // Clamp: rounding can push dot^2 a hair above 1 when n is parallel to B.
    const double s2 = std::max(0.0, 1.0 - dot * dot);
    return g.magnitude_gauss * std::sqrt(s2);
}

void SpinModelParams::validate() const {
    if (!(tau_up_mean_ns > 0.0) || !(tau_down_mean_ns > 0.0))
        throw ValidationError("mean lifetimes must be positive");
    if (!(sigma_tau_ns >= 0.0))
        throw ValidationError("sigma_tau_ns must be >= 0");
    if (!(gamma_rad_per_ns_gauss > 0.0))
        throw ValidationError("gamma must be positive");
    if (n0 == 0) throw ValidationError("n0 must be positive");
    if (!(dt_ns >= 0.0)) throw ValidationError("dt_ns must be >= 0 (0 = auto)");
    if (!(horizon_ns >= 0.0)) throw ValidationError("horizon_ns must be >= 0 (0 = auto)");
    if (!(bin_width_ns > 0.0)) throw ValidationError("bin_width_ns must be positive");
}

void IrfModel::validate() const {
    if (!(s_ns > 0.0) || !std::isfinite(s_ns))
        throw ValidationError("IRF width s_ns must be positive");
    if (!std::isfinite(t0_ns)) throw ValidationError("IRF delay t0_ns must be finite");
}

DecayHistogram::DecayHistogram(double bin_width_ns, double t_start_ns,
                               std::vector<std::uint64_t> counts, AcquisitionMeta meta)
    : bin_width_ns_(bin_width_ns),
      t_start_ns_(t_start_ns),
      counts_(std::move(counts)),
      meta_(std::move(meta)) {
    if (!(bin_width_ns_ > 0.0) || !std::isfinite(bin_width_ns_))
        throw ValidationError("histogram bin width must be positive");
    if (!std::isfinite(t_start_ns_))
        throw ValidationError("histogram t_start must be finite");
    if (counts_.size() < 2)
        throw ValidationError("histogram needs at least 2 bins");
}

std::uint64_t DecayHistogram::total_counts() const {
    std::uint64_t total = 0;
    for (auto c : counts_) total += c;
    return total;
}

double BiexpFitResult::tau1_err_ns() const {
    return std::sqrt(std::max(covariance[2][2], 0.0));
}

double BiexpFitResult::tau2_err_ns() const {
    return std::sqrt(std::max(covariance[3][3], 0.0));
}

DecayHistogram sum_histograms(const std::vector<DecayHistogram>& runs) {
    if (runs.empty()) throw ValidationError("sum_histograms: no histograms given");
    const auto& first = runs.front();
    std::vector<std::uint64_t> acc(first.size(), 0);
    for (const auto& h : runs) {
        if (h.size() != first.size() || h.bin_width_ns() != first.bin_width_ns() ||
            h.t_start_ns() != first.t_start_ns())
            throw ValidationError("sum_histograms: incompatible bin grids");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += h.counts()[i];
    }
    return DecayHistogram(first.bin_width_ns(), first.t_start_ns(), std::move(acc),
                          first.meta());
}

}  // namespace spindecay
